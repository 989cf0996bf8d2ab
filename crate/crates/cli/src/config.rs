//! `--config` files: TOML or JSON with one table per subcommand whose keys
//! mirror the long flag names. Flags given on the command line win.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub fn read_config(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value = if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?
    } else {
        let t: toml::Value =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| CliError::Usage(e.to_string()))?
    };
    if !value.is_object() {
        return Err(CliError::Usage(format!("config file {} is not a table", path.display())));
    }
    Ok(value)
}

fn unset(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => true,
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

/// Overlay the flags that were actually given onto the `section` table of
/// the config file. Keys that match no flag are rejected.
pub fn merge<T: Serialize + DeserializeOwned + Default>(
    flags: &T,
    config: Option<&Value>,
    section: &str,
) -> Result<T, CliError> {
    let mut merged = match config.and_then(|c| c.get(section)) {
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(CliError::Usage(format!("config section [{section}] is not a table"))),
        None => Map::new(),
    };
    let known = serde_json::to_value(T::default()).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(key) = merged.keys().find(|k| known.get(k.as_str()).is_none()) {
        return Err(CliError::Usage(format!("config [{section}]: unknown key {key:?}")));
    }
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? else {
        return Err(CliError::Usage("flags did not serialize to a table".into()));
    };
    for (k, v) in given {
        if !unset(&v) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config [{section}]: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default, rename_all = "kebab-case")]
    struct Args {
        epochs: Option<usize>,
        seed: Option<u64>,
        data: Vec<String>,
        loso: bool,
    }

    #[test]
    fn flags_override_file() {
        let file: Value = serde_json::json!({"train": {"epochs": 5, "seed": 1, "data": ["a"], "loso": true}});
        let flags = Args {
            seed: Some(9),
            ..Default::default()
        };
        let m = merge(&flags, Some(&file), "train").unwrap();
        assert_eq!(
            m,
            Args {
                epochs: Some(5),
                seed: Some(9),
                data: vec!["a".into()],
                loso: true
            }
        );
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let file: Value = serde_json::json!({"train": {"epoch": 5}});
        assert!(matches!(merge(&Args::default(), Some(&file), "train"), Err(CliError::Usage(_))));
    }

    #[test]
    fn toml_files_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[train]\nepochs = 3\ndata = [\"x\"]\n").unwrap();
        let v = read_config(&p).unwrap();
        let m: Args = merge(&Args::default(), Some(&v), "train").unwrap();
        assert_eq!(m.epochs, Some(3));
    }
}
