//! JSON model files.
//!
//! ```json
//! {"format_version":1, "arch":{...}, "norm_stats":{...},
//!  "tensors":{"bvp.conv0.weight":{"shape":[16,1,3],"data":[...]}, ...}}
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::signal_store::NormStats;

use super::{build_network, ArchConfig, ModelError, StressNet};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u64,
    pub arch: ArchConfig,
    pub norm_stats: Option<NormStats>,
    pub tensors: BTreeMap<String, TensorEntry>,
}

impl ModelFile {
    pub fn from_model(model: &StressNet) -> Self {
        let tensors = model
            .network
            .param_layout()
            .into_iter()
            .zip(model.network.params())
            .map(|((name, shape), data)| (name, TensorEntry { shape, data: data.to_vec() }))
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            arch: model.arch.clone(),
            norm_stats: model.norm.clone(),
            tensors,
        }
    }

    /// Rebuild the model, checking every tensor against the architecture.
    pub fn into_model(mut self) -> Result<StressNet, ModelError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(self.format_version));
        }
        let mut model = build_network(&self.arch, 0)?;
        model.norm = self.norm_stats.take();
        let layout = model.network.param_layout();
        if self.tensors.len() != layout.len() {
            let unexpected = self
                .tensors
                .keys()
                .find(|k| !layout.iter().any(|(n, _)| n == *k))
                .cloned()
                .unwrap_or_else(|| "<model>".into());
            return Err(ModelError::ShapeMismatch {
                tensor: unexpected,
                detail: format!("expected {} tensors, found {}", layout.len(), self.tensors.len()),
            });
        }
        for ((name, shape), slot) in layout.into_iter().zip(model.network.params_mut()) {
            let entry = self.tensors.remove(&name).ok_or_else(|| ModelError::ShapeMismatch {
                tensor: name.clone(),
                detail: "missing".into(),
            })?;
            if entry.shape != shape {
                return Err(ModelError::ShapeMismatch {
                    tensor: name,
                    detail: format!("shape {:?}, architecture expects {:?}", entry.shape, shape),
                });
            }
            if entry.data.len() != slot.len() {
                return Err(ModelError::ShapeMismatch {
                    tensor: name,
                    detail: format!("{} values for {} slots", entry.data.len(), slot.len()),
                });
            }
            slot.copy_from_slice(&entry.data);
        }
        Ok(model)
    }
}

pub fn to_json(model: &StressNet) -> Result<String, ModelError> {
    Ok(serde_json::to_string(&ModelFile::from_model(model))?)
}

pub fn from_json(json: &str) -> Result<StressNet, ModelError> {
    // Check the version before the schema so future layouts fail cleanly.
    let value: serde_json::Value = serde_json::from_str(json)?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(ModelError::UnsupportedVersion(other)),
        None => {
            return Err(ModelError::Json(serde::de::Error::custom(
                "missing or non-integer format_version",
            )))
        }
    }
    let file: ModelFile = serde_json::from_value(value)?;
    file.into_model()
}

pub fn save_model(model: &StressNet, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, to_json(model)?).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<StressNet, ModelError> {
    let path = path.as_ref();
    let json = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_json(&json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_store::{ChannelStats, NormStats};

    fn model() -> StressNet {
        let rates = vec![("bvp".to_string(), 64.0), ("eda".to_string(), 4.0)];
        let arch = ArchConfig::for_rates(&rates, 8.0).unwrap().with_filters([3, 4, 5]).with_hidden_units(6);
        let mut m = build_network(&arch, 77).unwrap();
        let mut norm = NormStats::default();
        norm.channels.insert("bvp".into(), ChannelStats { mean: 0.1 + 0.2, std: 1.0 / 3.0 });
        norm.channels.insert("eda".into(), ChannelStats { mean: 2.5, std: 1e-8 });
        m.norm = Some(norm);
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = from_json(&to_json(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let bits = |n: &StressNet| -> Vec<u64> { n.network.params().iter().flat_map(|p| p.iter().map(|x| x.to_bits())).collect() };
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn unknown_version_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&to_json(&model()).unwrap()).unwrap();
        v["format_version"] = 99.into();
        assert!(matches!(from_json(&v.to_string()), Err(ModelError::UnsupportedVersion(99))));
    }

    #[test]
    fn tampered_tensor_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&to_json(&model()).unwrap()).unwrap();
        v["tensors"]["eda.conv1.bias"]["data"].as_array_mut().unwrap().pop();
        assert!(matches!(from_json(&v.to_string()), Err(ModelError::ShapeMismatch { .. })));

        let mut v: serde_json::Value = serde_json::from_str(&to_json(&model()).unwrap()).unwrap();
        v["tensors"]["head.dense0.weight"]["shape"] = serde_json::json!([6, 1]);
        assert!(matches!(from_json(&v.to_string()), Err(ModelError::ShapeMismatch { .. })));
    }

    #[test]
    fn malformed_json_rejected() {
        assert!(matches!(from_json("{\"format_version\":1,"), Err(ModelError::Json(_))));
    }
}
