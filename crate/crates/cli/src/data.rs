//! Locating recording directories.

use std::path::{Path, PathBuf};

use emllm_core::signal_store::{load_recording, segment_windows, LabeledWindow, Recording, WindowConfig};

use crate::error::CliError;

fn is_recording(dir: &Path) -> bool {
    dir.join("meta.json").is_file()
}

/// Each path is a recording directory or a directory of them (sorted by
/// name).
pub fn discover(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Usage("--data is required".into()));
    }
    let mut out = Vec::new();
    for p in paths {
        if is_recording(p) {
            out.push(p.clone());
            continue;
        }
        if !p.is_dir() {
            return Err(CliError::Data(format!("{}: not a recording directory", p.display())));
        }
        let mut children: Vec<PathBuf> = std::fs::read_dir(p)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|c| is_recording(c))
            .collect();
        if children.is_empty() {
            return Err(CliError::Data(format!("{}: no recordings (meta.json) found", p.display())));
        }
        children.sort();
        out.extend(children);
    }
    Ok(out)
}

pub fn load_all(paths: &[PathBuf]) -> Result<Vec<Recording>, CliError> {
    let recs = discover(paths)?
        .iter()
        .map(load_recording)
        .collect::<Result<Vec<_>, _>>()?;
    let rates = recs[0].rates();
    if let Some(odd) = recs.iter().find(|r| r.rates() != rates) {
        return Err(CliError::Data(format!(
            "recording {} has channels/rates {:?}, expected {:?}",
            odd.subject_id,
            odd.rates(),
            rates
        )));
    }
    Ok(recs)
}

pub fn labeled_windows(recs: &[Recording], cfg: WindowConfig) -> Result<Vec<LabeledWindow>, CliError> {
    let mut out = Vec::new();
    for r in recs {
        out.extend(segment_windows(r, cfg)?);
    }
    if out.is_empty() {
        return Err(CliError::Data("no labeled windows in the data".into()));
    }
    Ok(out)
}
