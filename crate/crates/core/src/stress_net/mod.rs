//! The multi-channel stress classifier: architecture, training, evaluation
//! and model files.

mod arch;
mod baseline;
mod eval;
mod io;
mod train;

pub use arch::{
    first_stride, ArchConfig, ChannelArch, ChannelLengths, CONV_LAYERS, DEEP_STRIDE, DEFAULT_FILTERS,
    DEFAULT_HIDDEN, KERNEL,
};
pub use baseline::MeanThreshold;
pub use eval::{evaluate, evaluate_loso, evaluate_loso_grouped, Confusion, EvalReport, FoldReport, LosoReport};
pub use io::{from_json, load_model, save_model, to_json, ModelFile, TensorEntry, FORMAT_VERSION};
pub use train::{split_indices, train, EpochLog, Split, TrainConfig, TrainLog};

use std::path::PathBuf;

use thiserror::Error;

use crate::exec::Exec;
use crate::signal_store::{ChannelMap, NormStats, SignalError, Window};
use crate::tensor_nn::{seeded_rng, Network, TensorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("window too short: channel {channel} has length {len} entering layer {layer}")]
    WindowTooShort {
        channel: String,
        layer: usize,
        len: usize,
    },
    #[error("training split holds a single class; both stressed and non-stressed windows are required")]
    SingleClass,
    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("no windows to evaluate")]
    EmptyInput,
    #[error("leave-one-subject-out needs at least 2 subjects, got {0}")]
    NotEnoughSubjects(usize),
    #[error("subject {0} has no windows")]
    EmptySubject(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u64),
    #[error("tensor {tensor}: {detail}")]
    ShapeMismatch { tensor: String, detail: String },
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A trained (or freshly initialized) stress classifier.
///
/// Normalization statistics travel with the weights so raw windows can be
/// scored directly with [`StressNet::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct StressNet {
    pub arch: ArchConfig,
    pub norm: Option<NormStats>,
    pub network: Network,
}

/// Fresh network for `arch` with seeded Kaiming-uniform weights.
pub fn build_network(arch: &ArchConfig, seed: u64) -> Result<StressNet, ModelError> {
    arch.validate()?;
    let mut rng = seeded_rng(seed);
    let network = Network::init(&arch.stack_layouts()?, &[arch.hidden_units], &mut rng)?;
    Ok(StressNet {
        arch: arch.clone(),
        norm: None,
        network,
    })
}

impl StressNet {
    /// Probability of "stressed" for an already-normalized channel map.
    pub fn forward(&self, normalized: &ChannelMap) -> Result<f64, ModelError> {
        Ok(self.network.forward(normalized)?)
    }

    /// Normalize with the embedded statistics (if any).
    pub fn prepare(&self, window: &Window) -> Result<ChannelMap, ModelError> {
        match &self.norm {
            Some(stats) => Ok(stats.normalize_map(&window.per_channel)?),
            None => Ok(window.per_channel.clone()),
        }
    }

    /// Probability of "stressed" for a raw window.
    pub fn predict(&self, window: &Window) -> Result<f64, ModelError> {
        self.forward(&self.prepare(window)?)
    }

    pub fn predict_many(&self, windows: &[&Window], exec: Exec) -> Result<Vec<f64>, ModelError> {
        exec.map(windows, |w| self.predict(w)).into_iter().collect()
    }

    pub fn label(&self, probability: f64) -> u8 {
        (probability >= self.arch.threshold) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> ArchConfig {
        let rates = vec![("bvp".to_string(), 64.0), ("eda".to_string(), 4.0), ("temp".to_string(), 4.0)];
        ArchConfig::for_rates(&rates, 60.0).unwrap()
    }

    fn window(arch: &ArchConfig, fill: f64) -> Window {
        let per_channel = arch
            .channel_lengths()
            .unwrap()
            .iter()
            .zip(&arch.channels)
            .map(|(l, c)| (c.name.clone(), (0..l.input).map(|i| fill + (i % 5) as f64 * 0.1).collect()))
            .collect();
        Window {
            subject_id: "S".into(),
            t_start_s: 0.0,
            window_s: 60.0,
            per_channel,
        }
    }

    #[test]
    fn built_network_has_expected_head() {
        let net = build_network(&arch(), 1).unwrap();
        assert_eq!(net.network.feature_len().unwrap(), 2688);
        assert_eq!(net.network.head[0].out_dim, 128);
        assert_eq!(net.network.head[1].out_dim, 1);
    }

    #[test]
    fn zero_weights_predict_one_half() {
        let a = arch();
        let mut net = build_network(&a, 1).unwrap();
        for p in net.network.params_mut() {
            p.fill(0.0);
        }
        assert_eq!(net.predict(&window(&a, 1.0)).unwrap(), 0.5);
    }

    #[test]
    fn prediction_is_pure() {
        let a = arch();
        let net = build_network(&a, 9).unwrap();
        let w = window(&a, 0.3);
        let p1 = net.predict(&w).unwrap();
        let p2 = net.predict(&w).unwrap();
        assert_eq!(p1, p2);
        assert!(p1 > 0.0 && p1 < 1.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = arch();
        let net = build_network(&a, 9).unwrap();
        let mut w = window(&a, 0.3);
        w.per_channel.get_mut("eda").unwrap().truncate(10);
        assert!(matches!(net.predict(&w), Err(ModelError::Tensor(TensorError::Shape { .. }))));
    }
}
