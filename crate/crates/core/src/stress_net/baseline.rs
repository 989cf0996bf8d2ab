use serde::{Deserialize, Serialize};

use crate::signal_store::LabeledWindow;

use super::{Confusion, EvalReport, ModelError};

/// One-feature classifier: window mean of a channel against a threshold.
///
/// Used as the sanity floor for the CNN on synthetic data, where the classes
/// differ by a tonic EDA shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanThreshold {
    pub channel: String,
    pub threshold: f64,
    /// True when stressed windows sit above the threshold.
    pub stress_above: bool,
}

fn window_mean(w: &LabeledWindow, channel: &str) -> Result<f64, ModelError> {
    let xs = w
        .window
        .per_channel
        .get(channel)
        .ok_or_else(|| ModelError::InvalidArch(format!("window lacks channel {channel}")))?;
    Ok(xs.iter().sum::<f64>() / xs.len().max(1) as f64)
}

impl MeanThreshold {
    /// Threshold at the midpoint of the two class means.
    pub fn fit(windows: &[LabeledWindow], channel: &str) -> Result<Self, ModelError> {
        let (mut sum, mut n) = ([0.0; 2], [0usize; 2]);
        for w in windows {
            let c = (w.label == 1) as usize;
            sum[c] += window_mean(w, channel)?;
            n[c] += 1;
        }
        if n[0] == 0 || n[1] == 0 {
            return Err(ModelError::SingleClass);
        }
        let (neg, pos) = (sum[0] / n[0] as f64, sum[1] / n[1] as f64);
        Ok(Self {
            channel: channel.to_string(),
            threshold: 0.5 * (neg + pos),
            stress_above: pos > neg,
        })
    }

    pub fn predict(&self, w: &LabeledWindow) -> Result<u8, ModelError> {
        let m = window_mean(w, &self.channel)?;
        Ok(((m >= self.threshold) == self.stress_above) as u8)
    }

    pub fn evaluate(&self, windows: &[LabeledWindow]) -> Result<EvalReport, ModelError> {
        if windows.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        let mut c = Confusion::default();
        for w in windows {
            c.record(self.predict(w)?, w.label);
        }
        Ok(EvalReport::from_confusion(c, format!("mean-{}-threshold", self.channel)))
    }
}
