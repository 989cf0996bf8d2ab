use serde::{Deserialize, Serialize};

use crate::signal_store::samples_per_window;
use crate::tensor_nn::{out_len, PoolSpec, StackLayout};

use super::ModelError;

pub const KERNEL: usize = 3;
pub const CONV_LAYERS: usize = 3;
pub const DEFAULT_FILTERS: [usize; CONV_LAYERS] = [16, 32, 64];
pub const DEFAULT_HIDDEN: usize = 128;
pub const DEEP_STRIDE: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelArch {
    pub name: String,
    pub rate_hz: f64,
    pub strides: [usize; CONV_LAYERS],
    pub filters: [usize; CONV_LAYERS],
}

/// Shape of the multi-rate network.
///
/// Each channel gets three kernel-3 convolutions. The first stride absorbs the
/// channel's rate relative to the slowest channel, so a 64 Hz stream next to
/// 4 Hz streams strides by 16 and every stack sees a comparable time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub window_s: f64,
    pub kernel: usize,
    pub pool: PoolSpec,
    pub hidden_units: usize,
    /// Probability at or above which a window is called "stressed".
    pub threshold: f64,
    pub channels: Vec<ChannelArch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLengths {
    pub input: usize,
    pub conv: [usize; CONV_LAYERS],
    pub pooled: usize,
}

/// First-layer stride for a channel: `max(1, round(rate / slowest_rate))`.
pub fn first_stride(rate_hz: f64, min_rate_hz: f64) -> usize {
    ((rate_hz / min_rate_hz).round() as usize).max(1)
}

impl ArchConfig {
    /// Default architecture for the given `(channel, rate)` pairs.
    pub fn for_rates(rates: &[(String, f64)], window_s: f64) -> Result<Self, ModelError> {
        if rates.is_empty() {
            return Err(ModelError::InvalidArch("no channels".into()));
        }
        let min_rate = rates.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        if !(min_rate > 0.0 && min_rate.is_finite()) {
            return Err(ModelError::InvalidArch("rates must be positive".into()));
        }
        let channels = rates
            .iter()
            .map(|(name, rate)| ChannelArch {
                name: name.clone(),
                rate_hz: *rate,
                strides: [first_stride(*rate, min_rate), DEEP_STRIDE, DEEP_STRIDE],
                filters: DEFAULT_FILTERS,
            })
            .collect();
        let arch = Self {
            window_s,
            kernel: KERNEL,
            pool: PoolSpec::default(),
            hidden_units: DEFAULT_HIDDEN,
            threshold: 0.5,
            channels,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn with_filters(mut self, filters: [usize; CONV_LAYERS]) -> Self {
        for c in &mut self.channels {
            c.filters = filters;
        }
        self
    }

    pub fn with_hidden_units(mut self, hidden: usize) -> Self {
        self.hidden_units = hidden;
        self
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelArch> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn rates(&self) -> Vec<(String, f64)> {
        self.channels.iter().map(|c| (c.name.clone(), c.rate_hz)).collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kernel != KERNEL {
            return Err(ModelError::InvalidArch(format!("kernel must be {KERNEL}, got {}", self.kernel)));
        }
        if self.channels.is_empty() {
            return Err(ModelError::InvalidArch("no channels".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(ModelError::InvalidArch(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if self.hidden_units == 0 {
            return Err(ModelError::InvalidArch("hidden_units must be > 0".into()));
        }
        for (i, c) in self.channels.iter().enumerate() {
            if self.channels[..i].iter().any(|o| o.name == c.name) {
                return Err(ModelError::InvalidArch(format!("duplicate channel {}", c.name)));
            }
            if c.strides.contains(&0) || c.filters.contains(&0) {
                return Err(ModelError::InvalidArch(format!("{}: zero stride or filter count", c.name)));
            }
        }
        self.channel_lengths().map(|_| ())
    }

    /// Per-channel layer lengths for one window.
    pub fn channel_lengths(&self) -> Result<Vec<ChannelLengths>, ModelError> {
        self.channels
            .iter()
            .map(|c| {
                let input = samples_per_window(&c.name, c.rate_hz, self.window_s)?;
                let mut conv = [0; CONV_LAYERS];
                let mut len = input;
                for (layer, (&stride, slot)) in c.strides.iter().zip(conv.iter_mut()).enumerate() {
                    len = out_len(len, self.kernel, stride).map_err(|_| ModelError::WindowTooShort {
                        channel: c.name.clone(),
                        layer,
                        len,
                    })?;
                    *slot = len;
                }
                let pooled = out_len(len, self.pool.size, self.pool.stride).map_err(|_| {
                    ModelError::WindowTooShort {
                        channel: c.name.clone(),
                        layer: CONV_LAYERS,
                        len,
                    }
                })?;
                Ok(ChannelLengths { input, conv, pooled })
            })
            .collect()
    }

    /// Width of the concatenated feature vector entering the dense head.
    pub fn head_input_len(&self) -> Result<usize, ModelError> {
        Ok(self
            .channel_lengths()?
            .iter()
            .zip(&self.channels)
            .map(|(l, c)| l.pooled * c.filters[CONV_LAYERS - 1])
            .sum())
    }

    pub(crate) fn stack_layouts(&self) -> Result<Vec<StackLayout>, ModelError> {
        let lens = self.channel_lengths()?;
        Ok(self
            .channels
            .iter()
            .zip(lens)
            .map(|(c, l)| StackLayout {
                channel: c.name.clone(),
                input_len: l.input,
                kernel: self.kernel,
                filters: c.filters.to_vec(),
                strides: c.strides.to_vec(),
                pool: self.pool,
            })
            .collect())
    }
}
