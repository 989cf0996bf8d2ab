//! Synthetic wrist recordings with scripted stress intervals.
//!
//! The signal models are deliberately plain: BVP is a noisy sinusoidal pulse
//! whose rate rises under stress, EDA a tonic level with slow drift that
//! steps up under stress, and skin temperature a drifting 33 °C baseline that
//! drops under stress. Output is a regular recording directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::signal_store::{ChannelMeta, RecordingMeta, AMUSEMENT, BASELINE, STRESS};
use crate::tensor_nn::{seeded_rng, Rng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub condition: i64,
}

/// Changes applied during stress intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EffectSizes {
    /// Tonic EDA increase, µS.
    pub eda_shift: f64,
    /// Pulse-rate increase, Hz.
    pub bvp_freq_shift: f64,
    /// Skin temperature change, °C.
    pub temp_shift: f64,
}

impl Default for EffectSizes {
    fn default() -> Self {
        Self {
            eda_shift: 1.5,
            bvp_freq_shift: 0.3,
            temp_shift: -0.3,
        }
    }
}

/// Baseline shape and noise of the generated signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalShape {
    pub bvp_rate_hz: f64,
    pub eda_rate_hz: f64,
    pub temp_rate_hz: f64,
    pub pulse_hz: f64,
    pub bvp_amplitude: f64,
    pub bvp_noise: f64,
    pub eda_level: f64,
    /// Half-width of the uniform per-subject offset added to `eda_level`.
    pub eda_subject_spread: f64,
    pub eda_drift: f64,
    pub eda_drift_period_s: f64,
    pub eda_noise: f64,
    pub temp_level: f64,
    pub temp_drift: f64,
    pub temp_drift_period_s: f64,
    pub temp_noise: f64,
}

impl Default for SignalShape {
    fn default() -> Self {
        Self {
            bvp_rate_hz: 64.0,
            eda_rate_hz: 4.0,
            temp_rate_hz: 4.0,
            pulse_hz: 1.2,
            bvp_amplitude: 50.0,
            bvp_noise: 5.0,
            eda_level: 2.0,
            eda_subject_spread: 0.2,
            eda_drift: 0.2,
            eda_drift_period_s: 1200.0,
            eda_noise: 0.05,
            temp_level: 33.0,
            temp_drift: 0.1,
            temp_drift_period_s: 3000.0,
            temp_noise: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub subject_id: String,
    pub duration_s: f64,
    pub intervals: Vec<ScenarioInterval>,
    pub seed: u64,
    #[serde(default)]
    pub effects: EffectSizes,
    #[serde(default)]
    pub shape: SignalShape,
}

impl ScenarioSpec {
    /// A day with two stress blocks: baseline, stress, amusement, baseline,
    /// stress, amusement at 25/16.7/16.7/16.7/16.7/8.3 % of `duration_s`
    /// (boundaries rounded to whole seconds).
    pub fn scripted_day(subject_id: impl Into<String>, duration_s: f64, seed: u64) -> Self {
        const CUTS: [(f64, i64); 6] = [
            (900.0, BASELINE),
            (1500.0, STRESS),
            (2100.0, AMUSEMENT),
            (2700.0, BASELINE),
            (3300.0, STRESS),
            (3600.0, AMUSEMENT),
        ];
        let mut start = 0.0;
        let mut intervals = Vec::with_capacity(CUTS.len());
        for (cut, condition) in CUTS {
            let end = (cut / 3600.0 * duration_s).round();
            if end > start {
                intervals.push(ScenarioInterval {
                    start_s: start,
                    end_s: end,
                    condition,
                });
            }
            start = end;
        }
        Self {
            subject_id: subject_id.into(),
            duration_s,
            intervals,
            seed,
            effects: EffectSizes::default(),
            shape: SignalShape::default(),
        }
    }

    /// Intervals must tile `[0, duration_s)` in order with protocol codes.
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration {} must be positive", self.duration_s));
        }
        if self.subject_id.is_empty() || self.subject_id.contains(['/', '\\']) {
            return bad(format!("subject id {:?} is not a plain name", self.subject_id));
        }
        if self.intervals.is_empty() {
            return bad("no intervals".into());
        }
        let mut cursor = 0.0;
        for iv in &self.intervals {
            if iv.start_s != cursor {
                return bad(format!("interval starting at {} leaves a gap or overlap at {cursor}", iv.start_s));
            }
            if iv.end_s <= iv.start_s {
                return bad(format!("interval [{}, {}) is empty or reversed", iv.start_s, iv.end_s));
            }
            if ![BASELINE, STRESS, AMUSEMENT].contains(&iv.condition) {
                return bad(format!("condition {} is not 1, 2 or 3", iv.condition));
            }
            cursor = iv.end_s;
        }
        if cursor != self.duration_s {
            return bad(format!("intervals end at {cursor}, duration is {}", self.duration_s));
        }
        for (name, rate) in self.rates() {
            let n = self.duration_s * rate;
            if !(rate > 0.0) || (n - n.round()).abs() > 1e-9 {
                return bad(format!("{name}: duration × rate is not a whole number of samples"));
            }
        }
        Ok(())
    }

    pub fn rates(&self) -> [(&'static str, f64); 3] {
        [
            ("bvp", self.shape.bvp_rate_hz),
            ("eda", self.shape.eda_rate_hz),
            ("temp", self.shape.temp_rate_hz),
        ]
    }

    fn stressed_at(&self, t: f64) -> bool {
        self.intervals
            .iter()
            .any(|iv| iv.condition == STRESS && iv.start_s <= t && t < iv.end_s)
    }
}

/// Generated signals, before they are written out.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSignals {
    pub bvp: Vec<f64>,
    pub eda: Vec<f64>,
    pub temp: Vec<f64>,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.max(0.0)).expect("finite sigma")
}

/// Generate the three channels in memory.
pub fn synthesize(spec: &ScenarioSpec) -> Result<SyntheticSignals, SynthError> {
    spec.validate()?;
    let s = &spec.shape;
    let fx = &spec.effects;
    let mut rng: Rng = seeded_rng(spec.seed);
    let tau = std::f64::consts::TAU;
    let eda_phase = rng.random_range(0.0..tau);
    let temp_phase = rng.random_range(0.0..tau);
    let eda_offset = if s.eda_subject_spread > 0.0 {
        rng.random_range(-s.eda_subject_spread..=s.eda_subject_spread)
    } else {
        0.0
    };
    let count = |rate: f64| (spec.duration_s * rate).round() as usize;

    let dt = 1.0 / s.bvp_rate_hz;
    let bvp_noise = normal(s.bvp_noise);
    let mut phase: f64 = 0.0;
    let bvp = (0..count(s.bvp_rate_hz))
        .map(|k| {
            let t = k as f64 * dt;
            let v = s.bvp_amplitude * phase.sin() + bvp_noise.sample(&mut rng);
            let f = s.pulse_hz + if spec.stressed_at(t) { fx.bvp_freq_shift } else { 0.0 };
            phase = (phase + tau * f * dt) % tau;
            v
        })
        .collect();

    let eda_noise = normal(s.eda_noise);
    let eda = (0..count(s.eda_rate_hz))
        .map(|k| {
            let t = k as f64 / s.eda_rate_hz;
            let drift = s.eda_drift * (tau * t / s.eda_drift_period_s + eda_phase).sin();
            let step = if spec.stressed_at(t) { fx.eda_shift } else { 0.0 };
            s.eda_level + eda_offset + drift + step + eda_noise.sample(&mut rng)
        })
        .collect();

    let temp_noise = normal(s.temp_noise);
    let temp = (0..count(s.temp_rate_hz))
        .map(|k| {
            let t = k as f64 / s.temp_rate_hz;
            let drift = s.temp_drift * (tau * t / s.temp_drift_period_s + temp_phase).sin();
            let step = if spec.stressed_at(t) { fx.temp_shift } else { 0.0 };
            s.temp_level + drift + step + temp_noise.sample(&mut rng)
        })
        .collect();

    Ok(SyntheticSignals { bvp, eda, temp })
}

fn channel_csv(values: &[f64], rate: f64) -> String {
    let mut out = String::with_capacity(values.len() * 24);
    out.push_str("t_s,value\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{},{:.6}", k as f64 / rate, v);
    }
    out
}

/// Write a recording directory for `spec` at `dir` (created if needed).
pub fn generate(spec: &ScenarioSpec, dir: impl AsRef<Path>) -> Result<PathBuf, SynthError> {
    let dir = dir.as_ref();
    let signals = synthesize(spec)?;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let meta = RecordingMeta {
        subject_id: spec.subject_id.clone(),
        channels: spec
            .rates()
            .iter()
            .map(|(name, rate)| ChannelMeta {
                name: name.to_string(),
                rate_hz: *rate,
                file: format!("{name}.csv"),
            })
            .collect(),
        labels_file: "labels.csv".into(),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    let path = dir.join("meta.json");
    fs::write(&path, meta_json + "\n").map_err(io(&path))?;

    for ((name, rate), values) in spec.rates().iter().zip([&signals.bvp, &signals.eda, &signals.temp]) {
        let path = dir.join(format!("{name}.csv"));
        fs::write(&path, channel_csv(values, *rate)).map_err(io(&path))?;
    }

    let mut labels = String::from("t_start_s,t_end_s,condition\n");
    for iv in &spec.intervals {
        let _ = writeln!(labels, "{},{},{}", iv.start_s, iv.end_s, iv.condition);
    }
    let path = dir.join("labels.csv");
    fs::write(&path, labels).map_err(io(&path))?;
    Ok(dir.to_path_buf())
}

/// Generate one directory per spec under `root/<subject_id>`.
pub fn generate_many(specs: &[ScenarioSpec], root: impl AsRef<Path>, exec: Exec) -> Result<Vec<PathBuf>, SynthError> {
    let root = root.as_ref();
    for spec in specs {
        spec.validate()?;
    }
    exec.map(specs, |spec| generate(spec, root.join(&spec.subject_id)))
        .into_iter()
        .collect()
}

/// `count` scripted-day subjects named `S01`, `S02`, ... with seeds
/// `seed`, `seed + 1`, ...
pub fn scripted_cohort(count: usize, duration_s: f64, seed: u64) -> Vec<ScenarioSpec> {
    (0..count)
        .map(|i| ScenarioSpec::scripted_day(format!("S{:02}", i + 1), duration_s, seed.wrapping_add(i as u64)))
        .collect()
}
