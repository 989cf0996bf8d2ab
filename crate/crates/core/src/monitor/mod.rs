//! Streaming stress monitor: buffers pushed samples, scores each complete
//! window on the shift grid and keeps a running day summary.

mod buffer;
mod summary;

pub use buffer::StreamBuffer;
pub use summary::{
    summarize, Episode, Period, PredictionRecord, StressFold, StressSummary, DEFAULT_MIN_EPISODE_WINDOWS,
};

use std::sync::Arc;

use thiserror::Error;

use crate::exec::Exec;
use crate::signal_store::{sliding_windows, Recording, SignalError, Window, WindowConfig};
use crate::stress_net::{ModelError, StressNet};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("out-of-order sample on {channel} at batch index {index}: t={t_s} is not after {last_s}")]
    OutOfOrder {
        channel: String,
        index: usize,
        t_s: f64,
        last_s: f64,
    },
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("non-finite sample on {channel} at batch index {index}")]
    NonFinite { channel: String, index: usize },
    #[error("stream already closed")]
    Closed,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Buffer plus model plus the records and summary fold produced so far.
#[derive(Debug, Clone)]
pub struct Monitor {
    subject_id: String,
    buffer: StreamBuffer,
    model: Arc<StressNet>,
    records: Vec<PredictionRecord>,
    fold: StressFold,
    min_episode_windows: usize,
}

impl Monitor {
    pub fn new(model: Arc<StressNet>, shift_s: f64) -> Result<Self, MonitorError> {
        let cfg = WindowConfig {
            window_s: model.arch.window_s,
            shift_s,
        };
        Ok(Self {
            subject_id: "stream".to_string(),
            buffer: StreamBuffer::new(&model.arch.rates(), cfg)?,
            model,
            records: Vec::new(),
            fold: StressFold::default(),
            min_episode_windows: DEFAULT_MIN_EPISODE_WINDOWS,
        })
    }

    pub fn with_subject(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }

    pub fn with_min_episode_windows(mut self, min: usize) -> Self {
        self.min_episode_windows = min;
        self
    }

    pub fn model(&self) -> &StressNet {
        &self.model
    }

    pub fn buffer(&self) -> &StreamBuffer {
        &self.buffer
    }

    pub fn push(&mut self, channel: &str, batch: &[(f64, f64)]) -> Result<usize, MonitorError> {
        self.buffer.push(channel, batch)
    }

    /// Score every newly complete window.
    pub fn tick(&mut self) -> Result<Vec<PredictionRecord>, MonitorError> {
        let windows = self.buffer.take_ready_windows(&self.subject_id);
        let mut fresh = Vec::with_capacity(windows.len());
        for w in &windows {
            let probability = self.model.predict(w)?;
            let record = record_for(&self.model, w, probability);
            self.fold.push(&record);
            fresh.push(record);
        }
        self.records.extend_from_slice(&fresh);
        Ok(fresh)
    }

    /// End the stream and score the final window.
    pub fn close(&mut self) -> Result<Vec<PredictionRecord>, MonitorError> {
        self.buffer.close();
        self.tick()
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    /// Snapshot of the summary over everything scored so far.
    pub fn summary(&self) -> StressSummary {
        self.fold.finish(self.min_episode_windows)
    }
}

fn record_for(model: &StressNet, w: &Window, probability: f64) -> PredictionRecord {
    PredictionRecord {
        t_start_s: w.t_start_s,
        t_end_s: w.t_start_s + w.window_s,
        probability,
        label: model.label(probability),
    }
}

/// Batch path: every grid window of the recording scored at once.
pub fn offline_records(
    model: &StressNet,
    recording: &Recording,
    shift_s: f64,
    exec: Exec,
) -> Result<Vec<PredictionRecord>, MonitorError> {
    let cfg = WindowConfig {
        window_s: model.arch.window_s,
        shift_s,
    };
    let windows = sliding_windows(recording, cfg)?;
    let refs: Vec<&Window> = windows.iter().collect();
    let probs = model.predict_many(&refs, exec)?;
    Ok(windows
        .iter()
        .zip(probs)
        .map(|(w, p)| record_for(model, w, p))
        .collect())
}

/// Stream a recording through a [`Monitor`] in `batch_s`-second chunks per
/// channel, ticking after each round of pushes.
pub fn replay_recording(
    model: Arc<StressNet>,
    recording: &Recording,
    shift_s: f64,
    batch_s: f64,
) -> Result<Monitor, MonitorError> {
    let mut monitor = Monitor::new(model, shift_s)?.with_subject(recording.subject_id.clone());
    let mut cursors = vec![0usize; recording.channels.len()];
    let mut until = recording.channels.iter().map(|c| c.t0_s).fold(f64::INFINITY, f64::min);
    loop {
        until += batch_s;
        let mut done = true;
        for (c, cursor) in recording.channels.iter().zip(cursors.iter_mut()) {
            let start = *cursor;
            while *cursor < c.samples.len() && c.time_of(*cursor) < until {
                *cursor += 1;
            }
            if start < *cursor {
                let batch: Vec<(f64, f64)> = (start..*cursor).map(|k| (c.time_of(k), c.samples[k])).collect();
                monitor.push(&c.name, &batch)?;
            }
            done &= *cursor == c.samples.len();
        }
        monitor.tick()?;
        if done {
            break;
        }
    }
    monitor.close()?;
    Ok(monitor)
}
