//! Portable recording format, condition labels, windowing and normalization.
//!
//! A recording directory holds `meta.json`, one `t_s,value` CSV per channel
//! and a `t_start_s,t_end_s,condition` label file. Channels stay at their
//! native sampling rates; windows slice every channel over the same time
//! interval, so a 60 s window holds 3840 BVP samples but only 240 EDA samples.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Channel identifiers accepted in a recording.
pub const CHANNEL_NAMES: [&str; 3] = ["bvp", "eda", "temp"];

/// Protocol condition codes that carry a usable label.
pub const BASELINE: i64 = 1;
pub const STRESS: i64 = 2;
pub const AMUSEMENT: i64 = 3;

/// Smallest stddev kept in [`NormStats`].
pub const STD_FLOOR: f64 = 1e-8;

// Slack used when comparing times that should land exactly on a sample grid.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("missing file {0:?}")]
    MissingFile(String),
    #[error("{file}:{line}: malformed row: {reason}")]
    MalformedRow {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("{file}:{line}: malformed interval [{start}, {end})")]
    MalformedInterval {
        file: String,
        line: usize,
        start: f64,
        end: f64,
    },
    #[error("label intervals overlap at [{start}, {end})")]
    OverlappingIntervals { start: f64, end: f64 },
    #[error("{file}:{line}: timestamps are not strictly increasing")]
    NonMonotonic { file: String, line: usize },
    #[error("channel {channel}: sample {index} at t={found} s, expected {expected} s for {rate_hz} Hz")]
    RateMismatch {
        channel: String,
        rate_hz: f64,
        index: usize,
        expected: f64,
        found: f64,
    },
    #[error("meta.json: {0}")]
    Meta(String),
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("channel {channel}: {window_s} s at {rate_hz} Hz is not a whole number of samples")]
    NonIntegralWindow {
        channel: String,
        window_s: f64,
        rate_hz: f64,
    },
    #[error("invalid window configuration: {0}")]
    InvalidWindow(String),
    #[error("channel {0}: empty or invalid signal")]
    InvalidChannel(String),
    #[error("no windows to fit normalization statistics on")]
    EmptyInput,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One physiological stream at its native rate.
///
/// Sample `k` is taken at `t0_s + k / rate_hz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalChannel {
    pub name: String,
    pub rate_hz: f64,
    pub t0_s: f64,
    pub samples: Vec<f64>,
}

impl SignalChannel {
    pub fn new(
        name: impl Into<String>,
        rate_hz: f64,
        t0_s: f64,
        samples: Vec<f64>,
    ) -> Result<Self, SignalError> {
        let name = name.into();
        if !(rate_hz.is_finite() && rate_hz > 0.0) || samples.is_empty() || !t0_s.is_finite() {
            return Err(SignalError::InvalidChannel(name));
        }
        Ok(Self {
            name,
            rate_hz,
            t0_s,
            samples,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    /// Time just past the last sample.
    pub fn end_s(&self) -> f64 {
        self.t0_s + self.duration_s()
    }

    pub fn time_of(&self, index: usize) -> f64 {
        self.t0_s + index as f64 / self.rate_hz
    }
}

/// A protocol condition over `[t_start_s, t_end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionLabel {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub condition: i64,
}

impl ConditionLabel {
    /// Binary stress label, or `None` for conditions outside the protocol.
    ///
    /// Baseline and amusement are merged into the non-stress class.
    pub fn stress_label(&self) -> Option<u8> {
        match self.condition {
            STRESS => Some(1),
            BASELINE | AMUSEMENT => Some(0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub name: String,
    pub rate_hz: f64,
    pub file: String,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub subject_id: String,
    pub channels: Vec<ChannelMeta>,
    pub labels_file: String,
}

/// A loaded recording: all channels plus condition intervals sorted by start.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub channels: Vec<SignalChannel>,
    pub labels: Vec<ConditionLabel>,
}

impl Recording {
    pub fn channel(&self, name: &str) -> Option<&SignalChannel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// `(name, rate)` pairs in file order.
    pub fn rates(&self) -> Vec<(String, f64)> {
        self.channels
            .iter()
            .map(|c| (c.name.clone(), c.rate_hz))
            .collect()
    }
}

/// Per-channel slices keyed by channel name.
pub type ChannelMap = BTreeMap<String, Vec<f64>>;

/// Time-aligned slices of every channel over `[t_start_s, t_start_s + window_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub subject_id: String,
    pub t_start_s: f64,
    pub window_s: f64,
    pub per_channel: ChannelMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub window: Window,
    /// 1 = stressed, 0 = not stressed.
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_s: f64,
    pub shift_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_s: 60.0,
            shift_s: 5.0,
        }
    }
}

/// Number of samples a channel contributes to a window, if integral.
pub fn samples_per_window(channel: &str, rate_hz: f64, window_s: f64) -> Result<usize, SignalError> {
    let exact = window_s * rate_hz;
    let rounded = exact.round();
    if rounded < 1.0 || (exact - rounded).abs() > 1e-6 {
        return Err(SignalError::NonIntegralWindow {
            channel: channel.to_string(),
            window_s,
            rate_hz,
        });
    }
    Ok(rounded as usize)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SignalError + '_ {
    move |source| SignalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open_required(dir: &Path, file: &str) -> Result<File, SignalError> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(SignalError::MissingFile(file.to_string()));
    }
    File::open(&path).map_err(io_err(&path))
}

fn csv_reader(file: File) -> csv::Reader<BufReader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file))
}

fn check_header(
    reader: &mut csv::Reader<BufReader<File>>,
    file: &str,
    expected: &[&str],
) -> Result<(), SignalError> {
    let header = reader.headers().map_err(|e| SignalError::MalformedRow {
        file: file.to_string(),
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(SignalError::MalformedRow {
            file: file.to_string(),
            line: 1,
            reason: format!("expected header {:?}", expected.join(",")),
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    file: &str,
    line: usize,
) -> Result<T, SignalError> {
    record
        .get(idx)
        .and_then(|s| s.parse::<T>().ok())
        .ok_or_else(|| SignalError::MalformedRow {
            file: file.to_string(),
            line,
            reason: format!("column {} is missing or not a number", idx + 1),
        })
}

fn load_channel(dir: &Path, meta: &ChannelMeta) -> Result<SignalChannel, SignalError> {
    if !CHANNEL_NAMES.contains(&meta.name.as_str()) {
        return Err(SignalError::UnknownChannel(meta.name.clone()));
    }
    if !(meta.rate_hz.is_finite() && meta.rate_hz > 0.0) {
        return Err(SignalError::Meta(format!(
            "channel {} has non-positive rate {}",
            meta.name, meta.rate_hz
        )));
    }
    let mut reader = csv_reader(open_required(dir, &meta.file)?);
    check_header(&mut reader, &meta.file, &["t_s", "value"])?;

    let tolerance = 0.5 / meta.rate_hz;
    let mut t0 = 0.0;
    let mut prev_t = f64::NEG_INFINITY;
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| SignalError::MalformedRow {
            file: meta.file.clone(),
            line,
            reason: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(SignalError::MalformedRow {
                file: meta.file.clone(),
                line,
                reason: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let t: f64 = parse_field(&record, 0, &meta.file, line)?;
        let value: f64 = parse_field(&record, 1, &meta.file, line)?;
        if !t.is_finite() || !value.is_finite() {
            return Err(SignalError::MalformedRow {
                file: meta.file.clone(),
                line,
                reason: "non-finite number".into(),
            });
        }
        if t <= prev_t {
            return Err(SignalError::NonMonotonic {
                file: meta.file.clone(),
                line,
            });
        }
        if samples.is_empty() {
            t0 = t;
        }
        let index = samples.len();
        let expected = t0 + index as f64 / meta.rate_hz;
        if (t - expected).abs() > tolerance {
            return Err(SignalError::RateMismatch {
                channel: meta.name.clone(),
                rate_hz: meta.rate_hz,
                index,
                expected,
                found: t,
            });
        }
        prev_t = t;
        samples.push(value);
    }
    SignalChannel::new(meta.name.clone(), meta.rate_hz, t0, samples)
}

fn load_labels(dir: &Path, file: &str) -> Result<Vec<ConditionLabel>, SignalError> {
    let mut reader = csv_reader(open_required(dir, file)?);
    check_header(&mut reader, file, &["t_start_s", "t_end_s", "condition"])?;
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| SignalError::MalformedRow {
            file: file.to_string(),
            line,
            reason: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(SignalError::MalformedRow {
                file: file.to_string(),
                line,
                reason: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let start: f64 = parse_field(&record, 0, file, line)?;
        let end: f64 = parse_field(&record, 1, file, line)?;
        let condition: i64 = parse_field(&record, 2, file, line)?;
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(SignalError::MalformedInterval {
                file: file.to_string(),
                line,
                start,
                end,
            });
        }
        labels.push(ConditionLabel {
            t_start_s: start,
            t_end_s: end,
            condition,
        });
    }
    labels.sort_by(|a, b| a.t_start_s.total_cmp(&b.t_start_s));
    for pair in labels.windows(2) {
        if pair[1].t_start_s < pair[0].t_end_s {
            return Err(SignalError::OverlappingIntervals {
                start: pair[1].t_start_s,
                end: pair[1].t_end_s,
            });
        }
    }
    Ok(labels)
}

/// Read `meta.json`.
pub fn load_meta(dir: &Path) -> Result<RecordingMeta, SignalError> {
    let file = open_required(dir, "meta.json")?;
    let meta: RecordingMeta = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| SignalError::Meta(e.to_string()))?;
    if meta.channels.is_empty() {
        return Err(SignalError::Meta("no channels declared".into()));
    }
    for (i, c) in meta.channels.iter().enumerate() {
        if meta.channels[..i].iter().any(|o| o.name == c.name) {
            return Err(SignalError::Meta(format!("channel {} declared twice", c.name)));
        }
    }
    Ok(meta)
}

/// Load a recording directory. Any defect fails the whole load.
pub fn load_recording(dir: impl AsRef<Path>) -> Result<Recording, SignalError> {
    let dir = dir.as_ref();
    let meta = load_meta(dir)?;
    let channels = meta
        .channels
        .iter()
        .map(|c| load_channel(dir, c))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = load_labels(dir, &meta.labels_file)?;
    Ok(Recording {
        subject_id: meta.subject_id,
        channels,
        labels,
    })
}

/// Every window on the shift grid, regardless of labels.
///
/// The grid starts at the latest channel start and stops once any channel
/// runs out of samples. Each channel's slice begins at the sample nearest
/// the window start.
pub fn sliding_windows(recording: &Recording, cfg: WindowConfig) -> Result<Vec<Window>, SignalError> {
    grid_windows(recording, cfg, |_, _| true)
}

fn grid_windows(
    recording: &Recording,
    cfg: WindowConfig,
    mut keep: impl FnMut(f64, f64) -> bool,
) -> Result<Vec<Window>, SignalError> {
    let WindowConfig { window_s, shift_s } = cfg;
    if !(shift_s.is_finite() && shift_s > 0.0) {
        return Err(SignalError::InvalidWindow(format!("shift must be > 0, got {shift_s}")));
    }
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(SignalError::InvalidWindow(format!("window must be > 0, got {window_s}")));
    }
    if recording.channels.is_empty() {
        return Ok(Vec::new());
    }
    let lens = recording
        .channels
        .iter()
        .map(|c| samples_per_window(&c.name, c.rate_hz, window_s))
        .collect::<Result<Vec<_>, _>>()?;

    let origin = recording
        .channels
        .iter()
        .map(|c| c.t0_s)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut out = Vec::new();
    for k in 0u64.. {
        let t = origin + k as f64 * shift_s;
        let mut slices = Vec::with_capacity(lens.len());
        for (c, &n) in recording.channels.iter().zip(&lens) {
            let start = ((t - c.t0_s) * c.rate_hz).round() as usize;
            if start + n > c.samples.len() {
                return Ok(out);
            }
            slices.push(start);
        }
        if !keep(t, t + window_s) {
            continue;
        }
        let per_channel = recording
            .channels
            .iter()
            .zip(&lens)
            .zip(slices)
            .map(|((c, &n), start)| (c.name.clone(), c.samples[start..start + n].to_vec()))
            .collect();
        out.push(Window {
            subject_id: recording.subject_id.clone(),
            t_start_s: t,
            window_s,
            per_channel,
        });
    }
    unreachable!("grid iteration ends when a channel runs out of samples")
}

/// Label a window interval: the usable condition interval that fully
/// contains `[start, end)`, if any.
pub fn label_for_interval(labels: &[ConditionLabel], start: f64, end: f64) -> Option<u8> {
    // labels are sorted and non-overlapping: the candidate is the last one
    // beginning at or before `start`.
    let idx = labels.partition_point(|l| l.t_start_s <= start + TIME_EPS);
    let candidate = labels.get(idx.checked_sub(1)?)?;
    if end <= candidate.t_end_s + TIME_EPS {
        candidate.stress_label()
    } else {
        None
    }
}

/// Sliding windows that fall entirely inside one usable condition interval.
///
/// Windows crossing an interval boundary or covering unlabeled time are
/// dropped. Stress maps to label 1, baseline and amusement to 0.
pub fn segment_windows(
    recording: &Recording,
    cfg: WindowConfig,
) -> Result<Vec<LabeledWindow>, SignalError> {
    let labels = &recording.labels;
    let windows = grid_windows(recording, cfg, |s, e| label_for_interval(labels, s, e).is_some())?;
    Ok(windows
        .into_iter()
        .map(|window| {
            let end = window.t_start_s + window.window_s;
            let label = label_for_interval(labels, window.t_start_s, end)
                .expect("filtered to labeled windows");
            LabeledWindow { window, label }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-channel z-score statistics fitted on training windows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormStats {
    pub channels: BTreeMap<String, ChannelStats>,
}

impl NormStats {
    /// Pooled mean and population stddev over every sample of every window.
    pub fn fit<'a>(windows: impl IntoIterator<Item = &'a Window>) -> Result<Self, SignalError> {
        let windows: Vec<&Window> = windows.into_iter().collect();
        if windows.is_empty() {
            return Err(SignalError::EmptyInput);
        }
        let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for w in &windows {
            for (name, xs) in &w.per_channel {
                let e = sums.entry(name.as_str()).or_default();
                e.0 += xs.iter().sum::<f64>();
                e.1 += xs.len();
            }
        }
        let mut channels = BTreeMap::new();
        for (name, (sum, n)) in sums {
            if n == 0 {
                return Err(SignalError::EmptyInput);
            }
            let mean = sum / n as f64;
            let ss: f64 = windows
                .iter()
                .filter_map(|w| w.per_channel.get(name))
                .flat_map(|xs| xs.iter())
                .map(|x| (x - mean) * (x - mean))
                .sum();
            let std = (ss / n as f64).sqrt().max(STD_FLOOR);
            channels.insert(name.to_string(), ChannelStats { mean, std });
        }
        Ok(Self { channels })
    }

    fn stats_for(&self, name: &str) -> Result<ChannelStats, SignalError> {
        self.channels
            .get(name)
            .copied()
            .ok_or_else(|| SignalError::UnknownChannel(name.to_string()))
    }

    /// z-score every channel slice; timing is unchanged.
    pub fn normalize(&self, window: &Window) -> Result<Window, SignalError> {
        self.map_window(window, |x, s| (x - s.mean) / s.std)
    }

    /// Inverse of [`NormStats::normalize`].
    pub fn denormalize(&self, window: &Window) -> Result<Window, SignalError> {
        self.map_window(window, |x, s| x * s.std + s.mean)
    }

    pub fn normalize_map(&self, map: &ChannelMap) -> Result<ChannelMap, SignalError> {
        map.iter()
            .map(|(name, xs)| {
                let s = self.stats_for(name)?;
                Ok((name.clone(), xs.iter().map(|x| (x - s.mean) / s.std).collect()))
            })
            .collect()
    }

    pub fn normalize_labeled(&self, window: &LabeledWindow) -> Result<LabeledWindow, SignalError> {
        Ok(LabeledWindow {
            window: self.normalize(&window.window)?,
            label: window.label,
        })
    }

    fn map_window(
        &self,
        window: &Window,
        f: impl Fn(f64, ChannelStats) -> f64,
    ) -> Result<Window, SignalError> {
        let per_channel = window
            .per_channel
            .iter()
            .map(|(name, xs)| {
                let s = self.stats_for(name)?;
                Ok((name.clone(), xs.iter().map(|&x| f(x, s)).collect()))
            })
            .collect::<Result<_, SignalError>>()?;
        Ok(Window {
            per_channel,
            ..window.clone()
        })
    }
}

/// Free-function form of [`NormStats::fit`] over labeled windows.
pub fn fit_norm_stats(windows: &[LabeledWindow]) -> Result<NormStats, SignalError> {
    NormStats::fit(windows.iter().map(|w| &w.window))
}

pub fn normalize(window: &LabeledWindow, stats: &NormStats) -> Result<LabeledWindow, SignalError> {
    stats.normalize_labeled(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_dir(dir: &Path, bvp_rows: usize, labels: &str) {
        let meta = r#"{"subject_id":"S1","channels":[{"name":"bvp","rate_hz":64,"file":"bvp.csv"}],"labels_file":"labels.csv"}"#;
        fs::write(dir.join("meta.json"), meta).unwrap();
        let mut csv = String::from("t_s,value\n");
        for k in 0..bvp_rows {
            csv.push_str(&format!("{},{}\n", k as f64 / 64.0, (k % 7) as f64));
        }
        fs::write(dir.join("bvp.csv"), csv).unwrap();
        fs::write(dir.join("labels.csv"), labels).unwrap();
    }

    fn channel(name: &str, rate: f64, seconds: f64) -> SignalChannel {
        let n = (rate * seconds) as usize;
        SignalChannel::new(name, rate, 0.0, (0..n).map(|k| k as f64).collect()).unwrap()
    }

    fn recording(labels: Vec<ConditionLabel>, seconds: f64) -> Recording {
        Recording {
            subject_id: "S".into(),
            channels: vec![channel("bvp", 64.0, seconds), channel("eda", 4.0, seconds)],
            labels,
        }
    }

    fn label(s: f64, e: f64, c: i64) -> ConditionLabel {
        ConditionLabel {
            t_start_s: s,
            t_end_s: e,
            condition: c,
        }
    }

    #[test]
    fn loads_channel_duration_from_rate() {
        let tmp = tempfile::tempdir().unwrap();
        write_dir(tmp.path(), 640, "t_start_s,t_end_s,condition\n0,10,1\n");
        let rec = load_recording(tmp.path()).unwrap();
        assert_eq!(rec.subject_id, "S1");
        assert_eq!(rec.channels[0].samples.len(), 640);
        assert_eq!(rec.channels[0].duration_s(), 10.0);
    }

    #[test]
    fn missing_labels_file() {
        let tmp = tempfile::tempdir().unwrap();
        write_dir(tmp.path(), 64, "");
        fs::remove_file(tmp.path().join("labels.csv")).unwrap();
        match load_recording(tmp.path()) {
            Err(SignalError::MissingFile(f)) => assert_eq!(f, "labels.csv"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reversed_interval_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_dir(tmp.path(), 64, "t_start_s,t_end_s,condition\n30,20,2\n");
        assert!(matches!(
            load_recording(tmp.path()),
            Err(SignalError::MalformedInterval { .. })
        ));
    }

    #[test]
    fn non_monotonic_and_rate_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        write_dir(tmp.path(), 4, "t_start_s,t_end_s,condition\n0,1,1\n");
        fs::write(tmp.path().join("bvp.csv"), "t_s,value\n0,1\n0.015625,1\n0.015625,2\n").unwrap();
        assert!(matches!(
            load_recording(tmp.path()),
            Err(SignalError::NonMonotonic { line: 4, .. })
        ));
        // 4 Hz spacing while meta declares 64 Hz
        fs::write(tmp.path().join("bvp.csv"), "t_s,value\n0,1\n0.25,1\n").unwrap();
        assert!(matches!(
            load_recording(tmp.path()),
            Err(SignalError::RateMismatch { index: 1, .. })
        ));
        fs::write(tmp.path().join("bvp.csv"), "t_s,value\n0,1\n0.015625,abc\n").unwrap();
        assert!(matches!(
            load_recording(tmp.path()),
            Err(SignalError::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn overlapping_labels_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        write_dir(tmp.path(), 64, "t_start_s,t_end_s,condition\n0,10,1\n5,20,2\n");
        assert!(matches!(
            load_recording(tmp.path()),
            Err(SignalError::OverlappingIntervals { .. })
        ));
    }

    #[test]
    fn window_count_for_single_interval() {
        let rec = recording(vec![label(0.0, 600.0, 1)], 600.0);
        let ws = segment_windows(&rec, WindowConfig::default()).unwrap();
        assert_eq!(ws.len(), 109);
        assert!(ws.iter().all(|w| w.label == 0));
        assert_eq!(ws[0].window.per_channel["bvp"].len(), 3840);
        assert_eq!(ws[0].window.per_channel["eda"].len(), 240);
    }

    #[test]
    fn boundary_windows_dropped() {
        let rec = recording(vec![label(0.0, 100.0, 1), label(100.0, 200.0, 2)], 200.0);
        let cfg = WindowConfig {
            window_s: 60.0,
            shift_s: 50.0,
        };
        let ws = segment_windows(&rec, cfg).unwrap();
        let got: Vec<(f64, u8)> = ws.iter().map(|w| (w.window.t_start_s, w.label)).collect();
        assert_eq!(got, vec![(0.0, 0), (100.0, 1)]);
    }

    #[test]
    fn unusable_condition_yields_nothing() {
        let rec = recording(vec![label(0.0, 600.0, 4)], 600.0);
        assert!(segment_windows(&rec, WindowConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn non_integral_window_rejected() {
        let rec = recording(vec![label(0.0, 100.0, 1)], 100.0);
        let cfg = WindowConfig {
            window_s: 0.1,
            shift_s: 1.0,
        };
        assert!(matches!(
            segment_windows(&rec, cfg),
            Err(SignalError::NonIntegralWindow { .. })
        ));
    }

    fn window_of(values: &[(&str, Vec<f64>)]) -> Window {
        Window {
            subject_id: "S".into(),
            t_start_s: 0.0,
            window_s: 1.0,
            per_channel: values.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    #[test]
    fn norm_stats_examples() {
        let s = NormStats::fit([&window_of(&[("eda", vec![0.0, 2.0])])]).unwrap();
        assert_eq!(s.channels["eda"], ChannelStats { mean: 1.0, std: 1.0 });

        let s = NormStats::fit([&window_of(&[("eda", vec![5.0, 5.0, 5.0])])]).unwrap();
        assert_eq!(s.channels["eda"].std, STD_FLOOR);

        let a = window_of(&[("eda", vec![1.0, 1.0])]);
        let b = window_of(&[("eda", vec![3.0, 3.0])]);
        let s = NormStats::fit([&a, &b]).unwrap();
        assert_eq!(s.channels["eda"], ChannelStats { mean: 2.0, std: 1.0 });

        assert!(matches!(fit_norm_stats(&[]), Err(SignalError::EmptyInput)));
    }

    #[test]
    fn normalize_examples() {
        let w = window_of(&[("eda", vec![0.0, 2.0])]);
        let s = NormStats::fit([&w]).unwrap();
        let n = s.normalize(&w).unwrap();
        assert_eq!(n.per_channel["eda"], vec![-1.0, 1.0]);

        let w = window_of(&[("eda", vec![0.3, 17.25, -4.0]), ("temp", vec![33.1, 32.9])]);
        let s = NormStats::fit([&w]).unwrap();
        let back = s.denormalize(&s.normalize(&w).unwrap()).unwrap();
        for (name, xs) in &w.per_channel {
            for (a, b) in xs.iter().zip(&back.per_channel[name]) {
                assert!((a - b).abs() < 1e-12);
            }
        }

        let eda_only = NormStats::fit([&window_of(&[("eda", vec![0.0, 1.0])])]).unwrap();
        assert!(matches!(
            eda_only.normalize(&w),
            Err(SignalError::UnknownChannel(c)) if c == "temp"
        ));
    }
}
