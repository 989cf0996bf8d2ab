use std::collections::VecDeque;

use crate::signal_store::{samples_per_window, ChannelMap, SignalError, Window, WindowConfig};

use super::MonitorError;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct ChannelRing {
    name: String,
    rate_hz: f64,
    window_len: usize,
    samples: VecDeque<(f64, f64)>,
    first_t: Option<f64>,
    last_t: Option<f64>,
}

impl ChannelRing {
    fn coverage_end(&self) -> Option<f64> {
        self.last_t.map(|t| t + 1.0 / self.rate_hz)
    }

    /// The `window_len` samples covering `[t, t + window)`, if present and
    /// gap-free.
    fn slice(&self, t: f64) -> SliceResult {
        let half = 0.5 / self.rate_hz;
        let start = self.samples.partition_point(|&(ts, _)| ts < t - half);
        if start + self.window_len > self.samples.len() {
            return SliceResult::Incomplete;
        }
        let first = self.samples[start].0;
        let last = self.samples[start + self.window_len - 1].0;
        let expected_last = t + (self.window_len - 1) as f64 / self.rate_hz;
        if (first - t).abs() > half || (last - expected_last).abs() > half {
            return SliceResult::Gap;
        }
        SliceResult::Ready(
            self.samples
                .range(start..start + self.window_len)
                .map(|&(_, v)| v)
                .collect(),
        )
    }

    fn evict_before(&mut self, t: f64) {
        let cut = t - 0.5 / self.rate_hz;
        while self.samples.front().is_some_and(|&(ts, _)| ts < cut) {
            self.samples.pop_front();
        }
    }
}

enum SliceResult {
    Ready(Vec<f64>),
    Incomplete,
    Gap,
}

/// Per-channel sample rings with a watermark and a shift-grid cursor.
///
/// The watermark is the end of the time range covered by every channel:
/// `min over channels of (last timestamp + 1 / rate)`. Windows are cut on the
/// grid `origin + k * shift`, where `origin` is the latest first timestamp
/// across channels.
#[derive(Debug, Clone)]
pub struct StreamBuffer {
    cfg: WindowConfig,
    channels: Vec<ChannelRing>,
    next_k: u64,
    closed: bool,
    skipped: usize,
}

impl StreamBuffer {
    pub fn new(rates: &[(String, f64)], cfg: WindowConfig) -> Result<Self, MonitorError> {
        if !(cfg.shift_s.is_finite() && cfg.shift_s > 0.0) {
            return Err(SignalError::InvalidWindow(format!("shift must be > 0, got {}", cfg.shift_s)).into());
        }
        if rates.is_empty() {
            return Err(SignalError::EmptyInput.into());
        }
        let channels = rates
            .iter()
            .map(|(name, rate)| {
                Ok(ChannelRing {
                    name: name.clone(),
                    rate_hz: *rate,
                    window_len: samples_per_window(name, *rate, cfg.window_s)?,
                    samples: VecDeque::new(),
                    first_t: None,
                    last_t: None,
                })
            })
            .collect::<Result<Vec<_>, SignalError>>()?;
        Ok(Self {
            cfg,
            channels,
            next_k: 0,
            closed: false,
            skipped: 0,
        })
    }

    pub fn config(&self) -> WindowConfig {
        self.cfg
    }

    /// Append a batch of `(t_s, value)` samples to one channel.
    ///
    /// The whole batch is rejected unless its timestamps strictly increase
    /// and start after the last accepted sample of that channel.
    pub fn push(&mut self, channel: &str, batch: &[(f64, f64)]) -> Result<usize, MonitorError> {
        if self.closed {
            return Err(MonitorError::Closed);
        }
        let ring = self
            .channels
            .iter_mut()
            .find(|c| c.name == channel)
            .ok_or_else(|| MonitorError::UnknownChannel(channel.to_string()))?;
        let mut prev = ring.last_t;
        for (i, &(t, v)) in batch.iter().enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(MonitorError::NonFinite {
                    channel: channel.to_string(),
                    index: i,
                });
            }
            if prev.is_some_and(|p| t <= p) {
                return Err(MonitorError::OutOfOrder {
                    channel: channel.to_string(),
                    index: i,
                    t_s: t,
                    last_s: prev.unwrap_or(f64::NEG_INFINITY),
                });
            }
            prev = Some(t);
        }
        if let Some(&(t, _)) = batch.first() {
            ring.first_t.get_or_insert(t);
        }
        ring.samples.extend(batch.iter().copied());
        ring.last_t = prev;
        Ok(batch.len())
    }

    /// End of the time range every channel covers, once all have data.
    pub fn watermark(&self) -> Option<f64> {
        self.channels
            .iter()
            .map(ChannelRing::coverage_end)
            .try_fold(f64::INFINITY, |acc, end| end.map(|e| acc.min(e)))
    }

    pub fn origin(&self) -> Option<f64> {
        self.channels
            .iter()
            .map(|c| c.first_t)
            .try_fold(f64::NEG_INFINITY, |acc, t| t.map(|t| acc.max(t)))
    }

    /// Start of the next window on the grid that has not been emitted.
    pub fn next_window_start(&self) -> Option<f64> {
        self.origin().map(|o| o + self.next_k as f64 * self.cfg.shift_s)
    }

    /// Mark the end of the stream: the final window may then end exactly at
    /// the watermark.
    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Grid windows skipped because a channel had a gap.
    pub fn skipped_windows(&self) -> usize {
        self.skipped
    }

    pub fn buffered_samples(&self, channel: &str) -> Option<usize> {
        self.channels.iter().find(|c| c.name == channel).map(|c| c.samples.len())
    }

    fn complete(&self, t: f64, watermark: f64) -> bool {
        let end = t + self.cfg.window_s;
        if self.closed {
            end <= watermark + TIME_EPS
        } else {
            end < watermark - TIME_EPS
        }
    }

    /// Cut every complete window not yet emitted, in grid order, then evict
    /// samples no future window needs.
    pub fn take_ready_windows(&mut self, subject_id: &str) -> Vec<Window> {
        let (Some(origin), Some(watermark)) = (self.origin(), self.watermark()) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        loop {
            let t = origin + self.next_k as f64 * self.cfg.shift_s;
            if !self.complete(t, watermark) {
                break;
            }
            let mut per_channel = ChannelMap::new();
            let mut stop = false;
            let mut gap = false;
            for c in &self.channels {
                match c.slice(t) {
                    SliceResult::Ready(v) => {
                        per_channel.insert(c.name.clone(), v);
                    }
                    SliceResult::Gap => gap = true,
                    SliceResult::Incomplete => stop = true,
                }
            }
            if stop && !gap {
                break;
            }
            self.next_k += 1;
            if gap || stop {
                self.skipped += 1;
                continue;
            }
            out.push(Window {
                subject_id: subject_id.to_string(),
                t_start_s: t,
                window_s: self.cfg.window_s,
                per_channel,
            });
        }
        let keep_from = (origin + self.next_k as f64 * self.cfg.shift_s).min(watermark - 3.0 * self.cfg.window_s);
        for c in &mut self.channels {
            c.evict_before(keep_from);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buffer() -> StreamBuffer {
        let rates = vec![("bvp".to_string(), 8.0), ("eda".to_string(), 4.0)];
        StreamBuffer::new(&rates, WindowConfig { window_s: 60.0, shift_s: 5.0 }).unwrap()
    }

    fn samples(rate: f64, from: usize, to: usize) -> Vec<(f64, f64)> {
        (from..to).map(|k| (k as f64 / rate, k as f64)).collect()
    }

    #[test]
    fn watermark_waits_for_every_channel() {
        let mut b = buffer();
        assert_eq!(b.push("eda", &samples(4.0, 0, 240)).unwrap(), 240);
        assert_eq!(b.watermark(), None);
        b.push("bvp", &samples(8.0, 0, 400)).unwrap();
        assert_eq!(b.watermark(), Some(50.0));
        b.push("bvp", &samples(8.0, 400, 800)).unwrap();
        assert_eq!(b.watermark(), Some(60.0));
    }

    #[test]
    fn out_of_order_batch_is_rejected_whole() {
        let mut b = buffer();
        b.push("eda", &samples(4.0, 0, 40)).unwrap();
        let err = b.push("eda", &samples(4.0, 30, 50)).unwrap_err();
        assert!(matches!(err, MonitorError::OutOfOrder { index: 0, .. }));
        assert_eq!(b.buffered_samples("eda"), Some(40));
        let mut dup = samples(4.0, 40, 45);
        dup.push(dup[4]);
        assert!(matches!(b.push("eda", &dup), Err(MonitorError::OutOfOrder { index: 5, .. })));
        assert_eq!(b.buffered_samples("eda"), Some(40));
    }

    #[test]
    fn unknown_channel() {
        let mut b = buffer();
        assert!(matches!(b.push("hr", &[(0.0, 1.0)]), Err(MonitorError::UnknownChannel(_))));
    }

    #[test]
    fn grid_arithmetic() {
        let mut b = buffer();
        b.push("eda", &samples(4.0, 0, 236)).unwrap();
        b.push("bvp", &samples(8.0, 0, 472)).unwrap();
        assert_eq!(b.watermark(), Some(59.0));
        assert!(b.take_ready_windows("u").is_empty());
        b.push("eda", &samples(4.0, 236, 280)).unwrap();
        b.push("bvp", &samples(8.0, 472, 560)).unwrap();
        assert_eq!(b.watermark(), Some(70.0));
        let ws = b.take_ready_windows("u");
        let starts: Vec<f64> = ws.iter().map(|w| w.t_start_s).collect();
        assert_eq!(starts, vec![0.0, 5.0]);
        assert_eq!(ws[1].per_channel["eda"].len(), 240);
        assert_eq!(ws[1].per_channel["eda"][0], 20.0);
        assert_eq!(ws[1].per_channel["bvp"][0], 40.0);
        // closing releases the window ending exactly at the watermark
        b.close();
        let ws = b.take_ready_windows("u");
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].t_start_s, 10.0);
    }

    #[test]
    fn eviction_keeps_what_future_windows_need() {
        let mut b = buffer();
        b.push("eda", &samples(4.0, 0, 4 * 600)).unwrap();
        b.push("bvp", &samples(8.0, 0, 8 * 600)).unwrap();
        let ws = b.take_ready_windows("u");
        assert_eq!(ws.len(), 108);
        // three window lengths behind the 600 s watermark stay buffered
        assert_eq!(b.buffered_samples("eda"), Some(4 * 180));
        assert_eq!(b.next_window_start(), Some(540.0));
        b.close();
        let ws = b.take_ready_windows("u");
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0].t_start_s, 540.0);
    }

    #[test]
    fn gaps_skip_windows() {
        let mut b = buffer();
        let mut eda = samples(4.0, 0, 400);
        eda.retain(|&(t, _)| !(30.0..31.0).contains(&t));
        b.push("eda", &eda).unwrap();
        b.push("bvp", &samples(8.0, 0, 800)).unwrap();
        b.close();
        let ws = b.take_ready_windows("u");
        // windows starting at 0..=30 cover the gap; the rest (35..=40) survive
        let starts: Vec<f64> = ws.iter().map(|w| w.t_start_s).collect();
        assert_eq!(starts, vec![35.0, 40.0]);
        assert_eq!(b.skipped_windows(), 7);
    }
}
