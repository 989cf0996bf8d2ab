use serde::{Deserialize, Serialize};

/// One scored window on the monitor's shift grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub probability: f64,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    pub start_s: f64,
    pub end_s: f64,
}

/// A run of consecutive stressed windows, from the first window's start to
/// the last window's end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub start_s: f64,
    pub end_s: f64,
    pub windows: usize,
}

/// What the chat layer is told about the monitored period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressSummary {
    pub period: Option<Period>,
    pub windows_total: usize,
    pub windows_stressed: usize,
    pub stressed_fraction: f64,
    pub episodes: Vec<Episode>,
    pub peak_probability: f64,
}

impl StressSummary {
    pub fn empty() -> Self {
        StressFold::default().finish(DEFAULT_MIN_EPISODE_WINDOWS)
    }
}

pub const DEFAULT_MIN_EPISODE_WINDOWS: usize = 3;

/// Mergeable partial summary over an ordered run of records.
///
/// Keeps every stressed run (qualifying or not) so that two folds over
/// adjacent record sequences can be stitched at the seam.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StressFold {
    pub windows_total: usize,
    pub windows_stressed: usize,
    pub peak_probability: f64,
    pub period: Option<Period>,
    runs: Vec<Episode>,
    first_stressed: bool,
    last_stressed: bool,
}

impl StressFold {
    pub fn from_records(records: &[PredictionRecord]) -> Self {
        let mut f = Self::default();
        for r in records {
            f.push(r);
        }
        f
    }

    pub fn push(&mut self, r: &PredictionRecord) {
        let stressed = r.label == 1;
        if self.windows_total == 0 {
            self.first_stressed = stressed;
            self.period = Some(Period {
                start_s: r.t_start_s,
                end_s: r.t_end_s,
            });
        } else if let Some(p) = &mut self.period {
            p.end_s = p.end_s.max(r.t_end_s);
        }
        self.windows_total += 1;
        self.peak_probability = self.peak_probability.max(r.probability);
        if stressed {
            self.windows_stressed += 1;
            match self.runs.last_mut() {
                Some(run) if self.last_stressed => {
                    run.end_s = r.t_end_s;
                    run.windows += 1;
                }
                _ => self.runs.push(Episode {
                    start_s: r.t_start_s,
                    end_s: r.t_end_s,
                    windows: 1,
                }),
            }
        }
        self.last_stressed = stressed;
    }

    /// Fold of `self`'s records followed by `other`'s.
    pub fn merge(mut self, other: &StressFold) -> StressFold {
        if other.windows_total == 0 {
            return self;
        }
        if self.windows_total == 0 {
            return other.clone();
        }
        let mut runs = other.runs.iter();
        if self.last_stressed && other.first_stressed {
            let head = runs.next().expect("first record stressed implies a run");
            let tail = self.runs.last_mut().expect("last record stressed implies a run");
            tail.end_s = head.end_s;
            tail.windows += head.windows;
        }
        self.runs.extend(runs.copied());
        self.windows_total += other.windows_total;
        self.windows_stressed += other.windows_stressed;
        self.peak_probability = self.peak_probability.max(other.peak_probability);
        if let (Some(a), Some(b)) = (&mut self.period, other.period) {
            a.start_s = a.start_s.min(b.start_s);
            a.end_s = a.end_s.max(b.end_s);
        }
        self.last_stressed = other.last_stressed;
        self
    }

    pub fn finish(&self, min_episode_windows: usize) -> StressSummary {
        StressSummary {
            period: self.period,
            windows_total: self.windows_total,
            windows_stressed: self.windows_stressed,
            stressed_fraction: if self.windows_total == 0 {
                0.0
            } else {
                self.windows_stressed as f64 / self.windows_total as f64
            },
            episodes: self
                .runs
                .iter()
                .filter(|r| r.windows >= min_episode_windows.max(1))
                .copied()
                .collect(),
            peak_probability: self.peak_probability,
        }
    }
}

/// Summarize ordered records: runs of at least `min_episode_windows`
/// consecutive stressed windows become episodes.
pub fn summarize(records: &[PredictionRecord], min_episode_windows: usize) -> StressSummary {
    StressFold::from_records(records).finish(min_episode_windows)
}
