use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::exec::Exec;
use crate::signal_store::{LabeledWindow, Window};

use super::{train, ArchConfig, ModelError, StressNet, TrainConfig};

/// Confusion counts with "stressed" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn record(&mut self, predicted: u8, actual: u8) {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub split: String,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion, split: impl Into<String>) -> Self {
        let Confusion { tp, fp, fn_, tn } = confusion;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            accuracy: ratio(tp + tn, confusion.total()),
            precision,
            recall,
            f1,
            confusion,
            split: split.into(),
        }
    }
}

/// Score `windows` (raw, un-normalized) at the model's decision threshold.
pub fn evaluate(model: &StressNet, windows: &[LabeledWindow], exec: Exec) -> Result<EvalReport, ModelError> {
    evaluate_named(model, windows, exec, "evaluation")
}

fn evaluate_named(
    model: &StressNet,
    windows: &[LabeledWindow],
    exec: Exec,
    split: &str,
) -> Result<EvalReport, ModelError> {
    if windows.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let refs: Vec<&Window> = windows.iter().map(|w| &w.window).collect();
    let probs = model.predict_many(&refs, exec)?;
    let mut confusion = Confusion::default();
    for (p, w) in probs.iter().zip(windows) {
        confusion.record(model.label(*p), w.label);
    }
    Ok(EvalReport::from_confusion(confusion, split))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub subject: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub folds: Vec<FoldReport>,
    /// Metrics over the summed confusion counts of all folds.
    pub pooled: EvalReport,
}

/// Leave-one-subject-out over windows grouped by their `subject_id`.
pub fn evaluate_loso(
    windows: &[LabeledWindow],
    arch: &ArchConfig,
    cfg: &TrainConfig,
) -> Result<LosoReport, ModelError> {
    let mut groups: BTreeMap<String, Vec<LabeledWindow>> = BTreeMap::new();
    for w in windows {
        groups.entry(w.window.subject_id.clone()).or_default().push(w.clone());
    }
    let grouped: Vec<(String, Vec<LabeledWindow>)> = groups.into_iter().collect();
    evaluate_loso_grouped(&grouped, arch, cfg)
}

/// Leave-one-subject-out: each subject in turn is the test fold and a fresh
/// model is trained on the others.
pub fn evaluate_loso_grouped(
    subjects: &[(String, Vec<LabeledWindow>)],
    arch: &ArchConfig,
    cfg: &TrainConfig,
) -> Result<LosoReport, ModelError> {
    if subjects.len() < 2 {
        return Err(ModelError::NotEnoughSubjects(subjects.len()));
    }
    if let Some((id, _)) = subjects.iter().find(|(_, ws)| ws.is_empty()) {
        return Err(ModelError::EmptySubject(id.clone()));
    }
    let mut folds = Vec::with_capacity(subjects.len());
    let mut pooled = Confusion::default();
    for (held, (subject, test)) in subjects.iter().enumerate() {
        let train_windows: Vec<LabeledWindow> = subjects
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != held)
            .flat_map(|(_, (_, ws))| ws.iter().cloned())
            .collect();
        let (model, _) = train(&train_windows, arch, cfg)?;
        let report = evaluate_named(&model, test, cfg.exec, &format!("loso:{subject}"))?;
        info!(subject, accuracy = report.accuracy, f1 = report.f1, "fold done");
        pooled = pooled.merge(&report.confusion);
        folds.push(FoldReport {
            subject: subject.clone(),
            report,
        });
    }
    Ok(LosoReport {
        folds,
        pooled: EvalReport::from_confusion(pooled, "loso:pooled"),
    })
}
