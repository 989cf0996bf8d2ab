use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::exec::Exec;
use crate::signal_store::{ChannelMap, LabeledWindow, NormStats};
use crate::tensor_nn::{seeded_rng, AdamConfig, AdamState, TensorError};

use super::{build_network, ArchConfig, ModelError, StressNet};

// Offsets the shuffling/splitting streams from the weight-init stream.
const SHUFFLE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLIT_STREAM: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Smallest drop in validation loss that counts as an improvement.
    pub min_delta: f64,
    pub val_fraction: f64,
    /// Fit z-score statistics on the training split and embed them.
    pub normalize: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            seed: 42,
            patience: 5,
            min_delta: 1e-4,
            val_fraction: 0.2,
            normalize: true,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub stopped_early: bool,
    pub train_windows: usize,
    pub val_windows: usize,
    pub val_subjects: Vec<String>,
}

/// Index partition of a window set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
    /// Subjects moved wholesale into `held_out`; empty for a window-level split.
    pub held_out_subjects: Vec<String>,
}

/// Hold out `fraction` of the windows.
///
/// With three or more subjects whole subjects are held out, so overlapping
/// windows of one person never straddle the split. Otherwise windows are
/// sampled individually. Both draws are seeded.
pub fn split_indices(windows: &[LabeledWindow], fraction: f64, seed: u64, by_subject: bool) -> Split {
    let mut rng = seeded_rng(seed ^ SPLIT_STREAM);
    let subjects: BTreeSet<&str> = windows.iter().map(|w| w.window.subject_id.as_str()).collect();
    if by_subject && subjects.len() >= 3 && fraction > 0.0 {
        let mut order: Vec<&str> = subjects.into_iter().collect();
        order.shuffle(&mut rng);
        let n = ((fraction * order.len() as f64).round() as usize).clamp(1, order.len() - 1);
        let mut held: Vec<String> = order[..n].iter().map(|s| s.to_string()).collect();
        held.sort();
        let (held_out, train) = (0..windows.len()).partition(|&i| held.contains(&windows[i].window.subject_id));
        return Split {
            train,
            held_out,
            held_out_subjects: held,
        };
    }
    let mut idx: Vec<usize> = (0..windows.len()).collect();
    idx.shuffle(&mut rng);
    let n = ((fraction * windows.len() as f64).round() as usize).min(windows.len());
    let mut held_out = idx[..n].to_vec();
    let mut train = idx[n..].to_vec();
    held_out.sort_unstable();
    train.sort_unstable();
    Split {
        train,
        held_out,
        held_out_subjects: Vec::new(),
    }
}

fn diverged(epoch: usize, batch: usize) -> impl Fn(TensorError) -> ModelError {
    move |e| ModelError::Diverged {
        epoch,
        batch,
        detail: e.to_string(),
    }
}

/// Train a fresh network on `windows` with Adam on mini-batch BCE.
///
/// A validation split is carved out of `windows` (see [`split_indices`]);
/// the parameters from the epoch with the lowest validation loss are
/// returned, and training stops after `patience` epochs without improvement.
pub fn train(
    windows: &[LabeledWindow],
    arch: &ArchConfig,
    cfg: &TrainConfig,
) -> Result<(StressNet, TrainLog), ModelError> {
    if windows.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    let split = split_indices(windows, cfg.val_fraction, cfg.seed, true);
    let train_set: Vec<&LabeledWindow> = split.train.iter().map(|&i| &windows[i]).collect();
    let val_set: Vec<&LabeledWindow> = split.held_out.iter().map(|&i| &windows[i]).collect();

    let positives = train_set.iter().filter(|w| w.label == 1).count();
    if positives == 0 || positives == train_set.len() {
        return Err(ModelError::SingleClass);
    }

    let mut model = build_network(arch, cfg.seed)?;
    if cfg.normalize {
        model.norm = Some(NormStats::fit(train_set.iter().map(|w| &w.window))?);
    }
    let prepare = |set: &[&LabeledWindow]| -> Result<Vec<(ChannelMap, f64)>, ModelError> {
        set.iter()
            .map(|w| Ok((model.prepare(&w.window)?, w.label as f64)))
            .collect()
    };
    let train_data = prepare(&train_set)?;
    let val_data = prepare(&val_set)?;
    let val_batch: Vec<(&ChannelMap, f64)> = val_data.iter().map(|(x, y)| (x, *y)).collect();

    let mut log = TrainLog {
        train_windows: train_data.len(),
        val_windows: val_data.len(),
        val_subjects: split.held_out_subjects.clone(),
        ..TrainLog::default()
    };
    if cfg.epochs == 0 {
        return Ok((model, log));
    }

    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(adam_cfg, &model.network.params());
    let mut rng = seeded_rng(cfg.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let batch_size = cfg.batch_size.max(1);

    let mut best: Option<(f64, usize, crate::tensor_nn::Network)> = None;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<(&ChannelMap, f64)> = chunk.iter().map(|&i| (&train_data[i].0, train_data[i].1)).collect();
            let (loss, grads) = model
                .network
                .batch_gradients(&batch, cfg.exec)
                .map_err(diverged(epoch, b))?;
            if !loss.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    batch: b,
                    detail: format!("loss = {loss}"),
                });
            }
            loss_sum += loss * chunk.len() as f64;
            adam.step(&mut model.network.params_mut(), &grads.tensors)
                .map_err(diverged(epoch, b))?;
        }
        let train_loss = loss_sum / train_data.len() as f64;
        let val_loss = if val_batch.is_empty() {
            None
        } else {
            Some(
                model
                    .network
                    .batch_loss(&val_batch, cfg.exec)
                    .map_err(diverged(epoch, 0))?,
            )
        };
        info!(epoch, train_loss, ?val_loss, "epoch done");
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });

        let Some(val) = val_loss else {
            log.best_epoch = Some(epoch);
            continue;
        };
        if best.as_ref().is_none_or(|(b, _, _)| val < *b - cfg.min_delta) {
            best = Some((val, epoch, model.network.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience.max(1) {
                debug!(epoch, "early stop");
                log.stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }
    if let Some((val, epoch, network)) = best {
        model.network = network;
        log.best_epoch = Some(epoch);
        log.best_val_loss = Some(val);
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_store::Window;
    use rand::Rng as _;

    fn small_arch() -> ArchConfig {
        let rates = vec![("bvp".to_string(), 64.0), ("eda".to_string(), 4.0)];
        ArchConfig::for_rates(&rates, 8.0)
            .unwrap()
            .with_filters([4, 4, 4])
            .with_hidden_units(8)
    }

    fn random_windows(n: usize, subjects: usize, seed: u64) -> Vec<LabeledWindow> {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|i| {
                let label = (i % 2) as u8;
                let mut per_channel = ChannelMap::new();
                per_channel.insert("bvp".into(), (0..512).map(|_| rng.random_range(-1.0..1.0)).collect());
                per_channel.insert("eda".into(), (0..32).map(|_| rng.random_range(-1.0..1.0)).collect());
                LabeledWindow {
                    window: Window {
                        subject_id: format!("S{}", i % subjects),
                        t_start_s: i as f64,
                        window_s: 8.0,
                        per_channel,
                    },
                    label,
                }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let ws = random_windows(10, 1, 1);
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let (model, log) = train(&ws, &small_arch(), &cfg).unwrap();
        let fresh = build_network(&small_arch(), cfg.seed).unwrap();
        assert_eq!(model.network, fresh.network);
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn single_class_rejected() {
        let mut ws = random_windows(10, 1, 1);
        for w in &mut ws {
            w.label = 0;
        }
        assert!(matches!(train(&ws, &small_arch(), &TrainConfig::default()), Err(ModelError::SingleClass)));
    }

    #[test]
    fn memorizes_ten_windows() {
        let ws = random_windows(10, 1, 7);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 10,
            lr: 1e-2,
            val_fraction: 0.0,
            ..TrainConfig::default()
        };
        let (_, log) = train(&ws, &small_arch(), &cfg).unwrap();
        let first_below = log.epochs.iter().find(|e| e.train_loss < 0.05);
        assert!(first_below.is_some(), "final loss {}", log.epochs.last().unwrap().train_loss);
    }

    #[test]
    fn identical_seed_identical_params() {
        let ws = random_windows(24, 3, 2);
        let cfg = TrainConfig { epochs: 3, batch_size: 8, ..TrainConfig::default() };
        let (a, la) = train(&ws, &small_arch(), &cfg).unwrap();
        let (b, lb) = train(&ws, &small_arch(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let seq = TrainConfig { exec: Exec::Sequential, ..cfg };
        let (c, _) = train(&ws, &small_arch(), &seq).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn early_stop_returns_best_epoch() {
        let ws = random_windows(40, 4, 3);
        let cfg = TrainConfig { epochs: 25, batch_size: 4, lr: 5e-3, patience: 2, ..TrainConfig::default() };
        let (_, log) = train(&ws, &small_arch(), &cfg).unwrap();
        let best = log.best_val_loss.unwrap();
        let min = log.epochs.iter().filter_map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(best, min);
        assert_eq!(log.val_subjects.len(), 1);
    }

    #[test]
    fn subject_split_keeps_subjects_whole() {
        let ws = random_windows(30, 5, 4);
        let split = split_indices(&ws, 0.2, 1, true);
        assert_eq!(split.held_out_subjects.len(), 1);
        for &i in &split.train {
            assert!(!split.held_out_subjects.contains(&ws[i].window.subject_id));
        }
        assert_eq!(split.train.len() + split.held_out.len(), 30);

        let ws = random_windows(30, 2, 4);
        let split = split_indices(&ws, 0.2, 1, true);
        assert!(split.held_out_subjects.is_empty());
        assert_eq!(split.held_out.len(), 6);
    }
}
