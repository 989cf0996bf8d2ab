use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use emllm_chat::{ApiKey, ServerConfig};
use emllm_core::monitor::{offline_records, replay_recording};
use emllm_core::signal_store::{LabeledWindow, WindowConfig};
use emllm_core::stress_net::{
    evaluate, evaluate_loso, load_model, save_model, split_indices, train as fit, ArchConfig, EvalReport,
    MeanThreshold, TrainConfig, DEFAULT_HIDDEN,
};
use emllm_core::synthgen::{generate_many, scripted_cohort, ScenarioSpec};
use emllm_core::Exec;
use serde::Deserialize;
use serde_json::{json, Value};
use tracing::info;

use crate::data::{discover, labeled_windows, load_all};
use crate::error::CliError;
use crate::{EvalArgs, ReplayArgs, ServeArgs, SplitMode, SynthArgs, TrainArgs, TrainFlags};

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be a positive number, got {v}")))
    }
}

fn fraction(name: &str, v: f64) -> Result<f64, CliError> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Usage(format!("--{name} must be in [0, 1), got {v}")))
    }
}

fn required<T>(name: &str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{name} is required")))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecFile {
    Many { subjects: Vec<ScenarioSpec> },
    One(ScenarioSpec),
}

fn read_specs(path: &Path) -> Result<Vec<ScenarioSpec>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let bad = |e: String| CliError::Data(format!("{}: {e}", path.display()));
    let parsed: SpecFile = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    Ok(match parsed {
        SpecFile::Many { subjects } => subjects,
        SpecFile::One(s) => vec![s],
    })
}

pub fn synth(a: SynthArgs, exec: Exec) -> Result<Value, CliError> {
    let out = required("out", a.out)?;
    let specs = match &a.spec {
        Some(path) => read_specs(path)?,
        None => {
            let n = a.subjects.unwrap_or(4);
            if n == 0 {
                return Err(CliError::Usage("--subjects must be at least 1".into()));
            }
            scripted_cohort(n, positive("duration", a.duration.unwrap_or(3600.0))?, a.seed.unwrap_or(42))
        }
    };
    if specs.is_empty() {
        return Err(CliError::Data("scenario file lists no subjects".into()));
    }
    let mut ids = BTreeSet::new();
    for s in &specs {
        s.validate()?;
        if !ids.insert(s.subject_id.as_str()) {
            return Err(CliError::Data(format!("duplicate subject id {}", s.subject_id)));
        }
    }
    let started = Instant::now();
    let dirs = generate_many(&specs, &out, exec)?;
    info!(subjects = dirs.len(), elapsed = ?started.elapsed(), "synthesized");
    let subjects: Vec<Value> = specs
        .iter()
        .zip(&dirs)
        .map(|(s, d)| {
            json!({
                "subject_id": s.subject_id,
                "path": d,
                "duration_s": s.duration_s,
                "seed": s.seed,
                "intervals": s.intervals,
            })
        })
        .collect();
    Ok(json!({"out": out, "subjects": subjects}))
}

fn train_config(f: &TrainFlags, exec: Exec) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        epochs: f.epochs.unwrap_or(d.epochs),
        batch_size: f.batch_size.unwrap_or(d.batch_size),
        lr: positive("lr", f.lr.unwrap_or(d.lr))?,
        seed: f.seed.unwrap_or(d.seed),
        patience: f.patience.unwrap_or(d.patience),
        min_delta: f.min_delta.unwrap_or(d.min_delta).max(0.0),
        val_fraction: fraction("val-fraction", f.val_fraction.unwrap_or(d.val_fraction))?,
        normalize: true,
        exec,
    };
    if cfg.batch_size == 0 {
        return Err(CliError::Usage("--batch-size must be at least 1".into()));
    }
    Ok(cfg)
}

fn subjects_of(windows: &[LabeledWindow]) -> BTreeSet<&str> {
    windows.iter().map(|w| w.window.subject_id.as_str()).collect()
}

fn mean_eda_baseline(train: &[LabeledWindow], test: &[LabeledWindow]) -> Option<EvalReport> {
    let b = MeanThreshold::fit(train, "eda").ok()?;
    b.evaluate(test).ok()
}

pub fn train(a: TrainArgs, exec: Exec) -> Result<Value, CliError> {
    let out = required("out", a.out.clone())?;
    let window_s = positive("window", a.window.unwrap_or(60.0))?;
    let shift_s = positive("shift", a.shift.unwrap_or(5.0))?;
    let holdout = fraction("holdout", a.holdout.unwrap_or(0.2))?;
    let cfg = train_config(&a.train, exec)?;
    let recs = load_all(&a.data)?;
    let arch = ArchConfig::for_rates(&recs[0].rates(), window_s)?
        .with_hidden_units(a.train.hidden.unwrap_or(DEFAULT_HIDDEN));
    arch.validate()?;
    let windows = labeled_windows(&recs, WindowConfig { window_s, shift_s })?;

    let n_subjects = subjects_of(&windows).len();
    let by_subject = match a.split.unwrap_or_default() {
        SplitMode::Auto => n_subjects >= 3,
        SplitMode::Random => false,
        SplitMode::Subject if n_subjects >= 3 => true,
        SplitMode::Subject => {
            return Err(CliError::Data(format!(
                "--split subject needs at least 3 subjects, found {n_subjects}"
            )))
        }
    };
    let split = split_indices(&windows, holdout, cfg.seed, by_subject);
    let pick = |idx: &[usize]| idx.iter().map(|&i| windows[i].clone()).collect::<Vec<_>>();
    let (train_set, test_set) = (pick(&split.train), pick(&split.held_out));
    info!(
        train = train_set.len(),
        test = test_set.len(),
        held_out = ?split.held_out_subjects,
        "split"
    );

    let started = Instant::now();
    let (model, log) = fit(&train_set, &arch, &cfg)?;
    let train_seconds = started.elapsed().as_secs_f64();
    save_model(&model, &out)?;

    let (held_out, baseline) = if test_set.is_empty() {
        (None, None)
    } else {
        let mut r = evaluate(&model, &test_set, exec)?;
        r.split = "held-out".into();
        (Some(r), mean_eda_baseline(&train_set, &test_set))
    };
    Ok(json!({
        "model": out,
        "split": {
            "mode": if by_subject { "subject" } else { "random" },
            "holdout": holdout,
            "held_out_subjects": split.held_out_subjects,
            "train_windows": train_set.len(),
            "test_windows": test_set.len(),
        },
        "train_log": to_json(&log)?,
        "train_seconds": train_seconds,
        "held_out": to_json(&held_out)?,
        "baseline_mean_eda": to_json(&baseline)?,
    }))
}

fn load(path: &Option<PathBuf>) -> Result<emllm_core::stress_net::StressNet, CliError> {
    let path = required("model", path.clone())?;
    Ok(load_model(&path)?)
}

pub fn eval(a: EvalArgs, exec: Exec) -> Result<Value, CliError> {
    let shift_s = positive("shift", a.shift.unwrap_or(5.0))?;
    if a.loso {
        let cfg = train_config(&a.train, exec)?;
        let recs = load_all(&a.data)?;
        let arch = match &a.model {
            Some(_) => load(&a.model)?.arch,
            None => ArchConfig::for_rates(&recs[0].rates(), positive("window", a.window.unwrap_or(60.0))?)?
                .with_hidden_units(a.train.hidden.unwrap_or(DEFAULT_HIDDEN)),
        };
        let windows = labeled_windows(&recs, WindowConfig { window_s: arch.window_s, shift_s })?;
        let report = evaluate_loso(&windows, &arch, &cfg)?;
        return Ok(json!({"loso": to_json(&report)?}));
    }
    let model = load(&a.model)?;
    let recs = load_all(&a.data)?;
    let windows = labeled_windows(&recs, WindowConfig { window_s: model.arch.window_s, shift_s })?;
    let report = evaluate(&model, &windows, exec)?;
    Ok(json!({"windows": windows.len(), "report": to_json(&report)?}))
}

pub fn replay(a: ReplayArgs, exec: Exec) -> Result<Value, CliError> {
    let shift_s = positive("shift", a.shift.unwrap_or(5.0))?;
    let batch_s = positive("batch", a.batch.unwrap_or(10.0))?;
    let min_episode = a.min_episode.unwrap_or(3);
    let data = required("data", a.data.clone())?;
    let model = Arc::new(load(&a.model)?);
    let dirs = discover(std::slice::from_ref(&data))?;
    if dirs.len() != 1 {
        return Err(CliError::Usage(format!(
            "--data must name one recording, {} holds {}",
            data.display(),
            dirs.len()
        )));
    }
    let rec = emllm_core::signal_store::load_recording(&dirs[0])?;
    let monitor = replay_recording(model.clone(), &rec, shift_s, batch_s)?.with_min_episode_windows(min_episode);
    let summary = to_json(&monitor.summary())?;
    if !(a.with_records || a.verify_offline) {
        return Ok(summary);
    }
    let mut report = json!({"summary": summary});
    if a.with_records {
        report["records"] = to_json(&monitor.records())?;
    }
    if a.verify_offline {
        let offline = offline_records(&model, &rec, shift_s, exec)?;
        report["offline_match"] = json!(offline.as_slice() == monitor.records());
    }
    Ok(report)
}

pub fn serve(a: ServeArgs) -> Result<Value, CliError> {
    let mut cfg = ServerConfig::from_env();
    if let Some(v) = a.model {
        cfg.model_path = v;
    }
    if let Some(v) = a.bind {
        cfg.bind = v;
    }
    if let Some(v) = a.data_dir {
        cfg.data_dir = v;
    }
    if let Some(v) = a.llm_url {
        cfg.llm.base_url = v;
    }
    if let Some(v) = a.llm_model {
        cfg.llm.model = v;
    }
    if let Some(v) = a.llm_timeout {
        cfg.llm.timeout_s = positive("llm-timeout", v)?;
    }
    if let Some(v) = a.llm_retries {
        cfg.llm.max_retries = v;
    }
    if let Some(v) = a.temperature {
        cfg.llm.temperature = v;
    }
    if let Some(v) = a.shift {
        cfg.shift_s = positive("shift", v)?;
    }
    if let Some(v) = a.locale {
        cfg.locale = v;
    }
    cfg.llm.validate()?;
    let has_key = cfg.llm.api_key.as_ref().is_some_and(|k: &ApiKey| !k.expose().is_empty());
    let state = Arc::new(emllm_chat::build_state(&cfg)?);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async {
        let (listener, addr) = emllm_chat::server::bind(&cfg.bind).await?;
        // readiness line for supervisors and tests
        eprintln!("listening on http://{addr}");
        emllm_chat::serve_on(listener, state, emllm_chat::server::shutdown_signal()).await
    })?;
    Ok(json!({"status": "stopped", "bind": cfg.bind, "llm_key_configured": has_key}))
}
