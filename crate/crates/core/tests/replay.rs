use std::sync::Arc;

use emllm_core::monitor::{offline_records, replay_recording, summarize};
use emllm_core::signal_store::load_recording;
use emllm_core::stress_net::{build_network, ArchConfig};
use emllm_core::synthgen::{generate, ScenarioSpec};
use emllm_core::Exec;

#[test]
fn streaming_replay_equals_offline_windows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ScenarioSpec::scripted_day("R", 900.0, 3);
    let rec = load_recording(generate(&spec, dir.path()).unwrap()).unwrap();
    let arch = ArchConfig::for_rates(&rec.rates(), 60.0).unwrap().with_hidden_units(8);
    let model = Arc::new(build_network(&arch, 1).unwrap());
    let offline = offline_records(&model, &rec, 5.0, Exec::Parallel).unwrap();
    assert_eq!(offline.len(), (900 - 60) / 5 + 1);
    for batch_s in [1.0, 13.0, 120.0] {
        let online = replay_recording(model.clone(), &rec, 5.0, batch_s).unwrap();
        assert_eq!(online.records(), offline.as_slice(), "batch {batch_s} s");
        assert_eq!(online.summary(), summarize(&offline, 3));
        for pair in online.records().windows(2) {
            assert_eq!(pair[1].t_start_s - pair[0].t_start_s, 5.0);
        }
    }
}
