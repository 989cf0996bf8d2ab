mod common;

use std::time::Instant;

use emllm_core::signal_store::ChannelMap;
use emllm_core::tensor_nn::{bce_loss, LayerGrads, Network};

const H: f64 = 1e-5;

fn loss(net: &Network, x: &ChannelMap, y: f64) -> f64 {
    bce_loss(net.forward(x).unwrap(), y).0
}

/// Max relative error between backprop and central differences over every
/// parameter, or `None` if a perturbation crosses a ReLU/max-pool kink.
fn max_rel_error(net: &Network, x: &ChannelMap, y: f64) -> Option<f64> {
    let cache = net.forward_cached(x).unwrap();
    let pattern = cache.activation_pattern();
    let mut grads = LayerGrads::zeros_like(net);
    net.backward(&cache, y, &mut grads).unwrap();

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    for (ti, &n) in sizes.iter().enumerate() {
        for j in 0..n {
            let orig = probe.params()[ti][j];
            probe.params_mut()[ti][j] = orig + H;
            let plus_cache = probe.forward_cached(x).unwrap();
            probe.params_mut()[ti][j] = orig - H;
            let minus_cache = probe.forward_cached(x).unwrap();
            probe.params_mut()[ti][j] = orig;
            if plus_cache.activation_pattern() != pattern || minus_cache.activation_pattern() != pattern {
                return None;
            }
            let lp = bce_loss(plus_cache.probability(), y).0;
            let lm = bce_loss(minus_cache.probability(), y).0;
            let numeric = (lp - lm) / (2.0 * H);
            let analytic = grads.tensors[ti][j];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    Some(worst)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let started = Instant::now();
    let mut checked = 0;
    let mut seed = 0u64;
    let mut worst: f64 = 0.0;
    while checked < 50 {
        seed += 1;
        let (net, x) = common::small_network(seed);
        let y = (seed % 2) as f64;
        // sanity: loss is finite at the base point
        assert!(loss(&net, &x, y).is_finite());
        if let Some(err) = max_rel_error(&net, &x, y) {
            assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
            worst = worst.max(err);
            checked += 1;
        }
        assert!(seed < 500, "too many networks sit on a kink");
    }
    let elapsed = started.elapsed();
    eprintln!("50 networks, {} sampled, worst relative error {worst:e}, {elapsed:?}", seed);
    assert!(elapsed.as_secs() < 60);
}
