#![allow(dead_code)]

use emllm_core::signal_store::ChannelMap;
use emllm_core::tensor_nn::{seeded_rng, Network, PoolSpec, Rng, StackLayout};
use rand::Rng as _;

/// A small random network (1-2 channels, 1-3 conv layers, optional hidden
/// layer) and a matching random input.
pub fn small_network(seed: u64) -> (Network, ChannelMap) {
    let mut rng = seeded_rng(seed);
    let channels = rng.random_range(1..=2);
    let mut layouts = Vec::new();
    for c in 0..channels {
        let depth = rng.random_range(1..=3);
        let kernel = rng.random_range(2..=3);
        let filters: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=3)).collect();
        let strides: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=2)).collect();
        let pool = PoolSpec {
            size: rng.random_range(1..=2),
            stride: rng.random_range(1..=2),
        };
        // long enough to survive every layer
        let mut len = pool.size + rng.random_range(0..3);
        for &s in strides.iter().rev() {
            len = (len - 1) * s + kernel;
        }
        layouts.push(StackLayout {
            channel: format!("c{c}"),
            input_len: len,
            kernel,
            filters,
            strides,
            pool,
        });
    }
    let hidden: Vec<usize> = if rng.random_bool(0.5) {
        vec![rng.random_range(2..=5)]
    } else {
        vec![]
    };
    let mut net = Network::init(&layouts, &hidden, &mut rng).unwrap();
    // non-zero biases so every bias gradient is exercised
    for (i, p) in net.params_mut().into_iter().enumerate() {
        if i % 2 == 1 {
            for b in p.iter_mut() {
                *b = rng.random_range(-0.1..0.1);
            }
        }
    }
    let input = random_input(&layouts, &mut rng);
    (net, input)
}

pub fn random_input(layouts: &[StackLayout], rng: &mut Rng) -> ChannelMap {
    layouts
        .iter()
        .map(|l| (l.channel.clone(), (0..l.input_len).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect()
}
