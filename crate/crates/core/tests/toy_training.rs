use std::collections::HashMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retrogfn::autodiff::ParamStore;
use retrogfn::env::toy::{ToyEnv, ToyState};
use retrogfn::policy::TabularPolicy;
use retrogfn::train::{sample_forward, train, TrainConfig, TrainData};

const BETA: f64 = 3.0;

fn score(s: &ToyState) -> f64 {
    let h: usize = s.items.iter().enumerate().map(|(p, &i)| (i + 1) * (p + 2)).sum();
    (h % 7) as f64 / 6.0
}

#[test]
fn trained_sampler_matches_normalized_reward() {
    let start = Instant::now();
    let env = ToyEnv::new(3, 3);
    let terminals = env.terminals();
    assert!(terminals.len() <= 200);
    let z: f64 = terminals.iter().map(|t| (BETA * score(t)).exp()).sum();

    let mut store = ParamStore::new();
    let policy = TabularPolicy::new(&env.states(), 4, &mut store);
    let cfg = TrainConfig {
        iterations: 20_000,
        n_forward: 8,
        n_dataset: 0,
        n_replay: 0,
        epsilon: 0.05,
        lr: 0.01,
        log_flow_lr: 0.1,
        reward_beta: BETA,
        seed: 7,
        ..TrainConfig::default()
    };
    let data = TrainData {
        starts: vec![env.initial()],
        dataset: Vec::new(),
    };
    train(&env, &policy, &mut store, &cfg, &data, score, |_, _| {}).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 50_000;
    let mut counts: HashMap<ToyState, usize> = HashMap::new();
    for _ in 0..n {
        let t = sample_forward(&env, &policy, &store, &env.initial(), 0.0, 1.0, 0, &mut rng)
            .unwrap()
            .trajectory
            .unwrap();
        *counts.entry(t.terminal().clone()).or_default() += 1;
    }
    let l1: f64 = terminals
        .iter()
        .map(|t| {
            let p = counts.get(t).copied().unwrap_or(0) as f64 / n as f64;
            (p - (BETA * score(t)).exp() / z).abs()
        })
        .sum();
    let elapsed = start.elapsed().as_secs_f64();
    println!("toy L1 = {l1:.4} in {elapsed:.1}s");
    assert!(l1 < 0.05, "L1 {l1}");
    assert!(elapsed < 300.0);
}
