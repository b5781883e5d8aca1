//! Statistical checks on replay sampling and exploration.

use purl_core::agent::{ActionMode, AgentConfig, DqnAgent, ReplayBuffer, Transition};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn t(i: usize) -> Transition {
    Transition {
        state: vec![i as f64],
        action: 0,
        reward: 0.0,
        next_state: vec![0.0],
        done: false,
    }
}

#[test]
fn replay_sampling_is_uniform() {
    let mut buf = ReplayBuffer::new(10);
    // overfill so the ring has wrapped
    for i in 0..25 {
        buf.push(t(i));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = [0usize; 10];
    let draws = 20_000;
    for _ in 0..draws / 10 {
        for i in buf.sample_indices(10, &mut rng).unwrap() {
            counts[i] += 1;
        }
    }
    let p = 0.1;
    let expect = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (i, &c) in counts.iter().enumerate() {
        assert!(
            (c as f64 - expect).abs() <= 3.0 * sd,
            "slot {i}: {c} vs {expect} ± {}",
            3.0 * sd
        );
    }
    let held: Vec<f64> = (0..10).map(|i| buf.get(i).state[0]).collect();
    let mut sorted = held.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sorted, (15..25).map(|i| i as f64).collect::<Vec<_>>());
}

#[test]
fn full_exploration_is_uniform_over_actions() {
    let cfg = AgentConfig {
        epsilon_start: 1.0,
        epsilon_end: 1.0,
        ..Default::default()
    };
    let actions = 5;
    let mut agent = DqnAgent::new(3, actions, cfg, 11).unwrap();
    let n = 10_000;
    let mut counts = vec![0usize; actions];
    for _ in 0..n {
        counts[agent.select_action(&[0.1, 0.2, 0.3], ActionMode::Explore).unwrap()] += 1;
    }
    let expect = n as f64 / actions as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
    // 99.9th percentile of chi-square with 4 degrees of freedom
    assert!(chi2 < 18.467, "chi-square {chi2} for counts {counts:?}");
}
