//! End-to-end driver properties on a small task.

use std::sync::Arc;

use purl_core::agent::AgentConfig;
use purl_core::data::{SyntheticSpec, TaskData};
use purl_core::driver::{
    make_round_agent, prune_with_agent, run_iterative, train_agent, DriverConfig, EpisodeCounter, NullSink, Phase,
    Round, StepLog,
};
use purl_core::env::{EnvConfig, PruneEnv};
use purl_core::nn::{retrain, Checkpoint, Network, SgdConfig};
use purl_core::pruning::sparsity_report;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_env() -> PruneEnv {
    let (train, test) = SyntheticSpec {
        features: 6,
        train_examples: 400,
        test_examples: 200,
        noise: 1.0,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let data = Arc::new(TaskData::new(train, test, 48, 8).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut net = Network::random(&[6, 12, 12, 3], &mut rng).unwrap();
    retrain(&mut net, &data.train, 8, &SgdConfig::default(), &mut rng).unwrap();
    PruneEnv::new(net, data, EnvConfig::default(), 4).unwrap()
}

fn agent_cfg() -> AgentConfig {
    AgentConfig {
        hidden_sizes: vec![16],
        epsilon_decay_steps: 20,
        updates_per_step: 2,
        ..Default::default()
    }
}

fn driver_cfg(schedule: Vec<Round>) -> DriverConfig {
    DriverConfig {
        max_episodes: 8,
        fine_tune_epochs: 2,
        schedule,
        seed: 21,
        ..Default::default()
    }
}

fn iterative(schedule: Vec<Round>) -> (purl_core::driver::PruneResult, Vec<StepLog>) {
    let mut env = small_env();
    let cfg = driver_cfg(schedule);
    let mut logs = Vec::new();
    let a = agent_cfg();
    let (sd, na) = (env.state_dim(), env.num_actions());
    let result = run_iterative(
        &mut env,
        |round| {
            purl_core::agent::DqnAgent::new(
                sd,
                na,
                a.clone(),
                purl_core::seed::derive_seed(21, &format!("agent/{round}")),
            )
        },
        &cfg,
        &mut logs,
    )
    .unwrap();
    (result, logs)
}

#[test]
fn iterative_rounds_only_add_pruning() {
    let round0 = Round {
        target_sparsity: 0.3,
        max_episodes: 6,
    };
    let (first, _) = iterative(vec![round0]);
    // the agent may overshoot, and a round below the achieved sparsity is an error
    let next = (first.sparsity.global + 0.05).min(1.0);
    let (both, logs) = iterative(vec![
        round0,
        Round {
            target_sparsity: next,
            max_episodes: 6,
        },
    ]);
    assert_eq!(both.rounds, 2);
    for (l0, l1) in first.network.layers().iter().zip(both.network.layers()) {
        for (k0, k1) in l0.mask().iter().zip(l1.mask()) {
            assert!(*k0 || !*k1, "a weight pruned in round 0 came back in round 1");
        }
    }
    assert!(both.sparsity.global >= first.sparsity.global);
    assert!(both.network.masks_respected());
    let train_episodes: std::collections::BTreeSet<usize> = logs
        .iter()
        .filter(|l| l.phase == Phase::Train)
        .map(|l| l.episode)
        .collect();
    assert_eq!(train_episodes.len(), 12);
}

#[test]
fn round_below_achieved_sparsity_is_a_config_error() {
    let round0 = Round {
        target_sparsity: 0.3,
        max_episodes: 6,
    };
    let (first, _) = iterative(vec![round0]);
    let mut env = small_env();
    let a = agent_cfg();
    let (sd, na) = (env.state_dim(), env.num_actions());
    let cfg = driver_cfg(vec![
        round0,
        Round {
            target_sparsity: first.sparsity.global - 0.01,
            max_episodes: 6,
        },
    ]);
    if cfg.validate().is_err() {
        return; // not strictly increasing; covered by the config unit tests
    }
    let err = run_iterative(
        &mut env,
        |round| {
            purl_core::agent::DqnAgent::new(
                sd,
                na,
                a.clone(),
                purl_core::seed::derive_seed(21, &format!("agent/{round}")),
            )
        },
        &cfg,
        &mut NullSink,
    )
    .unwrap_err();
    assert!(matches!(err, purl_core::Error::Config(_)), "{err}");
}

#[test]
fn full_runs_are_reproducible() {
    let (a, la) = iterative(Vec::new());
    let (b, lb) = iterative(Vec::new());
    assert_eq!(a.actions, b.actions);
    assert_eq!(a.rollout_alphas, b.rollout_alphas);
    assert_eq!(la, lb);
    let ca = Checkpoint::new(a.network, 21).to_json().unwrap();
    let cb = Checkpoint::new(b.network, 21).to_json().unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn stage_two_respects_budget_and_restores_mode() {
    let mut env = small_env();
    let cfg = driver_cfg(Vec::new());
    let mut agent = make_round_agent(&env, &agent_cfg(), 5, 0).unwrap();
    let mut counter = EpisodeCounter::default();
    let eps = train_agent(&mut env, &mut agent, 8, 0, &mut counter, &mut NullSink).unwrap();
    assert_eq!(eps.len(), 8);
    let mode = env.config().reward_mode;
    let result = prune_with_agent(&mut env, &mut agent, &cfg, 0, &mut counter, &mut NullSink).unwrap();
    assert_eq!(env.config().reward_mode, mode);
    assert_eq!(counter.train, 8);
    assert_eq!(counter.stage2, cfg.stage2_rollouts);
    assert_eq!(result.rollout_alphas.len(), 5);
    assert_eq!(result.actions.len(), env.num_layers());
    // stage 2 prunes the pristine network without touching it
    assert_eq!(env.pristine().checksum(), env.pristine_checksum());
    assert_eq!(sparsity_report(&result.network), result.sparsity);
}
