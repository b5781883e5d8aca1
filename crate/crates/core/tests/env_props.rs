//! Reward and environment properties.

use std::sync::Arc;

use proptest::prelude::*;
use purl_core::data::{SyntheticSpec, TaskData};
use purl_core::env::{reward_r1, EnvConfig, PruneEnv, RewardMode, RewardParams, SignConvention};
use purl_core::nn::{retrain, Network, SgdConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(ta: f64, tp: f64) -> RewardParams {
    RewardParams {
        target_accuracy: ta,
        target_sparsity: tp,
        beta: 5.0,
        sign: SignConvention::ProseCorrected,
    }
}

fn small_env(cfg: EnvConfig) -> PruneEnv {
    let (train, test) = SyntheticSpec {
        features: 5,
        train_examples: 300,
        test_examples: 150,
        noise: 1.0,
        ..Default::default()
    }
    .generate()
    .unwrap();
    let data = Arc::new(TaskData::new(train, test, 40, 5).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut net = Network::random(&[5, 10, 10, 8, 3], &mut rng).unwrap();
    retrain(&mut net, &data.train, 5, &SgdConfig::default(), &mut rng).unwrap();
    PruneEnv::new(net, data, cfg, 7).unwrap()
}

proptest! {
    #[test]
    fn r1_is_bounded_and_monotone(
        a in 0.0f64..=1.0, da in 0.0f64..0.5,
        p in 0.0f64..=1.0, dp in 0.0f64..0.5,
        ta in 0.05f64..=1.0, tp in 0.05f64..=1.0,
    ) {
        let rp = params(ta, tp);
        let r = reward_r1(a, p, &rp);
        prop_assert!((-10.0..=0.0).contains(&r));
        prop_assert!(reward_r1((a + da).min(1.0), p, &rp) >= r);
        prop_assert!(reward_r1(a, (p + dp).min(1.0), &rp) >= r);
        if a >= ta && p >= tp {
            prop_assert_eq!(r, 0.0);
        }
    }
}

#[test]
fn sparse_mode_retrains_once_per_episode_dense_every_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (mode, per_episode) in [(RewardMode::Sparse, 1), (RewardMode::Dense, 4)] {
        let mut env = small_env(EnvConfig {
            reward_mode: mode,
            early_stop_threshold: None,
            ..Default::default()
        });
        for episode in 1..=6 {
            env.reset();
            let mut rewards = Vec::new();
            while !env.is_done() {
                let out = env.step(rng.gen_range(0..env.num_actions())).unwrap();
                rewards.push(out.reward);
                assert_eq!(out.info.evaluated, mode == RewardMode::Dense || out.done);
            }
            assert_eq!(env.episode_retrains(), per_episode);
            assert_eq!(env.total_retrains(), episode * per_episode);
            if mode == RewardMode::Sparse {
                assert!(rewards[..3].iter().all(|&r| r == 0.0));
            }
        }
    }
}

#[test]
fn episodes_always_start_from_the_pristine_network() {
    let mut env = small_env(EnvConfig::default());
    let pristine = env.pristine_checksum();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        env.reset();
        assert_eq!(env.network().checksum(), pristine);
        while !env.is_done() {
            env.step(rng.gen_range(0..env.num_actions())).unwrap();
        }
        assert_ne!(env.network().checksum(), pristine);
        assert!(env.network().masks_respected());
    }
    assert_eq!(env.pristine().checksum(), pristine);
}
