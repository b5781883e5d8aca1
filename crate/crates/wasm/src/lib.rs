//! WebAssembly bindings for the page in `www/`. Every export is also a plain
//! Rust function, so the same code runs under `cargo test`.

use std::sync::Arc;

use purl_core::agent::{AgentConfig, DqnAgent};
use purl_core::data::{SyntheticSpec, TaskData};
use purl_core::driver::{
    fine_tune_logged, make_round_agent, prune_with_agent, train_agent, uniform_baseline, DriverConfig, EpisodeCounter,
    EpisodeSummary, ModelConfig, NullSink, PruneResult,
};
use purl_core::env::{reward, EnvConfig, PruneEnv, RewardMode, RewardParams, RewardVariant, SignConvention};
use purl_core::pruning::prune_by_std;
use purl_core::seed::derive_seed;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn variant(name: &str) -> Result<RewardVariant, String> {
    match name {
        "r1" => Ok(RewardVariant::R1),
        "r2" => Ok(RewardVariant::R2),
        "r3" => Ok(RewardVariant::R3),
        other => Err(format!("unknown reward variant {other:?}")),
    }
}

/// Reward over an `n x n` grid of accuracy (rows, 0 to 1) and sparsity
/// (columns, 0 to 1), row-major.
#[wasm_bindgen(js_name = rewardSurface)]
pub fn reward_surface(
    variant_name: &str,
    as_printed: bool,
    target_accuracy: f64,
    target_sparsity: f64,
    beta: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let v = variant(variant_name)?;
    if n < 2 {
        return Err("grid needs at least 2 points per side".into());
    }
    let rp = RewardParams {
        target_accuracy,
        target_sparsity,
        beta,
        sign: if as_printed {
            SignConvention::AsPrinted
        } else {
            SignConvention::ProseCorrected
        },
    };
    let step = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(reward(v, i as f64 * step, j as f64 * step, &rp));
        }
    }
    Ok(out)
}

/// Settings sized for a browser tab: a 4-layer MLP on an 8-feature blob task.
pub fn demo_config(reward_mode: RewardMode) -> (SyntheticSpec, ModelConfig, EnvConfig, AgentConfig, DriverConfig) {
    let spec = SyntheticSpec {
        features: 8,
        train_examples: 1024,
        test_examples: 512,
        noise: 1.0,
        ..Default::default()
    };
    let model = ModelConfig {
        hidden_sizes: vec![32, 32, 32],
        pretrain_epochs: 8,
        ..Default::default()
    };
    let env = EnvConfig {
        reward_mode,
        retrain_subset_size: 128,
        ..Default::default()
    };
    let driver = DriverConfig {
        fine_tune_epochs: 5,
        ..Default::default()
    };
    (spec, model, env, AgentConfig::default(), driver)
}

#[derive(Serialize)]
struct Comparison<'a> {
    purl: &'a PruneResult,
    uniform_accuracy: f64,
    uniform_sparsity: f64,
}

/// One pre-trained model, its pruning environment and a DQN agent.
#[wasm_bindgen]
pub struct Demo {
    env: PruneEnv,
    agent: DqnAgent,
    driver: DriverConfig,
    counter: EpisodeCounter,
    episodes: Vec<EpisodeSummary>,
}

#[wasm_bindgen]
impl Demo {
    /// `reward_mode` is `"dense"` or `"sparse"`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, reward_mode: &str) -> Result<Demo, String> {
        let mode = match reward_mode {
            "dense" => RewardMode::Dense,
            "sparse" => RewardMode::Sparse,
            other => return Err(format!("unknown reward mode {other:?}")),
        };
        let seed = u64::from(seed);
        let (spec, model, env_cfg, agent_cfg, mut driver) = demo_config(mode);
        driver.seed = seed;
        let (train, test) = spec.generate().map_err(err)?;
        let data = Arc::new(
            TaskData::new(
                train,
                test,
                env_cfg.retrain_subset_size,
                derive_seed(seed, "retrain-subset"),
            )
            .map_err(err)?,
        );
        let net = purl_core::driver::pretrain(&data, &model, derive_seed(seed, "model")).map_err(err)?;
        let env = PruneEnv::new(net, data, env_cfg, derive_seed(seed, "env")).map_err(err)?;
        let agent = make_round_agent(&env, &agent_cfg, seed, 0).map_err(err)?;
        Ok(Demo {
            env,
            agent,
            driver,
            counter: EpisodeCounter::default(),
            episodes: Vec::new(),
        })
    }

    pub fn layers(&self) -> usize {
        self.env.num_layers()
    }

    /// `[rows, cols]` of a layer's weight matrix.
    #[wasm_bindgen(js_name = layerShape)]
    pub fn layer_shape(&self, layer: usize) -> Vec<u32> {
        let w = self.env.pristine().layer(layer).weights();
        vec![w.rows() as u32, w.cols() as u32]
    }

    #[wasm_bindgen(js_name = baselineAccuracy)]
    pub fn baseline_accuracy(&self) -> f64 {
        self.env.baseline_accuracy()
    }

    #[wasm_bindgen(js_name = actionGrid)]
    pub fn action_grid(&self) -> Vec<f64> {
        self.env.config().action_grid.clone()
    }

    #[wasm_bindgen(js_name = layerWeights)]
    pub fn layer_weights(&self, layer: usize) -> Vec<f64> {
        self.env.pristine().layer(layer).weights().as_slice().to_vec()
    }

    /// Keep-mask (1 kept, 0 pruned) of the unpruned layer after the std rule at `alpha`.
    #[wasm_bindgen(js_name = layerMask)]
    pub fn layer_mask(&self, layer: usize, alpha: f64) -> Result<Vec<u8>, String> {
        let mut l = self.env.pristine().layer(layer).clone();
        prune_by_std(&mut l, layer, alpha).map_err(err)?;
        Ok(l.mask().iter().map(|&k| u8::from(k)).collect())
    }

    /// Layer sparsity for every alpha of the action grid.
    #[wasm_bindgen(js_name = sparsityCurve)]
    pub fn sparsity_curve(&self, layer: usize) -> Result<Vec<f64>, String> {
        let base = self.env.pristine().layer(layer);
        let total = base.weights().len() as f64;
        self.env
            .config()
            .action_grid
            .iter()
            .map(|&a| {
                let mut l = base.clone();
                prune_by_std(&mut l, layer, a).map_err(err)?;
                Ok(l.pruned_count() as f64 / total)
            })
            .collect()
    }

    #[wasm_bindgen(js_name = episodesDone)]
    pub fn episodes_done(&self) -> usize {
        self.episodes.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.agent.epsilon()
    }

    /// Runs `count` more training episodes; returns their summaries as JSON.
    pub fn train(&mut self, count: usize) -> Result<String, String> {
        let new = train_agent(
            &mut self.env,
            &mut self.agent,
            count,
            0,
            &mut self.counter,
            &mut NullSink,
        )
        .map_err(err)?;
        let json = serde_json::to_string(&new).map_err(err)?;
        self.episodes.extend(new);
        Ok(json)
    }

    /// Stage 2 and fine-tuning, plus a uniform baseline at the same sparsity, as JSON.
    pub fn prune(&mut self) -> Result<String, String> {
        let mut result = prune_with_agent(
            &mut self.env,
            &mut self.agent,
            &self.driver,
            0,
            &mut self.counter,
            &mut NullSink,
        )
        .map_err(err)?;
        fine_tune_logged(&mut result, self.env.data(), &self.driver, 0, &mut NullSink).map_err(err)?;
        let uniform = uniform_baseline(
            self.env.pristine(),
            result.sparsity.global,
            self.env.data(),
            &self.driver,
            &mut NullSink,
        )
        .map_err(err)?;
        serde_json::to_string(&Comparison {
            purl: &result,
            uniform_accuracy: uniform.final_accuracy(),
            uniform_sparsity: uniform.sparsity.global,
        })
        .map_err(err)
    }
}
