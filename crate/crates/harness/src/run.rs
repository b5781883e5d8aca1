//! Single-run entry points shared by the CLI, the ablation runner and tests.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use purl_core::agent::DqnAgent;
use purl_core::data::TaskData;
use purl_core::driver::{
    self, fine_tune_logged, make_round_agent, prune_with_agent, train_agent, EpisodeCounter, EpisodeSummary,
    PruneResult, StepSink,
};
use purl_core::env::PruneEnv;
use purl_core::nn::{Checkpoint, Network};
use purl_core::seed::derive_seed;

use crate::config::ExperimentConfig;
use crate::dataset_io::load_splits;
use crate::error::Result;
use crate::records::CsvSink;

/// Data with its retraining subset, plus the trained model to be pruned.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Arc<TaskData>,
    pub model: Network,
}

/// Loads data, draws the retraining subset and pre-trains the model, all seeded from `seed`.
pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let (train, test) = load_splits(cfg)?;
    prepare_with(cfg, seed, train, test)
}

pub fn prepare_with(
    cfg: &ExperimentConfig,
    seed: u64,
    train: purl_core::data::Dataset,
    test: purl_core::data::Dataset,
) -> Result<Prepared> {
    let data = Arc::new(TaskData::new(
        train,
        test,
        cfg.env.retrain_subset_size,
        derive_seed(seed, "retrain-subset"),
    )?);
    let model = driver::pretrain(&data, &cfg.model, derive_seed(seed, "model"))?;
    Ok(Prepared { data, model })
}

pub fn make_env(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<PruneEnv> {
    Ok(PruneEnv::new(
        prepared.model.clone(),
        prepared.data.clone(),
        cfg.env.clone(),
        derive_seed(seed, "env"),
    )?)
}

/// Full pipeline: every round of agent training, stage-2 pruning and fine-tuning.
pub fn run_single(cfg: &ExperimentConfig, seed: u64, sink: &mut dyn StepSink) -> Result<PruneResult> {
    let prepared = prepare(cfg, seed)?;
    run_prepared(cfg, &prepared, seed, sink)
}

pub fn run_prepared(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    seed: u64,
    sink: &mut dyn StepSink,
) -> Result<PruneResult> {
    let mut env = make_env(cfg, prepared, seed)?;
    let mut driver_cfg = cfg.driver.clone();
    driver_cfg.seed = seed;
    let state_dim = env.state_dim();
    let actions = env.num_actions();
    let result = driver::run_iterative(
        &mut env,
        |round| {
            DqnAgent::new(
                state_dim,
                actions,
                cfg.agent.clone(),
                derive_seed(seed, &format!("agent/{round}")),
            )
        },
        &driver_cfg,
        sink,
    )?;
    Ok(result)
}

/// Stage 1 only: returns the trained agent and the episode summaries.
pub fn train_only(
    cfg: &ExperimentConfig,
    seed: u64,
    sink: &mut dyn StepSink,
) -> Result<(DqnAgent, Vec<EpisodeSummary>)> {
    let prepared = prepare(cfg, seed)?;
    let mut env = make_env(cfg, &prepared, seed)?;
    let mut agent = make_round_agent(&env, &cfg.agent, seed, 0)?;
    let mut counter = EpisodeCounter::default();
    let episodes = train_agent(&mut env, &mut agent, cfg.driver.max_episodes, 0, &mut counter, sink)?;
    Ok((agent, episodes))
}

/// Stage 2 and fine-tuning with an agent loaded from a `qnet` checkpoint.
pub fn prune_with_checkpoint(
    cfg: &ExperimentConfig,
    seed: u64,
    qnet: &Checkpoint,
    sink: &mut dyn StepSink,
) -> Result<PruneResult> {
    let prepared = prepare(cfg, seed)?;
    let mut env = make_env(cfg, &prepared, seed)?;
    let mut agent = make_round_agent(&env, &cfg.agent, seed, 0)?;
    agent.load_checkpoint(qnet)?;
    let mut driver_cfg = cfg.driver.clone();
    driver_cfg.seed = seed;
    let mut counter = EpisodeCounter::default();
    let mut result = prune_with_agent(&mut env, &mut agent, &driver_cfg, 0, &mut counter, sink)?;
    fine_tune_logged(&mut result, &prepared.data, &driver_cfg, 0, sink)?;
    Ok(result)
}

/// Uniform magnitude baseline on the same prepared model.
pub fn run_baseline(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    target_sparsity: f64,
    seed: u64,
    sink: &mut dyn StepSink,
) -> Result<PruneResult> {
    let mut driver_cfg = cfg.driver.clone();
    driver_cfg.seed = seed;
    Ok(driver::uniform_baseline(
        &prepared.model,
        target_sparsity,
        &prepared.data,
        &driver_cfg,
        sink,
    )?)
}

/// Writes `metrics.csv`, `result.json` and `checkpoint.json` for a full run into `out`.
pub fn run_single_to_dir(cfg: &ExperimentConfig, seed: u64, run_id: &str, out: &Path) -> Result<PruneResult> {
    fs::create_dir_all(out)?;
    let mut sink = CsvSink::create(&out.join("metrics.csv"), run_id, seed)?;
    let result = run_single(cfg, seed, &mut sink)?;
    write_result(out, &result, seed)?;
    Ok(result)
}

pub fn write_result(out: &Path, result: &PruneResult, seed: u64) -> Result<()> {
    fs::write(out.join("result.json"), serde_json::to_string_pretty(result)?)?;
    Checkpoint::new(result.network.clone(), seed).save(out.join("checkpoint.json"))?;
    Ok(())
}
