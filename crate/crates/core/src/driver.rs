//! End-to-end pruning runs: train the agent, prune with it, fine-tune.
//!
//! A run is one or more rounds. Each round trains a fresh agent against the
//! current model, takes several greedy rollouts, collapses them into one action
//! per layer, applies those actions to the round's starting model and
//! fine-tunes. The fine-tuned model seeds the next round, so masks only grow.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ActionMode, AgentConfig, DqnAgent, Rollout, Transition};
use crate::data::TaskData;
use crate::env::{prune_layer, PruneEnv, RewardMode, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::{evaluate_accuracy, retrain, Network, SgdConfig};
use crate::pruning::{prune_by_magnitude_target, sparsity_report, SparsityReport};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Selection {
    /// Mean action value per layer across rollouts, snapped to the nearest grid point.
    Average,
    /// Action vector of the rollout with the highest total reward.
    BestOf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Round {
    pub target_sparsity: f64,
    pub max_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverConfig {
    pub max_episodes: usize,
    pub stage2_rollouts: usize,
    pub stage2_selection: Stage2Selection,
    pub fine_tune_epochs: usize,
    pub fine_tune: SgdConfig,
    /// Iterative rounds. Empty means a single round at the environment's target sparsity.
    pub schedule: Vec<Round>,
    pub seed: u64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            max_episodes: 55,
            stage2_rollouts: 5,
            stage2_selection: Stage2Selection::Average,
            fine_tune_epochs: 10,
            fine_tune: SgdConfig::default(),
            schedule: Vec::new(),
            seed: 0,
        }
    }
}

impl DriverConfig {
    /// Two gradual rounds, 60% then 90% sparsity, with the default episode budget each.
    /// The dense reward tends to overshoot its target, so the second round has to sit well above the first.
    pub fn iterative_default_schedule() -> Vec<Round> {
        vec![
            Round {
                target_sparsity: 0.6,
                max_episodes: 55,
            },
            Round {
                target_sparsity: 0.9,
                max_episodes: 55,
            },
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage2_rollouts == 0 {
            return Err(Error::config("stage-2 rollouts must be at least 1"));
        }
        if self
            .schedule
            .windows(2)
            .any(|w| !(w[0].target_sparsity < w[1].target_sparsity))
        {
            return Err(Error::config("schedule sparsity targets must be strictly increasing"));
        }
        if self
            .schedule
            .iter()
            .any(|r| !(r.target_sparsity > 0.0 && r.target_sparsity <= 1.0))
        {
            return Err(Error::config("schedule targets must lie in (0, 1]"));
        }
        self.fine_tune.validate()
    }

    /// The rounds this config will run, resolving an empty schedule to one round.
    pub fn rounds(&self, env_target_sparsity: f64) -> Vec<Round> {
        if self.schedule.is_empty() {
            vec![Round {
                target_sparsity: env_target_sparsity,
                max_episodes: self.max_episodes,
            }]
        } else {
            self.schedule.clone()
        }
    }
}

/// Shape and pre-training settings of the model that gets pruned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_sizes: Vec<usize>,
    pub pretrain_epochs: usize,
    pub pretrain: SgdConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64; 5],
            pretrain_epochs: 10,
            pretrain: SgdConfig::default(),
        }
    }
}

/// Trains a fresh model on the full train split.
pub fn pretrain(data: &TaskData, cfg: &ModelConfig, seed: u64) -> Result<Network> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![data.features()];
    sizes.extend(&cfg.hidden_sizes);
    sizes.push(data.classes());
    let mut net = Network::random(&sizes, &mut rng)?;
    retrain(&mut net, &data.train, cfg.pretrain_epochs, &cfg.pretrain, &mut rng)?;
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Agent training episodes.
    Train,
    /// Greedy evaluation rollouts of the trained agent.
    Stage2,
    /// Application of the chosen actions to the round's starting model.
    Apply,
    /// Fine-tuning epochs; `step` is the epoch.
    FineTune,
}

/// One logged event of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub phase: Phase,
    pub round: usize,
    /// Episode index, counted per phase across the whole run.
    pub episode: usize,
    pub step: usize,
    pub layer: Option<usize>,
    pub alpha: Option<f64>,
    pub layer_sparsity: Option<f64>,
    pub global_sparsity: f64,
    pub accuracy: f64,
    pub reward: Option<f64>,
}

impl StepLog {
    fn from_outcome(phase: Phase, round: usize, episode: usize, out: &StepOutcome) -> Self {
        Self {
            phase,
            round,
            episode,
            step: out.info.layer,
            layer: Some(out.info.layer),
            alpha: Some(out.info.alpha),
            layer_sparsity: Some(out.info.layer_sparsity),
            global_sparsity: out.info.sparsity,
            accuracy: out.info.accuracy,
            reward: Some(out.reward),
        }
    }
}

/// Receives every [`StepLog`] as it happens.
pub trait StepSink {
    fn record(&mut self, log: &StepLog) -> Result<()>;
}

impl StepSink for Vec<StepLog> {
    fn record(&mut self, log: &StepLog) -> Result<()> {
        self.push(log.clone());
        Ok(())
    }
}

/// Discards everything.
pub struct NullSink;

impl StepSink for NullSink {
    fn record(&mut self, _: &StepLog) -> Result<()> {
        Ok(())
    }
}

/// Per-episode totals from agent training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub round: usize,
    pub episode: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub terminal_reward: f64,
    pub accuracy: f64,
    pub sparsity: f64,
    pub early_stopped: bool,
}

/// Running episode counters, so indices keep increasing across rounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpisodeCounter {
    pub train: usize,
    pub stage2: usize,
}

/// Stage 1: `episodes` epsilon-greedy episodes with replay training after every step.
pub fn train_agent(
    env: &mut PruneEnv,
    agent: &mut DqnAgent,
    episodes: usize,
    round: usize,
    counter: &mut EpisodeCounter,
    sink: &mut dyn StepSink,
) -> Result<Vec<EpisodeSummary>> {
    agent.check_env(env)?;
    let mut summaries = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let episode = counter.train;
        counter.train += 1;
        let mut state = env.reset().features();
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let action = agent.select_action(&state, ActionMode::Explore)?;
            let out = env.step(action)?;
            let next = out.next_state.features();
            agent.observe(Transition {
                state: std::mem::replace(&mut state, next.clone()),
                action,
                reward: out.reward,
                next_state: next,
                done: out.done,
            });
            for _ in 0..agent.config().updates_per_step {
                agent.train_step()?;
            }
            sink.record(&StepLog::from_outcome(Phase::Train, round, episode, &out))?;
            total += out.reward;
            steps += 1;
            if out.done {
                summaries.push(EpisodeSummary {
                    round,
                    episode,
                    steps,
                    total_reward: total,
                    terminal_reward: out.reward,
                    accuracy: out.info.accuracy,
                    sparsity: out.info.sparsity,
                    early_stopped: out.info.early_stopped,
                });
                break;
            }
        }
    }
    Ok(summaries)
}

/// Snaps `value` to the nearest entry of the increasing `grid`; exact ties go to the smaller entry.
pub fn snap_to_grid(value: f64, grid: &[f64]) -> usize {
    const TIE: f64 = 1e-9;
    let mut best = 0;
    for (i, &g) in grid.iter().enumerate().skip(1) {
        let d_best = (value - grid[best]).abs();
        let d = (value - g).abs();
        if d < d_best - TIE {
            best = i;
        }
    }
    best
}

/// Collapses rollouts into one action index per layer.
pub fn select_actions(rollouts: &[Rollout], values: &[f64], layers: usize, how: Stage2Selection) -> Vec<usize> {
    match how {
        Stage2Selection::Average => (0..layers)
            .map(|l| {
                let seen: Vec<f64> = rollouts.iter().filter_map(|r| r.alphas.get(l).copied()).collect();
                if seen.is_empty() {
                    0
                } else {
                    snap_to_grid(seen.iter().sum::<f64>() / seen.len() as f64, values)
                }
            })
            .collect(),
        Stage2Selection::BestOf => {
            let mut best = 0;
            for (i, r) in rollouts.iter().enumerate() {
                if r.total_reward() > rollouts[best].total_reward() {
                    best = i;
                }
            }
            let mut actions = rollouts.get(best).map(|r| r.actions.clone()).unwrap_or_default();
            actions.resize(layers, 0);
            actions
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneResult {
    #[serde(skip)]
    pub network: Network,
    pub actions: Vec<usize>,
    pub alphas: Vec<f64>,
    pub sparsity: SparsityReport,
    pub accuracy_before_prune: f64,
    pub accuracy_before_fine_tune: f64,
    pub accuracy_after_fine_tune: Option<f64>,
    pub fine_tune_trace: Vec<f64>,
    /// Action values of each stage-2 rollout, per layer.
    pub rollout_alphas: Vec<Vec<f64>>,
    pub episodes: Vec<EpisodeSummary>,
    pub rounds: usize,
}

impl PruneResult {
    pub fn final_accuracy(&self) -> f64 {
        self.accuracy_after_fine_tune.unwrap_or(self.accuracy_before_fine_tune)
    }
}

/// Stage 2: greedy rollouts in dense mode, collapse, apply once to the starting model.
/// The returned network is not fine-tuned.
pub fn prune_with_agent(
    env: &mut PruneEnv,
    agent: &mut DqnAgent,
    cfg: &DriverConfig,
    round: usize,
    counter: &mut EpisodeCounter,
    sink: &mut dyn StepSink,
) -> Result<PruneResult> {
    cfg.validate()?;
    let original_mode = env.config().reward_mode;
    env.set_reward_mode(RewardMode::Dense);
    let mut rollouts = Vec::with_capacity(cfg.stage2_rollouts);
    let outcome = (|| {
        for _ in 0..cfg.stage2_rollouts {
            let episode = counter.stage2;
            counter.stage2 += 1;
            let r = agent.greedy_rollout(env)?;
            for out in &r.outcomes {
                sink.record(&StepLog::from_outcome(Phase::Stage2, round, episode, out))?;
            }
            rollouts.push(r);
        }
        Ok::<_, Error>(())
    })();
    env.set_reward_mode(original_mode);
    outcome?;

    let values: Vec<f64> = (0..env.num_actions()).map(|i| env.action_value(i)).collect();
    let layers = env.num_layers();
    let actions = select_actions(&rollouts, &values, layers, cfg.stage2_selection);
    let rule = env.config().prune_rule;
    let mut net = env.pristine().clone();
    let accuracy_before_prune = env.baseline_accuracy();
    let mut accuracy = accuracy_before_prune;
    for (layer, &a) in actions.iter().enumerate() {
        prune_layer(&mut net, layer, values[a], rule)?;
        accuracy = evaluate_accuracy(&net, &env.data().test)?;
        let report = sparsity_report(&net);
        sink.record(&StepLog {
            phase: Phase::Apply,
            round,
            episode: round,
            step: layer,
            layer: Some(layer),
            alpha: Some(values[a]),
            layer_sparsity: Some(report.per_layer[layer]),
            global_sparsity: report.global,
            accuracy,
            reward: None,
        })?;
    }
    Ok(PruneResult {
        sparsity: sparsity_report(&net),
        network: net,
        alphas: actions.iter().map(|&a| values[a]).collect(),
        actions,
        accuracy_before_prune,
        accuracy_before_fine_tune: accuracy,
        accuracy_after_fine_tune: None,
        fine_tune_trace: Vec::new(),
        rollout_alphas: rollouts.into_iter().map(|r| r.alphas).collect(),
        episodes: Vec::new(),
        rounds: 1,
    })
}

/// Full-train-split retraining with masks enforced. Returns test accuracy after each epoch.
pub fn fine_tune(net: &mut Network, data: &TaskData, epochs: usize, sgd: &SgdConfig, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        retrain(net, &data.train, 1, sgd, &mut rng)?;
        trace.push(evaluate_accuracy(net, &data.test)?);
    }
    Ok(trace)
}

/// [`fine_tune`] with one `FineTune` log row per epoch; stores the trace on `result`.
pub fn fine_tune_logged(
    result: &mut PruneResult,
    data: &TaskData,
    cfg: &DriverConfig,
    round: usize,
    sink: &mut dyn StepSink,
) -> Result<()> {
    let seed = derive_seed(cfg.seed, &format!("fine-tune/{round}"));
    let trace = fine_tune(&mut result.network, data, cfg.fine_tune_epochs, &cfg.fine_tune, seed)?;
    let global = sparsity_report(&result.network).global;
    for (epoch, &acc) in trace.iter().enumerate() {
        sink.record(&StepLog {
            phase: Phase::FineTune,
            round,
            episode: round,
            step: epoch,
            layer: None,
            alpha: None,
            layer_sparsity: None,
            global_sparsity: global,
            accuracy: acc,
            reward: None,
        })?;
    }
    result.accuracy_after_fine_tune = trace.last().copied().or(Some(result.accuracy_before_fine_tune));
    result.fine_tune_trace = trace;
    Ok(())
}

/// Runs every round of `cfg` (one round when the schedule is empty).
///
/// `make_agent(round)` builds the agent for each round; it must match the
/// environment's state and action dimensions.
pub fn run_iterative(
    env: &mut PruneEnv,
    mut make_agent: impl FnMut(usize) -> Result<DqnAgent>,
    cfg: &DriverConfig,
    sink: &mut dyn StepSink,
) -> Result<PruneResult> {
    cfg.validate()?;
    let rounds = cfg.rounds(env.config().target_sparsity);
    let mut counter = EpisodeCounter::default();
    let mut episodes = Vec::new();
    let mut last: Option<PruneResult> = None;
    let accuracy_before_prune = env.baseline_accuracy();
    for (round, spec) in rounds.iter().enumerate() {
        let achieved = sparsity_report(env.pristine()).global;
        if spec.target_sparsity < achieved {
            return Err(Error::config(format!(
                "round {round} targets sparsity {} but the model is already at {achieved}",
                spec.target_sparsity
            )));
        }
        env.set_target_sparsity(spec.target_sparsity)?;
        let mut agent = make_agent(round)?;
        let mut ep = train_agent(env, &mut agent, spec.max_episodes, round, &mut counter, sink)?;
        episodes.append(&mut ep);
        let mut result = prune_with_agent(env, &mut agent, cfg, round, &mut counter, sink)?;
        fine_tune_logged(&mut result, env.data(), cfg, round, sink)?;
        if round + 1 < rounds.len() {
            env.set_pristine(result.network.clone())?;
        }
        last = Some(result);
    }
    let mut result = last.expect("at least one round");
    result.sparsity = sparsity_report(&result.network);
    result.episodes = episodes;
    result.rounds = rounds.len();
    result.accuracy_before_prune = accuracy_before_prune;
    Ok(result)
}

/// Agent seeded for `round` of a run with base seed `seed`.
pub fn make_round_agent(env: &PruneEnv, cfg: &AgentConfig, seed: u64, round: usize) -> Result<DqnAgent> {
    DqnAgent::new(
        env.state_dim(),
        env.num_actions(),
        cfg.clone(),
        derive_seed(seed, &format!("agent/{round}")),
    )
}

/// Prunes every layer to the same magnitude-based sparsity target, then fine-tunes
/// with the same budget a PuRL run would get.
pub fn uniform_baseline(
    net: &Network,
    target_sparsity: f64,
    data: &TaskData,
    cfg: &DriverConfig,
    sink: &mut dyn StepSink,
) -> Result<PruneResult> {
    cfg.validate()?;
    let accuracy_before_prune = evaluate_accuracy(net, &data.test)?;
    let mut pruned = net.clone();
    for layer in 0..pruned.num_layers() {
        prune_by_magnitude_target(pruned.layer_mut(layer), target_sparsity)?;
        let report = sparsity_report(&pruned);
        sink.record(&StepLog {
            phase: Phase::Apply,
            round: 0,
            episode: 0,
            step: layer,
            layer: Some(layer),
            alpha: Some(target_sparsity),
            layer_sparsity: Some(report.per_layer[layer]),
            global_sparsity: report.global,
            accuracy: evaluate_accuracy(&pruned, &data.test)?,
            reward: None,
        })?;
    }
    let accuracy_before_fine_tune = evaluate_accuracy(&pruned, &data.test)?;
    let n = pruned.num_layers();
    let mut result = PruneResult {
        sparsity: sparsity_report(&pruned),
        network: pruned,
        actions: Vec::new(),
        alphas: vec![target_sparsity; n],
        accuracy_before_prune,
        accuracy_before_fine_tune,
        accuracy_after_fine_tune: None,
        fine_tune_trace: Vec::new(),
        rollout_alphas: Vec::new(),
        episodes: Vec::new(),
        rounds: 1,
    };
    fine_tune_logged(&mut result, data, cfg, 0, sink)?;
    result.sparsity = sparsity_report(&result.network);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvState;

    fn rollout(alphas: &[f64], reward: f64) -> Rollout {
        let outcomes = alphas
            .iter()
            .map(|_| StepOutcome {
                next_state: EnvState::High(vec![]),
                reward: reward / alphas.len() as f64,
                done: false,
                info: crate::env::StepInfo {
                    layer: 0,
                    alpha: 0.0,
                    accuracy: 0.0,
                    layer_sparsity: 0.0,
                    sparsity: 0.0,
                    evaluated: true,
                    early_stopped: false,
                },
            })
            .collect();
        Rollout {
            actions: alphas.iter().map(|a| (a * 5.0).round() as usize).collect(),
            alphas: alphas.to_vec(),
            outcomes,
        }
    }

    fn grid02() -> Vec<f64> {
        crate::env::alpha_grid(0.2, 2.2)
    }

    #[test]
    fn snap_nearest_and_ties_low() {
        let g = grid02();
        let mean = (0.2 + 0.2 + 0.2 + 0.4 + 0.4) / 5.0;
        assert_eq!(g[snap_to_grid(mean, &g)], 0.2);
        assert_eq!(g[snap_to_grid((0.2 + 0.4) / 2.0, &g)], 0.2);
        assert_eq!(g[snap_to_grid(0.31, &g)], 0.4);
        assert_eq!(snap_to_grid(9.0, &g), g.len() - 1);
    }

    #[test]
    fn identical_rollouts_average_to_themselves() {
        let g = grid02();
        let r: Vec<Rollout> = (0..5).map(|_| rollout(&[0.4, 1.2, 2.2], -1.0)).collect();
        let picks = select_actions(&r, &g, 3, Stage2Selection::Average);
        assert_eq!(picks.iter().map(|&i| g[i]).collect::<Vec<_>>(), vec![0.4, 1.2, 2.2]);
    }

    #[test]
    fn best_of_takes_highest_reward() {
        let g = grid02();
        let r = vec![
            rollout(&[0.2, 0.2], -3.0),
            rollout(&[1.0, 0.4], -1.0),
            rollout(&[2.0, 2.0], -1.0),
        ];
        let picks = select_actions(&r, &g, 2, Stage2Selection::BestOf);
        assert_eq!(picks, vec![5, 2]);
    }

    #[test]
    fn short_rollouts_fill_missing_layers() {
        let g = grid02();
        let r = vec![rollout(&[0.4], -1.0), rollout(&[0.8, 0.6], -1.0)];
        let picks = select_actions(&r, &g, 3, Stage2Selection::Average);
        assert_eq!(picks.iter().map(|&i| g[i]).collect::<Vec<_>>(), vec![0.6, 0.6, 0.0]);
    }

    #[test]
    fn schedule_validation() {
        let cfg = DriverConfig {
            schedule: vec![
                Round {
                    target_sparsity: 0.6,
                    max_episodes: 3,
                },
                Round {
                    target_sparsity: 0.4,
                    max_episodes: 3,
                },
            ],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = DriverConfig {
            stage2_rollouts: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
