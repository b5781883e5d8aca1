//! The pruning MDP. An episode walks the layers input to output; each step
//! prunes one layer with the chosen action, optionally retrains on a small
//! subset, and hands back a state and a reward.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TaskData;
use crate::error::{Error, Result};
use crate::nn::{evaluate_accuracy, retrain, Network, SgdConfig};
use crate::pruning::{prune_by_magnitude_target, prune_by_std, sparsity_report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardVariant {
    R1,
    R2,
    R3,
}

/// Sign of the accuracy term in R2/R3. `AsPrinted` negates the whole sum,
/// which punishes beating the accuracy target; `ProseCorrected` rewards it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    AsPrinted,
    ProseCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Retrain, evaluate and reward after every layer.
    Dense,
    /// Zero reward until the last layer; retrain and evaluate once at the end.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// `(l / n, accuracy, global sparsity)`.
    Low,
    /// `(a_1, p_1, ..., a_n, p_n)`, zero for layers not yet pruned.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneRule {
    /// Prune `|w| < alpha * sigma`.
    Std,
    /// Action `k` of `m` sets a layer sparsity target of `k / m`.
    MagnitudeTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyTarget {
    Absolute(f64),
    /// Fraction of the unpruned network's test accuracy.
    Relative(f64),
}

impl AccuracyTarget {
    pub fn resolve(self, baseline_accuracy: f64) -> f64 {
        match self {
            AccuracyTarget::Absolute(a) => a,
            AccuracyTarget::Relative(r) => r * baseline_accuracy,
        }
    }
}

/// `0, step, 2*step, ...` up to and including `max`, rounded to 12 decimals.
pub fn alpha_grid(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|k| (k as f64 * step * 1e12).round() / 1e12).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub target_accuracy: AccuracyTarget,
    pub target_sparsity: f64,
    pub beta: f64,
    pub action_grid: Vec<f64>,
    pub prune_rule: PruneRule,
    pub reward_variant: RewardVariant,
    pub r2r3_sign: SignConvention,
    pub reward_mode: RewardMode,
    pub state_kind: StateKind,
    pub retrain_subset_size: usize,
    pub retrain_epochs: usize,
    pub retrain: SgdConfig,
    /// Episode ends early when measured accuracy drops below this. `None` disables.
    pub early_stop_threshold: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            target_accuracy: AccuracyTarget::Relative(0.95),
            target_sparsity: 0.6,
            beta: 5.0,
            action_grid: alpha_grid(0.1, 2.2),
            prune_rule: PruneRule::Std,
            reward_variant: RewardVariant::R1,
            r2r3_sign: SignConvention::ProseCorrected,
            reward_mode: RewardMode::Dense,
            state_kind: StateKind::Low,
            retrain_subset_size: 256,
            retrain_epochs: 1,
            retrain: SgdConfig::default(),
            early_stop_threshold: Some(0.001),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = &self.action_grid;
        if grid.first() != Some(&0.0) {
            return Err(Error::config("action grid must start at 0.0"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("action grid must be finite and strictly increasing"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::config("beta must be positive"));
        }
        if !(self.target_sparsity > 0.0 && self.target_sparsity <= 1.0) {
            return Err(Error::config("target sparsity must lie in (0, 1]"));
        }
        let ta = match self.target_accuracy {
            AccuracyTarget::Absolute(a) | AccuracyTarget::Relative(a) => a,
        };
        if !(ta > 0.0 && ta <= 1.0) {
            return Err(Error::config("target accuracy must lie in (0, 1]"));
        }
        if self.retrain_subset_size == 0 {
            return Err(Error::config("retrain subset must be nonempty"));
        }
        self.retrain.validate()
    }

    pub fn state_dim(&self, layers: usize) -> usize {
        match self.state_kind {
            StateKind::Low => 3,
            StateKind::High => 2 * layers,
        }
    }
}

/// Everything a reward function needs besides `A(s)` and `P(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub target_accuracy: f64,
    pub target_sparsity: f64,
    pub beta: f64,
    pub sign: SignConvention,
}

fn sparsity_shortfall(p: f64, rp: &RewardParams) -> f64 {
    (1.0 - p / rp.target_sparsity).max(0.0)
}

/// `-beta * (max(1 - A/T_A, 0) + max(1 - P/T_P, 0))`, always in `[-2 beta, 0]` for `A, P` in `[0, 1]`.
pub fn reward_r1(accuracy: f64, sparsity: f64, rp: &RewardParams) -> f64 {
    -rp.beta * ((1.0 - accuracy / rp.target_accuracy).max(0.0) + sparsity_shortfall(sparsity, rp))
}

fn signed_upside(upside: f64, sparsity: f64, rp: &RewardParams) -> f64 {
    match rp.sign {
        SignConvention::AsPrinted => -rp.beta * (upside + sparsity_shortfall(sparsity, rp)),
        SignConvention::ProseCorrected => rp.beta * upside - rp.beta * sparsity_shortfall(sparsity, rp),
    }
}

/// Linear accuracy upside: the accuracy term is `A/T_A - 1`, unclipped.
pub fn reward_r2(accuracy: f64, sparsity: f64, rp: &RewardParams) -> f64 {
    signed_upside(accuracy / rp.target_accuracy - 1.0, sparsity, rp)
}

/// Cubic accuracy upside: the accuracy term is `(A/T_A)^3 - 1`.
pub fn reward_r3(accuracy: f64, sparsity: f64, rp: &RewardParams) -> f64 {
    signed_upside((accuracy / rp.target_accuracy).powi(3) - 1.0, sparsity, rp)
}

pub fn reward(variant: RewardVariant, accuracy: f64, sparsity: f64, rp: &RewardParams) -> f64 {
    match variant {
        RewardVariant::R1 => reward_r1(accuracy, sparsity, rp),
        RewardVariant::R2 => reward_r2(accuracy, sparsity, rp),
        RewardVariant::R3 => reward_r3(accuracy, sparsity, rp),
    }
}

/// Prunes `layer` of `net` with action value `value` under `rule`.
/// A layer with nothing left unmasked is left as is.
pub fn prune_layer(net: &mut Network, layer: usize, value: f64, rule: PruneRule) -> Result<()> {
    match rule {
        PruneRule::Std => match prune_by_std(net.layer_mut(layer), layer, value) {
            Ok(_) | Err(Error::DegenerateLayer(_)) => Ok(()),
            Err(e) => Err(e),
        },
        PruneRule::MagnitudeTarget => prune_by_magnitude_target(net.layer_mut(layer), value).map(|_| ()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvState {
    Low { layer: f64, accuracy: f64, sparsity: f64 },
    High(Vec<f64>),
}

impl EnvState {
    pub fn features(&self) -> Vec<f64> {
        match self {
            EnvState::Low {
                layer,
                accuracy,
                sparsity,
            } => vec![*layer, *accuracy, *sparsity],
            EnvState::High(v) => v.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EnvState::Low { .. } => 3,
            EnvState::High(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub layer: usize,
    /// Value of the chosen action (alpha, or a sparsity target under the magnitude rule).
    pub alpha: f64,
    /// Test accuracy after this step. Carries the last measured value when the
    /// step did not evaluate (sparse mode, non-terminal).
    pub accuracy: f64,
    pub layer_sparsity: f64,
    pub sparsity: f64,
    pub evaluated: bool,
    pub early_stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One pruning environment. Owns its network; never shares it.
#[derive(Debug, Clone)]
pub struct PruneEnv {
    cfg: EnvConfig,
    pristine: Network,
    pristine_checksum: u64,
    net: Network,
    data: Arc<TaskData>,
    rng: ChaCha8Rng,
    baseline_accuracy: f64,
    target_accuracy: f64,
    cursor: usize,
    done: bool,
    last_accuracy: f64,
    layer_accuracy: Vec<f64>,
    layer_sparsity: Vec<f64>,
    episode_retrains: usize,
    total_retrains: usize,
    episodes: usize,
}

impl PruneEnv {
    /// Builds an environment around `pristine`, measuring its test accuracy as the baseline.
    pub fn new(pristine: Network, data: Arc<TaskData>, cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if pristine.input_dim() != data.features() || pristine.output_dim() != data.classes() {
            return Err(Error::config(format!(
                "network maps {} -> {} but data has {} features and {} classes",
                pristine.input_dim(),
                pristine.output_dim(),
                data.features(),
                data.classes()
            )));
        }
        let baseline_accuracy = evaluate_accuracy(&pristine, &data.test)?;
        let target_accuracy = cfg.target_accuracy.resolve(baseline_accuracy);
        if !(target_accuracy > 0.0) {
            return Err(Error::config("resolved accuracy target is zero"));
        }
        let n = pristine.num_layers();
        Ok(Self {
            pristine_checksum: pristine.checksum(),
            net: pristine.clone(),
            pristine,
            data,
            rng: ChaCha8Rng::seed_from_u64(seed),
            baseline_accuracy,
            target_accuracy,
            cursor: 0,
            done: false,
            last_accuracy: baseline_accuracy,
            layer_accuracy: vec![0.0; n],
            layer_sparsity: vec![0.0; n],
            episode_retrains: 0,
            total_retrains: 0,
            episodes: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn set_reward_mode(&mut self, mode: RewardMode) {
        self.cfg.reward_mode = mode;
    }

    pub fn num_layers(&self) -> usize {
        self.pristine.num_layers()
    }

    pub fn num_actions(&self) -> usize {
        self.cfg.action_grid.len()
    }

    pub fn state_dim(&self) -> usize {
        self.cfg.state_dim(self.num_layers())
    }

    pub fn baseline_accuracy(&self) -> f64 {
        self.baseline_accuracy
    }

    pub fn target_accuracy(&self) -> f64 {
        self.target_accuracy
    }

    pub fn reward_params(&self) -> RewardParams {
        RewardParams {
            target_accuracy: self.target_accuracy,
            target_sparsity: self.cfg.target_sparsity,
            beta: self.cfg.beta,
            sign: self.cfg.r2r3_sign,
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn pristine(&self) -> &Network {
        &self.pristine
    }

    pub fn pristine_checksum(&self) -> u64 {
        self.pristine_checksum
    }

    pub fn data(&self) -> &Arc<TaskData> {
        &self.data
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Subset retraining passes performed in the current episode.
    pub fn episode_retrains(&self) -> usize {
        self.episode_retrains
    }

    pub fn total_retrains(&self) -> usize {
        self.total_retrains
    }

    /// Number of `reset` calls so far, i.e. episodes started.
    pub fn episodes_started(&self) -> usize {
        self.episodes
    }

    /// Value of action `index`: alpha under the std rule, a sparsity target under the magnitude rule.
    pub fn action_value(&self, index: usize) -> f64 {
        match self.cfg.prune_rule {
            PruneRule::Std => self.cfg.action_grid[index],
            PruneRule::MagnitudeTarget => index as f64 / self.cfg.action_grid.len() as f64,
        }
    }

    /// Restores the pristine network and starts a new episode.
    pub fn reset(&mut self) -> EnvState {
        self.episodes += 1;
        self.restore();
        self.build_state()
    }

    fn restore(&mut self) {
        self.net.clone_from(&self.pristine);
        self.cursor = 0;
        self.done = false;
        self.last_accuracy = self.baseline_accuracy;
        self.layer_accuracy.iter_mut().for_each(|v| *v = 0.0);
        self.layer_sparsity.iter_mut().for_each(|v| *v = 0.0);
        self.episode_retrains = 0;
    }

    pub fn build_state(&self) -> EnvState {
        match self.cfg.state_kind {
            StateKind::Low => EnvState::Low {
                layer: self.cursor as f64 / self.num_layers() as f64,
                accuracy: self.last_accuracy,
                sparsity: sparsity_report(&self.net).global,
            },
            StateKind::High => {
                let mut v = vec![0.0; 2 * self.num_layers()];
                for i in 0..self.cursor {
                    v[2 * i] = self.layer_accuracy[i];
                    v[2 * i + 1] = self.layer_sparsity[i];
                }
                EnvState::High(v)
            }
        }
    }

    fn retrain_subset(&mut self) -> Result<()> {
        retrain(
            &mut self.net,
            &self.data.retrain,
            self.cfg.retrain_epochs,
            &self.cfg.retrain,
            &mut self.rng,
        )?;
        self.episode_retrains += 1;
        self.total_retrains += 1;
        Ok(())
    }

    /// Prunes the current layer with `action`, then advances the episode.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if action >= self.num_actions() {
            return Err(Error::config(format!(
                "action {action} outside grid of {} actions",
                self.num_actions()
            )));
        }
        let layer = self.cursor;
        let value = self.action_value(action);
        prune_layer(&mut self.net, layer, value, self.cfg.prune_rule)?;
        let n = self.num_layers();
        let terminal = layer + 1 == n;
        let evaluate = match self.cfg.reward_mode {
            RewardMode::Dense => true,
            RewardMode::Sparse => terminal,
        };
        if evaluate {
            self.retrain_subset()?;
            self.last_accuracy = evaluate_accuracy(&self.net, &self.data.test)?;
        }
        let report = sparsity_report(&self.net);
        let accuracy = self.last_accuracy;
        let reward = if evaluate {
            reward(self.cfg.reward_variant, accuracy, report.global, &self.reward_params())
        } else {
            0.0
        };
        self.layer_accuracy[layer] = accuracy;
        self.layer_sparsity[layer] = report.per_layer[layer];
        self.cursor += 1;
        let early_stopped = evaluate && self.cfg.early_stop_threshold.is_some_and(|t| accuracy < t);
        self.done = terminal || early_stopped;
        Ok(StepOutcome {
            next_state: self.build_state(),
            reward,
            done: self.done,
            info: StepInfo {
                layer,
                alpha: value,
                accuracy,
                layer_sparsity: report.per_layer[layer],
                sparsity: report.global,
                evaluated: evaluate,
                early_stopped,
            },
        })
    }

    /// Replaces the pristine network, e.g. with the fine-tuned model of a previous round.
    pub fn set_pristine(&mut self, net: Network) -> Result<()> {
        if net.num_layers() != self.pristine.num_layers() {
            return Err(Error::config("replacement network has a different layer count"));
        }
        self.baseline_accuracy = evaluate_accuracy(&net, &self.data.test)?;
        self.pristine_checksum = net.checksum();
        self.pristine = net;
        self.restore();
        Ok(())
    }

    /// Sets a new sparsity target (iterative rounds).
    pub fn set_target_sparsity(&mut self, target: f64) -> Result<()> {
        let mut cfg = self.cfg.clone();
        cfg.target_sparsity = target;
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }
}
