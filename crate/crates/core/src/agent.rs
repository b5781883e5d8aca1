//! DQN agent: an MLP Q-function over the discrete action grid, trained from a
//! uniform replay buffer against a periodically synced target network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{PruneEnv, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::{argmax, Adam, Checkpoint, Matrix, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Exploratory action selections over which epsilon decays linearly.
    pub epsilon_decay_steps: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Gradient steps between target-network syncs.
    pub target_sync_interval: usize,
    pub learning_rate: f64,
    pub hidden_sizes: Vec<usize>,
    /// Gradient steps taken after each environment step.
    pub updates_per_step: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 100,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync_interval: 100,
            learning_rate: 1e-3,
            hidden_sizes: vec![64, 64],
            updates_per_step: 8,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(Error::config("epsilon schedule must stay within [0, 1]"));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(Error::config(
                "replay capacity must be at least the (nonzero) batch size",
            ));
        }
        if self.target_sync_interval == 0 {
            return Err(Error::config("target sync interval must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("agent learning rate must be positive"));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::config("hidden layer widths must be nonzero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten when full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.items[i]
    }

    /// Uniform draw of `batch` indices, with replacement. `None` until the buffer holds `batch` items.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<usize>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some((0..batch).map(|_| rng.gen_range(0..self.items.len())).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Explore,
    Greedy,
}

/// Actions and outcomes of one full greedy episode.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub actions: Vec<usize>,
    pub alphas: Vec<f64>,
    pub outcomes: Vec<StepOutcome>,
}

impl Rollout {
    pub fn total_reward(&self) -> f64 {
        self.outcomes.iter().map(|o| o.reward).sum()
    }

    pub fn terminal(&self) -> Option<&StepOutcome> {
        self.outcomes.last()
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: AgentConfig,
    state_dim: usize,
    num_actions: usize,
    online: Network,
    target: Network,
    optimizer: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    explore_steps: usize,
    train_steps: usize,
}

impl DqnAgent {
    pub fn new(state_dim: usize, num_actions: usize, cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if state_dim == 0 || num_actions == 0 {
            return Err(Error::config("agent needs a nonempty state and action space"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![state_dim];
        sizes.extend(&cfg.hidden_sizes);
        sizes.push(num_actions);
        let online = Network::random(&sizes, &mut rng)?;
        Ok(Self {
            target: online.clone(),
            optimizer: Adam::new(&online, cfg.learning_rate),
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            online,
            state_dim,
            num_actions,
            rng,
            explore_steps: 0,
            train_steps: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn online(&self) -> &Network {
        &self.online
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    /// Replaces the online Q-network (and resets its optimizer state). Shapes must match.
    pub fn set_online(&mut self, net: Network) -> Result<()> {
        if net.input_dim() != self.state_dim || net.output_dim() != self.num_actions {
            return Err(Error::config("Q-network shape does not match the agent"));
        }
        self.optimizer = Adam::new(&net, self.cfg.learning_rate);
        self.online = net;
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        let frac = if self.cfg.epsilon_decay_steps == 0 {
            1.0
        } else {
            (self.explore_steps as f64 / self.cfg.epsilon_decay_steps as f64).min(1.0)
        };
        self.cfg.epsilon_start * (1.0 - frac) + self.cfg.epsilon_end * frac
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        let x = Matrix::new(1, state.len(), state.to_vec())?;
        Ok(self.online.forward(&x)?.into_vec())
    }

    /// Greedy picks the argmax (lowest index on ties); explore is epsilon-greedy and advances the schedule.
    pub fn select_action(&mut self, state: &[f64], mode: ActionMode) -> Result<usize> {
        if state.len() != self.state_dim {
            return Err(Error::dim(format!(
                "state has {} features, agent expects {}",
                state.len(),
                self.state_dim
            )));
        }
        if mode == ActionMode::Explore {
            let eps = self.epsilon();
            self.explore_steps += 1;
            if self.rng.gen::<f64>() < eps {
                return Ok(self.rng.gen_range(0..self.num_actions));
            }
        }
        Ok(argmax(&self.q_values(state)?))
    }

    pub fn observe(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// One gradient step on the mean squared TD error of a sampled batch.
    /// Returns `None` while the buffer holds fewer than `batch_size` transitions.
    pub fn train_step(&mut self) -> Result<Option<f64>> {
        let Some(idx) = self.buffer.sample_indices(self.cfg.batch_size, &mut self.rng) else {
            return Ok(None);
        };
        let b = idx.len();
        let mut states = Vec::with_capacity(b * self.state_dim);
        let mut next_states = Vec::with_capacity(b * self.state_dim);
        for &i in &idx {
            let t = self.buffer.get(i);
            states.extend_from_slice(&t.state);
            next_states.extend_from_slice(&t.next_state);
        }
        let states = Matrix::new(b, self.state_dim, states)?;
        let next_states = Matrix::new(b, self.state_dim, next_states)?;
        let next_q = self.target.forward(&next_states)?;
        let cache = self.online.forward_cached(&states)?;
        let q = cache.output();
        let mut d_out = Matrix::zeros(b, self.num_actions);
        let mut loss = 0.0;
        for (row, &i) in idx.iter().enumerate() {
            let t = self.buffer.get(i);
            let bootstrap = if t.done {
                0.0
            } else {
                next_q.row(row).iter().copied().fold(f64::NEG_INFINITY, f64::max)
            };
            let y = t.reward + self.cfg.gamma * bootstrap;
            let err = q.get(row, t.action) - y;
            loss += err * err;
            d_out.set(row, t.action, 2.0 * err / b as f64);
        }
        loss /= b as f64;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                layer: self.online.num_layers() - 1,
                detail: format!("TD loss is {loss}"),
            });
        }
        let grads = self.online.backward(&cache, &d_out)?;
        self.optimizer.step(&mut self.online, &grads);
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_sync_interval == 0 {
            self.sync_target();
        }
        Ok(Some(loss))
    }

    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }

    /// Runs one episode choosing greedy actions throughout.
    pub fn greedy_rollout(&mut self, env: &mut PruneEnv) -> Result<Rollout> {
        self.check_env(env)?;
        let mut state = env.reset();
        let mut rollout = Rollout {
            actions: Vec::new(),
            alphas: Vec::new(),
            outcomes: Vec::new(),
        };
        loop {
            let a = self.select_action(&state.features(), ActionMode::Greedy)?;
            let out = env.step(a)?;
            rollout.actions.push(a);
            rollout.alphas.push(out.info.alpha);
            let done = out.done;
            state = out.next_state.clone();
            rollout.outcomes.push(out);
            if done {
                return Ok(rollout);
            }
        }
    }

    pub fn check_env(&self, env: &PruneEnv) -> Result<()> {
        if env.state_dim() != self.state_dim || env.num_actions() != self.num_actions {
            return Err(Error::config(format!(
                "agent expects state {} / {} actions, environment has {} / {}",
                self.state_dim,
                self.num_actions,
                env.state_dim(),
                env.num_actions()
            )));
        }
        Ok(())
    }

    pub fn checkpoint(&self, seed: u64) -> Checkpoint {
        Checkpoint::new(self.online.clone(), seed).with_role("qnet")
    }

    /// Loads a `qnet` checkpoint into both online and target networks.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        if ck.role.as_deref() != Some("qnet") {
            return Err(Error::Checkpoint("expected a checkpoint with role \"qnet\"".into()));
        }
        self.set_online(ck.network.clone())?;
        self.sync_target();
        Ok(())
    }
}
