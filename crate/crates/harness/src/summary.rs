//! Aggregates derived purely from metrics rows, so they can be recomputed from the CSV alone.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::records::{split_run, RunRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReward {
    pub episode: usize,
    pub steps: usize,
    pub total: f64,
    pub terminal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub seed: u64,
    pub train_episodes: usize,
    pub stage2_rollouts: usize,
    /// From the last fine-tune row, else the last apply row, else the last training row.
    pub terminal_sparsity: Option<f64>,
    pub terminal_accuracy: Option<f64>,
    /// First training episode whose terminal reward reaches the threshold.
    pub episodes_to_threshold: Option<usize>,
    pub reward_curve: Vec<EpisodeReward>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub reward_threshold: f64,
    pub runs: Vec<RunSummary>,
}

fn episode_rewards(rows: &[&RunRecord]) -> Vec<EpisodeReward> {
    let mut out: Vec<EpisodeReward> = Vec::new();
    for r in rows {
        let reward = r.reward.unwrap_or(0.0);
        match out.last_mut() {
            Some(e) if e.episode == r.episode => {
                e.steps += 1;
                e.total += reward;
                e.terminal = reward;
            }
            _ => out.push(EpisodeReward {
                episode: r.episode,
                steps: 1,
                total: reward,
                terminal: reward,
            }),
        }
    }
    out
}

/// Groups rows by run id (phase suffix stripped), preserving first-seen order.
pub fn summarize(records: &[RunRecord], reward_threshold: f64) -> Summary {
    let mut order: Vec<&str> = Vec::new();
    let mut by_run: BTreeMap<&str, BTreeMap<&str, Vec<&RunRecord>>> = BTreeMap::new();
    for r in records {
        let (id, phase) = split_run(&r.run);
        if !by_run.contains_key(id) {
            order.push(id);
        }
        by_run.entry(id).or_default().entry(phase).or_default().push(r);
    }
    let runs = order
        .into_iter()
        .map(|id| {
            let phases = &by_run[id];
            let rows = |p: &str| phases.get(p).map(Vec::as_slice).unwrap_or(&[]);
            let train = episode_rewards(rows("train"));
            let stage2 = episode_rewards(rows("stage2"));
            let terminal = ["finetune", "apply", "train"].iter().find_map(|p| rows(p).last());
            RunSummary {
                run: id.to_string(),
                seed: phases.values().next().and_then(|v| v.first()).map_or(0, |r| r.seed),
                train_episodes: train.len(),
                stage2_rollouts: stage2.len(),
                terminal_sparsity: terminal.map(|r| r.global_sparsity),
                terminal_accuracy: terminal.map(|r| r.accuracy),
                episodes_to_threshold: train.iter().position(|e| e.terminal >= reward_threshold),
                reward_curve: train,
            }
        })
        .collect();
    Summary { reward_threshold, runs }
}
