//! The state/action/reward ablation matrix: each configuration runs several
//! seeded trials, cells execute in parallel, and results are reported as
//! mean ± standard error.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use purl_core::driver::NullSink;
use purl_core::env::{alpha_grid, PruneRule, RewardMode, RewardVariant, StateKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{config, Result};
use crate::run::{run_single, run_single_to_dir};
use crate::stats::MeanSe;

/// Overrides applied to the base configuration. Absent fields keep the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_mode: Option<RewardMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_variant: Option<RewardVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_kind: Option<StateKind>,
    /// Spacing of the alpha grid; the maximum stays at the base grid's last value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune_rule: Option<PruneRule>,
}

impl AblationEntry {
    fn named(id: &str) -> Self {
        Self {
            id: id.to_string(),
            reward_mode: None,
            reward_variant: None,
            state_kind: None,
            action_step: None,
            prune_rule: None,
        }
    }

    pub fn apply(&self, base: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = base.clone();
        let env = &mut cfg.env;
        if let Some(m) = self.reward_mode {
            env.reward_mode = m;
        }
        if let Some(v) = self.reward_variant {
            env.reward_variant = v;
        }
        if let Some(s) = self.state_kind {
            env.state_kind = s;
        }
        if let Some(step) = self.action_step {
            let max = env.action_grid.last().copied().unwrap_or(2.2);
            env.action_grid = alpha_grid(step, max);
        }
        if let Some(r) = self.prune_rule {
            env.prune_rule = r;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub configs: Vec<AblationEntry>,
}

fn default_trials() -> usize {
    3
}

impl Default for AblationSpec {
    /// The seven-row matrix: sparse vs dense rewards, magnitude-target actions,
    /// the two alternative rewards, a coarser action grid and the high-dimensional state.
    fn default() -> Self {
        let with = |id: &str, f: &dyn Fn(&mut AblationEntry)| {
            let mut e = AblationEntry::named(id);
            e.reward_mode = Some(RewardMode::Dense);
            f(&mut e);
            e
        };
        Self {
            trials: default_trials(),
            configs: vec![
                with("sparse", &|e| e.reward_mode = Some(RewardMode::Sparse)),
                with("dense", &|_| {}),
                with("magnitude_target", &|e| e.prune_rule = Some(PruneRule::MagnitudeTarget)),
                with("reward_r2", &|e| e.reward_variant = Some(RewardVariant::R2)),
                with("reward_r3", &|e| e.reward_variant = Some(RewardVariant::R3)),
                with("action_step_0.2", &|e| e.action_step = Some(0.2)),
                with("high_dim_state", &|e| e.state_kind = Some(StateKind::High)),
            ],
        }
    }
}

impl AblationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config("ablation needs at least one trial"));
        }
        if self.configs.is_empty() {
            return Err(config("ablation has no configurations"));
        }
        let mut seen = HashSet::new();
        for e in &self.configs {
            if e.id.is_empty() || e.id.contains(['/', '\\', ':']) {
                return Err(config(format!("invalid ablation id {:?}", e.id)));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(config(format!("duplicate ablation id {:?}", e.id)));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| config(format!("invalid ablation spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub id: String,
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub sparsity: f64,
    pub baseline_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub id: String,
    pub accuracy: MeanSe,
    pub sparsity: MeanSe,
    pub trials: Vec<TrialResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, id: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "id",
            "trials",
            "accuracy_mean",
            "accuracy_se",
            "sparsity_mean",
            "sparsity_se",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.id.clone(),
                r.accuracy.n.to_string(),
                r.accuracy.mean.to_string(),
                r.accuracy.se.to_string(),
                r.sparsity.mean.to_string(),
                r.sparsity.se.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned table, percentages as mean ± standard error.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>14}  {:>14}",
            "config", "trials", "accuracy %", "sparsity %"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>14}  {:>14}",
                r.id,
                r.accuracy.n,
                r.accuracy.to_string(),
                r.sparsity.to_string()
            );
        }
        out
    }
}

fn run_cell(cfg: &ExperimentConfig, id: &str, trial: usize, seed: u64, out: Option<&Path>) -> Result<TrialResult> {
    let run_id = format!("{id}-t{trial}");
    let result = match out {
        Some(root) => {
            let dir = root.join(id).join(format!("trial-{trial}"));
            let done = dir.join("trial.json");
            if let Ok(text) = fs::read_to_string(&done) {
                if let Ok(prev) = serde_json::from_str::<TrialResult>(&text) {
                    if prev.seed == seed {
                        return Ok(prev);
                    }
                }
            }
            let result = run_single_to_dir(cfg, seed, &run_id, &dir)?;
            let trial = TrialResult {
                id: id.to_string(),
                trial,
                seed,
                accuracy: result.final_accuracy(),
                sparsity: result.sparsity.global,
                baseline_accuracy: result.accuracy_before_prune,
            };
            let tmp = dir.join("trial.json.tmp");
            fs::write(&tmp, serde_json::to_string_pretty(&trial)?)?;
            fs::rename(&tmp, &done)?;
            return Ok(trial);
        }
        None => run_single(cfg, seed, &mut NullSink)?,
    };
    Ok(TrialResult {
        id: id.to_string(),
        trial,
        seed,
        accuracy: result.final_accuracy(),
        sparsity: result.sparsity.global,
        baseline_accuracy: result.accuracy_before_prune,
    })
}

/// Runs every `(config, trial)` cell. Trial `t` uses seed `seed + t` in every
/// configuration, so rows are paired on the same pre-trained model.
///
/// With `out`, each cell writes its metrics, result and checkpoint under
/// `out/<id>/trial-<t>/`; cells that already finished are reused, and the
/// summary is written as `summary.csv`, `summary.txt` and `summary.json`.
pub fn run_ablation(
    spec: &AblationSpec,
    base: &ExperimentConfig,
    seed: u64,
    out: Option<&Path>,
) -> Result<AblationReport> {
    spec.validate()?;
    let configs: Vec<ExperimentConfig> = spec.configs.iter().map(|e| e.apply(base)).collect();
    for (cfg, e) in configs.iter().zip(&spec.configs) {
        cfg.validate()
            .map_err(|err| config(format!("ablation config {:?}: {err}", e.id)))?;
    }
    let cells: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let results: Vec<TrialResult> = cells
        .par_iter()
        .map(|&(c, t)| run_cell(&configs[c], &spec.configs[c].id, t, seed.wrapping_add(t as u64), out))
        .collect::<Result<_>>()?;

    let rows = spec
        .configs
        .iter()
        .map(|e| {
            let trials: Vec<TrialResult> = results.iter().filter(|r| r.id == e.id).cloned().collect();
            let acc: Vec<f64> = trials.iter().map(|t| t.accuracy).collect();
            let sp: Vec<f64> = trials.iter().map(|t| t.sparsity).collect();
            AblationRow {
                id: e.id.clone(),
                accuracy: MeanSe::of(&acc),
                sparsity: MeanSe::of(&sp),
                trials,
            }
        })
        .collect();
    let report = AblationReport { rows };
    if let Some(root) = out {
        fs::create_dir_all(root)?;
        fs::write(root.join("summary.csv"), report.to_csv()?)?;
        fs::write(root.join("summary.txt"), report.to_text())?;
        fs::write(root.join("summary.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
