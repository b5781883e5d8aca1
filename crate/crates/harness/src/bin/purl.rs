use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use purl_core::data::SyntheticSpec;
use purl_core::driver::{DriverConfig, PruneResult};
use purl_core::nn::Checkpoint;
use purl_harness::ablation::{run_ablation, AblationSpec};
use purl_harness::config::DataConfig;
use purl_harness::dataset_io::gen_data;
use purl_harness::records::{read_records, CsvSink};
use purl_harness::run::{self, prepare, prune_with_checkpoint, run_baseline, run_prepared, train_only};
use purl_harness::stats::MeanSe;
use purl_harness::summary::summarize;
use purl_harness::{ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "purl", version, about = "Layer-wise pruning with a DQN agent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset directory.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Stage 1 only: train the agent and save its Q-network.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Full pipeline (train, stage-2 pruning, fine-tune), or stage 2 with a saved agent.
    Prune {
        #[command(flatten)]
        common: Common,
        /// Q-network checkpoint from `purl train`; skips stage 1.
        #[arg(long)]
        agent: Option<PathBuf>,
        /// Use the gradual two-round schedule unless the config sets one.
        #[arg(long)]
        iterative: bool,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// Run the ablation matrix.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Ablation spec (JSON); the built-in seven-row matrix when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Uniform magnitude pruning to a fixed sparsity, then the same fine-tuning.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// Defaults to the config's target sparsity.
        #[arg(long)]
        sparsity: Option<f64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
    },
    /// Aggregate metrics CSV files into JSON.
    Summarize {
        /// Metrics CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Terminal reward that counts as reaching the target.
        #[arg(long, default_value_t = -0.5)]
        threshold: f64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn trial_dir(out: &Path, trials: usize, t: usize) -> PathBuf {
    if trials == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("trial-{t}"))
    }
}

fn report(label: &str, results: &[PruneResult]) {
    let acc: Vec<f64> = results.iter().map(PruneResult::final_accuracy).collect();
    let sp: Vec<f64> = results.iter().map(|r| r.sparsity.global).collect();
    println!(
        "{label}: accuracy {} %, sparsity {} %",
        MeanSe::of(&acc),
        MeanSe::of(&sp)
    );
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common } => {
            let cfg = load_config(common.config.as_deref())?;
            let mut spec = match cfg.data {
                DataConfig::Synthetic(s) => s,
                _ => SyntheticSpec::default(),
            };
            spec.seed = common.seed;
            let (train, test) = gen_data(&spec, &common.out)?;
            println!(
                "wrote {} train / {} test examples to {}",
                train.len(),
                test.len(),
                common.out.display()
            );
        }
        Command::Train { common } => {
            let cfg = load_config(common.config.as_deref())?;
            fs::create_dir_all(&common.out)?;
            let mut sink = CsvSink::create(&common.out.join("metrics.csv"), "train", common.seed)?;
            let (agent, episodes) = train_only(&cfg, common.seed, &mut sink)?;
            agent.checkpoint(common.seed).save(common.out.join("qnet.json"))?;
            fs::write(
                common.out.join("episodes.json"),
                serde_json::to_string_pretty(&episodes)?,
            )?;
            if let Some(last) = episodes.last() {
                println!(
                    "trained {} episodes; last: accuracy {:.4}, sparsity {:.4}, reward {:.4}",
                    episodes.len(),
                    last.accuracy,
                    last.sparsity,
                    last.terminal_reward
                );
            }
        }
        Command::Prune {
            common,
            agent,
            iterative,
            trials,
        } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if iterative && cfg.driver.schedule.is_empty() {
                cfg.driver.schedule = DriverConfig::iterative_default_schedule();
            }
            if trials == 0 {
                return Err(HarnessError::Config("--trials must be at least 1".into()));
            }
            let qnet = agent.as_deref().map(Checkpoint::load).transpose()?;
            let mut results = Vec::new();
            for t in 0..trials {
                let seed = common.seed.wrapping_add(t as u64);
                let dir = trial_dir(&common.out, trials, t);
                fs::create_dir_all(&dir)?;
                let mut sink = CsvSink::create(&dir.join("metrics.csv"), &format!("prune-t{t}"), seed)?;
                let result = match &qnet {
                    Some(q) => prune_with_checkpoint(&cfg, seed, q, &mut sink)?,
                    None => run_prepared(&cfg, &prepare(&cfg, seed)?, seed, &mut sink)?,
                };
                run::write_result(&dir, &result, seed)?;
                results.push(result);
            }
            report("prune", &results);
        }
        Command::Ablate { common, spec, trials } => {
            let cfg = load_config(common.config.as_deref())?;
            let mut spec = match spec {
                Some(p) => AblationSpec::from_json(&fs::read_to_string(&p)?)?,
                None => AblationSpec::default(),
            };
            if let Some(t) = trials {
                spec.trials = t;
            }
            let report = run_ablation(&spec, &cfg, common.seed, Some(&common.out))?;
            print!("{}", report.to_text());
        }
        Command::Baseline {
            common,
            sparsity,
            trials,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let target = sparsity.unwrap_or(cfg.env.target_sparsity);
            if !(0.0..=1.0).contains(&target) {
                return Err(HarnessError::Config(format!("sparsity {target} outside [0, 1]")));
            }
            if trials == 0 {
                return Err(HarnessError::Config("--trials must be at least 1".into()));
            }
            let mut results = Vec::new();
            for t in 0..trials {
                let seed = common.seed.wrapping_add(t as u64);
                let dir = trial_dir(&common.out, trials, t);
                fs::create_dir_all(&dir)?;
                let mut sink = CsvSink::create(&dir.join("metrics.csv"), &format!("baseline-t{t}"), seed)?;
                let result = run_baseline(&cfg, &prepare(&cfg, seed)?, target, seed, &mut sink)?;
                run::write_result(&dir, &result, seed)?;
                results.push(result);
            }
            report("baseline", &results);
        }
        Command::Summarize { inputs, threshold, out } => {
            let mut records = Vec::new();
            for p in &inputs {
                records.extend(read_records(p).map_err(|e| match e {
                    HarnessError::Csv(c) => HarnessError::DataFormat {
                        path: p.display().to_string(),
                        message: c.to_string(),
                    },
                    other => other,
                })?);
            }
            let text = serde_json::to_string_pretty(&summarize(&records, threshold))?;
            match out {
                Some(p) => fs::write(p, text)?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
