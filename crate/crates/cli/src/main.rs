//! `hmappo`: train, verify, check environments, evaluate and aggregate.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hmappo_core::envs::tabular::DEFAULT_BUDGET;
use hmappo_core::envs::{make_env, ParticleWorldConfig};
use hmappo_core::harness::{aggregate_directory, evaluate_policy, run_experiment, ExperimentConfig};
use hmappo_core::health::validate_health_properties;
use hmappo_core::nn::Checkpoint;
use hmappo_core::oracle::run_verification;
use hmappo_core::Scenario;

#[derive(Parser)]
#[command(name = "hmappo", version, about = "Health-informed multi-agent PPO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more seeded trials and write curves and checkpoints.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        env: Option<String>,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Exact oracle checks on enumerable tabular models.
    Verify {
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the machine-readable report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Monte-Carlo check of the four health properties.
    CheckEnv {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 3)]
        agents: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Greedy evaluation of a saved policy.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Experiment config describing the environment.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute aggregate.csv from the per-trial curves in a run directory.
    Aggregate {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config, env, agents, variant, seed, episodes, trials, out, set } => {
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
                None => ExperimentConfig::default(),
            };
            let overrides = [
                ("env", env),
                ("agents", agents.map(|v| v.to_string())),
                ("variant", variant),
                ("seed", seed.map(|v| v.to_string())),
                ("total_episodes", episodes.map(|v| v.to_string())),
                ("trials", trials.map(|v| v.to_string())),
                ("out", out.map(|p| p.display().to_string())),
            ];
            for (k, v) in overrides {
                if let Some(v) = v {
                    cfg.set(k, &v)?;
                }
            }
            for kv in &set {
                let Some((k, v)) = kv.split_once('=') else { bail!("--set expects KEY=VALUE, got '{kv}'") };
                cfg.set(k.trim(), v.trim())?;
            }
            let result = run_experiment(&cfg)?;
            if let Some(last) = result.curve.points.last() {
                println!(
                    "{} {} agents, {}: episode {} mean {:.4} [min {:.4}, max {:.4}]",
                    cfg.env, cfg.n_agents, cfg.train.variant, last.episode, last.mean, last.min, last.max
                );
            }
            println!("wrote {}", cfg.output_dir.display());
            Ok(true)
        }
        Command::Verify { budget, seed, report } => {
            let r = run_verification(seed, budget)?;
            print!("{r}");
            if let Some(p) = report {
                std::fs::write(&p, r.to_json()).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(r.all_passed())
        }
        Command::CheckEnv { env, samples, agents, seed } => {
            let scenario: Scenario = env.parse()?;
            let env = make_env(ParticleWorldConfig::for_scenario(scenario, agents))?;
            let report = validate_health_properties(env.as_ref(), samples, seed);
            print!("{}: {report}", env.name());
            Ok(report.all_passed())
        }
        Command::Eval { checkpoint, episodes, config, env, seed } => {
            let ckpt = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(e) = env {
                cfg.set("env", &e)?;
            }
            if config.is_none() {
                cfg.set("agents", &ckpt.n_agents.to_string())?;
            }
            let env = make_env(cfg.world()?)?;
            let r = evaluate_policy(&ckpt, env.as_ref(), episodes, seed)?;
            match r.mean_return {
                Some(m) => println!("{} episodes on {}: mean return {m:.4} (s.e. {:.4})", episodes, env.name(), r.standard_error()),
                None => println!("0 episodes: empty return distribution"),
            }
            Ok(true)
        }
        Command::Aggregate { runs } => {
            let curve = aggregate_directory(&runs)?;
            println!("aggregated {} points into {}", curve.points.len(), runs.join("aggregate.csv").display());
            Ok(true)
        }
    }
}
