//! Seeded multi-trial training runs and their on-disk artefacts.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::curve::{aggregate_curves, format_float, write_aggregate, write_text, LearningCurve, TrialCurve, TrialCurveWriter};
use crate::algo::{IterationStats, Trainer};
use crate::envs::{make_env, Environment};
use crate::error::Result;

pub const ITERATION_HEADER: [&str; 9] = [
    "iteration",
    "episodes",
    "mean_return",
    "mean_final_deaths",
    "policy_loss",
    "critic_loss",
    "clip_fraction",
    "entropy",
    "samples",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub curve: TrialCurve,
    /// Every training episode's return, in order.
    pub episode_returns: Vec<f64>,
    pub iterations: Vec<IterationStats>,
}

impl TrialResult {
    /// Mean return over the last `window` training episodes.
    pub fn final_mean(&self, window: usize) -> f64 {
        let tail = &self.episode_returns[self.episode_returns.len().saturating_sub(window)..];
        tail.iter().sum::<f64>() / tail.len().max(1) as f64
    }

    pub fn total_deaths_mean(&self) -> f64 {
        let n = self.iterations.len().max(1) as f64;
        self.iterations.iter().map(|s| s.mean_final_deaths).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub curve: LearningCurve,
    pub trials: Vec<TrialResult>,
}

pub fn trial_curve_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trial_{trial}.csv"))
}

pub fn iteration_log_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trial_{trial}_iterations.csv"))
}

/// Trains `config.trials` independent runs (trial `k` seeded with
/// `master_seed + k`) and writes curves, logs and checkpoints to the output
/// directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    fs::create_dir_all(&config.output_dir)?;
    write_text(&config.output_dir.join("config.txt"), &config.to_text())?;
    let env = make_env(config.world()?)?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|k| run_trial(config, env.as_ref(), k))
        .collect::<Result<Vec<_>>>()?;
    // Aggregate the values as written, so `aggregate_directory` reproduces the file.
    let curves: Vec<TrialCurve> = trials
        .iter()
        .map(|t| t.curve.iter().map(|&(e, v)| (e, format_float(v).parse().unwrap_or(v))).collect())
        .collect();
    let curve = aggregate_curves(&curves)?;
    write_aggregate(&config.output_dir.join("aggregate.csv"), &curve)?;
    Ok(ExperimentResult { curve, trials })
}

/// One training run. On a training error the current networks are saved
/// as `trial_<k>_crash.bin` before the error is returned.
pub fn run_trial(config: &ExperimentConfig, env: &dyn Environment, trial: usize) -> Result<TrialResult> {
    let dir = &config.output_dir;
    let seed = config.trial_seed(trial);
    let mut trainer = Trainer::new(env, config.train.clone(), seed)?;
    let mut curve_log = TrialCurveWriter::create(&trial_curve_path(dir, trial), trial)?;
    let mut iter_log = csv::Writer::from_path(iteration_log_path(dir, trial))?;
    iter_log.write_record(ITERATION_HEADER)?;

    let mut result = TrialResult { trial, seed, curve: Vec::new(), episode_returns: Vec::new(), iterations: Vec::new() };
    while !trainer.is_finished() {
        let stats = match trainer.train_iteration(env) {
            Ok(s) => s,
            Err(e) => {
                trainer.checkpoint(env.n_agents()).save(&dir.join(format!("trial_{trial}_crash.bin")))?;
                return Err(e);
            }
        };
        iter_log.write_record([
            stats.iteration.to_string(),
            stats.episodes.to_string(),
            format_float(stats.mean_return),
            format_float(stats.mean_final_deaths),
            format_float(stats.policy_loss),
            format_float(stats.critic_loss),
            format_float(stats.clip_fraction),
            format_float(stats.entropy),
            stats.samples.to_string(),
        ])?;
        iter_log.flush()?;
        let batches = stats.iteration as usize + 1;
        if batches % config.eval_interval == 0 || trainer.is_finished() {
            curve_log.push(stats.episodes, stats.mean_return)?;
            result.curve.push((stats.episodes, stats.mean_return));
        }
        if config.checkpoint_interval > 0 && batches % config.checkpoint_interval == 0 {
            trainer
                .checkpoint(env.n_agents())
                .save(&dir.join(format!("trial_{trial}_ckpt_{}.bin", stats.episodes)))?;
        }
        result.episode_returns.extend_from_slice(&stats.episode_returns);
        result.iterations.push(stats);
    }
    trainer.checkpoint(env.n_agents()).save(&dir.join(format!("trial_{trial}_final.bin")))?;
    Ok(result)
}

/// Re-aggregates the per-trial curve files found in `dir`.
pub fn aggregate_directory(dir: &Path) -> Result<LearningCurve> {
    let mut files: Vec<(usize, PathBuf)> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let k = name.strip_prefix("trial_")?.strip_suffix(".csv")?.parse().ok()?;
            Some((k, p))
        })
        .collect();
    files.sort();
    let curves = files
        .iter()
        .map(|(_, p)| super::curve::read_trial_curve(p))
        .collect::<Result<Vec<_>>>()?;
    let curve = aggregate_curves(&curves)?;
    write_aggregate(&dir.join("aggregate.csv"), &curve)?;
    Ok(curve)
}
