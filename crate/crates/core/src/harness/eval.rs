//! Post-hoc evaluation of saved policies and the random-policy reference.

use crate::algo::{collect_rollouts, Actor};
use crate::envs::Environment;
use crate::error::{config, Result};
use crate::nn::Checkpoint;
use crate::rng::{derive_seed, domain};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// `None` when no episodes were run.
    pub mean_return: Option<f64>,
    pub returns: Vec<f64>,
}

impl EvalResult {
    fn from_returns(returns: Vec<f64>) -> Self {
        let mean_return = (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64);
        Self { mean_return, returns }
    }

    pub fn standard_error(&self) -> f64 {
        let n = self.returns.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_return.unwrap_or(0.0);
        let var = self.returns.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// Runs the checkpoint's mean action for every agent (no sampling noise).
pub fn evaluate_policy(ckpt: &Checkpoint, env: &dyn Environment, episodes: usize, seed: u64) -> Result<EvalResult> {
    if ckpt.n_agents != env.n_agents() || ckpt.policy.obs_dim() != env.obs_dim() || ckpt.policy.action_dim() != env.action_dim() {
        return Err(config(format!(
            "checkpoint ({} agents, obs {}, action {}) does not fit {} ({} agents, obs {}, action {})",
            ckpt.n_agents,
            ckpt.policy.obs_dim(),
            ckpt.policy.action_dim(),
            env.name(),
            env.n_agents(),
            env.obs_dim(),
            env.action_dim()
        )));
    }
    let batch = collect_rollouts(env, Actor::Greedy(&ckpt.policy), episodes, derive_seed(seed, &[domain::EVAL]), 0)?;
    Ok(EvalResult::from_returns(batch.episode_returns()))
}

/// Returns of uniformly random actions.
pub fn random_policy_baseline(env: &dyn Environment, episodes: usize, seed: u64) -> Result<EvalResult> {
    let batch = collect_rollouts(env, Actor::UniformRandom, episodes, derive_seed(seed, &[domain::EVAL, 1]), 0)?;
    Ok(EvalResult::from_returns(batch.episode_returns()))
}
