//! Multi-agent PPO with the local-critic, central-critic and min-health
//! credit variants.

pub mod credit;
pub mod gae;
pub mod ppo;
pub mod rollout;
pub mod train;

use std::fmt;
use std::str::FromStr;

pub use credit::{compute_psi, AdvantageRecord, Critic, CreditParams};
pub use gae::{compute_gae, compute_value_targets};
pub use ppo::{clipped_surrogate, critic_loss, ppo_policy_loss, PolicyLossOutput, PolicyMinibatch};
pub use rollout::{collect_rollouts, run_episode, Actor, EpisodeRecord, RolloutBatch};
pub use train::{IterationStats, Trainer};

use crate::error::{config, Result};
use crate::health::DEFAULT_H_MIN;
use crate::nn::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Per-agent critic on local observations.
    LocalCritic,
    /// Shared critic on the joint state; every agent gets the same advantage.
    CentralCritic,
    /// Central critic with the health-scaled counterfactual baseline.
    MinHealth,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::LocalCritic, Variant::CentralCritic, Variant::MinHealth];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::LocalCritic => "local-critic",
            Variant::CentralCritic => "central-critic",
            Variant::MinHealth => "min-health",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| config(format!("unknown variant '{s}'")))
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_epsilon: f64,
    pub entropy_coef: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub episodes_per_batch: usize,
    pub total_episodes: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub local_critic_lr: f64,
    pub normalize_advantages: bool,
    pub h_min: f64,
    pub policy_hidden: Vec<usize>,
    pub policy_activation: Activation,
    pub critic_hidden: Vec<usize>,
    pub critic_activation: Activation,
    pub local_critic_hidden: Vec<usize>,
    pub local_critic_activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::MinHealth,
            gamma: 0.99,
            lambda: 0.95,
            clip_epsilon: 0.2,
            entropy_coef: 0.01,
            epochs: 8,
            minibatches: 8,
            episodes_per_batch: 256,
            total_episodes: 50_000,
            actor_lr: 1e-3,
            critic_lr: 5e-3,
            local_critic_lr: 1e-3,
            normalize_advantages: false,
            h_min: DEFAULT_H_MIN,
            policy_hidden: vec![64, 64],
            policy_activation: Activation::Tanh,
            critic_hidden: vec![64; 8],
            critic_activation: Activation::Elu,
            local_critic_hidden: vec![64, 64],
            local_critic_activation: Activation::Tanh,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("lambda", self.lambda)?;
        unit("h_min", self.h_min)?;
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(config("clip_epsilon must lie in (0, 1)"));
        }
        if !(self.entropy_coef >= 0.0) {
            return Err(config("entropy_coef must be non-negative"));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr), ("local_critic_lr", self.local_critic_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(config(format!("{name} must be positive")));
            }
        }
        if self.epochs == 0 || self.minibatches == 0 || self.episodes_per_batch == 0 {
            return Err(config("epochs, minibatches and episodes_per_batch must be at least 1"));
        }
        if self.policy_hidden.is_empty() || self.critic_hidden.is_empty() || self.local_critic_hidden.is_empty() {
            return Err(config("every network needs at least one hidden layer"));
        }
        Ok(())
    }

    pub(crate) fn credit_params(&self) -> CreditParams {
        CreditParams { gamma: self.gamma, lambda: self.lambda, h_min: self.h_min }
    }
}
