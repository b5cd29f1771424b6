//! One PPO iteration: collect, assign credit, then `K` epochs of minibatch
//! updates for the policy and the critic.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use super::credit::{compute_psi, Critic};
use super::ppo::{critic_loss, ppo_policy_loss, PolicyMinibatch};
use super::rollout::{collect_rollouts, Actor, RolloutBatch};
use super::{TrainConfig, Variant};
use crate::envs::Environment;
use crate::error::{config, Result};
use crate::nn::{AdamState, Checkpoint, CriticKind, GaussianPolicy, Mlp, MlpSpec};
use crate::rng::{domain, stream};

/// Summary of one training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iteration: u64,
    /// Episodes consumed so far, including this batch.
    pub episodes: usize,
    pub batch_episodes: usize,
    pub mean_return: f64,
    pub episode_returns: Vec<f64>,
    pub mean_final_deaths: f64,
    pub samples: usize,
    pub policy_loss: f64,
    pub critic_loss: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

/// Parameters, optimiser state and progress of one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub policy: GaussianPolicy,
    pub critic: Critic,
    policy_adam: AdamState,
    critic_adam: AdamState,
    seed: u64,
    iteration: u64,
    episodes_done: usize,
}

impl Trainer {
    /// Initialises networks from the run seed. The critic output layer starts
    /// at zero so `V ≡ 0` before the first update.
    pub fn new(env: &dyn Environment, config: TrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let policy = GaussianPolicy::new(
            env.obs_dim(),
            &config.policy_hidden,
            config.policy_activation,
            env.action_dim(),
            &mut stream(seed, &[domain::INIT, 0]),
        )?;
        let critic = match config.variant {
            Variant::LocalCritic => Critic {
                kind: CriticKind::Local,
                mlp: Mlp::init(
                    MlpSpec::uniform(env.obs_dim(), &config.local_critic_hidden, config.local_critic_activation, 1)?,
                    0.0,
                    &mut stream(seed, &[domain::INIT, 1]),
                ),
            },
            Variant::CentralCritic | Variant::MinHealth => Critic {
                kind: CriticKind::Central,
                mlp: Mlp::init(
                    MlpSpec::uniform(env.critic_dim(), &config.critic_hidden, config.critic_activation, 1)?,
                    0.0,
                    &mut stream(seed, &[domain::INIT, 1]),
                ),
            },
        };
        Ok(Self {
            policy_adam: AdamState::new(policy.n_params()),
            critic_adam: AdamState::new(critic.mlp.n_params()),
            config,
            policy,
            critic,
            seed,
            iteration: 0,
            episodes_done: 0,
        })
    }

    /// Resumes from saved networks. Optimiser moments restart at zero.
    pub fn from_checkpoint(env: &dyn Environment, config: TrainConfig, seed: u64, ckpt: Checkpoint) -> Result<Self> {
        let mut t = Self::new(env, config, seed)?;
        if ckpt.policy.obs_dim() != env.obs_dim() || ckpt.policy.action_dim() != env.action_dim() {
            return Err(config_err("checkpoint policy does not fit the environment"));
        }
        t.policy = ckpt.policy;
        if let Some((kind, mlp)) = ckpt.critic {
            if kind != t.critic.kind || mlp.spec() != t.critic.mlp.spec() {
                return Err(config_err("checkpoint critic does not match the variant"));
            }
            t.critic.mlp = mlp;
        }
        Ok(t)
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn is_finished(&self) -> bool {
        self.episodes_done >= self.config.total_episodes
    }

    pub fn checkpoint(&self, n_agents: usize) -> Checkpoint {
        Checkpoint {
            n_agents,
            policy: self.policy.clone(),
            critic: Some((self.critic.kind, self.critic.mlp.clone())),
        }
    }

    /// Collects the next batch and updates both networks. The last batch is
    /// truncated so exactly `total_episodes` episodes are consumed.
    pub fn train_iteration(&mut self, env: &dyn Environment) -> Result<IterationStats> {
        if self.is_finished() {
            return Err(crate::Error::State("episode budget exhausted".into()));
        }
        let count = self.config.episodes_per_batch.min(self.config.total_episodes - self.episodes_done);
        let batch = collect_rollouts(env, Actor::Stochastic(&self.policy), count, self.seed, self.episodes_done as u64)?;
        batch.validate()?;
        let stats = self.update(env, &batch)?;
        self.episodes_done += count;
        self.iteration += 1;
        Ok(IterationStats { episodes: self.episodes_done, ..stats })
    }

    /// PPO update on an already collected batch.
    pub fn update(&mut self, env: &dyn Environment, batch: &RolloutBatch) -> Result<IterationStats> {
        let cfg = &self.config;
        let records = compute_psi(cfg.variant, batch, &self.critic, env, cfg.credit_params())?;
        let n = batch.n_agents;

        // Policy samples: one per agent-step, in episode/time/agent order.
        let mut obs = Vec::new();
        let mut actions = Vec::new();
        let mut old_logp = Vec::new();
        let mut health = Vec::new();
        let mut psi = Vec::new();
        // Critic samples: per state (central) or per agent-step (local).
        let mut critic_x = Vec::new();
        let mut critic_y = Vec::new();
        let mut feature = vec![0.0; env.critic_dim()];
        for (ep, rec) in batch.episodes.iter().zip(&records) {
            let steps = ep.rewards.len();
            obs.extend_from_slice(&ep.observations);
            actions.extend_from_slice(&ep.sampled_actions);
            old_logp.extend_from_slice(&ep.log_probs);
            health.extend_from_slice(&ep.health);
            psi.extend_from_slice(&rec.psi);
            match self.critic.kind {
                CriticKind::Central => {
                    for s in &ep.states[..steps] {
                        env.critic_features(s, &mut feature);
                        critic_x.extend_from_slice(&feature);
                    }
                }
                CriticKind::Local => critic_x.extend_from_slice(&ep.observations),
            }
            critic_y.extend_from_slice(&rec.value_targets);
        }
        if cfg.normalize_advantages {
            normalize(&mut psi, &health, cfg.variant == Variant::MinHealth);
        }
        let n_policy = psi.len();
        let obs = Array2::from_shape_vec((n_policy, batch.obs_dim), obs).map_err(|e| config(e.to_string()))?;
        let actions = Array2::from_shape_vec((n_policy, batch.action_dim), actions).map_err(|e| config(e.to_string()))?;
        let critic_width = self.critic.mlp.spec().input_width();
        let n_critic = critic_y.len();
        let critic_x = Array2::from_shape_vec((n_critic, critic_width), critic_x).map_err(|e| config(e.to_string()))?;

        let mut rng = stream(self.seed, &[domain::SHUFFLE, self.iteration]);
        let mut policy_order: Vec<usize> = (0..n_policy).collect();
        let mut critic_order: Vec<usize> = (0..n_critic).collect();
        let (mut p_loss, mut c_loss, mut clip, mut p_count, mut c_count) = (0.0, 0.0, 0.0, 0usize, 0usize);
        let mut entropy = self.policy.entropy();
        let m = cfg.minibatches;
        for _ in 0..cfg.epochs {
            policy_order.shuffle(&mut rng);
            critic_order.shuffle(&mut rng);
            for chunk in 0..m {
                let idx = &policy_order[chunk * n_policy / m..(chunk + 1) * n_policy / m];
                if !idx.is_empty() {
                    let o = obs.select(Axis(0), idx);
                    let a = actions.select(Axis(0), idx);
                    let lp: Vec<f64> = idx.iter().map(|&k| old_logp[k]).collect();
                    let ps: Vec<f64> = idx.iter().map(|&k| psi[k]).collect();
                    let h: Vec<f64> = idx.iter().map(|&k| health[k]).collect();
                    let out = ppo_policy_loss(
                        &self.policy,
                        PolicyMinibatch { observations: o.view(), actions: a.view(), old_log_probs: &lp, psi: &ps, health: &h },
                        cfg.clip_epsilon,
                        cfg.entropy_coef,
                    )?;
                    let mut params = self.policy.flat_params();
                    self.policy_adam.update(&mut params, &out.grad, cfg.actor_lr)?;
                    self.policy.set_flat_params(&params)?;
                    p_loss += out.loss;
                    clip += out.clip_fraction;
                    entropy = out.entropy;
                    p_count += 1;
                }
                let idx = &critic_order[chunk * n_critic / m..(chunk + 1) * n_critic / m];
                if !idx.is_empty() {
                    let x = critic_x.select(Axis(0), idx);
                    let y: Vec<f64> = idx.iter().map(|&k| critic_y[k]).collect();
                    let (loss, grad) = critic_loss(&self.critic.mlp, x.view(), &y)?;
                    let lr = match self.critic.kind {
                        CriticKind::Central => cfg.critic_lr,
                        CriticKind::Local => cfg.local_critic_lr,
                    };
                    self.critic_adam.update(self.critic.mlp.params_mut(), &grad, lr)?;
                    c_loss += loss;
                    c_count += 1;
                }
            }
        }

        let returns = batch.episode_returns();
        let e = returns.len().max(1) as f64;
        Ok(IterationStats {
            iteration: self.iteration,
            episodes: self.episodes_done + batch.episodes.len(),
            batch_episodes: batch.episodes.len(),
            mean_return: returns.iter().sum::<f64>() / e,
            mean_final_deaths: batch.episodes.iter().map(|ep| ep.final_deaths() as f64).sum::<f64>() / e,
            episode_returns: returns,
            samples: n_policy,
            policy_loss: p_loss / p_count.max(1) as f64,
            critic_loss: c_loss / c_count.max(1) as f64,
            clip_fraction: clip / p_count.max(1) as f64,
            entropy,
        })
        .map(|s| {
            debug_assert_eq!(s.samples, batch.episodes.iter().map(|ep| ep.rewards.len()).sum::<usize>() * n);
            s
        })
    }
}

fn config_err(msg: &str) -> crate::Error {
    config(msg)
}

/// Standardises credit over the batch. For min-health, samples of dead
/// agents keep exactly zero credit.
fn normalize(psi: &mut [f64], health: &[f64], keep_dead_zero: bool) {
    let live: Vec<usize> = (0..psi.len()).filter(|&k| !keep_dead_zero || health[k] > 0.0).collect();
    if live.len() < 2 {
        return;
    }
    let mean = live.iter().map(|&k| psi[k]).sum::<f64>() / live.len() as f64;
    let var = live.iter().map(|&k| (psi[k] - mean).powi(2)).sum::<f64>() / live.len() as f64;
    let sd = var.sqrt() + 1e-8;
    for &k in &live {
        psi[k] = (psi[k] - mean) / sd;
    }
}
