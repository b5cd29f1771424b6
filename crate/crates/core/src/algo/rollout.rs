//! Decentralised execution of the shared policy and the resulting batch.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::envs::Environment;
use crate::error::{argument, Error, Result};
use crate::health::{JointAction, JointState, ObservationActionHistory};
use crate::nn::GaussianPolicy;
use crate::rng::{domain, stream};

/// How agents pick actions during a rollout.
#[derive(Debug, Clone, Copy)]
pub enum Actor<'a> {
    /// Sample from `π_θ` (training).
    Stochastic(&'a GaussianPolicy),
    /// Use the mean action (evaluation).
    Greedy(&'a GaussianPolicy),
    /// Uniform actions within the bounds, log-probabilities left at 0.
    UniformRandom,
}

/// One episode: `t_f` decision steps for `n` agents.
///
/// Per-agent arrays are indexed by `t * n + i`; vector-valued entries are
/// stored contiguously behind that index.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// `s_0 … s_{t_f}`
    pub states: Vec<JointState>,
    pub observations: Vec<f64>,
    pub sampled_actions: Vec<f64>,
    pub executed_actions: Vec<f64>,
    /// Behaviour log-probabilities under `θ_old`.
    pub log_probs: Vec<f64>,
    /// `h_{i,t}` at decision time.
    pub health: Vec<f64>,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl EpisodeRecord {
    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn final_deaths(&self) -> usize {
        let last = self.states.last().expect("episode has states");
        last.n_agents() - last.health.alive_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub n_agents: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub episodes: Vec<EpisodeRecord>,
}

impl RolloutBatch {
    /// Agent-step decisions: `episodes × t_f × n`.
    pub fn n_samples(&self) -> usize {
        self.episodes.len() * self.horizon * self.n_agents
    }

    pub fn episode_returns(&self) -> Vec<f64> {
        self.episodes.iter().map(EpisodeRecord::total_return).collect()
    }

    pub fn observation(&self, e: usize, t: usize, i: usize) -> &[f64] {
        let k = (t * self.n_agents + i) * self.obs_dim;
        &self.episodes[e].observations[k..k + self.obs_dim]
    }

    pub fn sampled_action(&self, e: usize, t: usize, i: usize) -> &[f64] {
        let k = (t * self.n_agents + i) * self.action_dim;
        &self.episodes[e].sampled_actions[k..k + self.action_dim]
    }

    pub fn executed_action(&self, e: usize, t: usize, i: usize) -> &[f64] {
        let k = (t * self.n_agents + i) * self.action_dim;
        &self.episodes[e].executed_actions[k..k + self.action_dim]
    }

    /// `τ_{i,t}`: agent `i`'s observations and sampled actions up to step `t`,
    /// the last observation still awaiting its action.
    pub fn history(&self, e: usize, i: usize, t: usize) -> Result<ObservationActionHistory> {
        if e >= self.episodes.len() || i >= self.n_agents || t >= self.horizon {
            return Err(argument("history index out of range"));
        }
        let mut h = ObservationActionHistory::new();
        for k in 0..=t {
            h.push_observation(self.observation(e, k, i).to_vec())?;
            if k < t {
                h.record_action(self.sampled_action(e, k, i).to_vec())?;
            }
        }
        Ok(h)
    }

    /// Checks the structural batch invariants.
    pub fn validate(&self) -> Result<()> {
        for (e, ep) in self.episodes.iter().enumerate() {
            if ep.rewards.len() != self.horizon || ep.states.len() != self.horizon + 1 {
                return Err(Error::State(format!("episode {e} does not span t_f steps")));
            }
            if let Some(k) = ep.log_probs.iter().position(|l| !l.is_finite()) {
                return Err(Error::Numeric(format!("episode {e}: non-finite behaviour log-prob at {k}")));
            }
            for w in ep.states.windows(2) {
                for i in 0..self.n_agents {
                    if w[0].health.is_dead(i) && !w[1].health.is_dead(i) {
                        return Err(Error::State(format!("episode {e}: agent {i} revived at t={}", w[1].time)));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs one episode from a fresh reset.
pub fn run_episode(env: &dyn Environment, actor: Actor<'_>, rng: &mut crate::rng::SimRng) -> Result<EpisodeRecord> {
    let (n, t_f, adim, odim) = (env.n_agents(), env.horizon(), env.action_dim(), env.obs_dim());
    let (mut state, mut obs) = env.reset(rng)?;
    let mut rec = EpisodeRecord {
        states: Vec::with_capacity(t_f + 1),
        observations: Vec::with_capacity(t_f * n * odim),
        sampled_actions: Vec::with_capacity(t_f * n * adim),
        executed_actions: Vec::with_capacity(t_f * n * adim),
        log_probs: Vec::with_capacity(t_f * n),
        health: Vec::with_capacity(t_f * n),
        rewards: Vec::with_capacity(t_f),
        terminal: Vec::with_capacity(t_f),
    };
    for _ in 0..t_f {
        let (actions, logp) = match actor {
            Actor::Stochastic(policy) => policy.sample(obs.view(), rng)?,
            Actor::Greedy(policy) => (policy.means(obs.view())?, vec![0.0; n]),
            Actor::UniformRandom => {
                let b = env.action_bound();
                (Array2::from_shape_fn((n, adim), |_| rng.random_range(-b..=b)), vec![0.0; n])
            }
        };
        rec.observations.extend(obs.view().iter());
        rec.sampled_actions.extend(actions.iter());
        rec.log_probs.extend_from_slice(&logp);
        rec.health.extend_from_slice(state.health.as_slice());
        let out = env.step(&state, &obs, &JointAction::from_array(actions), rng)?;
        rec.executed_actions.extend(out.executed.view().iter());
        rec.rewards.push(out.reward);
        rec.terminal.push(out.done);
        rec.states.push(std::mem::replace(&mut state, out.state));
        obs = out.observations;
        if out.done {
            break;
        }
    }
    rec.states.push(state);
    Ok(rec)
}

/// Collects `count` episodes in parallel. Episode `k` of the batch uses the
/// stream derived from `(seed, first_episode + k)`, so the batch is identical
/// for any worker count.
pub fn collect_rollouts(
    env: &dyn Environment,
    actor: Actor<'_>,
    count: usize,
    seed: u64,
    first_episode: u64,
) -> Result<RolloutBatch> {
    let episodes = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, &[domain::ROLLOUT, first_episode + k as u64]);
            run_episode(env, actor, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RolloutBatch {
        n_agents: env.n_agents(),
        obs_dim: env.obs_dim(),
        action_dim: env.action_dim(),
        horizon: env.horizon(),
        episodes,
    })
}

/// Stacks the rows of a flat per-sample array into a matrix.
pub(crate) fn as_matrix(flat: &[f64], width: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((flat.len() / width, width), flat).expect("flat array is a whole number of rows")
}
