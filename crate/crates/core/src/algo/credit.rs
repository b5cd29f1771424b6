//! Per-agent credit signals `Ψ_{i,t}` for the three variants.

use ndarray::Array2;

use super::gae::{compute_gae, compute_value_targets};
use super::rollout::{as_matrix, RolloutBatch};
use super::Variant;
use crate::envs::Environment;
use crate::error::{config, Error, Result};
use crate::health::make_counterfactual_state;
use crate::nn::{CriticKind, Mlp};

/// A value network together with what it conditions on.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub kind: CriticKind,
    pub mlp: Mlp,
}

impl Critic {
    /// Values for the critic features of every state in `states`.
    pub fn state_values(&self, env: &dyn Environment, states: &[crate::JointState]) -> Result<Vec<f64>> {
        let d = env.critic_dim();
        let mut x = Array2::zeros((states.len(), d));
        for (row, s) in x.rows_mut().into_iter().zip(states) {
            let mut row = row;
            env.critic_features(s, row.as_slice_mut().expect("contiguous row"));
        }
        Ok(self.mlp.predict(x.view())?.column(0).to_vec())
    }
}

/// Quantities derived from one episode of a batch. Indexing follows the
/// critic: central arrays are per step `t`, local arrays per `t * n + i`.
/// `psi` is always per `t * n + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageRecord {
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub old_values: Vec<f64>,
    pub psi: Vec<f64>,
    /// `V_old(s_t^{¬i})` per `t * n + i`, min-health only.
    pub counterfactual_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CreditParams {
    pub gamma: f64,
    pub lambda: f64,
    pub h_min: f64,
}

fn expected_kind(variant: Variant) -> CriticKind {
    match variant {
        Variant::LocalCritic => CriticKind::Local,
        Variant::CentralCritic | Variant::MinHealth => CriticKind::Central,
    }
}

/// Computes `Ψ_{i,t}`, value targets and old values for every episode.
pub fn compute_psi(
    variant: Variant,
    batch: &RolloutBatch,
    critic: &Critic,
    env: &dyn Environment,
    params: CreditParams,
) -> Result<Vec<AdvantageRecord>> {
    if critic.kind != expected_kind(variant) {
        return Err(config(format!("variant {variant} cannot use a {:?} critic", critic.kind)));
    }
    let expected_input = match critic.kind {
        CriticKind::Central => env.critic_dim(),
        CriticKind::Local => batch.obs_dim,
    };
    if critic.mlp.spec().input_width() != expected_input {
        return Err(config("critic input width does not match the environment"));
    }
    batch.episodes.iter().map(|ep| episode_psi(variant, batch, ep, critic, env, params)).collect()
}

fn episode_psi(
    variant: Variant,
    batch: &RolloutBatch,
    ep: &super::rollout::EpisodeRecord,
    critic: &Critic,
    env: &dyn Environment,
    params: CreditParams,
) -> Result<AdvantageRecord> {
    let n = batch.n_agents;
    let steps = ep.rewards.len();
    match variant {
        Variant::LocalCritic => {
            let values = critic.mlp.predict(as_matrix(&ep.observations, batch.obs_dim))?;
            let values = values.column(0);
            let mut adv = vec![0.0; steps * n];
            let mut old = vec![0.0; steps * n];
            for i in 0..n {
                let mut v: Vec<f64> = (0..steps).map(|t| values[t * n + i]).collect();
                v.push(0.0);
                let a = compute_gae(&ep.rewards, &v, params.gamma, params.lambda)?;
                for t in 0..steps {
                    adv[t * n + i] = a[t];
                    old[t * n + i] = v[t];
                }
            }
            let targets = compute_value_targets(&adv, &old)?;
            Ok(AdvantageRecord { psi: adv.clone(), advantages: adv, value_targets: targets, old_values: old, counterfactual_values: None })
        }
        Variant::CentralCritic | Variant::MinHealth => {
            let mut v = critic.state_values(env, &ep.states[..steps])?;
            v.push(0.0);
            let adv = compute_gae(&ep.rewards, &v, params.gamma, params.lambda)?;
            v.truncate(steps);
            let targets = compute_value_targets(&adv, &v)?;
            if variant == Variant::CentralCritic {
                let psi = (0..steps * n).map(|k| adv[k / n]).collect();
                return Ok(AdvantageRecord { advantages: adv, value_targets: targets, old_values: v, psi, counterfactual_values: None });
            }
            let mut cf_states = Vec::with_capacity(steps * n);
            for s in &ep.states[..steps] {
                for i in 0..n {
                    cf_states.push(make_counterfactual_state(s, i, params.h_min)?);
                }
            }
            let cf = critic.state_values(env, &cf_states)?;
            let psi: Vec<f64> = (0..steps * n).map(|k| ep.health[k] * (targets[k / n] - cf[k])).collect();
            if let Some(k) = psi.iter().position(|p| !p.is_finite()) {
                return Err(Error::Numeric(format!("non-finite credit at sample {k}")));
            }
            Ok(AdvantageRecord { advantages: adv, value_targets: targets, old_values: v, psi, counterfactual_values: Some(cf) })
        }
    }
}
