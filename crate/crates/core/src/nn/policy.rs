use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use super::gaussian::{gaussian_entropy, gaussian_logprob};
use super::mlp::{Activation, Mlp, MlpSpec};
use crate::error::{argument, Result};
use crate::health::{JointAction, JointObservation};
use crate::rng::SimRng;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Scale applied to the initial output-layer weights so starting means are
/// close to zero.
const MEAN_OUTPUT_SCALE: f64 = 0.01;

/// Shared policy `π_θ`: an MLP producing the action mean from a local
/// observation, plus a state-independent log standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mlp: Mlp,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(obs_dim: usize, hidden: &[usize], activation: Activation, action_dim: usize, rng: &mut SimRng) -> Result<Self> {
        let spec = MlpSpec::uniform(obs_dim, hidden, activation, action_dim)?;
        let mlp = Mlp::init(spec, MEAN_OUTPUT_SCALE, rng);
        Ok(Self { mlp, log_std: vec![0.5f64.ln(); action_dim] })
    }

    pub fn from_parts(mlp: Mlp, log_std: Vec<f64>) -> Result<Self> {
        if log_std.len() != mlp.spec().output_width() {
            return Err(argument("log-std length must equal the action dimension"));
        }
        let mut policy = Self { mlp, log_std };
        policy.clamp_log_std();
        Ok(policy)
    }

    pub fn obs_dim(&self) -> usize {
        self.mlp.spec().input_width()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn set_log_std(&mut self, log_std: &[f64]) -> Result<()> {
        if log_std.len() != self.log_std.len() {
            return Err(argument("log-std length must equal the action dimension"));
        }
        self.log_std.copy_from_slice(log_std);
        self.clamp_log_std();
        Ok(())
    }

    fn clamp_log_std(&mut self) {
        self.log_std
            .iter_mut()
            .for_each(|l| *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX));
    }

    pub fn means(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.mlp.predict(obs)
    }

    /// Samples one action per observation row; log-probabilities are those
    /// of the unclamped draws.
    pub fn sample(&self, obs: ArrayView2<f64>, rng: &mut SimRng) -> Result<(Array2<f64>, Vec<f64>)> {
        let mut actions = self.means(obs)?;
        let mut logp = Vec::with_capacity(actions.nrows());
        for mut row in actions.rows_mut() {
            let mean = row.to_vec();
            for (a, ls) in row.iter_mut().zip(&self.log_std) {
                let eps: f64 = StandardNormal.sample(rng);
                *a += ls.exp() * eps;
            }
            logp.push(gaussian_logprob(&mean, &self.log_std, row.as_slice().expect("contiguous row")));
        }
        Ok((actions, logp))
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let (mean, _) = self.mlp.forward_one(obs)?;
        Ok(gaussian_logprob(&mean, &self.log_std, action))
    }

    /// `log π(u | o) = Σ_i log π_θ(a_i | o_i)` for independent local policies
    /// sharing parameters.
    pub fn joint_log_prob(&self, obs: &JointObservation, actions: &JointAction) -> Result<f64> {
        if obs.n_agents() != actions.n_agents() || actions.dim() != self.action_dim() {
            return Err(argument("joint observation and action shapes disagree"));
        }
        let means = self.means(obs.view())?;
        Ok((0..obs.n_agents())
            .map(|i| {
                gaussian_logprob(
                    means.row(i).as_slice().unwrap(),
                    &self.log_std,
                    &actions.agent(i).to_vec(),
                )
            })
            .sum())
    }

    pub fn entropy(&self) -> f64 {
        gaussian_entropy(&self.log_std)
    }

    /// Flat parameters: MLP parameters followed by the log-std vector.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.mlp.params().to_vec();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let n = self.mlp.n_params();
        if params.len() != n + self.log_std.len() {
            return Err(argument("flat policy parameter length mismatch"));
        }
        self.mlp.params_mut().copy_from_slice(&params[..n]);
        self.log_std.copy_from_slice(&params[n..]);
        self.clamp_log_std();
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.mlp.n_params() + self.log_std.len()
    }
}
