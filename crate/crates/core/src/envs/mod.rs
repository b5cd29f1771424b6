//! Environments: the particle-world scenarios and the tabular verification
//! model.

pub mod particle;
pub mod tabular;

use std::fmt;
use std::str::FromStr;

pub use particle::{ParticleEnv, ParticleWorldConfig};
pub use tabular::{TabularDecPomdp, TabularPolicy, Trajectory};

use crate::error::{config, Result};
use crate::health::{JointAction, JointObservation, JointState};
use crate::rng::SimRng;

/// Result of advancing an environment by one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: JointState,
    pub observations: JointObservation,
    /// Actions after clamping to the action bounds and health constriction.
    pub executed: JointAction,
    /// The joint reward, identical for every agent.
    pub reward: f64,
    pub done: bool,
}

/// Contract every simulated Dec-POMDP satisfies.
///
/// Environments are immutable descriptions; all episode state travels in
/// [`JointState`] and the caller supplies the random stream, so independent
/// episodes can be simulated concurrently.
pub trait Environment: Send + Sync {
    fn name(&self) -> &str;
    fn n_agents(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Symmetric per-axis bound on executable actions.
    fn action_bound(&self) -> f64 {
        1.0
    }
    /// Episode length `t_f`.
    fn horizon(&self) -> usize;

    /// Width of the central-critic input built by [`Environment::critic_features`].
    fn critic_dim(&self) -> usize;
    /// Critic input: health, non-health state and normalised time.
    fn critic_features(&self, state: &JointState, out: &mut [f64]);

    /// Observation features zeroed for terminated agents.
    fn dead_observation_mask(&self) -> &[usize];

    fn reset(&self, rng: &mut SimRng) -> Result<(JointState, JointObservation)>;

    /// Advances one step. `prev_obs` are the observations emitted for `state`;
    /// a terminated agent keeps observing its last live view.
    fn step(
        &self,
        state: &JointState,
        prev_obs: &JointObservation,
        sampled: &JointAction,
        rng: &mut SimRng,
    ) -> Result<StepOutcome>;

    /// Whether the non-health part of `to` can follow `from` under some
    /// executable joint action (health transitions are not checked).
    fn reachable(&self, from: &JointState, to: &JointState) -> bool;
}

/// Named scenarios selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    HazardousNav,
    HazardousComm,
    CoopNav,
    TabularToy,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::HazardousNav,
        Scenario::HazardousComm,
        Scenario::CoopNav,
        Scenario::TabularToy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::HazardousNav => "hazardous-nav",
            Scenario::HazardousComm => "hazardous-comm",
            Scenario::CoopNav => "coop-nav",
            Scenario::TabularToy => "tabular-toy",
        }
    }

    pub fn is_particle(self) -> bool {
        !matches!(self, Scenario::TabularToy)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| config(format!("unknown environment '{s}'")))
    }
}

/// Builds a particle environment; the tabular model is not a simulator and
/// is rejected here.
pub fn make_env(cfg: ParticleWorldConfig) -> Result<Box<dyn Environment>> {
    if !cfg.scenario.is_particle() {
        return Err(config(format!(
            "'{}' is an exact-verification model, not a simulator",
            cfg.scenario
        )));
    }
    Ok(Box::new(ParticleEnv::new(cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.as_str().parse::<Scenario>().unwrap(), sc);
        }
        assert!("multiwalker".parse::<Scenario>().is_err());
    }

    #[test]
    fn tabular_is_not_simulated() {
        let mut cfg = ParticleWorldConfig::for_scenario(Scenario::HazardousNav, 3);
        cfg.scenario = Scenario::TabularToy;
        assert!(make_env(cfg).is_err());
    }
}
