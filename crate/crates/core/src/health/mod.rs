//! Dec-POMDP value types with per-agent system health.
//!
//! A joint state decomposes as `s = (h, p)`: the health vector `h` and the
//! remaining (non-health) state `p`. Health lies in `[0, 1]`; zero means the
//! agent is terminated and stays terminated for the rest of the episode.

mod validate;

pub use validate::{validate_health_properties, HealthPropertyReport, PropertyResult};

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{argument, Error, Result};

/// Minimum health substituted into counterfactual states unless configured.
pub const DEFAULT_H_MIN: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HealthVector(Vec<f64>);

impl HealthVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, h)) = values
            .iter()
            .enumerate()
            .find(|(_, h)| !(0.0..=1.0).contains(*h))
        {
            return Err(argument(format!("health[{i}] = {h} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn full(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn is_dead(&self, i: usize) -> bool {
        self.0[i] == 0.0
    }

    pub fn alive_count(&self) -> usize {
        self.0.iter().filter(|&&h| h > 0.0).count()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sets one element, keeping the `[0, 1]` invariant.
    pub fn set(&mut self, i: usize, value: f64) -> Result<()> {
        if i >= self.0.len() {
            return Err(argument(format!("agent {i} out of range for {} agents", self.0.len())));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(argument(format!("health {value} outside [0, 1]")));
        }
        self.0[i] = value;
        Ok(())
    }
}

/// Full system state `s = (h, p)` at step `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub health: HealthVector,
    pub nonhealth: Vec<f64>,
    pub time: usize,
}

const STATE_MAGIC: &[u8; 4] = b"JST1";

impl JointState {
    pub fn n_agents(&self) -> usize {
        self.health.len()
    }

    /// Little-endian binary encoding; [`JointState::from_bytes`] inverts it
    /// bit-exactly.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * (self.health.len() + self.nonhealth.len()));
        out.extend_from_slice(STATE_MAGIC);
        out.extend_from_slice(&(self.health.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.nonhealth.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.time as u64).to_le_bytes());
        for x in self.health.as_slice().iter().chain(&self.nonhealth) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| argument(format!("malformed joint state: {msg}"));
        if bytes.len() < 20 || &bytes[..4] != STATE_MAGIC {
            return Err(bad("header"));
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let time = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = &bytes[20..];
        if body.len() != 8 * (n + m) {
            return Err(bad("length"));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let health = HealthVector::new(values.by_ref().take(n).collect())?;
        let nonhealth = values.collect();
        Ok(Self { health, nonhealth, time })
    }
}

macro_rules! per_agent_matrix {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Array2<f64>);

        impl $name {
            pub fn zeros(n_agents: usize, dim: usize) -> Self {
                Self(Array2::zeros((n_agents, dim)))
            }

            pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
                let dim = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != dim) {
                    return Err(argument("ragged per-agent rows"));
                }
                let flat = rows.iter().flatten().copied().collect();
                Ok(Self(Array2::from_shape_vec((rows.len(), dim), flat).expect("shape checked")))
            }

            pub fn from_array(a: Array2<f64>) -> Self {
                Self(a)
            }

            pub fn n_agents(&self) -> usize {
                self.0.nrows()
            }

            pub fn dim(&self) -> usize {
                self.0.ncols()
            }

            pub fn agent(&self, i: usize) -> ArrayView1<'_, f64> {
                self.0.row(i)
            }

            pub fn agent_mut(&mut self, i: usize) -> ndarray::ArrayViewMut1<'_, f64> {
                self.0.row_mut(i)
            }

            pub fn view(&self) -> ArrayView2<'_, f64> {
                self.0.view()
            }

            pub fn into_inner(self) -> Array2<f64> {
                self.0
            }
        }
    };
}

per_agent_matrix!(
    /// One continuous control vector per agent (rows).
    JointAction
);
per_agent_matrix!(
    /// One local observation vector per agent (rows).
    JointObservation
);

/// Observation-action history `τ_{i,t}` of a single agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationActionHistory {
    entries: Vec<(Vec<f64>, Option<Vec<f64>>)>,
}

impl ObservationActionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts a new step; fails if the previous step has no action yet.
    pub fn push_observation(&mut self, obs: Vec<f64>) -> Result<()> {
        if matches!(self.entries.last(), Some((_, None))) {
            return Err(Error::State("previous observation still awaits an action".into()));
        }
        self.entries.push((obs, None));
        Ok(())
    }

    pub fn record_action(&mut self, action: Vec<f64>) -> Result<()> {
        match self.entries.last_mut() {
            Some((_, slot @ None)) => {
                *slot = Some(action);
                Ok(())
            }
            _ => Err(Error::State("no pending observation to attach an action to".into())),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Vec<f64>, Option<Vec<f64>>)] {
        &self.entries
    }

    pub fn last_observation(&self) -> Option<&[f64]> {
        self.entries.last().map(|(o, _)| o.as_slice())
    }
}

/// Executable action for an agent at the given health (binary regime): the
/// proposal itself while alive, the zero vector once terminated.
pub fn constrict_action(proposed: &[f64], health: f64) -> Vec<f64> {
    if health > 0.0 {
        proposed.to_vec()
    } else {
        vec![0.0; proposed.len()]
    }
}

/// Observation a terminated agent receives: its last live observation with
/// the `masked` features (velocity, own health) zeroed. Idempotent.
pub fn constrict_observation(last_live: &[f64], masked: &[usize]) -> Vec<f64> {
    let mut out = last_live.to_vec();
    for &k in masked {
        out[k] = 0.0;
    }
    out
}

/// `s^{¬i}`: the same state with agent `i`'s health replaced by `h_min`.
pub fn make_counterfactual_state(state: &JointState, agent: usize, h_min: f64) -> Result<JointState> {
    if agent >= state.n_agents() {
        return Err(argument(format!(
            "agent index {agent} out of range for {} agents",
            state.n_agents()
        )));
    }
    let mut cf = state.clone();
    cf.health.set(agent, h_min)?;
    Ok(cf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(h: &[f64]) -> JointState {
        JointState {
            health: HealthVector::new(h.to_vec()).unwrap(),
            nonhealth: vec![0.25, -1.5, 3.0, f64::MIN_POSITIVE],
            time: 4,
        }
    }

    #[test]
    fn constrict_examples() {
        assert_eq!(constrict_action(&[0.3, -0.2], 1.0), vec![0.3, -0.2]);
        assert_eq!(constrict_action(&[0.9, 0.9], 0.0), vec![0.0, 0.0]);
        assert_eq!(constrict_action(&[0.0, 0.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn counterfactual_examples() {
        let s = state(&[1.0, 1.0, 0.0]);
        let cf = make_counterfactual_state(&s, 0, 0.0).unwrap();
        assert_eq!(cf.health.as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(cf.nonhealth, s.nonhealth);
        assert_eq!(s.health.as_slice(), &[1.0, 1.0, 0.0], "input unmodified");

        let s = state(&[1.0, 1.0]);
        let once = make_counterfactual_state(&s, 1, 0.0).unwrap();
        let twice = make_counterfactual_state(&once, 1, 0.0).unwrap();
        assert_eq!(once, twice);

        let s = state(&[0.0, 1.0]);
        assert_eq!(make_counterfactual_state(&s, 0, 0.0).unwrap(), s);
    }

    #[test]
    fn counterfactual_rejects_bad_index() {
        let s = state(&[1.0, 1.0]);
        assert!(matches!(make_counterfactual_state(&s, 2, 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn health_vector_rejects_out_of_range() {
        assert!(HealthVector::new(vec![1.0, 1.1]).is_err());
        assert!(HealthVector::new(vec![-0.0, 0.5]).is_ok());
        assert!(HealthVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn history_pairs_observations_with_actions() {
        let mut h = ObservationActionHistory::new();
        h.push_observation(vec![1.0]).unwrap();
        assert!(h.push_observation(vec![2.0]).is_err());
        h.record_action(vec![0.5]).unwrap();
        assert!(h.record_action(vec![0.5]).is_err());
        h.push_observation(vec![2.0]).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.entries()[1].1, None);
    }

    #[test]
    fn observation_constriction_is_idempotent() {
        let o = constrict_observation(&[1.0, 2.0, 3.0, 4.0], &[0, 2]);
        assert_eq!(o, vec![0.0, 2.0, 0.0, 4.0]);
        assert_eq!(constrict_observation(&o, &[0, 2]), o);
    }

    proptest! {
        #[test]
        fn state_bytes_round_trip(
            h in prop::collection::vec(0.0f64..=1.0, 0..6),
            p in prop::collection::vec(any::<f64>(), 0..12),
            t in 0usize..1000,
        ) {
            let s = JointState { health: HealthVector::new(h).unwrap(), nonhealth: p, time: t };
            let back = JointState::from_bytes(&s.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), s.to_bytes());
        }

        #[test]
        fn counterfactual_touches_exactly_one_element(
            h in prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0]), 1..6),
            p in prop::collection::vec(-10.0f64..10.0, 0..8),
            pick in any::<prop::sample::Index>(),
        ) {
            let s = JointState { health: HealthVector::new(h).unwrap(), nonhealth: p, time: 3 };
            let i = pick.index(s.n_agents());
            let cf = make_counterfactual_state(&s, i, 0.0).unwrap();
            prop_assert_eq!(cf.time, s.time);
            prop_assert!(cf.nonhealth.iter().zip(&s.nonhealth).all(|(a, b)| a.to_bits() == b.to_bits()));
            for j in 0..s.n_agents() {
                if j == i {
                    prop_assert_eq!(cf.health.get(j), 0.0);
                } else {
                    prop_assert_eq!(cf.health.get(j).to_bits(), s.health.get(j).to_bits());
                }
            }
        }
    }
}
