//! Monte-Carlo checks of the four health properties on a simulator.

use std::fmt;

use rand::Rng;

use super::{constrict_action, constrict_observation, make_counterfactual_state, JointAction};
use crate::envs::Environment;
use crate::rng::{domain, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// Number of individual checks performed (zero means a vacuous pass).
    pub checked: usize,
    pub counterexample: Option<String>,
}

impl PropertyResult {
    fn new(name: &'static str) -> Self {
        Self { name, passed: true, checked: 0, counterexample: None }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.passed {
            self.passed = false;
            self.counterexample = Some(describe());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HealthPropertyReport {
    /// Property 1: zero health is absorbing.
    pub non_recoverable: PropertyResult,
    /// Property 2: lower health never reaches states full health cannot.
    pub reachable_set: PropertyResult,
    /// Property 3: lower health never enlarges the executable action set.
    pub action_set: PropertyResult,
    /// Property 4: lower health never enlarges the observable set.
    pub observation_set: PropertyResult,
    pub transitions: usize,
    pub simulation_error: Option<String>,
}

impl HealthPropertyReport {
    pub fn results(&self) -> [&PropertyResult; 4] {
        [&self.non_recoverable, &self.reachable_set, &self.action_set, &self.observation_set]
    }

    pub fn all_passed(&self) -> bool {
        self.simulation_error.is_none() && self.results().iter().all(|r| r.passed)
    }
}

impl fmt::Display for HealthPropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} sampled transitions", self.transitions)?;
        for r in self.results() {
            let verdict = if r.passed { "PASS" } else { "FAIL" };
            write!(f, "  [{verdict}] {:<32} checks={}", r.name, r.checked)?;
            if let Some(c) = &r.counterexample {
                write!(f, "  counterexample: {c}")?;
            }
            writeln!(f)?;
        }
        if let Some(e) = &self.simulation_error {
            writeln!(f, "  simulation error: {e}")?;
        }
        Ok(())
    }
}

/// Simulates uniformly random joint actions for `num_samples` transitions and
/// checks the health properties on every transition. Failures are reported
/// with the first counterexample found, never raised.
pub fn validate_health_properties(env: &dyn Environment, num_samples: usize, seed: u64) -> HealthPropertyReport {
    let mut report = HealthPropertyReport {
        non_recoverable: PropertyResult::new("non-recoverable minimum health"),
        reachable_set: PropertyResult::new("constriction of reachable set"),
        action_set: PropertyResult::new("constriction of available actions"),
        observation_set: PropertyResult::new("constriction of observable set"),
        transitions: 0,
        simulation_error: None,
    };
    if let Err(e) = run(env, num_samples, seed, &mut report) {
        report.simulation_error = Some(e.to_string());
    }
    report
}

fn run(env: &dyn Environment, num_samples: usize, seed: u64, report: &mut HealthPropertyReport) -> crate::Result<()> {
    let n = env.n_agents();
    let adim = env.action_dim();
    let bound = env.action_bound();
    let mask = env.dead_observation_mask().to_vec();
    let mut rng = stream(seed, &[domain::VALIDATE, 0]);
    let mut probe_rng = stream(seed, &[domain::VALIDATE, 1]);

    while report.transitions < num_samples {
        let (mut state, mut obs) = env.reset(&mut rng)?;
        let mut last_live: Vec<Vec<f64>> = (0..n).map(|i| obs.agent(i).to_vec()).collect();
        loop {
            // Sample beyond the bounds so clamping is exercised too.
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..adim).map(|_| rng.random_range(-1.5 * bound..1.5 * bound)).collect())
                .collect();
            let sampled = JointAction::from_rows(&rows)?;
            let out = env.step(&state, &obs, &sampled, &mut rng)?;
            report.transitions += 1;
            let t = state.time;

            for i in 0..n {
                if state.health.is_dead(i) {
                    report.non_recoverable.check(out.state.health.is_dead(i), || {
                        format!("t={t}: agent {i} revived to health {}", out.state.health.get(i))
                    });
                }
            }
            let forced_agent = probe_rng.random_range(0..n);
            let forced = make_counterfactual_state(&state, forced_agent, 0.0)?;
            let forced_out = env.step(&forced, &obs, &sampled, &mut probe_rng)?;
            report.non_recoverable.check(forced_out.state.health.is_dead(forced_agent), || {
                format!(
                    "t={t}: agent {forced_agent} forced to health 0 stepped to {}",
                    forced_out.state.health.get(forced_agent)
                )
            });

            for i in 0..n {
                let clamped: Vec<f64> = sampled.agent(i).iter().map(|a| a.clamp(-bound, bound)).collect();
                let expected = constrict_action(&clamped, state.health.get(i));
                let executed = out.executed.agent(i).to_vec();
                report.action_set.check(executed == expected, || {
                    format!("t={t}: agent {i} (h={}) executed {executed:?}, expected {expected:?}", state.health.get(i))
                });
                let dead_set = constrict_action(&rows[i], 0.0);
                let full_set = constrict_action(&clamped, 1.0);
                report.action_set.check(
                    dead_set.iter().all(|a| a.abs() <= bound) && full_set == clamped,
                    || format!("t={t}: constricted action set not contained in the full-health set"),
                );
            }

            report.reachable_set.check(env.reachable(&state, &out.state), || {
                format!("t={t}: executed successor not reachable from its own state")
            });
            for i in (0..n).filter(|&i| state.health.is_dead(i)) {
                let mut revived = state.clone();
                revived.health.set(i, 1.0)?;
                report.reachable_set.check(env.reachable(&revived, &out.state), || {
                    format!("t={t}: successor of dead agent {i} unreachable at full health")
                });
            }

            for i in 0..n {
                let o = out.observations.agent(i).to_vec();
                report.observation_set.check(o.len() == env.obs_dim(), || {
                    format!("t={t}: agent {i} observation has {} features", o.len())
                });
                if out.state.health.is_dead(i) {
                    let allowed = constrict_observation(&last_live[i], &mask);
                    report.observation_set.check(o == allowed, || {
                        format!("t={t}: dead agent {i} observed {o:?}, outside {{{allowed:?}}}")
                    });
                } else {
                    last_live[i] = o;
                }
            }

            state = out.state;
            obs = out.observations;
            if out.done || report.transitions >= num_samples {
                break;
            }
        }
    }
    Ok(())
}
