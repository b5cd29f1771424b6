//! Exact verification on enumerable tabular models: objective, finite
//! difference gradients and the exact expectation of the sampled estimators.
//!
//! All oracle models are undiscounted.

mod suite;

pub use suite::{run_verification, CheckOutcome, VerificationReport};

use rand::Rng;

use crate::envs::tabular::{for_each_trajectory, TabularDecPomdp, TabularPolicy};
use crate::error::{argument, Result};
use crate::rng::SimRng;

/// Which per-agent weight multiplies the score in the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorVariant {
    /// `Ψ_{i,t} = G_t`
    Returns,
    /// `Ψ_{i,t} = h_{i,t} (G_t − b_t(s_t^{¬i}))`
    MinHealth,
    /// `Ψ_{i,t} = −h_{i,t} b_t(s_t^{¬i})`, the baseline term alone.
    BaselineOnly,
}

/// `J(θ) = Σ_τ P(τ) G_0(τ)`.
pub fn exact_objective(model: &TabularDecPomdp, policy: &TabularPolicy, budget: u64) -> Result<f64> {
    let mut j = 0.0;
    for_each_trajectory(model, policy, budget, |t, p| j += p * t.total_return())?;
    Ok(j)
}

/// Central finite differences of [`exact_objective`].
pub fn exact_gradient_fd(model: &TabularDecPomdp, policy: &TabularPolicy, step: f64, budget: u64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(argument("finite-difference step must be positive"));
    }
    let mut probe = policy.clone();
    let mut grad = vec![0.0; policy.theta.len()];
    for (k, g) in grad.iter_mut().enumerate() {
        probe.theta[k] = policy.theta[k] + step;
        let up = exact_objective(model, &probe, budget)?;
        probe.theta[k] = policy.theta[k] - step;
        let down = exact_objective(model, &probe, budget)?;
        probe.theta[k] = policy.theta[k];
        *g = (up - down) / (2.0 * step);
    }
    Ok(grad)
}

/// Exact state values `V_t(s)` of the memoryless policy by backward
/// induction, indexed `t * n_states + s` for `t ∈ 0..=H` (`V_H = 0`).
pub fn exact_values(model: &TabularDecPomdp, policy: &TabularPolicy) -> Vec<f64> {
    let (ns, nj, h) = (model.n_states, model.n_joint(), model.horizon);
    let mut v = vec![0.0; (h + 1) * ns];
    for t in (0..h).rev() {
        for s in 0..ns {
            let mut acc = 0.0;
            for u in 0..nj {
                let pu = policy.joint_prob(model, s, u);
                if pu == 0.0 {
                    continue;
                }
                let next: f64 = (0..ns).map(|s2| model.t(s, u, s2) * v[(t + 1) * ns + s2]).sum();
                acc += pu * (model.r(s, u) + next);
            }
            v[t * ns + s] = acc;
        }
    }
    v
}

/// Per-trajectory estimator `g(τ) = Σ_t Σ_i Ψ_{i,t} ∇ log π_i(a_{i,t} | z_i(s_t))`.
fn trajectory_estimator(
    model: &TabularDecPomdp,
    policy: &TabularPolicy,
    variant: EstimatorVariant,
    baseline: &[f64],
    traj: &crate::envs::Trajectory,
    out: &mut [f64],
) {
    out.fill(0.0);
    let ns = model.n_states;
    let g = traj.returns_to_go();
    for t in 0..traj.actions.len() {
        let s = traj.states[t];
        let u = traj.actions[t];
        for i in 0..model.n_agents {
            let h = model.health(s, i);
            let b = baseline[t * ns + model.counterfactual_state(i, s)];
            let psi = match variant {
                EstimatorVariant::Returns => g[t],
                EstimatorVariant::MinHealth => h * (g[t] - b),
                EstimatorVariant::BaselineOnly => -h * b,
            };
            policy.accumulate_score(model, i, s, model.action_of(u, i), psi, out);
        }
    }
}

fn check_baseline(model: &TabularDecPomdp, baseline: &[f64]) -> Result<()> {
    if baseline.len() < model.horizon * model.n_states {
        return Err(argument("baseline table must cover every (t, s)"));
    }
    Ok(())
}

/// `E_π[g(τ)]` computed exactly over all trajectories. `baseline` is indexed
/// `t * n_states + s` and evaluated at the counterfactual state.
pub fn exact_estimator_expectation(
    model: &TabularDecPomdp,
    policy: &TabularPolicy,
    variant: EstimatorVariant,
    baseline: &[f64],
    budget: u64,
) -> Result<Vec<f64>> {
    check_baseline(model, baseline)?;
    let mut mean = vec![0.0; policy.theta.len()];
    let mut g = vec![0.0; policy.theta.len()];
    for_each_trajectory(model, policy, budget, |traj, p| {
        trajectory_estimator(model, policy, variant, baseline, traj, &mut g);
        mean.iter_mut().zip(&g).for_each(|(m, x)| *m += p * x);
    })?;
    Ok(mean)
}

/// Trace of the covariance of `g(τ)` under the trajectory distribution.
pub fn estimator_variance(
    model: &TabularDecPomdp,
    policy: &TabularPolicy,
    variant: EstimatorVariant,
    baseline: &[f64],
    budget: u64,
) -> Result<f64> {
    check_baseline(model, baseline)?;
    let mut mean = vec![0.0; policy.theta.len()];
    let mut second = 0.0;
    let mut g = vec![0.0; policy.theta.len()];
    for_each_trajectory(model, policy, budget, |traj, p| {
        trajectory_estimator(model, policy, variant, baseline, traj, &mut g);
        mean.iter_mut().zip(&g).for_each(|(m, x)| *m += p * x);
        second += p * g.iter().map(|x| x * x).sum::<f64>();
    })?;
    Ok(second - mean.iter().map(|m| m * m).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseReport {
    pub passed: bool,
    /// Dead-agent decision points examined.
    pub dead_decision_points: usize,
    pub failure: Option<String>,
}

/// Checks that every dead-agent decision point has a singleton action set
/// and hence an identically zero score.
pub fn check_lemma2_pointwise(model: &TabularDecPomdp, policy: &TabularPolicy) -> PointwiseReport {
    let mut report = PointwiseReport { passed: true, dead_decision_points: 0, failure: None };
    let mut score = vec![0.0; policy.theta.len()];
    for s in 0..model.n_states {
        for i in (0..model.n_agents).filter(|&i| model.is_dead(s, i)) {
            report.dead_decision_points += 1;
            let p = policy.probs(model, i, s);
            let support = p.iter().filter(|&&x| x > 0.0).count();
            for a in (0..model.n_actions).filter(|&a| p[a] > 0.0) {
                score.fill(0.0);
                policy.accumulate_score(model, i, s, a, 1.0, &mut score);
                if support != 1 || score.iter().any(|&x| x != 0.0) {
                    report.passed = false;
                    report.failure.get_or_insert_with(|| {
                        format!("agent {i} is dead in state {s} but has {support} available actions and a non-zero score")
                    });
                }
            }
        }
    }
    report
}

/// Samples one episode and returns its undiscounted return.
pub fn sample_return(model: &TabularDecPomdp, policy: &TabularPolicy, rng: &mut SimRng) -> f64 {
    let pick = |weights: &mut dyn Iterator<Item = f64>, rng: &mut SimRng| {
        let x: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (k, w) in weights.enumerate() {
            if w > 0.0 {
                last = k;
                acc += w;
                if x < acc {
                    return k;
                }
            }
        }
        last
    };
    let mut s = pick(&mut model.initial.iter().copied(), rng);
    let mut ret = 0.0;
    for _ in 0..model.horizon {
        let mut u = 0;
        let mut radix = 1;
        for i in 0..model.n_agents {
            let p = policy.probs(model, i, s);
            u += pick(&mut p.into_iter(), rng) * radix;
            radix *= model.n_actions;
        }
        ret += model.r(s, u);
        s = pick(&mut (0..model.n_states).map(|s2| model.t(s, u, s2)), rng);
    }
    ret
}

/// Monte-Carlo estimate of `J` with its standard error.
pub fn monte_carlo_objective(model: &TabularDecPomdp, policy: &TabularPolicy, episodes: usize, rng: &mut SimRng) -> (f64, f64) {
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..episodes {
        let g = sample_return(model, policy, rng);
        sum += g;
        sq += g * g;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Largest absolute component.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `‖a − b‖₂ / ‖b‖₂`, or the absolute error when `b` vanishes.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm > 1e-12 {
        diff / norm
    } else {
        diff
    }
}
