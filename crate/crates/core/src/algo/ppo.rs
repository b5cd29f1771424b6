//! Clipped surrogate and critic regression losses with their gradients.

use ndarray::{Array2, ArrayView2};

use crate::error::{argument, Error, Result};
use crate::nn::{gaussian_entropy, gaussian_logprob, gaussian_logprob_grad, GaussianPolicy, Mlp};

/// `min(ρΨ, clip(ρ, 1−ε, 1+ε)Ψ)`
pub fn clipped_surrogate(ratio: f64, psi: f64, epsilon: f64) -> f64 {
    (ratio * psi).min(ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * psi)
}

/// A minibatch of agent-step decisions.
#[derive(Debug, Clone, Copy)]
pub struct PolicyMinibatch<'a> {
    pub observations: ArrayView2<'a, f64>,
    pub actions: ArrayView2<'a, f64>,
    pub old_log_probs: &'a [f64],
    pub psi: &'a [f64],
    pub health: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLossOutput {
    /// Negated mean objective (to be minimised).
    pub loss: f64,
    /// Gradient of `loss` with respect to [`GaussianPolicy::flat_params`].
    pub grad: Vec<f64>,
    pub clip_fraction: f64,
    pub entropy: f64,
}

/// Mean over the minibatch of `c·h·S + min(ρΨ, clip(ρ)Ψ)`, negated.
pub fn ppo_policy_loss(policy: &GaussianPolicy, mb: PolicyMinibatch<'_>, epsilon: f64, entropy_coef: f64) -> Result<PolicyLossOutput> {
    let b = mb.observations.nrows();
    if b == 0 {
        return Err(argument("empty minibatch"));
    }
    if mb.actions.nrows() != b || mb.old_log_probs.len() != b || mb.psi.len() != b || mb.health.len() != b {
        return Err(argument("minibatch columns have different lengths"));
    }
    let adim = policy.action_dim();
    let log_std = policy.log_std();
    let (means, cache) = policy.mlp.forward(mb.observations)?;
    let entropy = gaussian_entropy(log_std);
    let inv_b = 1.0 / b as f64;

    let mut dmeans = Array2::zeros((b, adim));
    let mut dlogstd = vec![0.0; adim];
    let mut objective = 0.0;
    let mut clipped = 0usize;
    for k in 0..b {
        let mean = means.row(k).to_vec();
        let action = mb.actions.row(k).to_vec();
        let ratio = (gaussian_logprob(&mean, log_std, &action) - mb.old_log_probs[k]).exp();
        if !ratio.is_finite() {
            return Err(Error::Numeric(format!("non-finite importance ratio at sample {k}")));
        }
        let psi = mb.psi[k];
        let unclipped = ratio * psi;
        let surrogate = clipped_surrogate(ratio, psi, epsilon);
        objective += surrogate + entropy_coef * mb.health[k] * entropy;
        // The gradient flows only where the unclipped branch is the minimum.
        let active = unclipped <= ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * psi;
        if !active {
            clipped += 1;
        }
        let coeff = if active { unclipped } else { 0.0 };
        if coeff != 0.0 {
            let (dm, dl) = gaussian_logprob_grad(&mean, log_std, &action);
            for j in 0..adim {
                dmeans[[k, j]] -= coeff * dm[j] * inv_b;
                dlogstd[j] -= coeff * dl[j] * inv_b;
            }
        }
        // ∂S/∂logσ_j = 1
        for d in dlogstd.iter_mut() {
            *d -= entropy_coef * mb.health[k] * inv_b;
        }
    }
    let (mut grad, _) = policy.mlp.backward(&cache, dmeans.view())?;
    grad.extend_from_slice(&dlogstd);
    Ok(PolicyLossOutput { loss: -objective * inv_b, grad, clip_fraction: clipped as f64 * inv_b, entropy })
}

/// `mean (V_w(x) − y)²` and its gradient.
pub fn critic_loss(critic: &Mlp, inputs: ArrayView2<'_, f64>, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let b = inputs.nrows();
    if b == 0 || targets.len() != b {
        return Err(argument("critic inputs and targets disagree"));
    }
    let (v, cache) = critic.forward(inputs)?;
    let mut dout = Array2::zeros((b, 1));
    let mut loss = 0.0;
    for k in 0..b {
        let e = v[[k, 0]] - targets[k];
        loss += e * e;
        dout[[k, 0]] = 2.0 * e / b as f64;
    }
    let (grad, _) = critic.backward(&cache, dout.view())?;
    Ok((loss / b as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, MlpSpec};
    use crate::rng::stream;
    use ndarray::array;

    #[test]
    fn surrogate_examples() {
        assert!((clipped_surrogate(1.5, 2.0, 0.2) - 2.4).abs() < 1e-12);
        assert!((clipped_surrogate(0.5, -2.0, 0.2) - -1.6).abs() < 1e-12);
        assert!((clipped_surrogate(1.0, 3.0, 0.2) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn surrogate_is_lower_envelope() {
        for &r in &[0.1, 0.79, 0.8, 1.0, 1.2, 1.21, 3.0] {
            for &p in &[-2.0, -0.1, 0.0, 0.4, 5.0] {
                let s = clipped_surrogate(r, p, 0.2);
                assert!(s <= r * p + 1e-15 && s <= r.clamp(0.8, 1.2) * p + 1e-15);
            }
        }
    }

    fn policy() -> GaussianPolicy {
        GaussianPolicy::new(3, &[5], Activation::Tanh, 2, &mut stream(4, &[1])).unwrap()
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut pol = policy();
        let obs = array![[0.2, -0.4, 1.0], [0.5, 0.1, -0.3], [-1.0, 0.0, 0.7]];
        let acts = array![[0.1, 0.3], [-0.2, 0.05], [0.4, -0.6]];
        // old log-probs near the current ones keep all ratios inside the clip band
        let old: Vec<f64> = (0..3).map(|k| pol.log_prob(&obs.row(k).to_vec(), &acts.row(k).to_vec()).unwrap() + 0.01).collect();
        let psi = [0.7, -1.3, 0.4];
        let health = [1.0, 0.5, 0.0];
        let mb = |_: &GaussianPolicy| PolicyMinibatch { observations: obs.view(), actions: acts.view(), old_log_probs: &old, psi: &psi, health: &health };
        let out = ppo_policy_loss(&pol, mb(&pol), 0.2, 0.01).unwrap();
        let base = pol.flat_params();
        for j in 0..base.len() {
            let h = 1e-6;
            let mut p = base.clone();
            p[j] += h;
            pol.set_flat_params(&p).unwrap();
            let up = ppo_policy_loss(&pol, mb(&pol), 0.2, 0.01).unwrap().loss;
            p[j] -= 2.0 * h;
            pol.set_flat_params(&p).unwrap();
            let down = ppo_policy_loss(&pol, mb(&pol), 0.2, 0.01).unwrap().loss;
            pol.set_flat_params(&base).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!((fd - out.grad[j]).abs() < 1e-6 * (1.0 + fd.abs()), "param {j}: fd {fd} vs {}", out.grad[j]);
        }
        assert_eq!(out.clip_fraction, 0.0);
    }

    #[test]
    fn zero_credit_and_entropy_give_zero_gradient() {
        let pol = policy();
        let obs = array![[0.2, -0.4, 1.0]];
        let acts = array![[0.1, 0.3]];
        let out = ppo_policy_loss(
            &pol,
            PolicyMinibatch { observations: obs.view(), actions: acts.view(), old_log_probs: &[-1.0], psi: &[0.0], health: &[1.0] },
            0.2,
            0.0,
        )
        .unwrap();
        assert!(out.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn non_finite_ratio_names_the_sample() {
        let pol = policy();
        let obs = array![[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let acts = array![[0.0, 0.0], [0.0, 0.0]];
        let err = ppo_policy_loss(
            &pol,
            PolicyMinibatch { observations: obs.view(), actions: acts.view(), old_log_probs: &[0.0, -1e6], psi: &[1.0, 1.0], health: &[1.0, 1.0] },
            0.2,
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("sample 1")), "{err}");
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let spec = MlpSpec::uniform(2, &[4, 4], Activation::Elu, 1).unwrap();
        let mut net = Mlp::init(spec, 1.0, &mut stream(5, &[0]));
        let x = array![[0.3, -0.2], [1.0, 0.5], [-0.7, 0.1]];
        let y = [0.5, -1.0, 2.0];
        let (_, g) = critic_loss(&net, x.view(), &y).unwrap();
        for j in 0..net.n_params() {
            let h = 1e-6;
            net.params_mut()[j] += h;
            let up = critic_loss(&net, x.view(), &y).unwrap().0;
            net.params_mut()[j] -= 2.0 * h;
            let down = critic_loss(&net, x.view(), &y).unwrap().0;
            net.params_mut()[j] += h;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }
}
