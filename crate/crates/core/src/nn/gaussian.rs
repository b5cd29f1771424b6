//! Diagonal-Gaussian log-density and entropy with analytic derivatives.

use std::f64::consts::PI;

/// `½ ln 2π`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn gaussian_logprob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    debug_assert!(mean.len() == log_std.len() && mean.len() == action.len());
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Gradients of [`gaussian_logprob`] with respect to the mean and log-std.
pub fn gaussian_logprob_grad(mean: &[f64], log_std: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut d_mean = Vec::with_capacity(mean.len());
    let mut d_log_std = Vec::with_capacity(mean.len());
    for ((m, ls), a) in mean.iter().zip(log_std).zip(action) {
        let inv_var = (-2.0 * ls).exp();
        let diff = a - m;
        d_mean.push(diff * inv_var);
        d_log_std.push(diff * diff * inv_var - 1.0);
    }
    (d_mean, d_log_std)
}

/// Differential entropy `Σ_d (½ + ½ ln 2π + log σ_d)`; its gradient with
/// respect to every log-std component is 1.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + 0.5 * (2.0 * PI).ln() + ls).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_normal_values() {
        assert!((gaussian_logprob(&[0.0], &[0.0], &[0.0]) + 0.918_938_533_204_672_8).abs() < 1e-15);
        assert!((gaussian_logprob(&[0.0], &[0.0], &[1.0]) + 1.418_938_533_204_672_8).abs() < 1e-15);
        assert!((gaussian_entropy(&[0.0]) - 1.418_938_533_204_672_8).abs() < 1e-15);
        assert!((gaussian_entropy(&[0.0, 0.0]) - 2.837_877_066_409_345_5).abs() < 1e-14);
    }

    #[test]
    fn entropy_increases_with_each_log_std() {
        let base = [0.1, -0.4, 0.7];
        for d in 0..3 {
            let mut up = base;
            up[d] += 1e-3;
            assert!(gaussian_entropy(&up) > gaussian_entropy(&base));
        }
    }

    #[test]
    fn density_integrates_to_one() {
        // composite Simpson over ±8σ
        for (mean, log_std) in [(0.0, 0.0), (0.7, -1.2), (-2.0, 0.9)] {
            let sigma = f64::exp(log_std);
            let (lo, hi) = (mean - 8.0 * sigma, mean + 8.0 * sigma);
            let n = 20_000;
            let h = (hi - lo) / n as f64;
            let f = |x: f64| gaussian_logprob(&[mean], &[log_std], &[x]).exp();
            let mut acc = f(lo) + f(hi);
            for k in 1..n {
                acc += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            let integral = acc * h / 3.0;
            assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mean = [0.3, -0.8];
        let log_std = [-0.5, 0.2];
        let action = [1.1, -0.1];
        let (dm, dls) = gaussian_logprob_grad(&mean, &log_std, &action);
        let h = 1e-6;
        for d in 0..2 {
            let (mut mp, mut mm) = (mean, mean);
            mp[d] += h;
            mm[d] -= h;
            let fd = (gaussian_logprob(&mp, &log_std, &action) - gaussian_logprob(&mm, &log_std, &action)) / (2.0 * h);
            assert!((fd - dm[d]).abs() < 1e-7);
            let (mut lp, mut lm) = (log_std, log_std);
            lp[d] += h;
            lm[d] -= h;
            let fd = (gaussian_logprob(&mean, &lp, &action) - gaussian_logprob(&mean, &lm, &action)) / (2.0 * h);
            assert!((fd - dls[d]).abs() < 1e-7);
        }
    }
}
