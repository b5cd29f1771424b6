use crate::error::{argument, Result};

/// Generalised advantage estimates for one episode.
///
/// `values` has one more entry than `rewards`: `values[t_f]` is the bootstrap
/// value of the final state (0 for a finished episode).
pub fn compute_gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if values.len() != rewards.len() + 1 {
        return Err(argument(format!(
            "expected {} values for {} rewards, got {}",
            rewards.len() + 1,
            rewards.len(),
            values.len()
        )));
    }
    let mut adv = vec![0.0; rewards.len()];
    let mut next = 0.0;
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        next = delta + gamma * lambda * next;
        adv[t] = next;
    }
    Ok(adv)
}

/// `V_t^targ = A_t + V_old(s_t)`.
pub fn compute_value_targets(advantages: &[f64], old_values: &[f64]) -> Result<Vec<f64>> {
    if old_values.len() < advantages.len() {
        return Err(argument("fewer old values than advantages"));
    }
    Ok(advantages.iter().zip(old_values).map(|(a, v)| a + v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn undiscounted_zero_values_give_returns() {
        assert_eq!(compute_gae(&[1.0, 1.0], &[0.0, 0.0, 0.0], 1.0, 1.0).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn backward_recursion_example() {
        // δ_1 = 1 + 0.99·0 − 0.5 = 0.5;  δ_0 = 0 + 0.99·0.5 − 0.5 = −0.005
        // A_1 = 0.5;  A_0 = −0.005 + 0.99·0.95·0.5 = 0.46525
        let adv = compute_gae(&[0.0, 1.0], &[0.5, 0.5, 0.0], 0.99, 0.95).unwrap();
        assert!((adv[0] - 0.46525).abs() < 1e-12);
        assert!((adv[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_values_zero_rewards_undiscounted() {
        let adv = compute_gae(&[0.0; 4], &[0.3; 5], 1.0, 0.9).unwrap();
        assert!(adv.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn targets_examples() {
        assert_eq!(compute_value_targets(&[0.5], &[1.0]).unwrap(), vec![1.5]);
        assert_eq!(compute_value_targets(&[0.0, 0.0], &[0.3, -0.2, 9.0]).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(compute_gae(&[1.0, 2.0], &[0.0, 0.0], 0.9, 0.9).is_err());
    }

    proptest! {
        #[test]
        fn gamma_lambda_one_zero_critic_targets_are_returns(r in prop::collection::vec(-5.0f64..5.0, 1..60)) {
            let zeros = vec![0.0; r.len() + 1];
            let adv = compute_gae(&r, &zeros, 1.0, 1.0).unwrap();
            let targets = compute_value_targets(&adv, &zeros).unwrap();
            for t in 0..r.len() {
                let g: f64 = r[t..].iter().sum();
                prop_assert!((targets[t] - g).abs() <= 1e-8);
            }
        }
    }
}
