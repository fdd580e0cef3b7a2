//! Joint log-likelihood of prediction residuals and time shifts.
//!
//! The objective splits into two independent terms: a Gaussian term over the
//! `n` residuals and a Poisson term over the `k` per-impulse shifts.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Result, TvsError};
use crate::model::{apply_shifts, ImpulseSet, ModelParams, ShiftVector, TimeSeries};

/// Ordered stand-in for log(0), so likelihood comparisons in the search stay
/// total and sums of several floored terms cannot overflow to -inf.
pub const LOG_LIK_FLOOR: f64 = -1.0e300;

/// The two likelihood terms and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLogLik {
    /// Gaussian residual term.
    pub l1: f64,
    /// Poisson shift term, always <= 0.
    pub l2: f64,
    pub total: f64,
}

/// Sum of Gaussian log-densities of the residuals `y - yhat` at mean 0 and
/// standard deviation `sigma_eps`.
pub fn gaussian_loglik(y: &TimeSeries, yhat: &TimeSeries, sigma_eps: f64) -> Result<f64> {
    if !(sigma_eps > 0.0) || !sigma_eps.is_finite() {
        return Err(TvsError::InvalidParameter(format!(
            "sigma_eps must be > 0, got {sigma_eps}"
        )));
    }
    if y.len() != yhat.len() {
        return Err(TvsError::SeriesLengthMismatch {
            got: yhat.len(),
            expected: y.len(),
        });
    }
    let norm = gaussian_point_norm(sigma_eps);
    let inv_two_var = 0.5 / (sigma_eps * sigma_eps);
    let mut total = 0.0;
    for (&yi, &yh) in y.values().iter().zip(yhat.values()) {
        let r = yi - yh;
        total += norm - r * r * inv_two_var;
    }
    Ok(total)
}

/// `-0.5 * log(2 pi sigma^2)`, the per-point normalisation constant.
pub(crate) fn gaussian_point_norm(sigma_eps: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * sigma_eps * sigma_eps).ln()
}

/// Log-pmf of a single Poisson shift. At `lambda = 0` the pmf is a point mass
/// at 0, so any positive shift gets the floor sentinel.
pub fn poisson_logpmf(tau: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if tau == 0 { 0.0 } else { LOG_LIK_FLOOR };
    }
    // log(tau!) via log-gamma; factorial-then-log would overflow early.
    tau as f64 * lambda.ln() - lambda - ln_gamma(tau as f64 + 1.0)
}

/// Sum of Poisson log-pmf values over the shift vector, floored at
/// [`LOG_LIK_FLOOR`].
pub fn poisson_loglik(tau: &ShiftVector, lambda_tau: f64) -> Result<f64> {
    if !(lambda_tau >= 0.0) || !lambda_tau.is_finite() {
        return Err(TvsError::InvalidParameter(format!(
            "lambda_tau must be >= 0, got {lambda_tau}"
        )));
    }
    let sum: f64 = tau
        .shifts()
        .iter()
        .map(|&t| poisson_logpmf(t, lambda_tau))
        .sum();
    Ok(sum.max(LOG_LIK_FLOOR))
}

/// Evaluate both terms of the joint log-likelihood at the given shifts and
/// parameters.
pub fn joint_loglik(
    y: &TimeSeries,
    imp: &ImpulseSet,
    tau: &ShiftVector,
    params: &ModelParams,
) -> Result<JointLogLik> {
    let yhat = apply_shifts(imp, tau, params)?;
    let l1 = gaussian_loglik(y, &yhat, params.sigma_eps)?;
    let l2 = poisson_loglik(tau, params.lambda_tau)?;
    Ok(JointLogLik {
        l1,
        l2,
        total: l1 + l2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::decompose;
    use approx::assert_abs_diff_eq;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::new(values.to_vec()).unwrap()
    }

    #[test]
    fn gaussian_single_point_zero_residual() {
        let v = gaussian_loglik(&series(&[1.0]), &series(&[1.0]), 1.0).unwrap();
        assert_abs_diff_eq!(v, -0.9189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_single_point_unit_residual() {
        let v = gaussian_loglik(&series(&[1.0]), &series(&[0.0]), 1.0).unwrap();
        assert_abs_diff_eq!(v, -1.4189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_matches_density_sum_oracle() {
        // Independent route: per-point density evaluated then logged.
        let y = series(&[0.1, -0.2]);
        let yhat = series(&[0.0, 0.0]);
        let sigma = 0.2_f64;
        let oracle: f64 = y
            .values()
            .iter()
            .zip(yhat.values())
            .map(|(&a, &b)| {
                let r: f64 = a - b;
                let dens =
                    (-r * r / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                dens.ln()
            })
            .sum();
        let v = gaussian_loglik(&y, &yhat, sigma).unwrap();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        assert!(gaussian_loglik(&series(&[1.0]), &series(&[1.0]), 0.0).is_err());
        assert!(gaussian_loglik(&series(&[1.0]), &series(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn poisson_at_zero_shift() {
        let v = poisson_loglik(&ShiftVector::new(vec![0]), 2.0).unwrap();
        assert_abs_diff_eq!(v, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_tau_two_lambda_two() {
        // 2 log 2 - 2 - log 2! = log 2 - 2
        let v = poisson_loglik(&ShiftVector::new(vec![2]), 2.0).unwrap();
        assert_abs_diff_eq!(v, -1.3068528194400546, epsilon = 1e-12);
    }

    #[test]
    fn poisson_matches_pmf_sum_oracle_on_reference_vector() {
        let shifts = vec![2, 1, 2, 0, 2, 3, 1, 0, 2, 4, 1, 2, 3, 2, 1, 0, 0, 1, 1, 0];
        let lambda = 1.4_f64;
        // Independent route: log-factorial as a running sum of logs.
        let oracle: f64 = shifts
            .iter()
            .map(|&t: &usize| {
                let log_fact: f64 = (1..=t).map(|i| (i as f64).ln()).sum();
                t as f64 * lambda.ln() - lambda - log_fact
            })
            .sum();
        let v = poisson_loglik(&ShiftVector::new(shifts), lambda).unwrap();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-10);
    }

    #[test]
    fn poisson_lambda_zero_edge() {
        assert_eq!(poisson_loglik(&ShiftVector::new(vec![0, 0]), 0.0).unwrap(), 0.0);
        let v = poisson_loglik(&ShiftVector::new(vec![0, 1]), 0.0).unwrap();
        assert_eq!(v, LOG_LIK_FLOOR);
    }

    #[test]
    fn poisson_rejects_negative_lambda() {
        assert!(poisson_loglik(&ShiftVector::new(vec![0]), -1.0).is_err());
    }

    #[test]
    fn poisson_single_shift_mode_at_floor_lambda() {
        // Non-integer lambdas only: at integer lambda the pmf ties between
        // lambda - 1 and lambda.
        for lambda in [0.7, 1.4, 2.3, 3.9, 6.2] {
            let argmax = (0..40)
                .max_by(|&a, &b| {
                    poisson_logpmf(a, lambda)
                        .partial_cmp(&poisson_logpmf(b, lambda))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(argmax, lambda.floor() as usize, "lambda = {lambda}");
        }
    }

    #[test]
    fn joint_total_is_exact_sum() {
        let x = series(&[0.0, 1.0, 0.0, 2.0, 0.0, 0.0]);
        let y = series(&[6.5, 6.5, 8.5, 6.5, 10.5, 6.5]);
        let imp = decompose(&x);
        let tau = ShiftVector::new(vec![1, 1]);
        let params = ModelParams::new(2.0, 6.5, 0.2, 1.4).unwrap();
        let jl = joint_loglik(&y, &imp, &tau, &params).unwrap();
        assert_eq!(jl.total, jl.l1 + jl.l2);
        assert!(jl.l2 <= 0.0);
        let l2 = poisson_loglik(&tau, params.lambda_tau).unwrap();
        assert_eq!(jl.l2, l2);
    }

    #[test]
    fn joint_empty_support() {
        let x = series(&[0.0, 0.0, 0.0]);
        let y = series(&[1.0, 1.0, 1.0]);
        let imp = decompose(&x);
        let tau = ShiftVector::new(vec![]);
        let params = ModelParams::new(1.0, 1.0, 0.5, 2.0).unwrap();
        let jl = joint_loglik(&y, &imp, &tau, &params).unwrap();
        assert_eq!(jl.l2, 0.0);
        assert_eq!(jl.total, jl.l1);
    }

    #[test]
    fn gaussian_sigma_mle_is_rms_residual() {
        // The maximiser over sigma is the root mean squared residual.
        let y = series(&[0.3, -0.8, 1.2, 0.05, -0.4]);
        let yhat = series(&[0.0; 5]);
        let mse: f64 =
            y.values().iter().map(|r| r * r).sum::<f64>() / y.len() as f64;
        let best = mse.sqrt();
        let at_best = gaussian_loglik(&y, &yhat, best).unwrap();
        for mult in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
            let v = gaussian_loglik(&y, &yhat, best * mult).unwrap();
            assert!(v < at_best, "sigma multiplier {mult}");
        }
    }
}
