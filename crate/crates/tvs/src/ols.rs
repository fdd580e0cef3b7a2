//! Closed-form simple linear regression of `y` on the observed, unshifted
//! input. On delayed data this baseline is heavily attenuated, which is the
//! comparison the main fit is measured against.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvsError};
use crate::model::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub beta: f64,
    pub intercept: f64,
    /// Residual standard deviation with denominator `n - 2`.
    pub sigma: f64,
    pub r_squared: f64,
}

/// Fit `y = beta * x + intercept` by least squares at lag 0.
pub fn ols_fit(x: &TimeSeries, y: &TimeSeries) -> Result<OlsResult> {
    if x.len() != y.len() {
        return Err(TvsError::SeriesLengthMismatch {
            got: y.len(),
            expected: x.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(TvsError::DegenerateInput(
            "OLS needs at least two points".into(),
        ));
    }
    let nf = n as f64;
    let x_mean = x.values().iter().sum::<f64>() / nf;
    let y_mean = y.values().iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.values().iter().zip(y.values()) {
        let dx = xi - x_mean;
        let dy = yi - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(TvsError::DegenerateInput("constant x in OLS".into()));
    }
    let beta = sxy / sxx;
    let intercept = y_mean - beta * x_mean;
    let sse: f64 = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(&xi, &yi)| {
            let r = yi - (beta * xi + intercept);
            r * r
        })
        .sum();
    let sigma = if n > 2 { (sse / (nf - 2.0)).sqrt() } else { 0.0 };
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(OlsResult {
        beta,
        intercept,
        sigma,
        r_squared,
    })
}
