//! Domain types and the time-shift-and-sum forward model.
//!
//! The input series is decomposed into its nonzero impulses; each impulse is
//! delayed by its own nonnegative integer shift and the shifted amplitudes are
//! summed before the linear map `u -> beta * u + intercept` is applied.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvsError};

/// Default `k / n` density above which [`sparsity_check`] raises a warning.
pub const DEFAULT_SPARSITY_THRESHOLD: f64 = 0.2;

/// A uniformly-sampled, finite, real-valued sequence indexed from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TvsError::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TvsError::NonFinite(i));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A single nonzero entry of the input series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub position: usize,
    pub amplitude: f64,
}

/// The nonzero support of an input series, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSet {
    impulses: Vec<Impulse>,
    source_length: usize,
}

impl ImpulseSet {
    pub fn impulses(&self) -> &[Impulse] {
        &self.impulses
    }

    /// Number of impulses `k`.
    pub fn len(&self) -> usize {
        self.impulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impulses.is_empty()
    }

    /// Length `n` of the series this set was decomposed from.
    pub fn source_length(&self) -> usize {
        self.source_length
    }
}

/// One nonnegative integer delay per impulse, in impulse order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShiftVector {
    shifts: Vec<usize>,
}

impl ShiftVector {
    pub fn new(shifts: Vec<usize>) -> Self {
        Self { shifts }
    }

    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// Check this vector against an impulse set: matching length and no shift
    /// moving an impulse past the series end. Out-of-range shifts are invalid
    /// rather than truncated, since dropping effect mass would bias the
    /// likelihood.
    pub fn validate(&self, imp: &ImpulseSet) -> Result<()> {
        if self.shifts.len() != imp.len() {
            return Err(TvsError::ShiftLengthMismatch {
                got: self.shifts.len(),
                expected: imp.len(),
            });
        }
        let n = imp.source_length();
        for (index, (&shift, impulse)) in self.shifts.iter().zip(imp.impulses()).enumerate() {
            if impulse.position + shift > n - 1 {
                return Err(TvsError::ShiftOutOfRange {
                    index,
                    position: impulse.position,
                    shift,
                });
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        if self.shifts.is_empty() {
            return 0.0;
        }
        self.shifts.iter().sum::<usize>() as f64 / self.shifts.len() as f64
    }
}

/// Parameters of the linear model and of the shift distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Slope of the linear effect.
    pub beta: f64,
    pub intercept: f64,
    /// Residual standard deviation, strictly positive.
    pub sigma_eps: f64,
    /// Mean of the Poisson shift distribution, nonnegative.
    pub lambda_tau: f64,
}

impl ModelParams {
    pub fn new(beta: f64, intercept: f64, sigma_eps: f64, lambda_tau: f64) -> Result<Self> {
        let p = Self {
            beta,
            intercept,
            sigma_eps,
            lambda_tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || !self.intercept.is_finite() {
            return Err(TvsError::InvalidParameter(
                "beta and intercept must be finite".into(),
            ));
        }
        if !(self.sigma_eps > 0.0) || !self.sigma_eps.is_finite() {
            return Err(TvsError::InvalidParameter(format!(
                "sigma_eps must be > 0, got {}",
                self.sigma_eps
            )));
        }
        if !(self.lambda_tau >= 0.0) || !self.lambda_tau.is_finite() {
            return Err(TvsError::InvalidParameter(format!(
                "lambda_tau must be >= 0, got {}",
                self.lambda_tau
            )));
        }
        Ok(())
    }
}

/// Decompose a series into its nonzero impulses, in time order.
///
/// An all-zero series yields an empty set; the original series is recovered
/// exactly by placing each amplitude back at its position.
pub fn decompose(x: &TimeSeries) -> ImpulseSet {
    let impulses = x
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(position, &amplitude)| Impulse {
            position,
            amplitude,
        })
        .collect();
    ImpulseSet {
        impulses,
        source_length: x.len(),
    }
}

/// Apply per-impulse shifts and the linear map, producing the model output.
///
/// Shifted impulses that land on the same time point sum before `beta` is
/// applied, so two unit impulses colliding produce an effect of `2 * beta`.
pub fn apply_shifts(imp: &ImpulseSet, tau: &ShiftVector, params: &ModelParams) -> Result<TimeSeries> {
    params.validate()?;
    tau.validate(imp)?;
    let n = imp.source_length();
    let mut effect = vec![0.0; n];
    for (impulse, &shift) in imp.impulses().iter().zip(tau.shifts()) {
        effect[impulse.position + shift] += impulse.amplitude;
    }
    let values = effect
        .into_iter()
        .map(|e| params.beta * e + params.intercept)
        .collect();
    TimeSeries::new(values)
}

/// Impulse density report. The inner search space grows exponentially with
/// density, so dense inputs get a warning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityReport {
    pub impulse_count: usize,
    pub series_length: usize,
    pub density: f64,
    pub threshold: f64,
    pub warning: bool,
}

pub fn sparsity_check(imp: &ImpulseSet, threshold: f64) -> DensityReport {
    let density = imp.len() as f64 / imp.source_length() as f64;
    DensityReport {
        impulse_count: imp.len(),
        series_length: imp.source_length(),
        density,
        threshold,
        warning: density > threshold,
    }
}
