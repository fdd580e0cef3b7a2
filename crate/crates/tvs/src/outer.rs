//! Outer parameter optimisation by differential evolution.
//!
//! Each candidate (beta, intercept, sigma_eps, lambda_tau) is scored by the
//! best joint log-likelihood the inner shift search can reach at those
//! parameters. Inputs are standardized first (y min-max to [0,1], impulse
//! amplitudes to max-abs 1) and the winning parameters are mapped back to the
//! original scale. The inner search seed is fixed for the whole fit, so the
//! objective is a deterministic function of the candidate and population
//! members can be evaluated in any order, including in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvsError};
use crate::inner::{search_shifts, tau_cap_for, SearchConfig};
use crate::likelihood::{joint_loglik, JointLogLik};
use crate::model::{decompose, ImpulseSet, ModelParams, ShiftVector, TimeSeries};

/// Per-parameter search intervals in standardized space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamBounds {
    pub beta: (f64, f64),
    pub intercept: (f64, f64),
    pub sigma_eps: (f64, f64),
    pub lambda_tau: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            beta: (-10.0, 10.0),
            intercept: (-1.0, 2.0),
            sigma_eps: (1e-4, 1.0),
            lambda_tau: (0.0, 10.0),
        }
    }
}

impl ParamBounds {
    fn as_array(&self) -> [(f64, f64); 4] {
        [self.beta, self.intercept, self.sigma_eps, self.lambda_tau]
    }
}

/// Inner-search settings within a fit config. `n_iters` and `tau_max` default
/// to problem-derived values when unset (200 per impulse, and the cap carrying
/// all but 1e-6 of the Poisson mass at the lambda upper bound).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InnerSettings {
    pub n_iters: Option<usize>,
    pub proposal_size: Option<usize>,
    pub tau_max: Option<usize>,
}

/// Differential evolution settings (rand/1/bin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub bounds: ParamBounds,
    pub population_size: usize,
    pub max_generations: usize,
    /// Mutation factor F, in (0, 2).
    pub mutation: f64,
    /// Crossover rate CR, in (0, 1).
    pub crossover: f64,
    pub inner: InnerSettings,
    pub rng_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            bounds: ParamBounds::default(),
            population_size: 60,
            max_generations: 200,
            mutation: 0.8,
            crossover: 0.9,
            inner: InnerSettings::default(),
            rng_seed: 0,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("beta", self.bounds.beta),
            ("intercept", self.bounds.intercept),
            ("sigma_eps", self.bounds.sigma_eps),
            ("lambda_tau", self.bounds.lambda_tau),
        ] {
            if !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
                return Err(TvsError::InvalidConfig(format!(
                    "bounds for {name} must be finite with lower < upper"
                )));
            }
        }
        if !(self.bounds.sigma_eps.0 > 0.0) {
            return Err(TvsError::InvalidConfig(
                "sigma_eps lower bound must be > 0".into(),
            ));
        }
        if !(self.bounds.lambda_tau.0 >= 0.0) {
            return Err(TvsError::InvalidConfig(
                "lambda_tau lower bound must be >= 0".into(),
            ));
        }
        if self.population_size < 4 {
            return Err(TvsError::InvalidConfig(
                "population_size must be at least 4".into(),
            ));
        }
        if self.max_generations == 0 {
            return Err(TvsError::InvalidConfig(
                "max_generations must be positive".into(),
            ));
        }
        if !(self.mutation > 0.0 && self.mutation < 2.0) {
            return Err(TvsError::InvalidConfig("mutation must be in (0, 2)".into()));
        }
        if !(self.crossover > 0.0 && self.crossover < 1.0) {
            return Err(TvsError::InvalidConfig("crossover must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Constants of the affine standardization, kept for inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub y_min: f64,
    pub y_range: f64,
    /// Max absolute input amplitude; scaled x is `x / x_scale`.
    pub x_scale: f64,
}

/// Min-max map y to [0,1] and divide x by its max absolute amplitude. Zeros in
/// x stay exact zeros, so the impulse support is unchanged.
pub fn standardize(
    x: &TimeSeries,
    y: &TimeSeries,
) -> Result<(TimeSeries, TimeSeries, ScalingRecord)> {
    if x.len() != y.len() {
        return Err(TvsError::SeriesLengthMismatch {
            got: y.len(),
            expected: x.len(),
        });
    }
    let y_min = y.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = y.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let y_range = y_max - y_min;
    if y_range == 0.0 {
        return Err(TvsError::DegenerateInput("constant y".into()));
    }
    let x_scale = x.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if x_scale == 0.0 {
        return Err(TvsError::DegenerateInput("all-zero x".into()));
    }
    let xs = TimeSeries::new(
        x.values()
            .iter()
            .map(|&v| if v == 0.0 { 0.0 } else { v / x_scale })
            .collect(),
    )?;
    let ys = TimeSeries::new(y.values().iter().map(|&v| (v - y_min) / y_range).collect())?;
    Ok((
        xs,
        ys,
        ScalingRecord {
            y_min,
            y_range,
            x_scale,
        },
    ))
}

/// Map parameters estimated in standardized space back to the original scale.
/// The time axis is never rescaled, so lambda passes through.
pub fn destandardize_params(scaled: &ModelParams, rec: &ScalingRecord) -> ModelParams {
    ModelParams {
        beta: scaled.beta * rec.y_range / rec.x_scale,
        intercept: scaled.intercept * rec.y_range + rec.y_min,
        sigma_eps: scaled.sigma_eps * rec.y_range,
        lambda_tau: scaled.lambda_tau,
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Best parameters on the original scale.
    pub params: ModelParams,
    pub shifts: ShiftVector,
    /// Joint log-likelihood on the original scale at the reported parameters
    /// and shifts.
    pub loglik: JointLogLik,
    /// (generation, best objective) pairs; the objective is in standardized
    /// space and nondecreasing.
    pub trace: Vec<(usize, f64)>,
    pub scaling: ScalingRecord,
}

fn candidate_params(theta: &[f64; 4]) -> ModelParams {
    ModelParams {
        beta: theta[0],
        intercept: theta[1],
        sigma_eps: theta[2],
        lambda_tau: theta[3],
    }
}

/// Inner-search likelihood of one candidate, on standardized data. The seed
/// is the fit-wide inner seed, independent of the candidate.
fn objective(
    theta: &[f64; 4],
    ys: &TimeSeries,
    imp: &ImpulseSet,
    inner_cfg: &SearchConfig,
) -> f64 {
    let params = candidate_params(theta);
    match search_shifts(ys, imp, &params, inner_cfg) {
        Ok((_, lik)) => lik.total,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Fit the model by differential evolution over (beta, intercept, sigma_eps,
/// lambda_tau), with the inner shift search as the objective.
pub fn fit(x: &TimeSeries, y: &TimeSeries, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let (xs, ys, scaling) = standardize(x, y)?;
    let imp = decompose(&xs);
    if imp.is_empty() {
        return Err(TvsError::DegenerateInput("empty impulse support".into()));
    }
    let k = imp.len();

    let defaults = SearchConfig::for_problem(k, cfg.bounds.lambda_tau.1, 0);
    let inner_cfg = SearchConfig {
        n_iters: cfg.inner.n_iters.unwrap_or(defaults.n_iters),
        proposal_size: cfg.inner.proposal_size.unwrap_or(defaults.proposal_size),
        tau_max: cfg
            .inner
            .tau_max
            .unwrap_or_else(|| tau_cap_for(cfg.bounds.lambda_tau.1)),
        // Common random numbers: one inner seed for every evaluation in this
        // fit, so the objective is deterministic in the candidate.
        rng_seed: cfg.rng_seed ^ 0xA5A5_5A5A_DEAD_BEEF,
    };

    let bounds = cfg.bounds.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let np = cfg.population_size;

    let mut population: Vec<[f64; 4]> = (0..np)
        .map(|_| {
            let mut theta = [0.0; 4];
            for (d, &(lo, hi)) in bounds.iter().enumerate() {
                theta[d] = rng.random_range(lo..=hi);
            }
            theta
        })
        .collect();
    let mut scores: Vec<f64> = population
        .par_iter()
        .map(|theta| objective(theta, &ys, &imp, &inner_cfg))
        .collect();

    let mut trace = Vec::with_capacity(cfg.max_generations + 1);
    let best_of = |scores: &[f64]| -> (usize, f64) {
        scores
            .iter()
            .cloned()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap()
    };
    let (_, mut best_score) = best_of(&scores);
    trace.push((0, best_score));

    for generation in 1..=cfg.max_generations {
        // Trial construction is sequential so the RNG stream is fixed;
        // evaluation is order-independent and runs in parallel.
        let trials: Vec<[f64; 4]> = (0..np)
            .map(|i| {
                let mut picks = [0usize; 3];
                let mut filled = 0;
                while filled < 3 {
                    let r = rng.random_range(0..np);
                    if r != i && !picks[..filled].contains(&r) {
                        picks[filled] = r;
                        filled += 1;
                    }
                }
                let [a, b, c] = picks.map(|p| population[p]);
                let force_dim = rng.random_range(0..4usize);
                let mut trial = population[i];
                for d in 0..4 {
                    if d == force_dim || rng.random::<f64>() < cfg.crossover {
                        let v = a[d] + cfg.mutation * (b[d] - c[d]);
                        trial[d] = v.clamp(bounds[d].0, bounds[d].1);
                    }
                }
                trial
            })
            .collect();

        let trial_scores: Vec<f64> = trials
            .par_iter()
            .map(|theta| objective(theta, &ys, &imp, &inner_cfg))
            .collect();

        for i in 0..np {
            if trial_scores[i] >= scores[i] {
                population[i] = trials[i];
                scores[i] = trial_scores[i];
            }
        }

        let (_, gen_best) = best_of(&scores);
        best_score = best_score.max(gen_best);
        trace.push((generation, best_score));

        let worst = scores
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if (best_score - worst).abs() <= 1e-8 * best_score.abs().max(1.0) {
            break;
        }
    }

    let (best_idx, _) = best_of(&scores);
    let best_theta = population[best_idx];
    let scaled_params = candidate_params(&best_theta);

    // One higher-effort search at the winner decides the reported shifts.
    let final_cfg = SearchConfig {
        n_iters: inner_cfg.n_iters * 2,
        ..inner_cfg
    };
    let (shifts, _) = search_shifts(&ys, &imp, &scaled_params, &final_cfg)?;

    let params = destandardize_params(&scaled_params, &scaling);
    let imp_orig = decompose(x);
    let loglik = joint_loglik(y, &imp_orig, &shifts, &params)?;

    Ok(FitResult {
        params,
        shifts,
        loglik,
        trace,
        scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(values: &[f64]) -> TimeSeries {
        TimeSeries::new(values.to_vec()).unwrap()
    }

    #[test]
    fn standardize_min_max_and_max_abs() {
        let x = series(&[0.0, 2.0, 0.0, -4.0]);
        let y = series(&[0.0, 5.0, 10.0, 5.0]);
        let (xs, ys, rec) = standardize(&x, &y).unwrap();
        assert_eq!(xs.values(), &[0.0, 0.5, 0.0, -1.0]);
        assert_eq!(ys.values(), &[0.0, 0.5, 1.0, 0.5]);
        assert_eq!(rec.y_min, 0.0);
        assert_eq!(rec.y_range, 10.0);
        assert_eq!(rec.x_scale, 4.0);
    }

    #[test]
    fn standardize_rejects_degenerate() {
        let x = series(&[0.0, 1.0]);
        assert!(standardize(&x, &series(&[3.0, 3.0])).is_err());
        assert!(standardize(&series(&[0.0, 0.0]), &series(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn destandardize_identity_record() {
        let rec = ScalingRecord {
            y_min: 0.0,
            y_range: 1.0,
            x_scale: 1.0,
        };
        let p = ModelParams::new(1.3, -0.2, 0.5, 2.0).unwrap();
        assert_eq!(destandardize_params(&p, &rec), p);
    }

    #[test]
    fn destandardize_formula() {
        let rec = ScalingRecord {
            y_min: 3.0,
            y_range: 2.0,
            x_scale: 0.5,
        };
        let p = ModelParams::new(1.0, 0.25, 0.1, 1.7).unwrap();
        let o = destandardize_params(&p, &rec);
        assert_abs_diff_eq!(o.beta, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.intercept, 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(o.sigma_eps, 0.2, epsilon = 1e-12);
        assert_eq!(o.lambda_tau, 1.7);
    }

    #[test]
    fn standardize_round_trip() {
        let x = series(&[0.0, 1.5, 0.0, -2.5, 0.0, 0.7]);
        let y = series(&[6.5, 9.4, 6.3, 1.2, 6.5, 7.9]);
        let (xs, ys, rec) = standardize(&x, &y).unwrap();
        for (&orig, &s) in x.values().iter().zip(xs.values()) {
            assert_abs_diff_eq!(orig, s * rec.x_scale, epsilon = 1e-12);
        }
        for (&orig, &s) in y.values().iter().zip(ys.values()) {
            assert_abs_diff_eq!(orig, s * rec.y_range + rec.y_min, epsilon = 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.bounds.sigma_eps = (0.0, 1.0);
        assert!(cfg.validate().is_err());
        cfg = FitConfig {
            population_size: 2,
            ..FitConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg = FitConfig {
            mutation: 2.5,
            ..FitConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn objective_is_deterministic() {
        let cfg = crate::sim::SimConfig {
            n: 80,
            k: 4,
            min_gap: 15,
            rng_seed: 11,
            ..Default::default()
        };
        let out = crate::sim::simulate(&cfg).unwrap();
        let (_, ys, _) = standardize(&out.x, &out.y).unwrap();
        let imp = decompose(&out.x);
        let inner = SearchConfig::for_problem(imp.len(), 10.0, 77);
        let theta = [0.3, 0.4, 0.05, 1.8];
        let a = objective(&theta, &ys, &imp, &inner);
        let b = objective(&theta, &ys, &imp, &inner);
        assert_eq!(a, b);
    }

    #[test]
    fn trace_is_nondecreasing_and_small_fit_recovers() {
        let sim_cfg = crate::sim::SimConfig {
            n: 120,
            k: 6,
            min_gap: 12,
            lambda: 1.0,
            sigma_eps: 0.1,
            rng_seed: 21,
            ..Default::default()
        };
        let out = crate::sim::simulate(&sim_cfg).unwrap();
        let cfg = FitConfig {
            population_size: 30,
            max_generations: 60,
            rng_seed: 5,
            ..Default::default()
        };
        let result = fit(&out.x, &out.y, &cfg).unwrap();
        for pair in result.trace.windows(2) {
            assert!(pair[1].1 >= pair[0].1);
        }
        assert!((result.params.beta - 2.0).abs() < 0.4, "beta {}", result.params.beta);
        assert!(
            (result.params.intercept - 6.5).abs() < 0.4,
            "intercept {}",
            result.params.intercept
        );
        // Back in scaled space the winner sits inside the configured box.
        let back = ModelParams {
            beta: result.params.beta * result.scaling.x_scale / result.scaling.y_range,
            intercept: (result.params.intercept - result.scaling.y_min) / result.scaling.y_range,
            sigma_eps: result.params.sigma_eps / result.scaling.y_range,
            lambda_tau: result.params.lambda_tau,
        };
        assert!(back.beta >= cfg.bounds.beta.0 && back.beta <= cfg.bounds.beta.1);
        assert!(back.sigma_eps >= cfg.bounds.sigma_eps.0 && back.sigma_eps <= cfg.bounds.sigma_eps.1);
        assert!(
            back.lambda_tau >= cfg.bounds.lambda_tau.0
                && back.lambda_tau <= cfg.bounds.lambda_tau.1
        );
    }

    #[test]
    fn objective_peaks_at_generating_params_on_clean_data() {
        let sim_cfg = crate::sim::SimConfig {
            n: 100,
            k: 5,
            min_gap: 12,
            sigma_eps: 0.0,
            lambda: 1.0,
            rng_seed: 31,
            ..Default::default()
        };
        let out = crate::sim::simulate(&sim_cfg).unwrap();
        let (xs, ys, rec) = standardize(&out.x, &out.y).unwrap();
        let imp = decompose(&xs);
        let inner = SearchConfig {
            n_iters: 2000,
            proposal_size: 3,
            tau_max: 6,
            rng_seed: 12,
        };
        // Generating parameters mapped into scaled space; sigma small but
        // nonzero since the data is noiseless. The lambda MLE on clean data is
        // the realized shift mean, not the generating rate.
        let truth = [
            sim_cfg.beta * rec.x_scale / rec.y_range,
            (sim_cfg.intercept - rec.y_min) / rec.y_range,
            0.01,
            out.true_shifts.mean(),
        ];
        let at_truth = objective(&truth, &ys, &imp, &inner);
        for (dim, delta) in [(0, 0.1), (0, -0.1), (1, 0.1), (1, -0.1), (3, 1.5), (3, -1.5)] {
            let mut probe = truth;
            probe[dim] += delta;
            let v = objective(&probe, &ys, &imp, &inner);
            assert!(v < at_truth, "probe dim {dim} delta {delta}: {v} vs {at_truth}");
        }
    }

    #[test]
    fn fit_rejects_empty_support() {
        let x = series(&[0.0, 0.0, 0.0]);
        let y = series(&[1.0, 2.0, 3.0]);
        assert!(fit(&x, &y, &FitConfig::default()).is_err());
    }
}
