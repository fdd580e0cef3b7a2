//! Discrete search for the shift vector at fixed model parameters.
//!
//! Impulses further apart than the shift cap can never overlap, so the
//! problem splits into independent blocks. Within a block the search starts
//! from the shift-distribution mean and repeatedly redraws a few shifts from
//! the truncated Poisson proposal, keeping a proposal only when it strictly
//! improves the joint log-likelihood. An exhaustive enumeration over the same
//! space serves as the correctness oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TvsError};
use crate::likelihood::{gaussian_point_norm, joint_loglik, poisson_logpmf, JointLogLik};
use crate::model::{Impulse, ImpulseSet, ModelParams, ShiftVector, TimeSeries};

/// Candidate budget for [`exhaustive_search`].
pub const EXHAUSTIVE_BUDGET: u128 = 1_000_000;

/// Hyperparameters of the randomized shift search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Total iteration budget, split across blocks in proportion to their
    /// impulse counts.
    pub n_iters: usize,
    /// Number of shifts redrawn per proposal (clamped to the block size).
    pub proposal_size: usize,
    /// Cap on any single shift.
    pub tau_max: usize,
    pub rng_seed: u64,
}

impl SearchConfig {
    /// Defaults for a problem with `k` impulses: 200 iterations per impulse,
    /// proposals of size 3, and a shift cap carrying all but 1e-6 of the
    /// Poisson mass at `lambda_upper`.
    pub fn for_problem(k: usize, lambda_upper: f64, rng_seed: u64) -> Self {
        Self {
            n_iters: 200 * k.max(1),
            proposal_size: 3,
            tau_max: tau_cap_for(lambda_upper),
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_iters == 0 || self.proposal_size == 0 || self.tau_max == 0 {
            return Err(TvsError::InvalidConfig(
                "n_iters, proposal_size and tau_max must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Smallest `t` whose Poisson CDF at `lambda` exceeds `1 - 1e-6`, never below 1.
pub fn tau_cap_for(lambda: f64) -> usize {
    if !(lambda > 0.0) {
        return 1;
    }
    let mut t = 0usize;
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    while cdf <= 1.0 - 1e-6 && t < 10_000 {
        t += 1;
        pmf *= lambda / t as f64;
        cdf += pmf;
    }
    t.max(1)
}

/// A contiguous group of impulses whose effects cannot reach any other group
/// under the shift cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Indices into the impulse list.
    pub indices: std::ops::Range<usize>,
    /// First impulse position.
    pub start: usize,
    /// Last time index any shifted effect from this block can reach.
    pub end: usize,
}

/// Split the impulses wherever the position gap exceeds `tau_max`; no feasible
/// shift can make impulses in different blocks overlap.
pub fn partition_blocks(imp: &ImpulseSet, tau_max: usize) -> Vec<Block> {
    let impulses = imp.impulses();
    let n = imp.source_length();
    let mut blocks = Vec::new();
    let mut begin = 0usize;
    for j in 1..=impulses.len() {
        let split = j == impulses.len()
            || impulses[j].position - impulses[j - 1].position > tau_max;
        if split {
            blocks.push(Block {
                indices: begin..j,
                start: impulses[begin].position,
                end: (impulses[j - 1].position + tau_max).min(n - 1),
            });
            begin = j;
        }
    }
    blocks
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Randomized maximisation of the joint log-likelihood over shift vectors.
///
/// Deterministic for a given seed; the incumbent likelihood never decreases.
pub fn search_shifts(
    y: &TimeSeries,
    imp: &ImpulseSet,
    params: &ModelParams,
    cfg: &SearchConfig,
) -> Result<(ShiftVector, JointLogLik)> {
    let (tau, lik, _) = search_shifts_traced(y, imp, params, cfg)?;
    Ok((tau, lik))
}

/// Like [`search_shifts`] but also returns, per block, the sequence of
/// accepted block scores (used to verify search monotonicity).
pub fn search_shifts_traced(
    y: &TimeSeries,
    imp: &ImpulseSet,
    params: &ModelParams,
    cfg: &SearchConfig,
) -> Result<(ShiftVector, JointLogLik, Vec<Vec<f64>>)> {
    params.validate()?;
    cfg.validate()?;
    if imp.is_empty() {
        return Err(TvsError::DegenerateInput("empty impulse set".into()));
    }
    if y.len() != imp.source_length() {
        return Err(TvsError::SeriesLengthMismatch {
            got: y.len(),
            expected: imp.source_length(),
        });
    }

    let k = imp.len();
    let blocks = partition_blocks(imp, cfg.tau_max);
    let mut shifts = vec![0usize; k];
    let mut traces = Vec::with_capacity(blocks.len());

    for (block_idx, block) in blocks.iter().enumerate() {
        let seed = splitmix64(cfg.rng_seed ^ splitmix64(block_idx as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k_block = block.indices.len();
        let iters = ((cfg.n_iters as f64 * k_block as f64 / k as f64).round() as usize).max(1);
        let mut search = BlockSearch::new(y, imp, block, params, cfg);
        let trace = search.run(&mut rng, iters, cfg.proposal_size.min(k_block));
        shifts[block.indices.clone()].copy_from_slice(&search.shifts);
        traces.push(trace);
    }

    let tau = ShiftVector::new(shifts);
    let lik = joint_loglik(y, imp, &tau, params)?;
    Ok((tau, lik, traces))
}

/// Incremental block-local scoring state. The block score (window Gaussian
/// term plus block Poisson term) differs from the full joint log-likelihood
/// only by terms that no shift inside the block can change.
struct BlockSearch<'a> {
    y: &'a [f64],
    impulses: &'a [Impulse],
    caps: Vec<usize>,
    t0: usize,
    effect: Vec<f64>,
    shifts: Vec<usize>,
    score: f64,
    beta: f64,
    intercept: f64,
    norm: f64,
    inv_two_var: f64,
    lambda: f64,
    /// Inclusive cumulative Poisson pmf over 0..=tau_max, for truncated draws.
    pmf_cum: Vec<f64>,
}

impl<'a> BlockSearch<'a> {
    fn new(
        y: &'a TimeSeries,
        imp: &'a ImpulseSet,
        block: &Block,
        params: &ModelParams,
        cfg: &SearchConfig,
    ) -> Self {
        let n = imp.source_length();
        let impulses = &imp.impulses()[block.indices.clone()];
        let caps: Vec<usize> = impulses
            .iter()
            .map(|i| cfg.tau_max.min(n - 1 - i.position))
            .collect();
        let lambda = params.lambda_tau;

        // Initialize every shift at the rounded shift-distribution mean.
        let init = lambda.round() as usize;
        let shifts: Vec<usize> = caps.iter().map(|&cap| init.min(cap)).collect();

        let t0 = block.start;
        let mut effect = vec![0.0; block.end - block.start + 1];
        for (impulse, &s) in impulses.iter().zip(&shifts) {
            effect[impulse.position + s - t0] += impulse.amplitude;
        }

        let mut pmf_cum = Vec::with_capacity(cfg.tau_max + 1);
        let mut cum = 0.0;
        for t in 0..=cfg.tau_max {
            cum += poisson_logpmf(t, lambda).max(-700.0).exp();
            pmf_cum.push(cum);
        }

        let mut search = Self {
            y: y.values(),
            impulses,
            caps,
            t0,
            effect,
            shifts,
            score: 0.0,
            beta: params.beta,
            intercept: params.intercept,
            norm: gaussian_point_norm(params.sigma_eps),
            inv_two_var: 0.5 / (params.sigma_eps * params.sigma_eps),
            lambda,
            pmf_cum,
        };
        search.score = search.full_score();
        search
    }

    fn point_term(&self, t: usize) -> f64 {
        let r = self.y[t] - (self.intercept + self.beta * self.effect[t - self.t0]);
        self.norm - r * r * self.inv_two_var
    }

    fn full_score(&self) -> f64 {
        let gauss: f64 = (self.t0..self.t0 + self.effect.len())
            .map(|t| self.point_term(t))
            .sum();
        let pois: f64 = self
            .shifts
            .iter()
            .map(|&s| poisson_logpmf(s, self.lambda))
            .sum();
        gauss + pois
    }

    fn draw_truncated(&self, rng: &mut ChaCha8Rng, cap: usize) -> usize {
        let total = self.pmf_cum[cap];
        let target = rng.random::<f64>() * total;
        self.pmf_cum[..=cap].partition_point(|&c| c < target).min(cap)
    }

    /// Run `iters` proposal rounds, redrawing `m` shifts per round. Returns
    /// the sequence of accepted scores, starting from the initial one.
    fn run(&mut self, rng: &mut ChaCha8Rng, iters: usize, m: usize) -> Vec<f64> {
        let k_block = self.impulses.len();
        let mut trace = vec![self.score];
        let mut changes: Vec<(usize, usize, usize)> = Vec::with_capacity(m);
        let mut touched: Vec<usize> = Vec::with_capacity(2 * m);

        for _ in 0..iters {
            changes.clear();
            touched.clear();
            let chosen = rand::seq::index::sample(rng, k_block, m);
            for j in chosen {
                let new_s = self.draw_truncated(rng, self.caps[j]);
                let old_s = self.shifts[j];
                if new_s != old_s {
                    let pos = self.impulses[j].position;
                    changes.push((j, old_s, new_s));
                    touched.push(pos + old_s);
                    touched.push(pos + new_s);
                }
            }
            if changes.is_empty() {
                continue;
            }
            touched.sort_unstable();
            touched.dedup();

            let old_gauss: f64 = touched.iter().map(|&t| self.point_term(t)).sum();
            let mut delta_pois = 0.0;
            for &(j, old_s, new_s) in &changes {
                let amp = self.impulses[j].amplitude;
                let pos = self.impulses[j].position;
                self.effect[pos + old_s - self.t0] -= amp;
                self.effect[pos + new_s - self.t0] += amp;
                delta_pois +=
                    poisson_logpmf(new_s, self.lambda) - poisson_logpmf(old_s, self.lambda);
            }
            let new_gauss: f64 = touched.iter().map(|&t| self.point_term(t)).sum();
            let candidate = self.score + (new_gauss - old_gauss) + delta_pois;

            if candidate > self.score {
                for &(j, _, new_s) in &changes {
                    self.shifts[j] = new_s;
                }
                self.score = candidate;
                trace.push(candidate);
            } else {
                for &(j, old_s, new_s) in &changes {
                    let amp = self.impulses[j].amplitude;
                    let pos = self.impulses[j].position;
                    self.effect[pos + old_s - self.t0] += amp;
                    self.effect[pos + new_s - self.t0] -= amp;
                }
            }
        }
        trace
    }
}

/// Global maximiser by full enumeration, for use as an oracle on small
/// instances. Ties resolve to the lexicographically smallest shift vector.
pub fn exhaustive_search(
    y: &TimeSeries,
    imp: &ImpulseSet,
    params: &ModelParams,
    tau_max: usize,
) -> Result<(ShiftVector, JointLogLik)> {
    params.validate()?;
    if imp.is_empty() {
        return Err(TvsError::DegenerateInput("empty impulse set".into()));
    }
    let n = imp.source_length();
    let caps: Vec<usize> = imp
        .impulses()
        .iter()
        .map(|i| tau_max.min(n - 1 - i.position))
        .collect();
    let combinations = caps
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128 + 1))
        .unwrap_or(u128::MAX);
    if combinations > EXHAUSTIVE_BUDGET {
        return Err(TvsError::BudgetExceeded {
            combinations,
            budget: EXHAUSTIVE_BUDGET,
        });
    }

    let mut current = vec![0usize; caps.len()];
    let mut best: Option<(ShiftVector, JointLogLik)> = None;
    loop {
        let tau = ShiftVector::new(current.clone());
        let lik = joint_loglik(y, imp, &tau, params)?;
        // Strict comparison keeps the first (lexicographically smallest) maximiser.
        if best.as_ref().is_none_or(|(_, b)| lik.total > b.total) {
            best = Some((tau, lik));
        }
        // Odometer increment, rightmost digit fastest.
        let mut done = true;
        for j in (0..current.len()).rev() {
            if current[j] < caps[j] {
                current[j] += 1;
                done = false;
                break;
            }
            current[j] = 0;
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one candidate enumerated"))
}
