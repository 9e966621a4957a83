//! Monte Carlo checks of tail bounds with exact binomial confidence limits.

use rayon::prelude::*;

use crate::bounds::{Centering, Tail, TailBound, Theorem};
use crate::error::{domain, Result};
use crate::functionals::Functional;
use crate::id_model::IdVectorModel;
use crate::samplers::{sample_vector, splitmix64};
use crate::stats::{clopper_pearson_upper, mean_and_se};

/// Number of points in [`default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 9;

/// Empirical tail at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub threshold: f64,
    pub successes: u64,
    pub freq: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationRow {
    pub x: f64,
    pub threshold: f64,
    pub freq: f64,
    pub ci_upper: f64,
    pub bound: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub rows: Vec<VerificationRow>,
    pub n: usize,
    pub seed: u64,
    pub delta: f64,
    pub theorem: Theorem,
    pub tail: Tail,
    /// `E f(X)` as used in the thresholds (mean-centred bounds only).
    pub mean: Option<f64>,
}

impl VerificationReport {
    pub fn all_dominated(&self) -> bool {
        self.rows.iter().all(|r| r.dominated)
    }
}

/// Frequencies of `values ≥ τ` for each threshold with Clopper–Pearson upper
/// limits at level `delta / thresholds.len()`.
pub fn estimate_tail(values: &[f64], thresholds: &[f64], delta: f64) -> Result<Vec<TailEstimate>> {
    estimate_tail_for(values, thresholds, delta, Tail::Upper)
}

/// As [`estimate_tail`]; the lower tail counts `values ≤ τ`.
pub fn estimate_tail_for(
    values: &[f64],
    thresholds: &[f64],
    delta: f64,
    tail: Tail,
) -> Result<Vec<TailEstimate>> {
    if values.is_empty() {
        return Err(domain("no values to tally"));
    }
    if thresholds.is_empty() {
        return Ok(Vec::new());
    }
    let n = values.len() as u64;
    let per_row = delta / thresholds.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    thresholds
        .iter()
        .map(|&tau| {
            let successes = match tail {
                Tail::Upper => sorted.len() - sorted.partition_point(|&v| v < tau),
                Tail::Lower => sorted.partition_point(|&v| v <= tau),
            } as u64;
            Ok(TailEstimate {
                threshold: tau,
                successes,
                freq: successes as f64 / n as f64,
                ci_upper: clopper_pearson_upper(successes, n, per_row)?,
            })
        })
        .collect()
}

/// `f` applied to each of `n` seeded draws of `X`.
pub fn sample_functional(
    model: &IdVectorModel,
    f: &Functional,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    f.check_dim(model.dim())?;
    if n == 0 {
        return Err(crate::Error::Sampling("need at least one draw".into()));
    }
    let x = sample_vector(model, n, seed)?;
    let rows: Vec<&[f64]> = x.rows().collect();
    Ok(rows.par_iter().map(|r| f.eval_unchecked(r)).collect())
}

/// `E f(X)` for thresholds: exact for linear `f`; otherwise a Monte Carlo mean
/// from a stream independent of `seed`'s verification draws, moved by three
/// standard errors away from the tested tail.
pub fn threshold_mean(
    model: &IdVectorModel,
    f: &Functional,
    n: usize,
    seed: u64,
    tail: Tail,
) -> Result<f64> {
    if let Functional::Linear { c } = f {
        f.check_dim(model.dim())?;
        let mut m = 0.0;
        for (k, ck) in c.iter().enumerate() {
            m += ck * model.component_moments(k)?.0;
        }
        return Ok(m);
    }
    let values = sample_functional(model, f, n, splitmix64(seed ^ 0x6d65_616e))?;
    let (mean, se) = mean_and_se(&values);
    Ok(match tail {
        Tail::Upper => mean + 3.0 * se,
        Tail::Lower => mean - 3.0 * se,
    })
}

/// Geometric grid of [`DEFAULT_GRID_POINTS`] points on `[σ/4, 8σ]`, with `σ`
/// the sample standard deviation of `values`; `{1}` when `σ = 0`.
pub fn default_grid(values: &[f64]) -> Vec<f64> {
    let (_, se) = mean_and_se(values);
    let sigma = se * (values.len() as f64).sqrt();
    if !(sigma > 0.0) || !sigma.is_finite() {
        return vec![1.0];
    }
    let (lo, hi) = (0.25 * sigma, 8.0 * sigma);
    let steps = (DEFAULT_GRID_POINTS - 1) as f64;
    (0..DEFAULT_GRID_POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / steps))
        .collect()
}

/// Samples `f(X)` `n` times and compares the Clopper–Pearson upper limit of
/// each tail frequency with the bound. `x_grid` defaults to
/// [`default_grid`] scaled by `1/x_scale`.
pub fn verify_domination(
    model: &IdVectorModel,
    f: &Functional,
    bound: &TailBound,
    n: usize,
    seed: u64,
    x_grid: Option<&[f64]>,
    delta: f64,
) -> Result<VerificationReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("δ must be in (0, 1), got {delta}")));
    }
    let values = sample_functional(model, f, n, seed)?;
    let mean = match bound.centering {
        Centering::Mean => Some(threshold_mean(model, f, n, seed, bound.tail)?),
        Centering::Absolute => None,
    };
    let grid: Vec<f64> = match x_grid {
        Some(g) => g.to_vec(),
        None => default_grid(&values).iter().map(|x| x / bound.x_scale).collect(),
    };
    if grid.iter().any(|x| !(*x >= 0.0)) {
        return Err(domain("grid points must be ≥ 0"));
    }
    let thresholds: Vec<f64> = grid
        .iter()
        .map(|&x| bound.threshold(x, mean.unwrap_or(0.0)))
        .collect();
    let estimates = estimate_tail_for(&values, &thresholds, delta, bound.tail)?;
    let rows = grid
        .iter()
        .zip(estimates)
        .map(|(&x, e)| {
            let b = bound.bound(x)?;
            Ok(VerificationRow {
                x,
                threshold: e.threshold,
                freq: e.freq,
                ci_upper: e.ci_upper,
                bound: b,
                dominated: b >= e.ci_upper,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VerificationReport {
        rows,
        n,
        seed,
        delta,
        theorem: bound.theorem,
        tail: bound.tail,
        mean,
    })
}

/// Smallest nonzero upper limit a report with `n` draws and `rows` rows can
/// produce; bounds below it cannot be confirmed.
pub fn resolution(n: usize, rows: usize, delta: f64) -> Result<f64> {
    clopper_pearson_upper(0, n as u64, delta / rows.max(1) as f64)
}
