//! Rate functions, Chernoff exponents and assembled tail bounds for each
//! inequality the crate supports.

mod closed;
mod rate;
mod tail;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use closed::{
    bennett_bound, bennett_exponent, bernstein_bound, bernstein_constants, bernstein_exponent,
    check_bernstein_condition, ell_bennett, ell_bernstein, laplace_norm_bound,
    laplace_norm_bound_exact, laplace_norm_constant, laplace_norm_exponent_exact,
    laplace_norm_exponent_simplified, two_regime_constant, two_regime_exponent,
};
pub use rate::{chernoff_exponent, ExponentValue, RateExpr, RateFunction, ScalarFn, INVERSION_TOL};
pub use tail::{combine_bounds, BoundPoint, Centering, Exponent, Tail, TailBound};

use crate::error::{domain, Error, Result};
use crate::functionals::{Functional, FunctionalEnvelope};
use crate::id_model::{IdVectorModel, NormBracket, DEFAULT_ORACLE_SAMPLES, DEFAULT_ORACLE_SEED};
use crate::levy::LevyMeasure1D;

/// Which inequality a rate function or bound implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// A caller-supplied rate function.
    Generic,
    /// Bennett form for bounded jumps, constants `ā²` and `bR`.
    Cor1,
    /// Quadrature path for iid coordinates with constants `ã²` and `b`.
    Cor2,
    /// Bernstein form under the moment condition with `(C, V²)`.
    Cor2Bernstein,
    /// Norm deviation above `(1+ε)E‖X‖` (below `(1−ε)E‖X‖` for the lower tail).
    Cor3,
    /// Any Lipschitz `f` above `E f + a√(2ΣVar X_k)`.
    Thm2,
    /// Lipschitz `f` above `f(0) + aE[‖X‖−ε]₊ + aε`.
    Thm3,
    /// Best of `Thm3` over `ε ∈ {2^j √d : j = −4..4}`.
    Thm3Scan,
    /// Concave `f` with mean gradient constants `b̃_k`.
    Cor4,
    /// Bennett form of `Thm2` for bounded jumps.
    Cor6,
    /// Bennett form of `Cor3` for bounded jumps.
    Eq11a,
    /// `C min((x/R) ln(xR/V²), x²/V²)` simplification of `Eq11a`.
    Eq11aa,
    /// Closed form of `Cor3` for iid symmetric exponential coordinates.
    LaplaceClosed,
    /// Output of [`combine_bounds`].
    Combined,
}

const TAGS: [(Theorem, &str); 14] = [
    (Theorem::Generic, "thm1-generic"),
    (Theorem::Cor1, "cor1"),
    (Theorem::Cor2, "cor2"),
    (Theorem::Cor2Bernstein, "cor2-bernstein"),
    (Theorem::Cor3, "cor3"),
    (Theorem::Thm2, "thm2"),
    (Theorem::Thm3, "thm3"),
    (Theorem::Thm3Scan, "thm3-scan"),
    (Theorem::Cor4, "cor4"),
    (Theorem::Cor6, "cor6"),
    (Theorem::Eq11a, "eq11a"),
    (Theorem::Eq11aa, "eq11aa"),
    (Theorem::LaplaceClosed, "laplace-closed"),
    (Theorem::Combined, "combined"),
];

impl Theorem {
    pub fn tag(&self) -> &'static str {
        TAGS.iter().find(|(t, _)| t == self).map(|(_, s)| *s).unwrap_or("?")
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TAGS.iter()
            .find(|(_, tag)| *tag == s)
            .map(|(t, _)| *t)
            .ok_or_else(|| Error::Config(format!("unknown theorem tag `{s}`")))
    }
}

/// Optional inputs for [`build_rate`] and [`assemble_tail_bound`].
#[derive(Debug, Clone, Default)]
pub struct BoundParams {
    pub eps: Option<f64>,
    pub tail: Tail,
    /// Bracket for `E‖X‖`; computed from the model when absent.
    pub bracket: Option<NormBracket>,
    /// `(C, V²)` for the Bernstein form.
    pub bernstein: Option<(f64, f64)>,
    /// `v²` (Bennett form of `Thm2`) or `V²` (Bennett form of `Cor3`).
    pub v_sq: Option<f64>,
    /// Jump bound `R`; must dominate every support radius.
    pub radius: Option<f64>,
    /// Replaces the per-coordinate constants `b_k` of the envelope.
    pub b_k: Option<Vec<f64>>,
    /// Replaces the whole envelope.
    pub envelope: Option<FunctionalEnvelope>,
    pub oracle_samples: Option<usize>,
    pub oracle_seed: Option<u64>,
}

impl BoundParams {
    pub fn with_eps(eps: f64) -> Self {
        BoundParams {
            eps: Some(eps),
            ..Default::default()
        }
    }

    fn samples(&self) -> usize {
        self.oracle_samples.unwrap_or(DEFAULT_ORACLE_SAMPLES)
    }

    fn seed(&self) -> u64 {
        self.oracle_seed.unwrap_or(DEFAULT_ORACLE_SEED)
    }
}

/// Per-coordinate data the norm builders need.
struct Context<'a> {
    model: &'a IdVectorModel,
    env: FunctionalEnvelope,
}

impl Context<'_> {
    fn levy(&self, k: usize) -> &LevyMeasure1D {
        &self.model.component(k).levy
    }

    fn d(&self) -> usize {
        self.model.dim()
    }

    /// The per-coordinate builder may be evaluated once when the model is iid
    /// and the coordinate constants agree.
    fn collapsible(&self, consts: &[f64]) -> bool {
        self.model.is_iid() && consts.windows(2).all(|w| w[0] == w[1])
    }

    fn max_over(&self, consts: &[f64], leaf: impl Fn(usize) -> RateExpr) -> RateExpr {
        if self.collapsible(consts) {
            return leaf(0);
        }
        RateExpr::Max((0..self.d()).map(leaf).collect())
    }

    fn sum_over(&self, consts: &[f64], leaf: impl Fn(usize) -> RateExpr) -> RateExpr {
        if self.collapsible(consts) {
            return leaf(0).scaled(self.d() as f64);
        }
        RateExpr::Sum((0..self.d()).map(leaf).collect())
    }

    fn euclid_over(&self, consts: &[f64], leaf: impl Fn(usize) -> RateExpr) -> RateExpr {
        if self.collapsible(consts) {
            return leaf(0).scaled((self.d() as f64).sqrt());
        }
        RateExpr::Euclid((0..self.d()).map(leaf).collect())
    }
}

fn envelope_for(
    model: &IdVectorModel,
    f: &Functional,
    params: &BoundParams,
) -> Result<FunctionalEnvelope> {
    let mut env = match &params.envelope {
        Some(e) => e.clone(),
        None => f.envelope_with(model, params.samples(), params.seed())?,
    };
    if let Some(b_k) = &params.b_k {
        if b_k.len() != model.dim() {
            return Err(Error::Dimension {
                expected: model.dim(),
                got: b_k.len(),
            });
        }
        env.b = b_k.iter().copied().fold(0.0, f64::max);
        env.b_k = b_k.clone();
    }
    if env.b_k.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: env.b_k.len(),
        });
    }
    env.validate()?;
    Ok(env)
}

fn eps_or(params: &BoundParams, default: f64) -> Result<f64> {
    let eps = params.eps.unwrap_or(default);
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("ε must be positive, got {eps}")));
    }
    Ok(eps)
}

/// Bracket for `E f(X)` where `f` is a norm, plus `λ_max` for the `A`-norm.
fn norm_bracket(
    model: &IdVectorModel,
    f: &Functional,
    params: &BoundParams,
) -> Result<(NormBracket, Option<(f64, Vec<f64>)>)> {
    let euclid = || -> Result<NormBracket> {
        match params.bracket {
            Some(b) => Ok(b),
            None => model.expected_norm_bracket_with(params.samples(), params.seed()),
        }
    };
    match f {
        Functional::EuclideanNorm => Ok((euclid()?, None)),
        Functional::ANorm { a } => {
            let eig = a.clone().symmetric_eigen().eigenvalues;
            let (lmin, lmax) = (eig.min(), eig.max());
            let diag = a.diagonal().iter().copied().collect();
            let bracket = match params.bracket {
                Some(b) => b,
                None => {
                    let b = model.expected_norm_bracket_with(params.samples(), params.seed())?;
                    NormBracket {
                        lower: lmin.sqrt() * b.lower,
                        upper: lmax.sqrt() * b.upper,
                        estimate_backed: b.estimate_backed,
                    }
                }
            };
            Ok((bracket, Some((lmax, diag))))
        }
        _ => Err(Error::Envelope(format!(
            "this inequality needs the Euclidean or an A-norm, got {}",
            f.name()
        ))),
    }
}

fn check_bracket(b: &NormBracket) -> Result<()> {
    if !(b.lower > 0.0) || !(b.upper >= b.lower) {
        return Err(domain(format!(
            "norm bracket [{}, {}] must satisfy 0 < lower ≤ upper",
            b.lower, b.upper
        )));
    }
    Ok(())
}

fn ensure_iid(model: &IdVectorModel) -> Result<()> {
    if !model.is_iid() {
        return Err(domain("this inequality needs identically distributed coordinates"));
    }
    Ok(())
}

/// `h` for the tags with a rate function: cor2, cor3, thm2, thm3, cor4.
pub fn build_rate(
    model: &IdVectorModel,
    f: &Functional,
    theorem: Theorem,
    params: &BoundParams,
) -> Result<RateFunction> {
    Ok(build_rate_inner(model, f, theorem, params)?.0)
}

/// The rate function and whether an estimate went into it.
fn build_rate_inner(
    model: &IdVectorModel,
    f: &Functional,
    theorem: Theorem,
    params: &BoundParams,
) -> Result<(RateFunction, bool)> {
    let ctx = Context {
        model,
        env: envelope_for(model, f, params)?,
    };
    let d = model.dim();
    let ones = vec![1.0; d];
    let mut estimate_backed = false;
    let expr = match theorem {
        Theorem::Cor2 => {
            ensure_iid(model)?;
            let env = &ctx.env;
            if !(env.b > 0.0) {
                return Err(Error::Envelope("b must be positive".into()));
            }
            RateExpr::kernel(ctx.levy(0), 1, env.b).scaled(env.a_tilde_sq / env.b)
        }
        Theorem::Cor3 => {
            let eps = eps_or(params, 1.0)?;
            let (bracket, a_norm) = norm_bracket(model, f, params)?;
            check_bracket(&bracket)?;
            estimate_backed = bracket.estimate_backed;
            let denom = 2.0 / (eps * bracket.lower).powi(2);
            match a_norm {
                None => RateExpr::Sum(vec![
                    ctx.max_over(&ones, |k| RateExpr::kernel(ctx.levy(k), 1, 1.0)).scaled(8.0),
                    ctx.sum_over(&ones, |k| RateExpr::kernel(ctx.levy(k), 3, 1.0))
                        .scaled(denom),
                ]),
                Some((lambda_max, diag)) => {
                    let b_k = &ctx.env.b_k;
                    let consts: Vec<f64> = b_k.iter().zip(&diag).map(|(b, a)| b * a).collect();
                    RateExpr::Sum(vec![
                        ctx.max_over(b_k, |k| {
                            RateExpr::kernel(ctx.levy(k), 1, b_k[k]).scaled(1.0 / b_k[k])
                        })
                        .scaled(8.0 * lambda_max),
                        ctx.sum_over(&consts, |k| {
                            RateExpr::kernel(ctx.levy(k), 3, b_k[k]).scaled(diag[k] * diag[k] / b_k[k])
                        })
                        .scaled(denom),
                    ])
                }
            }
        }
        Theorem::Thm2 => {
            let var = model.total_variance()?;
            if !(var > 0.0) {
                return Err(domain("total variance must be positive"));
            }
            RateExpr::Sum(vec![
                ctx.max_over(&ones, |k| RateExpr::kernel(ctx.levy(k), 1, 1.0)).scaled(8.0),
                ctx.sum_over(&ones, |k| RateExpr::kernel(ctx.levy(k), 3, 1.0)).scaled(2.0 / var),
            ])
        }
        Theorem::Thm3 => {
            let eps = eps_or(params, (d as f64).sqrt())?;
            let (a, b_k) = (ctx.env.a, &ctx.env.b_k);
            if b_k.iter().any(|b| !(*b > 0.0)) {
                return Err(Error::Envelope("every b_k must be positive".into()));
            }
            RateExpr::Sum(vec![
                ctx.euclid_over(b_k, |k| RateExpr::kernel(ctx.levy(k), 1, b_k[k])).scaled(2.0 * a),
                ctx.sum_over(b_k, |k| RateExpr::kernel(ctx.levy(k), 2, b_k[k])).scaled(a / eps),
            ])
        }
        Theorem::Cor4 => {
            if !ctx.env.concave {
                return Err(Error::Envelope(format!("{} is not concave", f.name())));
            }
            estimate_backed = ctx.env.estimate_backed;
            let bt = ctx.env.b_tilde_k()?.to_vec();
            if bt.iter().all(|b| *b == 0.0) {
                return Err(domain("every b̃_k vanishes; the rate function is zero"));
            }
            if ctx.collapsible(&bt) {
                RateExpr::kernel(ctx.levy(0), 1, bt[0]).scaled(bt[0] * d as f64)
            } else {
                RateExpr::Sum(
                    (0..d)
                        .filter(|&k| bt[k] > 0.0)
                        .map(|k| RateExpr::kernel(ctx.levy(k), 1, bt[k]).scaled(bt[k]))
                        .collect(),
                )
            }
        }
        other => {
            return Err(domain(format!(
                "`{other}` has no rate function (closed form or combination)"
            )))
        }
    };
    Ok((RateFunction::new(expr, theorem)?, estimate_backed))
}

fn bounded_radius(model: &IdVectorModel, params: &BoundParams) -> Result<f64> {
    let support = model
        .components()
        .iter()
        .map(|c| c.levy.support_radius())
        .fold(0.0, f64::max);
    if !support.is_finite() {
        return Err(domain("this inequality needs Lévy measures with bounded support"));
    }
    match params.radius {
        Some(r) if r < support => Err(domain(format!(
            "R = {r} is smaller than the largest support radius {support}"
        ))),
        Some(r) => Ok(r),
        None => Ok(support),
    }
}

fn upper_only(theorem: Theorem, tail: Tail) -> Result<()> {
    if tail == Tail::Lower {
        return Err(domain(format!("`{theorem}` has no lower-tail form")));
    }
    Ok(())
}

/// The tail bound of `theorem` for `f(X)`.
pub fn assemble_tail_bound(
    model: &IdVectorModel,
    f: &Functional,
    theorem: Theorem,
    params: &BoundParams,
) -> Result<TailBound> {
    f.check_dim(model.dim())?;
    let tail = params.tail;
    let sign = match tail {
        Tail::Upper => 1.0,
        Tail::Lower => -1.0,
    };
    let chernoff = |centering, offset| -> Result<TailBound> {
        let (r, estimate_backed) = build_rate_inner(model, f, theorem, params)?;
        let mut b = TailBound::new(theorem, centering, offset, Exponent::Chernoff(Arc::new(r)));
        b.estimate_backed = estimate_backed;
        Ok(b)
    };
    let mut bound = match theorem {
        Theorem::Cor1 => {
            let env = envelope_for(model, f, params)?;
            let a_bar_sq = env.a_bar_sq()?;
            let r = bounded_radius(model, params)?;
            let b_r = env
                .b_k
                .iter()
                .zip(model.components())
                .map(|(b, c)| b * params.radius.map_or(c.levy.support_radius(), |_| r))
                .fold(0.0, f64::max);
            if !(a_bar_sq > 0.0 && b_r > 0.0) {
                return Err(Error::Envelope("ā² and bR must be positive".into()));
            }
            TailBound::new(
                theorem,
                Centering::Mean,
                0.0,
                Exponent::Bennett {
                    scale: a_bar_sq / (b_r * b_r),
                    rate: b_r / a_bar_sq,
                },
            )
        }
        Theorem::Cor2 => chernoff(Centering::Mean, 0.0)?,
        Theorem::Cor2Bernstein => {
            ensure_iid(model)?;
            let env = envelope_for(model, f, params)?;
            let levy = &model.component(0).levy;
            let (c, v_sq) = match params.bernstein {
                Some(cv) => cv,
                None => bernstein_constants(levy)?,
            };
            check_bernstein_condition(levy, c, v_sq)?;
            let s = env.a_tilde_sq * v_sq;
            TailBound::new(
                theorem,
                Centering::Mean,
                0.0,
                Exponent::Bernstein {
                    scale: s / (env.b * env.b * c * c),
                    rate: env.b * c / s,
                },
            )
        }
        Theorem::Cor3 => {
            let eps = eps_or(params, 1.0)?;
            let (bracket, _) = norm_bracket(model, f, params)?;
            let offset = match tail {
                Tail::Upper => (1.0 + eps) * bracket.upper,
                Tail::Lower if eps <= 1.0 => (1.0 - eps) * bracket.lower,
                Tail::Lower => (1.0 - eps) * bracket.upper,
            };
            let mut b = chernoff(Centering::Absolute, offset)?;
            b.estimate_backed |= bracket.estimate_backed;
            b
        }
        Theorem::Thm2 => {
            let env = envelope_for(model, f, params)?;
            let var = model.total_variance()?;
            let mut b = chernoff(Centering::Mean, sign * env.a * (2.0 * var).sqrt())?;
            b.x_scale = env.a;
            b
        }
        Theorem::Thm3 => {
            let env = envelope_for(model, f, params)?;
            let eps = eps_or(params, (model.dim() as f64).sqrt())?;
            let bracket = match params.bracket {
                Some(b) => b,
                None => model.expected_norm_bracket_with(params.samples(), params.seed())?,
            };
            let f0 = f.at_origin(model.dim())?;
            let mut b = chernoff(
                Centering::Absolute,
                f0 + sign * env.a * (bracket.upper + eps),
            )?;
            b.estimate_backed |= bracket.estimate_backed;
            b
        }
        Theorem::Thm3Scan => return thm3_scan(model, f, params),
        Theorem::Cor4 => {
            upper_only(theorem, tail)?;
            let env = envelope_for(model, f, params)?;
            // −Cov(X, ∇f(X)) vanishes for linear f and is ≤ a√(ΣVar X_k) in general
            let offset = match f {
                Functional::Linear { .. } => 0.0,
                _ => env.a * model.total_variance()?.sqrt(),
            };
            chernoff(Centering::Mean, offset)?
        }
        Theorem::Cor6 => {
            let env = envelope_for(model, f, params)?;
            let r = bounded_radius(model, params)?;
            let var = model.total_variance()?;
            let v_sq = match params.v_sq {
                Some(v) => v,
                None => {
                    let max2 = max_moment(model, 2)?;
                    let sum4 = sum_moment(model, 4)?;
                    8.0 * max2 + 2.0 / var * sum4
                }
            };
            let mut b = TailBound::new(
                theorem,
                Centering::Mean,
                sign * env.a * (2.0 * var).sqrt(),
                Exponent::Bennett {
                    scale: v_sq / (r * r),
                    rate: r / v_sq,
                },
            );
            b.x_scale = env.a;
            b
        }
        Theorem::Eq11a | Theorem::Eq11aa => {
            upper_only(theorem, tail)?;
            if !matches!(f, Functional::EuclideanNorm) {
                return Err(Error::Envelope("this inequality needs the Euclidean norm".into()));
            }
            let eps = eps_or(params, 1.0)?;
            let (bracket, _) = norm_bracket(model, f, params)?;
            check_bracket(&bracket)?;
            let r = bounded_radius(model, params)?;
            let v_sq = match params.v_sq {
                Some(v) => v,
                None => eq11a_variance(model, eps, bracket.lower, r)?,
            };
            let (scale, rate) = (v_sq / (r * r), r / v_sq);
            let exponent = if theorem == Theorem::Eq11a {
                Exponent::Bennett { scale, rate }
            } else {
                Exponent::TwoRegime { scale, rate }
            };
            let mut b =
                TailBound::new(theorem, Centering::Absolute, (1.0 + eps) * bracket.upper, exponent);
            b.estimate_backed = bracket.estimate_backed;
            b
        }
        Theorem::LaplaceClosed => {
            upper_only(theorem, tail)?;
            if !matches!(f, Functional::EuclideanNorm) {
                return Err(Error::Envelope("this inequality needs the Euclidean norm".into()));
            }
            if !model.components().iter().all(|c| c.levy.is_laplace() && c.gamma == 0.0) {
                return Err(domain("closed form needs symmetric exponential coordinates"));
            }
            let eps = eps_or(params, 1.0)?;
            let (bracket, _) = norm_bracket(model, f, params)?;
            TailBound::new(
                theorem,
                Centering::Absolute,
                (1.0 + eps) * bracket.upper,
                Exponent::LaplaceExact {
                    c: laplace_norm_constant(eps),
                },
            )
        }
        Theorem::Generic | Theorem::Combined => {
            return Err(domain(format!("`{theorem}` cannot be assembled from a model")))
        }
    };
    bound.tail = tail;
    Ok(bound)
}

/// `8 max_k ∫_{|u|≤R} u² ν̃_k + 2/(ε L)² Σ_k ∫_{|u|≤R} u⁴ ν̃_k`.
pub fn eq11a_variance(model: &IdVectorModel, eps: f64, lower: f64, r: f64) -> Result<f64> {
    let mut max2 = 0.0f64;
    let mut sum4 = 0.0;
    let d = model.dim() as f64;
    for c in model.distinct_components() {
        max2 = max2.max(c.levy.truncated_moment(2, r)?);
        sum4 += c.levy.truncated_moment(4, r)?;
    }
    if model.is_iid() {
        sum4 *= d;
    }
    Ok(8.0 * max2 + 2.0 / (eps * lower).powi(2) * sum4)
}

fn max_moment(model: &IdVectorModel, n: i32) -> Result<f64> {
    model
        .distinct_components()
        .iter()
        .map(|c| c.levy.absolute_moment(n))
        .try_fold(0.0f64, |m, x| x.map(|x| m.max(x)))
}

fn sum_moment(model: &IdVectorModel, n: i32) -> Result<f64> {
    let s: f64 = model
        .distinct_components()
        .iter()
        .map(|c| c.levy.absolute_moment(n))
        .sum::<Result<f64>>()?;
    Ok(if model.is_iid() { s * model.dim() as f64 } else { s })
}

/// Best `Thm3` bound over `ε = 2^j √d`, `j = −4..4`, aligned to the smallest
/// threshold offset.
pub fn thm3_scan(model: &IdVectorModel, f: &Functional, params: &BoundParams) -> Result<TailBound> {
    let root_d = (model.dim() as f64).sqrt();
    let bracket = match params.bracket {
        Some(b) => b,
        None => model.expected_norm_bracket_with(params.samples(), params.seed())?,
    };
    let bounds: Vec<TailBound> = (-4..=4)
        .map(|j| {
            let p = BoundParams {
                eps: Some(2f64.powi(j) * root_d),
                bracket: Some(bracket),
                ..params.clone()
            };
            assemble_tail_bound(model, f, Theorem::Thm3, &p)
        })
        .collect::<Result<_>>()?;
    let common = match params.tail {
        Tail::Upper => bounds.iter().map(|b| b.offset).fold(f64::INFINITY, f64::min),
        Tail::Lower => bounds.iter().map(|b| b.offset).fold(f64::NEG_INFINITY, f64::max),
    };
    let aligned: Vec<TailBound> = bounds.iter().map(|b| b.shifted_to(common)).collect();
    let mut out = combine_bounds(&aligned)?;
    out.theorem = Theorem::Thm3Scan;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id_model::Component;

    fn poisson(d: usize) -> IdVectorModel {
        IdVectorModel::iid(Component::poisson(1.0).unwrap(), d).unwrap()
    }

    fn exact(v: f64) -> BoundParams {
        BoundParams {
            bracket: Some(NormBracket::exact(v)),
            ..BoundParams::with_eps(1.0)
        }
    }

    #[test]
    fn cor3_rate_example() {
        let r = build_rate(&poisson(1), &Functional::EuclideanNorm, Theorem::Cor3, &exact(1.0))
            .unwrap();
        assert!((r.h(2f64.ln()).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn thm3_rate_example() {
        let r = build_rate(
            &poisson(4),
            &Functional::EuclideanNorm,
            Theorem::Thm3,
            &BoundParams::with_eps(2.0),
        )
        .unwrap();
        assert!((r.h(2f64.ln()).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cor4_rate_example() {
        let f = Functional::linear(vec![1.0; 3]);
        let r = build_rate(&poisson(3), &f, Theorem::Cor4, &BoundParams::default()).unwrap();
        assert!((r.h(2f64.ln()).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cor1_is_bennett_for_unit_poisson() {
        let f = Functional::linear(vec![1.0]);
        let b = assemble_tail_bound(&poisson(1), &f, Theorem::Cor1, &BoundParams::default())
            .unwrap();
        assert_eq!(b.offset, 0.0);
        for x in [0.5, 1.0, 3.0] {
            assert!((b.exponent_at(x).unwrap().value - ell_bennett(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn cor6_variance_example() {
        for d in [1, 3, 8] {
            let b = assemble_tail_bound(
                &poisson(d),
                &Functional::EuclideanNorm,
                Theorem::Cor6,
                &BoundParams::default(),
            )
            .unwrap();
            let x = 2.0;
            let expected = 10.0 * ell_bennett(x / 10.0);
            assert!((b.exponent_at(x).unwrap().value - expected).abs() < 1e-14);
            assert!((b.offset - (2.0 * d as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn eq11a_variance_example() {
        let v = eq11a_variance(&poisson(1), 1.0, 1.0, 1.0).unwrap();
        assert_eq!(v, 10.0);
    }

    #[test]
    fn cor2_requires_iid() {
        let m = IdVectorModel::new(vec![
            Component::poisson(1.0).unwrap(),
            Component::poisson(2.0).unwrap(),
        ])
        .unwrap();
        let r = build_rate(&m, &Functional::MinCoordinate, Theorem::Cor2, &BoundParams::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn norm_theorems_reject_other_functionals() {
        let r = build_rate(&poisson(2), &Functional::MinCoordinate, Theorem::Cor3, &exact(1.0));
        assert!(matches!(r, Err(Error::Envelope(_))));
    }

    #[test]
    fn cor1_needs_bounded_support() {
        let m = IdVectorModel::iid(Component::laplace(), 2).unwrap();
        let f = Functional::linear(vec![1.0, 1.0]);
        assert!(assemble_tail_bound(&m, &f, Theorem::Cor1, &BoundParams::default()).is_err());
    }

    #[test]
    fn theorem_tags_round_trip() {
        for (t, tag) in TAGS {
            assert_eq!(tag.parse::<Theorem>().unwrap(), t);
            assert_eq!(t.tag(), tag);
        }
        assert!("cor9".parse::<Theorem>().is_err());
    }

    #[test]
    fn thm3_scan_dominates_members() {
        let m = poisson(4);
        let f = Functional::EuclideanNorm;
        let scan = assemble_tail_bound(&m, &f, Theorem::Thm3Scan, &BoundParams::default()).unwrap();
        let single = assemble_tail_bound(&m, &f, Theorem::Thm3, &BoundParams::default()).unwrap();
        assert!(scan.offset <= single.offset);
        for y in [0.5, 2.0, 6.0] {
            // same absolute threshold
            let x = y + scan.offset - single.offset;
            if x >= 0.0 {
                assert!(scan.bound(y).unwrap() <= single.bound(x).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn a_norm_cor3_reduces_to_norm_for_identity() {
        let m = poisson(3);
        let a = nalgebra::DMatrix::identity(3, 3);
        let fa = Functional::a_norm(a).unwrap();
        let ra = build_rate(&m, &fa, Theorem::Cor3, &exact(1.5)).unwrap();
        let rn = build_rate(&m, &Functional::EuclideanNorm, Theorem::Cor3, &exact(1.5)).unwrap();
        for t in [0.1, 0.7, 2.0] {
            assert!((ra.h(t).unwrap() - rn.h(t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn lower_tail_cor3_offset() {
        let p = BoundParams {
            eps: Some(0.5),
            tail: Tail::Lower,
            bracket: Some(NormBracket {
                lower: 2.0,
                upper: 3.0,
                estimate_backed: false,
            }),
            ..Default::default()
        };
        let b = assemble_tail_bound(&poisson(4), &Functional::EuclideanNorm, Theorem::Cor3, &p)
            .unwrap();
        assert_eq!(b.offset, 1.0);
        assert_eq!(b.threshold(0.25, 0.0), 0.75);
    }
}
