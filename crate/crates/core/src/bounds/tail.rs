//! Tail bounds `P(f(X) ≥ threshold(x)) ≤ e^{-E(x)}` and their combination.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::closed::{
    ell_bennett, ell_bernstein, laplace_norm_exponent_exact, laplace_norm_exponent_simplified,
    two_regime_constant,
};
use super::rate::{chernoff_exponent, ExponentValue, RateFunction};
use super::Theorem;
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tail {
    #[default]
    Upper,
    Lower,
}

/// What the threshold is measured from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    /// `E f(X) + offset ± x_scale·x`.
    Mean,
    /// `offset ± x_scale·x`.
    Absolute,
}

/// The map `x ↦ E(x)`.
#[derive(Clone)]
pub enum Exponent {
    Chernoff(Arc<RateFunction>),
    /// `scale · ℓ(rate·x)`, Bennett `ℓ`.
    Bennett { scale: f64, rate: f64 },
    /// `scale · ℓ(rate·x)`, Bernstein `ℓ`.
    Bernstein { scale: f64, rate: f64 },
    LaplaceExact { c: f64 },
    LaplaceSimplified { c: f64 },
    /// `C·scale·max(0, u ln u)`, `u = rate·x`.
    TwoRegime { scale: f64, rate: f64 },
    /// `inner(max(0, x + shift))`.
    Shifted { inner: Box<Exponent>, shift: f64 },
    /// `inner(factor·x)`.
    Scaled { inner: Box<Exponent>, factor: f64 },
    Max(Vec<Exponent>),
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Chernoff(r) => write!(f, "Chernoff({:?})", r.theorem()),
            Exponent::Bennett { scale, rate } => write!(f, "Bennett({scale}, {rate})"),
            Exponent::Bernstein { scale, rate } => write!(f, "Bernstein({scale}, {rate})"),
            Exponent::LaplaceExact { c } => write!(f, "LaplaceExact({c})"),
            Exponent::LaplaceSimplified { c } => write!(f, "LaplaceSimplified({c})"),
            Exponent::TwoRegime { scale, rate } => write!(f, "TwoRegime({scale}, {rate})"),
            Exponent::Shifted { inner, shift } => write!(f, "{inner:?}(x + {shift})"),
            Exponent::Scaled { inner, factor } => write!(f, "{inner:?}({factor}·x)"),
            Exponent::Max(v) => f.debug_tuple("Max").field(v).finish(),
        }
    }
}

impl Exponent {
    pub fn eval(&self, x: f64) -> Result<ExponentValue> {
        let plain = |value: f64| {
            Ok(ExponentValue {
                value,
                beyond: false,
            })
        };
        match self {
            Exponent::Chernoff(r) => chernoff_exponent(r, x),
            Exponent::Bennett { scale, rate } => plain(scale * ell_bennett(rate * x)),
            Exponent::Bernstein { scale, rate } => plain(scale * ell_bernstein(rate * x)),
            Exponent::LaplaceExact { c } => plain(laplace_norm_exponent_exact(*c, x)),
            Exponent::LaplaceSimplified { c } => plain(laplace_norm_exponent_simplified(*c, x)),
            Exponent::TwoRegime { scale, rate } => {
                let u = rate * x;
                plain(if u > 1.0 {
                    two_regime_constant() * scale * u * u.ln()
                } else {
                    0.0
                })
            }
            Exponent::Shifted { inner, shift } => inner.eval((x + shift).max(0.0)),
            Exponent::Scaled { inner, factor } => inner.eval(factor * x),
            Exponent::Max(v) => {
                let mut best = ExponentValue {
                    value: 0.0,
                    beyond: false,
                };
                for e in v {
                    let cur = e.eval(x)?;
                    if cur.value > best.value {
                        best = cur;
                    }
                }
                Ok(best)
            }
        }
    }
}

/// A tail bound with its threshold convention.
#[derive(Debug, Clone)]
pub struct TailBound {
    pub theorem: Theorem,
    pub tail: Tail,
    pub centering: Centering,
    /// Signed additive term of the threshold.
    pub offset: f64,
    pub x_scale: f64,
    pub exponent: Exponent,
    /// `h(M⁻)`; exponents past it use the boundary value of `t`.
    pub valid_to: f64,
    /// The threshold or constants rest on a simulation estimate.
    pub estimate_backed: bool,
}

/// One grid point of a bound curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub x: f64,
    pub exponent: f64,
    pub bound: f64,
    pub beyond: bool,
}

impl TailBound {
    pub fn new(theorem: Theorem, centering: Centering, offset: f64, exponent: Exponent) -> Self {
        let valid_to = match &exponent {
            Exponent::Chernoff(r) => r.h_limit(),
            _ => f64::INFINITY,
        };
        TailBound {
            theorem,
            tail: Tail::Upper,
            centering,
            offset,
            x_scale: 1.0,
            exponent,
            valid_to,
            estimate_backed: false,
        }
    }

    pub fn exponent_at(&self, x: f64) -> Result<ExponentValue> {
        if !(x >= 0.0) {
            return Err(domain(format!("deviation must be ≥ 0, got {x}")));
        }
        self.exponent.eval(x)
    }

    pub fn bound(&self, x: f64) -> Result<f64> {
        Ok((-self.exponent_at(x)?.value).exp())
    }

    pub fn point(&self, x: f64) -> Result<BoundPoint> {
        let e = self.exponent_at(x)?;
        Ok(BoundPoint {
            x,
            exponent: e.value,
            bound: (-e.value).exp(),
            beyond: e.beyond,
        })
    }

    pub fn curve(&self, xs: &[f64]) -> Result<Vec<BoundPoint>> {
        xs.par_iter().map(|&x| self.point(x)).collect()
    }

    /// Threshold for deviation `x`, given `E f(X)` (ignored for absolute bounds).
    pub fn threshold(&self, x: f64, mean: f64) -> f64 {
        let base = match self.centering {
            Centering::Mean => mean,
            Centering::Absolute => 0.0,
        };
        match self.tail {
            Tail::Upper => base + self.offset + self.x_scale * x,
            Tail::Lower => base + self.offset - self.x_scale * x,
        }
    }

    /// The same bound with `x_scale = 1`.
    pub fn normalized(&self) -> TailBound {
        if self.x_scale == 1.0 {
            return self.clone();
        }
        TailBound {
            exponent: Exponent::Scaled {
                inner: Box::new(self.exponent.clone()),
                factor: 1.0 / self.x_scale,
            },
            valid_to: self.valid_to * self.x_scale,
            x_scale: 1.0,
            ..self.clone()
        }
    }

    /// The same bound re-expressed against `new_offset`; thresholds below the
    /// original offset get the trivial bound 1.
    pub fn shifted_to(&self, new_offset: f64) -> TailBound {
        let n = self.normalized();
        let shift = match n.tail {
            Tail::Upper => new_offset - n.offset,
            Tail::Lower => n.offset - new_offset,
        };
        if shift == 0.0 {
            return n;
        }
        TailBound {
            exponent: Exponent::Shifted {
                inner: Box::new(n.exponent.clone()),
                shift,
            },
            valid_to: n.valid_to - shift,
            offset: new_offset,
            ..n
        }
    }
}

/// Pointwise best (largest exponent) of bounds sharing one threshold
/// convention.
pub fn combine_bounds(bounds: &[TailBound]) -> Result<TailBound> {
    let first = bounds
        .first()
        .ok_or_else(|| Error::Alignment("nothing to combine".into()))?;
    if bounds.len() == 1 {
        return Ok(first.clone());
    }
    for b in &bounds[1..] {
        let same_offset = (b.offset - first.offset).abs()
            <= 1e-12 * (1.0 + first.offset.abs().max(b.offset.abs()));
        if b.tail != first.tail
            || b.centering != first.centering
            || b.x_scale != first.x_scale
            || !same_offset
        {
            return Err(Error::Alignment(format!(
                "{} ({:?}, offset {}, scale {}) vs {} ({:?}, offset {}, scale {})",
                first.theorem.tag(),
                first.centering,
                first.offset,
                first.x_scale,
                b.theorem.tag(),
                b.centering,
                b.offset,
                b.x_scale
            )));
        }
    }
    Ok(TailBound {
        theorem: Theorem::Combined,
        tail: first.tail,
        centering: first.centering,
        offset: first.offset,
        x_scale: first.x_scale,
        exponent: Exponent::Max(bounds.iter().map(|b| b.exponent.clone()).collect()),
        valid_to: bounds.iter().map(|b| b.valid_to).fold(0.0, f64::max),
        estimate_backed: bounds.iter().any(|b| b.estimate_backed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic() -> TailBound {
        let r = RateFunction::from_fn(|t| 2.0 * t, Some(Arc::new(|t| t * t)), f64::INFINITY)
            .unwrap();
        // h(t) = 2t gives E(x) = x²/4
        TailBound::new(Theorem::Generic, Centering::Mean, 0.0, Exponent::Chernoff(Arc::new(r)))
    }

    #[test]
    fn singleton_combine_is_identity() {
        let b = quadratic();
        let c = combine_bounds(std::slice::from_ref(&b)).unwrap();
        assert_eq!(c.theorem, Theorem::Generic);
        assert_eq!(c.bound(3.0).unwrap(), b.bound(3.0).unwrap());
    }

    #[test]
    fn combine_takes_pointwise_max() {
        let sq = TailBound::new(
            Theorem::Generic,
            Centering::Mean,
            0.0,
            Exponent::Scaled {
                inner: Box::new(quadratic().exponent),
                factor: 2.0,
            },
        );
        // h(t) = 1e-9·t on [0, 1) is exhausted at once: E(x) ≈ x
        let r = RateFunction::from_fn(|t| 1e-9 * t, Some(Arc::new(|t| 0.5e-9 * t * t)), 1.0)
            .unwrap();
        let lin = TailBound::new(
            Theorem::Generic,
            Centering::Mean,
            0.0,
            Exponent::Chernoff(Arc::new(r)),
        );
        let c = combine_bounds(&[sq, lin]).unwrap();
        for x in [0.3, 1.0, 2.5] {
            let e = c.exponent_at(x).unwrap().value;
            assert!((e - f64::max(x * x, x)).abs() < 1e-8, "{x}: {e}");
        }
    }

    #[test]
    fn misaligned_offsets_fail() {
        let a = quadratic();
        let mut b = quadratic();
        b.offset = 1.0;
        assert!(matches!(combine_bounds(&[a, b]), Err(Error::Alignment(_))));
        assert!(matches!(combine_bounds(&[]), Err(Error::Alignment(_))));
    }

    #[test]
    fn shifting_and_normalizing() {
        let mut b = quadratic();
        b.x_scale = 2.0;
        b.offset = 1.0;
        // threshold 1 + 2x; at threshold 5 the deviation is x = 2, E = 1
        let n = b.normalized();
        assert!((n.threshold(4.0, 0.0) - 5.0).abs() < 1e-15);
        assert!((n.exponent_at(4.0).unwrap().value - 1.0).abs() < 1e-9);
        let s = b.shifted_to(3.0);
        assert!((s.threshold(2.0, 0.0) - 5.0).abs() < 1e-15);
        assert!((s.exponent_at(2.0).unwrap().value - 1.0).abs() < 1e-9);
        // below the original offset the bound is trivial
        let low = b.shifted_to(-2.0);
        assert_eq!(low.bound(2.5).unwrap(), 1.0);
    }

    #[test]
    fn lower_tail_threshold() {
        let mut b = quadratic();
        b.tail = Tail::Lower;
        b.offset = -0.5;
        assert_eq!(b.threshold(1.0, 3.0), 1.5);
        let s = b.shifted_to(-1.5);
        assert_eq!(s.threshold(0.0, 3.0), 1.5);
        assert!((s.exponent_at(0.0).unwrap().value - 0.25).abs() < 1e-9);
    }
}
