//! Rate functions `h` on `[0, M)`, their antiderivatives `H`, and the
//! Chernoff exponent `E(x) = sup_{0<t<M} (t x − H(t)) = ∫₀ˣ h⁻¹(s) ds`.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::levy::LevyMeasure1D;
use crate::quad::{self, Tolerance};

use super::Theorem;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Absolute tolerance of the bisection for `h(t*) = x`.
pub const INVERSION_TOL: f64 = 1e-12;

/// Expression tree for `h(t)`.
#[derive(Clone)]
pub enum RateExpr {
    /// `weight · ∫ |u|^p (e^{t b |u|} − 1) ν̃(du)`.
    Kernel {
        weight: f64,
        levy: LevyMeasure1D,
        p: i32,
        b: f64,
    },
    Sum(Vec<RateExpr>),
    Max(Vec<RateExpr>),
    /// `√(Σ_i e_i(t)²)`.
    Euclid(Vec<RateExpr>),
    Scaled(f64, Box<RateExpr>),
    /// A closed-form `h` on `[0, sup)` with optional antiderivative.
    Explicit {
        h: ScalarFn,
        antiderivative: Option<ScalarFn>,
        sup: f64,
    },
}

impl fmt::Debug for RateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateExpr::Kernel { weight, levy, p, b } => {
                write!(f, "{weight}·K[{levy}; p={p}, b={b}]")
            }
            RateExpr::Sum(v) => f.debug_tuple("Sum").field(v).finish(),
            RateExpr::Max(v) => f.debug_tuple("Max").field(v).finish(),
            RateExpr::Euclid(v) => f.debug_tuple("Euclid").field(v).finish(),
            RateExpr::Scaled(s, e) => write!(f, "{s}·{e:?}"),
            RateExpr::Explicit { sup, .. } => write!(f, "Explicit(sup = {sup})"),
        }
    }
}

impl RateExpr {
    pub fn kernel(levy: &LevyMeasure1D, p: i32, b: f64) -> Self {
        RateExpr::Kernel {
            weight: 1.0,
            levy: levy.clone(),
            p,
            b,
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        RateExpr::Scaled(s, Box::new(self))
    }

    /// Supremum of the domain of `h`.
    pub fn sup(&self) -> f64 {
        match self {
            RateExpr::Kernel { levy, b, .. } => levy.exp_moment_sup(*b),
            RateExpr::Sum(v) | RateExpr::Max(v) | RateExpr::Euclid(v) => {
                v.iter().map(RateExpr::sup).fold(f64::INFINITY, f64::min)
            }
            RateExpr::Scaled(_, e) => e.sup(),
            RateExpr::Explicit { sup, .. } => *sup,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            RateExpr::Kernel { weight, levy, p, b } => {
                Ok(weight * levy.integrate_exp_kernel(*p, t, *b)?)
            }
            RateExpr::Sum(v) => v.iter().map(|e| e.eval(t)).sum(),
            RateExpr::Max(v) => v
                .iter()
                .map(|e| e.eval(t))
                .try_fold(0.0f64, |m, x| x.map(|x| m.max(x))),
            RateExpr::Euclid(v) => v
                .iter()
                .map(|e| e.eval(t).map(|x| x * x))
                .sum::<Result<f64>>()
                .map(f64::sqrt),
            RateExpr::Scaled(s, e) => Ok(s * e.eval(t)?),
            RateExpr::Explicit { h, sup, .. } => {
                if t >= *sup {
                    return Err(domain(format!("t = {t} outside [0, {sup})")));
                }
                Ok(h(t))
            }
        }
    }

    /// `∫₀ᵗ h` in closed form when every leaf allows it.
    pub fn antiderivative(&self, t: f64) -> Option<Result<f64>> {
        match self {
            RateExpr::Kernel { weight, levy, p, b } => {
                Some(levy.kernel_antiderivative(*p, t, *b).map(|v| weight * v))
            }
            RateExpr::Sum(v) => {
                let mut total = 0.0;
                for e in v {
                    match e.antiderivative(t)? {
                        Ok(x) => total += x,
                        Err(err) => return Some(Err(err)),
                    }
                }
                Some(Ok(total))
            }
            RateExpr::Max(v) | RateExpr::Euclid(v) if v.len() == 1 => v[0].antiderivative(t),
            RateExpr::Max(_) | RateExpr::Euclid(_) => None,
            RateExpr::Scaled(s, e) => e.antiderivative(t).map(|r| r.map(|x| s * x)),
            RateExpr::Explicit { antiderivative, .. } => antiderivative.as_ref().map(|a| Ok(a(t))),
        }
    }
}

/// A rate function `h` with its domain `[0, M)` and limit `h(M⁻)`.
#[derive(Clone)]
pub struct RateFunction {
    expr: RateExpr,
    sup: f64,
    /// Largest `t` at which `h` is evaluated when `M` is finite.
    edge: f64,
    h_limit: f64,
    theorem: Theorem,
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateFunction")
            .field("theorem", &self.theorem)
            .field("sup", &self.sup)
            .field("h_limit", &self.h_limit)
            .field("expr", &self.expr)
            .finish()
    }
}

/// Value of a Chernoff exponent; `beyond` marks the flat extension past
/// `h(M⁻)`, where the supremum sits at the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentValue {
    pub value: f64,
    pub beyond: bool,
}

impl RateFunction {
    pub fn new(expr: RateExpr, theorem: Theorem) -> Result<Self> {
        let sup = expr.sup();
        if !(sup > 0.0) {
            return Err(domain("rate function has an empty domain (M = 0)"));
        }
        let (edge, h_limit) = if sup.is_infinite() {
            (f64::INFINITY, f64::INFINITY)
        } else {
            let mut found = None;
            for back_off in [1e-12, 1e-10, 1e-8, 1e-6, 1e-4] {
                let t = sup * (1.0 - back_off);
                if let Ok(v) = expr.eval(t) {
                    if v.is_finite() {
                        found = Some((t, v));
                        break;
                    }
                }
            }
            found.ok_or_else(|| {
                Error::Quadrature(format!("rate function cannot be evaluated near M = {sup}"))
            })?
        };
        let r = RateFunction {
            expr,
            sup,
            edge,
            h_limit,
            theorem,
        };
        if !(r.h(r.probe())? > 0.0) {
            return Err(domain("rate function vanishes identically"));
        }
        Ok(r)
    }

    /// Closed-form `h` on `[0, sup)`.
    pub fn from_fn(
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        antiderivative: Option<ScalarFn>,
        sup: f64,
    ) -> Result<Self> {
        RateFunction::new(
            RateExpr::Explicit {
                h: Arc::new(h),
                antiderivative,
                sup,
            },
            Theorem::Generic,
        )
    }

    fn probe(&self) -> f64 {
        if self.sup.is_finite() {
            0.5 * self.edge
        } else {
            1.0
        }
    }

    pub fn expr(&self) -> &RateExpr {
        &self.expr
    }

    pub fn theorem(&self) -> Theorem {
        self.theorem
    }

    /// `M`.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// `lim_{t→M⁻} h(t)`.
    pub fn h_limit(&self) -> f64 {
        self.h_limit
    }

    pub fn h(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("rate function evaluated at t = {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        self.expr.eval(t)
    }

    /// `H(t) = ∫₀ᵗ h(s) ds`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        if let Some(v) = self.expr.antiderivative(t) {
            return v;
        }
        let failure = RefCell::new(None);
        let v = quad::integrate(
            |s| match self.h(s) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            t,
            Tolerance::default(),
        );
        match failure.into_inner() {
            Some(e) => Err(e),
            None => v,
        }
    }

    /// `t` with `h(t) = x`, or `None` when `x ≥ h(M⁻)`.
    pub fn inverse(&self, x: f64) -> Result<Option<f64>> {
        if x <= 0.0 {
            return Ok(Some(0.0));
        }
        if x >= self.h_limit {
            return Ok(None);
        }
        let mut lo = 0.0;
        let mut hi = self.sup.min(2.0) * 0.5;
        let mut steps = 0;
        while self.h(hi)? < x {
            lo = hi;
            hi = if self.sup.is_infinite() {
                2.0 * hi
            } else {
                0.5 * (hi + self.edge)
            };
            steps += 1;
            if steps > 2000 || !hi.is_finite() {
                return Ok(None);
            }
        }
        while hi - lo > INVERSION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.h(mid)? < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }
}

/// `E(x) = sup_{0<t<M} (t x − H(t))`, computed as `t* x − H(t*)` with
/// `h(t*) = x`; past `h(M⁻)` the supremum is taken at the boundary.
pub fn chernoff_exponent(r: &RateFunction, x: f64) -> Result<ExponentValue> {
    if !(x >= 0.0) {
        return Err(domain(format!("deviation must be ≥ 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(ExponentValue {
            value: 0.0,
            beyond: false,
        });
    }
    match r.inverse(x)? {
        Some(t) => Ok(ExponentValue {
            value: (t * x - r.integral(t)?).max(0.0),
            beyond: false,
        }),
        None if r.sup.is_finite() => Ok(ExponentValue {
            value: (r.edge * x - r.integral(r.edge)?).max(0.0),
            beyond: true,
        }),
        None => Err(domain(format!(
            "x = {x} is beyond h(M⁻) = {} with M = ∞",
            r.h_limit
        ))),
    }
}
