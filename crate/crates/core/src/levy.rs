//! One-dimensional Lévy measures and the exponential-kernel integrals that
//! every rate function is assembled from.
//!
//! A measure is either a finite list of atoms or a density on an interval.
//! Densities are supplied through their natural logarithm so that the
//! products `|u|^p (e^{t b |u|} - 1) ρ(u)` can be formed in log space far out
//! in the tail, where the factors separately overflow and underflow.
//!
//! All integrands used by the crate depend on `u` only through `|u|` (or
//! through `sign(u)·|u|` for the large-jump mean), so integration always runs
//! over `r = |u| ∈ (lo, hi]` on both half-lines.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Result};
use crate::quad::{self, Tolerance};

/// Slope threshold used when deciding whether `e^{t b |u|} ρ(u)` still decays.
const TAIL_SLOPE_TOL: f64 = 1e-9;
/// Bisection tolerance on `t` for the exponential-moment supremum.
const EXP_MOMENT_TOL: f64 = 1e-9;
/// Probe points `2^40`, `2^41` for the asymptotic log-slope of the tail.
const PROBE_NEAR: f64 = 1_099_511_627_776.0;
const PROBE_FAR: f64 = 2_199_023_255_552.0;

/// A point mass of the Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// Families the samplers and moment routines recognise.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityFamily {
    /// `|u|⁻¹ e^{-|u|}`, the Lévy measure of the symmetric exponential law.
    Laplace,
    General(String),
}

pub type LogDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Lévy density on `(lo, hi)`, given by `ln ρ`.
#[derive(Clone)]
pub struct DensityMeasure {
    ln_density: LogDensity,
    lo: f64,
    hi: f64,
    family: DensityFamily,
}

impl fmt::Debug for DensityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMeasure")
            .field("support", &(self.lo, self.hi))
            .field("family", &self.family)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum LevyKind {
    Atomic(Vec<Atom>),
    Density(DensityMeasure),
}

/// A one-dimensional Lévy measure ν̃ (no atom at the origin).
#[derive(Debug, Clone)]
pub struct LevyMeasure1D {
    kind: LevyKind,
    support_radius: f64,
}

/// Functions of `r = |u|` integrated against the measure.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Integrand {
    /// `r^p (e^{rate·r} - 1)`
    ExpKernel { p: i32, rate: f64 },
    /// `r^{p-1} (e^{rate·r} - 1 - rate·r) / rate`
    ExpKernelPrimitive { p: i32, rate: f64 },
    /// `r^n`
    Power { n: i32 },
}

impl Integrand {
    fn value(&self, r: f64) -> f64 {
        match *self {
            Integrand::ExpKernel { p, rate } => r.powi(p) * (rate * r).exp_m1(),
            Integrand::ExpKernelPrimitive { p, rate } => {
                if rate == 0.0 {
                    return 0.0;
                }
                r.powi(p - 1) * exp_m1_minus_x(rate * r) / rate
            }
            Integrand::Power { n } => r.powi(n),
        }
    }

    fn ln_value(&self, r: f64) -> f64 {
        match *self {
            Integrand::ExpKernel { p, rate } => p as f64 * r.ln() + ln_exp_m1(rate * r),
            Integrand::ExpKernelPrimitive { p, rate } => {
                if rate == 0.0 {
                    return f64::NEG_INFINITY;
                }
                (p - 1) as f64 * r.ln() + ln_exp_m1_minus_x(rate * r) - rate.ln()
            }
            Integrand::Power { n } => n as f64 * r.ln(),
        }
    }
}

fn exp_m1_minus_x(y: f64) -> f64 {
    if y.abs() < 1e-3 {
        // y²/2 + y³/6 + y⁴/24 + y⁵/120
        let y2 = y * y;
        y2 * (0.5 + y * (1.0 / 6.0 + y * (1.0 / 24.0 + y / 120.0)))
    } else {
        y.exp_m1() - y
    }
}

fn ln_exp_m1(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

fn ln_exp_m1_minus_x(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(1.0 + y) * (-y).exp()).ln_1p()
    } else {
        exp_m1_minus_x(y).ln()
    }
}

impl LevyMeasure1D {
    /// Finite atomic measure. Rejects atoms at 0, nonpositive or non-finite
    /// masses, and the empty list.
    pub fn atomic(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(domain("atomic Lévy measure needs at least one atom"));
        }
        for a in &atoms {
            if a.position == 0.0 || !a.position.is_finite() {
                return Err(domain(format!("invalid atom position {}", a.position)));
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(domain(format!(
                    "atom at {} has nonpositive mass {}",
                    a.position, a.mass
                )));
            }
        }
        let support_radius = atoms.iter().map(|a| a.position.abs()).fold(0.0, f64::max);
        Ok(LevyMeasure1D {
            kind: LevyKind::Atomic(atoms),
            support_radius,
        })
    }

    /// Convenience for `atomic(vec![(position, mass)...])`.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::atomic(
            atoms
                .iter()
                .map(|&(position, mass)| Atom { position, mass })
                .collect(),
        )
    }

    /// Lévy measure of Poisson(λ): one atom at 1 with mass λ.
    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::from_atoms(&[(1.0, lambda)])
    }

    /// `|u|⁻¹ e^{-|u|}` on ℝ∖{0}.
    pub fn laplace() -> Self {
        let density = DensityMeasure {
            ln_density: Arc::new(|u: f64| {
                let r = u.abs();
                -r - r.ln()
            }),
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            family: DensityFamily::Laplace,
        };
        LevyMeasure1D {
            kind: LevyKind::Density(density),
            support_radius: f64::INFINITY,
        }
    }

    /// General density on `(lo, hi)` given by its logarithm. Checks
    /// `∫ (1 ∧ u²) ν̃(du) < ∞` by quadrature.
    pub fn density(
        name: impl Into<String>,
        ln_density: LogDensity,
        lo: f64,
        hi: f64,
    ) -> Result<Self> {
        if !(lo < hi) || lo > 0.0 || hi < 0.0 {
            return Err(domain(format!(
                "density support ({lo}, {hi}) must be an interval around 0"
            )));
        }
        let measure = LevyMeasure1D {
            kind: LevyKind::Density(DensityMeasure {
                ln_density,
                lo,
                hi,
                family: DensityFamily::General(name.into()),
            }),
            support_radius: lo.abs().max(hi.abs()),
        };
        let small = measure.integrate(Integrand::Power { n: 2 }, 0.0, 1.0, false);
        let large = measure.integrate(Integrand::Power { n: 0 }, 1.0, f64::INFINITY, false);
        match (small, large) {
            (Ok(s), Ok(l)) if s.is_finite() && l.is_finite() => Ok(measure),
            _ => Err(domain("density fails ∫(1 ∧ u²) ν̃(du) < ∞")),
        }
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    /// `inf{ρ > 0 : ν̃(|u| > ρ) = 0}`; `∞` for unbounded support.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn atoms(&self) -> Option<&[Atom]> {
        match &self.kind {
            LevyKind::Atomic(atoms) => Some(atoms),
            LevyKind::Density(_) => None,
        }
    }

    pub fn is_laplace(&self) -> bool {
        matches!(&self.kind, LevyKind::Density(d) if d.family == DensityFamily::Laplace)
    }

    /// True when the measure charges only `(0, ∞)`.
    pub fn is_nonnegative(&self) -> bool {
        match &self.kind {
            LevyKind::Atomic(atoms) => atoms.iter().all(|a| a.position > 0.0),
            LevyKind::Density(d) => d.lo >= 0.0,
        }
    }

    /// Total mass; `∞` for densities (treated as infinite activity).
    pub fn total_mass(&self) -> f64 {
        match &self.kind {
            LevyKind::Atomic(atoms) => atoms.iter().map(|a| a.mass).sum(),
            LevyKind::Density(_) => f64::INFINITY,
        }
    }

    /// `∫ |u|^p (e^{t b |u|} - 1) ν̃(du)`.
    pub fn integrate_exp_kernel(&self, p: i32, t: f64, b: f64) -> Result<f64> {
        check_kernel_args(p, t, b)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        self.check_exp_domain(t, b)?;
        let rate = t * b;
        self.integrate(Integrand::ExpKernel { p, rate }, 0.0, f64::INFINITY, false)
    }

    /// `∫₀ᵗ ∫ |u|^p (e^{s b |u|} - 1) ν̃(du) ds
    ///   = ∫ |u|^{p-1} (e^{t b |u|} - 1 - t b |u|) / b  ν̃(du)`.
    pub fn kernel_antiderivative(&self, p: i32, t: f64, b: f64) -> Result<f64> {
        check_kernel_args(p, t, b)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        self.check_exp_domain(t, b)?;
        let rate = t * b;
        // Integrand::ExpKernelPrimitive divides by `rate`; the antiderivative
        // divides by `b`, hence the factor `t`.
        let v = self.integrate(
            Integrand::ExpKernelPrimitive { p, rate },
            0.0,
            f64::INFINITY,
            false,
        )?;
        Ok(v * t)
    }

    /// `∫ |u|^n ν̃(du)`, `+∞` when the tail is too heavy.
    pub fn absolute_moment(&self, n: i32) -> Result<f64> {
        if n < 1 {
            return Err(domain(format!("moment order must be ≥ 1, got {n}")));
        }
        if let LevyKind::Density(d) = &self.kind {
            if self.exp_moment_sup(1.0) == 0.0 && d.polynomial_tail_diverges(n) {
                return Ok(f64::INFINITY);
            }
        }
        self.integrate(Integrand::Power { n }, 0.0, f64::INFINITY, false)
    }

    /// `∫_{|u| ≤ radius} |u|^n ν̃(du)`.
    pub fn truncated_moment(&self, n: i32, radius: f64) -> Result<f64> {
        if n < 1 {
            return Err(domain(format!("moment order must be ≥ 1, got {n}")));
        }
        self.integrate(Integrand::Power { n }, 0.0, radius, false)
    }

    /// `∫_{|u| > 1} u ν̃(du)` (signed).
    pub fn large_jump_mean(&self) -> Result<f64> {
        if let LevyKind::Density(d) = &self.kind {
            if self.exp_moment_sup(1.0) == 0.0 && d.polynomial_tail_diverges(1) {
                return Err(domain("first moment of large jumps is infinite"));
            }
        }
        self.integrate(Integrand::Power { n: 1 }, 1.0, f64::INFINITY, true)
    }

    /// `∫_{|u| ≤ 1} u ν̃(du)` (signed); the compensator of small jumps.
    pub fn small_jump_mean(&self) -> Result<f64> {
        self.integrate(Integrand::Power { n: 1 }, 0.0, 1.0, true)
    }

    /// `sup{t > 0 : ∫_{|u|>1} e^{t b |u|} ν̃(du) < ∞}`.
    pub fn exp_moment_sup(&self, b: f64) -> f64 {
        match &self.kind {
            LevyKind::Atomic(_) => f64::INFINITY,
            LevyKind::Density(d) => {
                if self.support_radius.is_finite() {
                    return f64::INFINITY;
                }
                d.exp_moment_sup(b)
            }
        }
    }

    fn check_exp_domain(&self, t: f64, b: f64) -> Result<()> {
        let sup = self.exp_moment_sup(b);
        if t >= sup {
            return Err(domain(format!(
                "t·b = {} is outside the exponential-moment domain (sup t = {sup})",
                t * b
            )));
        }
        Ok(())
    }

    /// `∫_{lo < |u| ≤ hi} sign(u)^{signed} g(|u|) ν̃(du)`.
    pub(crate) fn integrate(
        &self,
        g: Integrand,
        lo: f64,
        hi: f64,
        signed: bool,
    ) -> Result<f64> {
        match &self.kind {
            LevyKind::Atomic(atoms) => Ok(atoms
                .iter()
                .filter(|a| a.position.abs() > lo && a.position.abs() <= hi)
                .map(|a| {
                    let s = if signed { a.position.signum() } else { 1.0 };
                    s * a.mass * g.value(a.position.abs())
                })
                .sum()),
            LevyKind::Density(d) => {
                let plus = d.integrate_side(g, lo, hi, 1.0)?;
                let minus = d.integrate_side(g, lo, hi, -1.0)?;
                Ok(if signed { plus - minus } else { plus + minus })
            }
        }
    }
}

fn check_kernel_args(p: i32, t: f64, b: f64) -> Result<()> {
    if !(1..=4).contains(&p) {
        return Err(domain(format!("kernel power p must be in 1..=4, got {p}")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(domain(format!("t must be finite and ≥ 0, got {t}")));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(domain(format!("b must be finite and > 0, got {b}")));
    }
    Ok(())
}

impl DensityMeasure {
    fn ln_rho(&self, u: f64) -> f64 {
        if u <= self.lo || u >= self.hi || u == 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.ln_density)(u)
    }

    fn integrate_side(&self, g: Integrand, lo: f64, hi: f64, side: f64) -> Result<f64> {
        let edge = if side > 0.0 { self.hi } else { -self.lo };
        let upper = hi.min(edge);
        if upper <= lo {
            return Ok(0.0);
        }
        let integrand = |r: f64| {
            let ln = g.ln_value(r) + self.ln_rho(side * r);
            if ln == f64::NEG_INFINITY {
                0.0
            } else {
                ln.exp()
            }
        };
        let tol = Tolerance::default();
        if upper.is_finite() {
            quad::integrate(integrand, lo, upper, tol)
        } else {
            quad::integrate_to_infinity(integrand, lo, tol)
        }
    }

    /// Asymptotic slope of `ln ρ(±r) + rate·r` in `r` on each unbounded side;
    /// `None` when the density has vanished by the probe points.
    fn tail_slopes(&self, rate: f64) -> impl Iterator<Item = f64> + '_ {
        let sides = [(1.0, self.hi.is_infinite()), (-1.0, self.lo.is_infinite())];
        sides.into_iter().filter_map(move |(side, unbounded)| {
            if !unbounded {
                return None;
            }
            let near = self.ln_rho(side * PROBE_NEAR);
            let far = self.ln_rho(side * PROBE_FAR);
            if !near.is_finite() || !far.is_finite() {
                return None;
            }
            Some((far - near) / (PROBE_FAR - PROBE_NEAR) + rate)
        })
    }

    fn exp_moment_diverges(&self, rate: f64) -> bool {
        self.tail_slopes(rate).any(|s| s > -TAIL_SLOPE_TOL)
    }

    fn exp_moment_sup(&self, b: f64) -> f64 {
        if self.exp_moment_diverges(0.0) {
            return 0.0;
        }
        let mut hi = 1.0;
        while !self.exp_moment_diverges(hi * b) {
            hi *= 2.0;
            if hi > 1e18 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        while hi - lo > EXP_MOMENT_TOL {
            let mid = 0.5 * (lo + hi);
            if self.exp_moment_diverges(mid * b) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// `∫_{|u|>1} |u|^n ρ` diverges when `r^{n+1} ρ(r)` does not decay
    /// polynomially faster than `r^0` (log-log slope ≥ 0).
    fn polynomial_tail_diverges(&self, n: i32) -> bool {
        let sides = [(1.0, self.hi.is_infinite()), (-1.0, self.lo.is_infinite())];
        sides.into_iter().any(|(side, unbounded)| {
            if !unbounded {
                return false;
            }
            let near = self.ln_rho(side * PROBE_NEAR) + (n + 1) as f64 * PROBE_NEAR.ln();
            let far = self.ln_rho(side * PROBE_FAR) + (n + 1) as f64 * PROBE_FAR.ln();
            if !near.is_finite() || !far.is_finite() {
                return false;
            }
            (far - near) / std::f64::consts::LN_2 > -1e-6
        })
    }
}

impl PartialEq for LevyMeasure1D {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (LevyKind::Atomic(a), LevyKind::Atomic(b)) => a == b,
            (LevyKind::Density(a), LevyKind::Density(b)) => match (&a.family, &b.family) {
                (DensityFamily::Laplace, DensityFamily::Laplace) => true,
                (DensityFamily::General(_), DensityFamily::General(_)) => {
                    Arc::ptr_eq(&a.ln_density, &b.ln_density) && a.lo == b.lo && a.hi == b.hi
                }
                _ => false,
            },
            _ => false,
        }
    }
}

impl fmt::Display for LevyMeasure1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LevyKind::Atomic(atoms) => {
                write!(f, "atomic{{")?;
                for (i, a) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({}, {})", a.position, a.mass)?;
                }
                write!(f, "}}")
            }
            LevyKind::Density(d) => match &d.family {
                DensityFamily::Laplace => write!(f, "laplace"),
                DensityFamily::General(name) => write!(f, "density:{name}"),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn unit_poisson() -> LevyMeasure1D {
        LevyMeasure1D::poisson(1.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn exp_kernel_examples() {
        let v = unit_poisson()
            .integrate_exp_kernel(1, std::f64::consts::LN_2, 1.0)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(unit_poisson().integrate_exp_kernel(2, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(LevyMeasure1D::laplace().integrate_exp_kernel(2, 0.0, 1.0).unwrap(), 0.0);
        let v = LevyMeasure1D::laplace().integrate_exp_kernel(1, 0.5, 1.0).unwrap();
        assert!(rel(v, 2.0) < 1e-9, "{v}");
    }

    #[test]
    fn laplace_kernel_matches_closed_form() {
        let m = LevyMeasure1D::laplace();
        for i in 1..=9 {
            let t = i as f64 / 10.0;
            let v = m.integrate_exp_kernel(1, t, 1.0).unwrap();
            assert!(rel(v, 2.0 * t / (1.0 - t)) <= 1e-8, "t={t}: {v}");
        }
    }

    #[test]
    fn laplace_moments() {
        let m = LevyMeasure1D::laplace();
        let mut fact = 1.0;
        for n in 1..=6 {
            if n > 1 {
                fact *= (n - 1) as f64;
            }
            let v = m.absolute_moment(n).unwrap();
            assert!(rel(v, 2.0 * fact) <= 1e-8, "n={n}: {v}");
        }
    }

    #[test]
    fn atomic_moments() {
        assert_eq!(unit_poisson().absolute_moment(2).unwrap(), 1.0);
        let m = LevyMeasure1D::from_atoms(&[(2.0, 0.5)]).unwrap();
        assert_eq!(m.absolute_moment(3).unwrap(), 4.0);
    }

    #[test]
    fn exp_moment_sup_examples() {
        assert_eq!(unit_poisson().exp_moment_sup(1.0), f64::INFINITY);
        let m = LevyMeasure1D::laplace();
        assert!((m.exp_moment_sup(1.0) - 1.0).abs() < 1e-8);
        assert!((m.exp_moment_sup(2.0) - 0.5).abs() < 1e-8);
        assert!(m.exp_moment_sup(1.0) <= 1.0);
    }

    #[test]
    fn kernel_outside_domain_is_error() {
        let m = LevyMeasure1D::laplace();
        assert!(matches!(
            m.integrate_exp_kernel(1, 1.0, 1.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            m.integrate_exp_kernel(1, 0.3, 4.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rejects_invalid_atoms_and_kernels() {
        assert!(LevyMeasure1D::from_atoms(&[(1.0, 0.0)]).is_err());
        assert!(LevyMeasure1D::from_atoms(&[(0.0, 1.0)]).is_err());
        assert!(LevyMeasure1D::from_atoms(&[]).is_err());
        assert!(unit_poisson().integrate_exp_kernel(0, 1.0, 1.0).is_err());
        assert!(unit_poisson().integrate_exp_kernel(5, 1.0, 1.0).is_err());
    }

    #[test]
    fn support_radius() {
        let m = LevyMeasure1D::from_atoms(&[(-3.0, 1.0), (0.5, 2.0)]).unwrap();
        assert_eq!(m.support_radius(), 3.0);
        assert_eq!(m.truncated_moment(2, 1.0).unwrap(), 0.5);
        assert_eq!(LevyMeasure1D::laplace().support_radius(), f64::INFINITY);
    }

    #[test]
    fn antiderivative_matches_kernel_integral() {
        let m = LevyMeasure1D::laplace();
        let t = 0.6;
        let direct = quad::integrate(
            |s| m.integrate_exp_kernel(3, s, 1.0).unwrap(),
            0.0,
            t,
            Tolerance::default(),
        )
        .unwrap();
        let closed = m.kernel_antiderivative(3, t, 1.0).unwrap();
        assert!(rel(closed, direct) < 1e-8, "{closed} vs {direct}");
        let a = LevyMeasure1D::from_atoms(&[(2.0, 0.5), (-1.0, 1.5)]).unwrap();
        let direct = quad::integrate(
            |s| a.integrate_exp_kernel(2, s, 0.7).unwrap(),
            0.0,
            1.3,
            Tolerance::default(),
        )
        .unwrap();
        let closed = a.kernel_antiderivative(2, 1.3, 0.7).unwrap();
        assert!(rel(closed, direct) < 1e-10);
    }

    #[test]
    fn heavy_tail_density() {
        // ν̃(du) = |u|^{-2.5}: ∫ (1∧u²) finite, no exponential moments,
        // ∫|u|^2 infinite above 1.
        let m = LevyMeasure1D::density(
            "pareto",
            Arc::new(|u: f64| -2.5 * u.abs().ln()),
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .unwrap();
        assert_eq!(m.exp_moment_sup(1.0), 0.0);
        assert_eq!(m.absolute_moment(2).unwrap(), f64::INFINITY);
        let small = m.truncated_moment(2, 1.0).unwrap();
        assert!((small - 4.0).abs() < 1e-6, "{small}");
        // |u|^{-3.5} is not a Lévy measure (∫_{|u|<1} u² diverges)
        assert!(LevyMeasure1D::density(
            "bad",
            Arc::new(|u: f64| -3.5 * u.abs().ln()),
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .is_err());
    }

    #[test]
    fn symmetric_density_has_zero_large_jump_mean() {
        assert_eq!(LevyMeasure1D::laplace().large_jump_mean().unwrap(), 0.0);
    }
}
