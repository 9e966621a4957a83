//! Closed-form exponents: Bennett, Bernstein, the exponential-law norm bound,
//! and the two-regime simplification of the Bennett form.

use std::sync::OnceLock;

use crate::error::{domain, Result};
use crate::levy::LevyMeasure1D;

/// Bennett function `(1+u) ln(1+u) − u`.
pub fn ell_bennett(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        // Σ_{n≥2} (−u)^n / (n(n−1))
        let u2 = u * u;
        return u2 * (0.5 - u / 6.0 + u2 / 12.0 - u2 * u / 20.0);
    }
    (1.0 + u) * u.ln_1p() - u
}

/// Bernstein function `(1+u) − √(1+2u)`.
pub fn ell_bernstein(u: f64) -> f64 {
    u * u / ((1.0 + u) + (1.0 + 2.0 * u).sqrt())
}

/// `(ā²/(bR)²) ℓ(bR x/ā²)` with the Bennett `ℓ`.
pub fn bennett_exponent(a_bar_sq: f64, b_r: f64, x: f64) -> f64 {
    a_bar_sq / (b_r * b_r) * ell_bennett(b_r * x / a_bar_sq)
}

pub fn bennett_bound(a_bar_sq: f64, b_r: f64, x: f64) -> f64 {
    (-bennett_exponent(a_bar_sq, b_r, x)).exp()
}

/// `(ã²V²/(b²C²)) ℓ(bCx/(ã²V²))` with the Bernstein `ℓ`.
pub fn bernstein_exponent(a_tilde_sq: f64, b: f64, c: f64, v_sq: f64, x: f64) -> f64 {
    let s = a_tilde_sq * v_sq;
    s / (b * b * c * c) * ell_bernstein(b * c * x / s)
}

pub fn bernstein_bound(a_tilde_sq: f64, b: f64, c: f64, v_sq: f64, x: f64) -> f64 {
    (-bernstein_exponent(a_tilde_sq, b, c, v_sq, x)).exp()
}

/// `c = 16 + 8/ε²` for the norm of iid symmetric exponential coordinates.
pub fn laplace_norm_constant(eps: f64) -> f64 {
    16.0 + 8.0 / (eps * eps)
}

/// `x + (3c/2)(1 − (1 + x/c)^{2/3})`: the exponent of `h(s) = c((1−s)⁻³ − 1)`.
pub fn laplace_norm_exponent_exact(c: f64, x: f64) -> f64 {
    // 1 − (1+y)^{2/3} without cancellation for small y
    let y = x / c;
    let head = -(2.0 / 3.0 * y.ln_1p()).exp_m1();
    x + 1.5 * c * head
}

/// `x² / (6c + 4x)`.
pub fn laplace_norm_exponent_simplified(c: f64, x: f64) -> f64 {
    x * x / (6.0 * c + 4.0 * x)
}

pub fn laplace_norm_bound(eps: f64, x: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok((-laplace_norm_exponent_simplified(laplace_norm_constant(eps), x)).exp())
}

pub fn laplace_norm_bound_exact(eps: f64, x: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok((-laplace_norm_exponent_exact(laplace_norm_constant(eps), x)).exp())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("ε must be positive, got {eps}")));
    }
    Ok(())
}

/// `inf_{u>1} ℓ(u) / (u ln u)` for the Bennett `ℓ`, so that
/// `(V²/R²) ℓ(xR/V²) ≥ C (x/R) ln(xR/V²)` for every `x > 0`.
pub fn two_regime_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let ratio = |s: f64| {
            let u = s.exp();
            ell_bennett(u) / (u * s)
        };
        // unimodal in s = ln u on (0, ∞): golden-section search
        let (mut a, mut b) = (0.05f64, 20.0f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        while b - a > 1e-12 {
            if ratio(c) < ratio(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - g * (b - a);
            d = a + g * (b - a);
        }
        // shave the last digits so the constant stays a lower bound
        ratio(0.5 * (a + b)) * (1.0 - 1e-12)
    })
}

/// `C·(V²/R²)·max(0, u ln u)` with `u = xR/V²`.
pub fn two_regime_exponent(r: f64, v_sq: f64, x: f64) -> f64 {
    let u = x * r / v_sq;
    if u <= 1.0 {
        return 0.0;
    }
    two_regime_constant() * v_sq / (r * r) * u * u.ln()
}

/// Constants `(C, V²)` for the moment condition `∫|u|^n ν̃ ≤ C^{n−2} n!/2 · V²`:
/// `V² = ∫u² ν̃` and the smallest `C` that works for `2 ≤ n ≤ 40`, raised to
/// `1/M` when exponential moments stop at `M` (the condition forces `C ≥ 1/M`).
pub fn bernstein_constants(levy: &LevyMeasure1D) -> Result<(f64, f64)> {
    let v_sq = levy.absolute_moment(2)?;
    if !v_sq.is_finite() {
        return Err(domain("no Bernstein constants: infinite variance"));
    }
    let mut c = 0.0f64;
    let mut ln_fact = 2f64.ln();
    for n in 3..=BERNSTEIN_ORDERS {
        ln_fact += (n as f64).ln();
        let m = levy.absolute_moment(n)?;
        if !m.is_finite() {
            return Err(domain(format!("no Bernstein constants: moment {n} is infinite")));
        }
        // C^{n−2} ≥ 2 m / (n! V²)
        let need = ((2.0 * m / v_sq).ln() - ln_fact) / (n - 2) as f64;
        c = c.max(need.exp());
    }
    let sup = levy.exp_moment_sup(1.0);
    if sup.is_finite() {
        c = c.max(1.0 / sup);
    }
    Ok((c, v_sq))
}

const BERNSTEIN_ORDERS: i32 = 40;

/// Checks `∫|u|^n ν̃ ≤ C^{n−2} n!/2 · V²` for `2 ≤ n ≤ 40` (relative slack `1e-9`).
pub fn check_bernstein_condition(levy: &LevyMeasure1D, c: f64, v_sq: f64) -> Result<()> {
    if !(c > 0.0 && v_sq > 0.0) {
        return Err(domain("Bernstein constants must be positive"));
    }
    let mut ln_fact = 0.0;
    for n in 2..=BERNSTEIN_ORDERS {
        ln_fact += (n as f64).ln();
        let m = levy.absolute_moment(n)?;
        let ln_rhs = (n - 2) as f64 * c.ln() + ln_fact - 2f64.ln() + v_sq.ln();
        if m.ln() > ln_rhs + 1e-9 {
            return Err(domain(format!(
                "moment condition fails at n = {n}: ∫|u|^n = {m} exceeds C^(n-2) n!/2 V² = {}",
                ln_rhs.exp()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bennett_examples() {
        assert!((bennett_bound(1.0, 1.0, 1.0) - 0.679_570_457).abs() < 1e-9);
        assert_eq!(bennett_bound(3.0, 2.0, 0.0), 1.0);
        assert!((ell_bennett(0.5) - 0.108_198).abs() < 1e-6);
        assert!((bennett_bound(4.0, 1.0, 2.0) - (-4.0 * ell_bennett(0.5)).exp()).abs() < 1e-15);
        assert!((bennett_bound(4.0, 1.0, 2.0) - 0.6487).abs() < 1e-4);
    }

    #[test]
    fn bernstein_examples() {
        assert!((bernstein_bound(1.0, 1.0, 1.0, 1.0, 4.0) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(bernstein_bound(2.0, 1.0, 3.0, 1.0, 0.0), 1.0);
        assert!((bernstein_bound(1.0, 1.0, 1.0, 1.0, 12.0) - (-8f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn laplace_examples() {
        assert_eq!(laplace_norm_bound(1.0, 0.0).unwrap(), 1.0);
        assert!((laplace_norm_bound(1.0, 12.0).unwrap() - (-0.75f64).exp()).abs() < 1e-15);
        let e = laplace_norm_exponent_exact(24.0, 24.0);
        assert!((e - (24.0 + 36.0 * (1.0 - 2f64.powf(2.0 / 3.0)))).abs() < 1e-12);
        assert!(laplace_norm_bound(0.0, 1.0).is_err());
    }

    #[test]
    fn ell_series_matches_direct_form() {
        for u in [1e-4f64, 5e-4, 9.9e-4, -5e-4] {
            let direct = (1.0 + u) * u.ln_1p() - u;
            assert!((ell_bennett(u) - direct).abs() < 1e-16 + 1e-9 * direct.abs());
        }
    }

    #[test]
    fn two_regime_constant_is_a_lower_bound() {
        let c = two_regime_constant();
        assert!(c > 0.6 && c < 1.0, "{c}");
        for i in 1..2000 {
            let u = 1.0 + i as f64 * 0.05;
            assert!(ell_bennett(u) >= c * u * u.ln());
        }
        // Bennett dominates the two-regime form pointwise
        for x in [0.1, 1.0, 5.0, 50.0] {
            assert!(two_regime_exponent(0.25, 1.8, x) <= 1.8 / 0.0625 * ell_bennett(x * 0.25 / 1.8));
        }
    }

    #[test]
    fn bernstein_constants_for_builtins() {
        let (c, v) = bernstein_constants(&LevyMeasure1D::poisson(1.0).unwrap()).unwrap();
        assert_eq!(v, 1.0);
        // n = 3: 1 ≤ C·3 ⇒ C ≥ 1/3
        assert!((c - 1.0 / 3.0).abs() < 1e-12, "{c}");
        check_bernstein_condition(&LevyMeasure1D::poisson(1.0).unwrap(), c, v).unwrap();
        let laplace = LevyMeasure1D::laplace();
        let (c, v) = bernstein_constants(&laplace).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
        assert!((c - 1.0).abs() < 1e-8, "{c}");
        check_bernstein_condition(&laplace, c, v).unwrap();
        assert!(check_bernstein_condition(&laplace, 0.5, 2.0).is_err());
    }
}
