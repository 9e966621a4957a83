//! One-dimensional quadrature: adaptive Gauss–Kronrod (7/15) with interval
//! halving, a doubling driver for half-infinite ranges, and Gauss–Legendre
//! rules for fixed-order integration over `[0, 1]`.

use crate::error::{Error, Result};

pub const ABS_TOL: f64 = 1e-12;
pub const REL_TOL: f64 = 1e-9;

/// Number of interval halvings allowed before giving up.
const MAX_SUBDIVISIONS: usize = 4000;

/// Right end of the doubling sequence for half-infinite integrals.
const MAX_TRUNCATION: f64 = 1.8e19;

/// Relative size below which the integrand is treated as negligible.
const TRUNCATION_RATIO: f64 = 1e-16;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (7-point rule).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: ABS_TOL,
            rel: REL_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite bounds [{a}, {b}]")));
    }
    let mut segments = vec![kronrod15(&mut f, a, b)];
    loop {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature(format!(
                "integrand not finite on [{a}, {b}]"
            )));
        }
        if error <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if segments.len() >= MAX_SUBDIVISIONS {
            return Err(Error::Quadrature(format!(
                "estimated error {error:e} on [{a}, {b}] after {MAX_SUBDIVISIONS} subdivisions"
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let s = segments.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            return Err(Error::Quadrature(format!(
                "interval [{}, {}] cannot be halved further",
                s.a, s.b
            )));
        }
        segments.push(kronrod15(&mut f, s.a, mid));
        segments.push(kronrod15(&mut f, mid, s.b));
    }
}

/// Integral of `f` over `[a, ∞)`, `a ≥ 0`, truncated once the integrand has
/// dropped below `1e-16` of the running total. The range is explored by
/// doubling: `[a, 1]` (when `a < 1`), then `[L, 2L]` pieces.
pub fn integrate_to_infinity(mut f: impl FnMut(f64) -> f64, a: f64, tol: Tolerance) -> Result<f64> {
    let mut total = 0.0;
    let mut left = a;
    let mut right = if a < 1.0 { 1.0 } else { 2.0 * a };
    loop {
        let piece = integrate(&mut f, left, right, tol)?;
        total += piece;
        let edge = f(right).abs();
        let settled = if total == 0.0 {
            edge == 0.0 && piece == 0.0
        } else {
            edge <= TRUNCATION_RATIO * total.abs() && piece.abs() <= 1e-6 * total.abs()
        };
        if settled {
            return Ok(total);
        }
        if right >= MAX_TRUNCATION {
            return Err(Error::Quadrature(format!(
                "integrand has not decayed by u = {right:e}"
            )));
        }
        left = right;
        right *= 2.0;
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(order: usize) -> Vec<(f64, f64)> {
    let n = order;
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            derivative = dp;
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                let (_, dp) = legendre(n, x);
                derivative = dp;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, Tolerance::default()).unwrap();
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, Tolerance::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn half_line_exponential() {
        let v = integrate_to_infinity(|x| (-x).exp(), 0.0, Tolerance::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate_to_infinity(|x| x * x * (-0.5 * x).exp(), 0.0, Tolerance::default())
            .unwrap();
        assert!((v - 16.0).abs() < 1e-9 * 16.0);
    }

    #[test]
    fn non_decaying_integrand_fails() {
        assert!(integrate_to_infinity(|_| 1.0, 0.0, Tolerance::default()).is_err());
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for order in [2, 5, 8, 16] {
            let rule = gauss_legendre_unit(order);
            let w: f64 = rule.iter().map(|p| p.1).sum();
            assert!((w - 1.0).abs() < 1e-14);
            // exact for degree 2n-1
            let deg = 2 * order - 1;
            let v: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "order {order}");
        }
    }
}
