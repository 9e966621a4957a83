//! Small statistical helpers: sample means, exact binomial confidence limits
//! and the two-sample Kolmogorov–Smirnov test.

use statrs::function::beta::beta_reg;

use crate::error::{domain, Result};

/// Sample mean and its standard error `s/√n`.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-sided Clopper–Pearson upper limit: the `p` with
/// `P(Bin(n, p) ≤ k) = δ`.
pub fn clopper_pearson_upper(k: u64, n: u64, delta: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(domain(format!("need 0 ≤ k ≤ n, n > 0; got k = {k}, n = {n}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(domain(format!("confidence parameter must be in (0, 1), got {delta}")));
    }
    if k == n {
        return Ok(1.0);
    }
    if k == 0 {
        return Ok(1.0 - delta.powf(1.0 / n as f64));
    }
    let (a, b) = ((n - k) as f64, (k + 1) as f64);
    // P(Bin ≤ k) = I_{1−p}(n − k, k + 1), decreasing in p
    let cdf = |p: f64| beta_reg(a, b, 1.0 - p);
    let (mut lo, mut hi) = (k as f64 / n as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
}

/// Two-sample Kolmogorov–Smirnov test at level `alpha` with the asymptotic
/// critical value `√(−ln(α/2)/2)·√((n+m)/(nm))`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsOutcome> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("KS test needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut stat) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        stat = stat.max((i as f64 / n - j as f64 / m).abs());
    }
    let critical = (-(alpha / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt();
    Ok(KsOutcome {
        statistic: stat,
        critical,
        reject: stat > critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_examples() {
        let v = clopper_pearson_upper(0, 100, 0.05).unwrap();
        assert!((v - (1.0 - 0.05f64.powf(0.01))).abs() < 1e-15);
        assert!((v - 0.0295).abs() < 1e-4);
        let v = clopper_pearson_upper(50, 100, 0.05).unwrap();
        assert!((v - 0.586_378_285_369_088).abs() < 1e-12, "{v}");
        assert_eq!(clopper_pearson_upper(7, 7, 0.05).unwrap(), 1.0);
        assert!(clopper_pearson_upper(8, 7, 0.05).is_err());
    }

    #[test]
    fn clopper_pearson_inverts_binomial_cdf() {
        use statrs::distribution::{Binomial, DiscreteCDF};
        for (k, n) in [(1u64, 10u64), (3, 50), (40, 1000), (999, 1000)] {
            let p = clopper_pearson_upper(k, n, 0.01).unwrap();
            let cdf = Binomial::new(p, n).unwrap().cdf(k);
            assert!((cdf - 0.01).abs() < 1e-9, "k={k} n={n} cdf={cdf}");
        }
    }

    #[test]
    fn ks_detects_shift_and_accepts_equal() {
        let a: Vec<f64> = (0..2000).map(|i| (i as f64 + 0.5) / 2000.0).collect();
        let b: Vec<f64> = (0..1500).map(|i| (i as f64 + 0.25) / 1500.0).collect();
        assert!(!ks_two_sample(&a, &b, 0.01).unwrap().reject);
        let c: Vec<f64> = b.iter().map(|x| x + 0.2).collect();
        assert!(ks_two_sample(&a, &c, 0.01).unwrap().reject);
    }

    #[test]
    fn mean_and_se_example() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
