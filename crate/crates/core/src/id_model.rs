//! The vector `X ~ ID(γ, 0, ν)` with axis-supported `ν`, i.e. independent
//! components `X_k ~ ID(γ_k, 0, ν̃_k)`.

use crate::error::{domain, Error, Result};
use crate::levy::LevyMeasure1D;
use crate::samplers;

/// Seed used for estimate-backed quantities when the caller gives none.
pub const DEFAULT_ORACLE_SEED: u64 = 0x001d_c04c;
pub const DEFAULT_ORACLE_SAMPLES: usize = 100_000;

/// One coordinate: drift `γ_k` (compensated convention) and Lévy measure `ν̃_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub gamma: f64,
    pub levy: LevyMeasure1D,
}

impl Component {
    pub fn new(gamma: f64, levy: LevyMeasure1D) -> Self {
        Component { gamma, levy }
    }

    /// Poisson(λ): `γ = λ`, one atom at 1 of mass λ.
    pub fn poisson(lambda: f64) -> Result<Self> {
        Ok(Component::new(lambda, LevyMeasure1D::poisson(lambda)?))
    }

    /// Symmetric exponential law with density `e^{-|x|}/2`.
    pub fn laplace() -> Self {
        Component::new(0.0, LevyMeasure1D::laplace())
    }

    /// Drift of the uncompensated compound-Poisson form
    /// `X = γ_eff + Σ jumps`, i.e. `γ − ∫_{|u|≤1} u ν̃(du)`.
    pub fn effective_drift(&self) -> Result<f64> {
        Ok(self.gamma - self.levy.small_jump_mean()?)
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.gamma + self.levy.large_jump_mean()?)
    }

    pub fn variance(&self) -> Result<f64> {
        self.levy.absolute_moment(2)
    }

    /// `E|X_k|` when it is available without simulation.
    pub fn exact_abs_mean(&self) -> Option<f64> {
        if self.levy.is_laplace() {
            // E|c + L| = |c| + e^{-|c|} for the unit Laplace law.
            return Some(self.gamma.abs() + (-self.gamma.abs()).exp());
        }
        let atoms = self.levy.atoms()?;
        let drift = self.effective_drift().ok()?;
        if drift >= 0.0 && atoms.iter().all(|a| a.position > 0.0) {
            return self.mean().ok();
        }
        if drift <= 0.0 && atoms.iter().all(|a| a.position < 0.0) {
            return self.mean().ok().map(|m| -m);
        }
        if let [atom] = atoms {
            return Some(single_atom_abs_mean(drift, atom.position, atom.mass));
        }
        None
    }
}

/// `E|g + c N|`, `N ~ Poisson(λ)`, summed until the remaining mass is below
/// `1e-17`.
fn single_atom_abs_mean(drift: f64, position: f64, lambda: f64) -> f64 {
    let mut pmf = (-lambda).exp();
    let mut remaining = 1.0;
    let mut sum = 0.0;
    let mut k = 0u64;
    loop {
        let kf = k as f64;
        sum += pmf * (drift + position * kf).abs();
        remaining -= pmf;
        if kf > lambda && (remaining < 1e-17 || pmf == 0.0) {
            break;
        }
        if k > 100_000_000 {
            break;
        }
        k += 1;
        pmf *= lambda / k as f64;
    }
    sum
}

/// Bracket `[lower, upper]` containing `E‖X‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
    /// Some `E|X_k|` came from simulation rather than a closed form.
    pub estimate_backed: bool,
}

impl NormBracket {
    pub fn exact(value: f64) -> Self {
        NormBracket {
            lower: value,
            upper: value,
            estimate_backed: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IdVectorModel {
    components: Vec<Component>,
    iid: bool,
}

impl IdVectorModel {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(domain("model needs at least one component"));
        }
        let iid = components.windows(2).all(|w| w[0] == w[1]);
        Ok(IdVectorModel { components, iid })
    }

    pub fn iid(component: Component, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(domain("dimension must be ≥ 1"));
        }
        Ok(IdVectorModel {
            components: vec![component; d],
            iid: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn is_iid(&self) -> bool {
        self.iid
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &Component {
        &self.components[k]
    }

    /// Components needing their own computation: one for iid models.
    pub(crate) fn distinct_components(&self) -> &[Component] {
        if self.iid {
            &self.components[..1]
        } else {
            &self.components
        }
    }

    /// `(E X_k, Var X_k)`.
    pub fn component_moments(&self, k: usize) -> Result<(f64, f64)> {
        let c = self
            .components
            .get(k)
            .ok_or(Error::Dimension { expected: self.dim(), got: k })?;
        let variance = c.variance()?;
        if !variance.is_finite() {
            return Err(domain(format!("component {k} has infinite variance")));
        }
        Ok((c.mean()?, variance))
    }

    /// `Σ_k Var X_k`.
    pub fn total_variance(&self) -> Result<f64> {
        if self.iid {
            return Ok(self.dim() as f64 * self.component_moments(0)?.1);
        }
        (0..self.dim())
            .map(|k| self.component_moments(k).map(|m| m.1))
            .sum()
    }

    /// Every component is supported on `[0, ∞)`.
    pub fn is_nonnegative(&self) -> bool {
        self.components.iter().all(|c| {
            c.levy.is_nonnegative() && c.effective_drift().map(|g| g >= 0.0).unwrap_or(false)
        })
    }

    pub fn expected_norm_bracket(&self) -> Result<NormBracket> {
        self.expected_norm_bracket_with(DEFAULT_ORACLE_SAMPLES, DEFAULT_ORACLE_SEED)
    }

    /// `[√(d min_k (E|X_k|)²), √(d max_k E X_k²)]`. Components without a closed
    /// form for `E|X_k|` are simulated with `samples` draws from `seed`; the
    /// lower end then uses `max(0, estimate − 3·se)`.
    pub fn expected_norm_bracket_with(&self, samples: usize, seed: u64) -> Result<NormBracket> {
        let d = self.dim() as f64;
        let mut min_abs = f64::INFINITY;
        let mut max_sq = 0.0f64;
        let mut estimate_backed = false;
        for (k, c) in self.distinct_components().iter().enumerate() {
            let (mean, var) = self.component_moments(k)?;
            max_sq = max_sq.max(var + mean * mean);
            let abs_mean = match c.exact_abs_mean() {
                Some(v) => v,
                None => {
                    estimate_backed = true;
                    let single = IdVectorModel::iid(c.clone(), 1)?;
                    let (est, se) = single.expected_norm_mc(samples, seed ^ (k as u64))?;
                    (est - 3.0 * se).max(0.0)
                }
            };
            min_abs = min_abs.min(abs_mean);
        }
        Ok(NormBracket {
            lower: (d * min_abs * min_abs).sqrt(),
            upper: (d * max_sq).sqrt(),
            estimate_backed,
        })
    }

    /// Monte Carlo estimate of `E‖X‖` with its standard error.
    pub fn expected_norm_mc(&self, n: usize, seed: u64) -> Result<(f64, f64)> {
        if n == 0 {
            return Err(Error::Sampling("empty sample".into()));
        }
        let sample = samplers::sample_vector(self, n, seed)?;
        let norms: Vec<f64> = sample
            .rows()
            .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Ok(crate::stats::mean_and_se(&norms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn component_moment_examples() {
        let m = IdVectorModel::iid(Component::poisson(1.0).unwrap(), 1).unwrap();
        assert_eq!(m.component_moments(0).unwrap(), (1.0, 1.0));
        let m = IdVectorModel::iid(Component::laplace(), 1).unwrap();
        let (mean, var) = m.component_moments(0).unwrap();
        assert_eq!(mean, 0.0);
        assert!((var - 2.0).abs() < 1e-8);
        let c = Component::new(0.0, LevyMeasure1D::from_atoms(&[(0.5, 2.0)]).unwrap());
        let m = IdVectorModel::new(vec![c]).unwrap();
        assert_eq!(m.component_moments(0).unwrap(), (0.0, 0.5));
    }

    #[test]
    fn variance_is_second_lévy_moment() {
        let c = Component::new(
            0.3,
            LevyMeasure1D::from_atoms(&[(2.0, 0.25), (-0.5, 3.0)]).unwrap(),
        );
        let m = IdVectorModel::new(vec![c.clone()]).unwrap();
        assert_eq!(m.component_moments(0).unwrap().1, c.levy.absolute_moment(2).unwrap());
    }

    #[test]
    fn bracket_examples() {
        let m = IdVectorModel::iid(Component::poisson(1.0).unwrap(), 4).unwrap();
        let b = m.expected_norm_bracket().unwrap();
        assert!((b.lower - 2.0).abs() < 1e-12);
        assert!((b.upper - 8f64.sqrt()).abs() < 1e-12);
        assert!(!b.estimate_backed);
        let m = IdVectorModel::iid(Component::laplace(), 1).unwrap();
        let b = m.expected_norm_bracket().unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12);
        assert!((b.upper - 2f64.sqrt()).abs() < 1e-8);
        // nonnegative d = 1: lower end is E X₁
        let m = IdVectorModel::iid(Component::poisson(2.5).unwrap(), 1).unwrap();
        assert_eq!(m.expected_norm_bracket().unwrap().lower, 2.5);
    }

    #[test]
    fn single_atom_series_matches_poisson_mad() {
        // centred Poisson(2) scaled by 1/4: E|N − 2|/4 = 8e^{-2}/4
        let c = Component::new(0.0, LevyMeasure1D::from_atoms(&[(0.25, 2.0)]).unwrap());
        let v = c.exact_abs_mean().unwrap();
        assert!((v - 2.0 * (-2f64).exp()).abs() < 1e-14, "{v}");
    }

    #[test]
    fn iid_flag() {
        let p = Component::poisson(1.0).unwrap();
        assert!(IdVectorModel::new(vec![p.clone(), p.clone()]).unwrap().is_iid());
        let q = Component::poisson(2.0).unwrap();
        assert!(!IdVectorModel::new(vec![p, q]).unwrap().is_iid());
    }

    #[test]
    fn mc_norm_examples() {
        let m = IdVectorModel::iid(Component::poisson(1.0).unwrap(), 1).unwrap();
        let (est, _) = m.expected_norm_mc(100_000, 1).unwrap();
        assert!((0.99..=1.01).contains(&est), "{est}");
        let m = IdVectorModel::iid(Component::laplace(), 1).unwrap();
        let (est, _) = m.expected_norm_mc(100_000, 2).unwrap();
        assert!((0.985..=1.015).contains(&est), "{est}");
        assert!(matches!(m.expected_norm_mc(0, 2), Err(Error::Sampling(_))));
    }

    #[test]
    fn mc_norm_inside_bracket() {
        let families = [Component::poisson(1.0).unwrap(), Component::laplace()];
        for c in families {
            for d in [1, 4, 16] {
                let m = IdVectorModel::iid(c.clone(), d).unwrap();
                let b = m.expected_norm_bracket().unwrap();
                let (est, se) = m.expected_norm_mc(20_000, d as u64).unwrap();
                assert!(est >= b.lower - 3.0 * se && est <= b.upper + 3.0 * se);
            }
        }
    }
}
