//! The χ statistic of a centred inhomogeneous Poisson process on a finite
//! partition, viewed as the Euclidean norm of an ID vector.
//!
//! Cell `I` contributes `X_I = (N(I) − ∫_I s dμ) / √(μ(I) μ(X))`, whose Lévy
//! measure is `(∫_I s dμ)·δ_{1/√(μ(I)μ(X))}`.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::id_model::{Component, IdVectorModel};
use crate::levy::LevyMeasure1D;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiExperimentConfig {
    /// `μ(I)` per cell.
    pub cell_masses: Vec<f64>,
    /// `∫_I s dμ` per cell.
    pub intensities: Vec<f64>,
    /// `μ(X)`; defaults to the sum of the cell masses.
    #[serde(default)]
    pub total_mass: Option<f64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1.0
}

impl ChiExperimentConfig {
    /// `cells` cells of mass `cell_mass` and intensity `intensity` each.
    pub fn equal(cells: usize, cell_mass: f64, intensity: f64) -> Self {
        ChiExperimentConfig {
            cell_masses: vec![cell_mass; cells],
            intensities: vec![intensity; cells],
            total_mass: None,
            eps: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_masses.is_empty() {
            return Err(Error::Config("the partition has no cells".into()));
        }
        if self.cell_masses.len() != self.intensities.len() {
            return Err(Error::Config(format!(
                "{} cell masses but {} intensities",
                self.cell_masses.len(),
                self.intensities.len()
            )));
        }
        for (i, (&m, &s)) in self.cell_masses.iter().zip(&self.intensities).enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Config(format!("cell {i} has mass {m}; must be positive")));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!(
                    "cell {i} has intensity {s}; must be positive"
                )));
            }
        }
        let sum: f64 = self.cell_masses.iter().sum();
        if let Some(total) = self.total_mass {
            if (total - sum).abs() > 1e-9 * sum {
                return Err(Error::Config(format!(
                    "μ(X) = {total} differs from the sum of cell masses {sum}"
                )));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("ε must be positive, got {}", self.eps)));
        }
        Ok(())
    }

    /// `μ(X)`.
    pub fn total(&self) -> f64 {
        self.total_mass
            .unwrap_or_else(|| self.cell_masses.iter().sum())
    }

    /// `η = min μ(I)`.
    pub fn eta(&self) -> f64 {
        self.cell_masses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `K = max (∫_I s dμ) / μ(I)`.
    pub fn k_max(&self) -> f64 {
        self.intensities
            .iter()
            .zip(&self.cell_masses)
            .map(|(s, m)| s / m)
            .fold(0.0, f64::max)
    }

    /// Jump bound `R = 1/√(η μ(X))`.
    pub fn radius(&self) -> f64 {
        1.0 / (self.eta() * self.total()).sqrt()
    }
}

/// One centred single-atom component per cell.
pub fn chi_model(cfg: &ChiExperimentConfig) -> Result<IdVectorModel> {
    cfg.validate()?;
    let total = cfg.total();
    let components = cfg
        .cell_masses
        .iter()
        .zip(&cfg.intensities)
        .map(|(&m, &s)| {
            let levy = LevyMeasure1D::from_atoms(&[(1.0 / (m * total).sqrt(), s)])?;
            // E X_I = γ + ∫_{|u|>1} u ν̃ must vanish
            let gamma = -levy.large_jump_mean()?;
            Ok(Component::new(gamma, levy))
        })
        .collect::<Result<Vec<_>>>()?;
    IdVectorModel::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_partition_example() {
        let cfg = ChiExperimentConfig {
            total_mass: Some(4.0),
            ..ChiExperimentConfig::equal(4, 1.0, 1.0)
        };
        let m = chi_model(&cfg).unwrap();
        assert_eq!(m.dim(), 4);
        assert!(m.is_iid());
        let c = m.component(0);
        assert_eq!(c.levy.atoms().unwrap()[0].position, 0.5);
        assert_eq!(c.levy.atoms().unwrap()[0].mass, 1.0);
        assert_eq!(c.gamma, 0.0);
        assert_eq!(c.effective_drift().unwrap(), -0.5);
        assert_eq!(c.mean().unwrap(), 0.0);
        assert_eq!(cfg.radius(), 0.5);
    }

    #[test]
    fn large_atoms_are_still_centred() {
        let cfg = ChiExperimentConfig {
            cell_masses: vec![0.1, 0.3],
            intensities: vec![2.0, 0.5],
            total_mass: None,
            eps: 1.0,
        };
        let m = chi_model(&cfg).unwrap();
        for k in 0..2 {
            assert!(m.component(k).mean().unwrap().abs() < 1e-12);
        }
        assert!((cfg.k_max() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_partitions_rejected() {
        let mut cfg = ChiExperimentConfig::equal(3, 1.0, 1.0);
        cfg.cell_masses[1] = 0.0;
        assert!(matches!(chi_model(&cfg), Err(Error::Config(_))));
        let mut cfg = ChiExperimentConfig::equal(3, 1.0, 1.0);
        cfg.total_mass = Some(5.0);
        assert!(matches!(chi_model(&cfg), Err(Error::Config(_))));
        let mut cfg = ChiExperimentConfig::equal(3, 1.0, 1.0);
        cfg.intensities.pop();
        assert!(matches!(chi_model(&cfg), Err(Error::Config(_))));
    }
}
