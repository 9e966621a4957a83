//! The interpolated pair `(U, V)` with Lévy measure `zν₁ + (1−z)ν₀` and a
//! numerical check of the covariance representation
//! `Cov(f(X), g(X)) = ∫₀¹ E_z[∫ (f(U+u) − f(U))(g(V+u) − g(V)) ν(du)] dz`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::id_model::IdVectorModel;
use crate::quad::gauss_legendre_unit;
use crate::samplers::{sample_vector, splitmix64, SampleMatrix, SeededStream, SHARD_ROWS};
use crate::stats::mean_and_se;

/// A function of one row, `ℝ^d → ℝ`.
pub type TestFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

pub const DEFAULT_Z_NODES: usize = 8;

/// Per-coordinate jump law of a finite-activity component.
#[derive(Debug, Clone)]
struct Jumps {
    drift: f64,
    mass: f64,
    positions: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Jumps {
    fn new(model: &IdVectorModel, k: usize) -> Result<Self> {
        let c = model.component(k);
        let atoms = c.levy.atoms().ok_or_else(|| {
            Error::Sampling(format!("coupling needs atomic Lévy measures, got {}", c.levy))
        })?;
        let mass = c.levy.total_mass();
        let mut acc = 0.0;
        Ok(Jumps {
            drift: c.effective_drift()?,
            mass,
            positions: atoms.iter().map(|a| a.position).collect(),
            masses: atoms.iter().map(|a| a.mass).collect(),
            cumulative: atoms
                .iter()
                .map(|a| {
                    acc += a.mass / mass;
                    acc
                })
                .collect(),
        })
    }

    fn jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.positions.len() == 1 {
            return self.positions[0];
        }
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.positions[i.min(self.positions.len() - 1)]
    }
}

fn poisson_count<R: Rng + ?Sized>(p: &Option<Poisson<f64>>, rng: &mut R) -> u64 {
    p.as_ref().map_or(0, |p| p.sample(rng) as u64)
}

fn poisson(rate: f64) -> Result<Option<Poisson<f64>>> {
    if rate == 0.0 {
        return Ok(None);
    }
    Poisson::new(rate)
        .map(Some)
        .map_err(|e| Error::Sampling(format!("Poisson({rate}): {e}")))
}

/// `(U, V)` for a finite-activity atomic base model and `z ∈ [0, 1]`.
#[derive(Debug, Clone)]
pub struct CouplingModel {
    base: IdVectorModel,
    z: f64,
    jumps: Vec<Jumps>,
}

impl CouplingModel {
    pub fn new(base: IdVectorModel, z: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&z) {
            return Err(crate::error::domain(format!("z must lie in [0, 1], got {z}")));
        }
        let jumps = (0..base.dim())
            .map(|k| Jumps::new(&base, k))
            .collect::<Result<_>>()?;
        Ok(CouplingModel { base, z, jumps })
    }

    pub fn base(&self) -> &IdVectorModel {
        &self.base
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// `(2 − z)·ν(ℝ^d)`.
    pub fn total_mass(&self) -> f64 {
        (2.0 - self.z) * self.jumps.iter().map(|j| j.mass).sum::<f64>()
    }
}

/// `n` draws of `(U, V)` as rows of length `2d`. Coordinate `k` superposes a
/// diagonal stream of rate `z m_k` and two one-sided streams of rate
/// `(1 − z) m_k`, which is the jump process of `zν₁ + (1−z)ν₀` restricted to
/// that axis.
pub fn sample_pair(cm: &CouplingModel, n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::Sampling("need at least one draw".into()));
    }
    let d = cm.base.dim();
    let counts = cm
        .jumps
        .iter()
        .map(|j| Ok((poisson(cm.z * j.mass)?, poisson((1.0 - cm.z) * j.mass)?)))
        .collect::<Result<Vec<_>>>()?;
    let shards = n.div_ceil(SHARD_ROWS);
    let parts: Vec<Vec<f64>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let rows = SHARD_ROWS.min(n - s * SHARD_ROWS);
            let mut block = vec![0.0; rows * 2 * d];
            for (k, (jumps, (diag, side))) in cm.jumps.iter().zip(&counts).enumerate() {
                let mut rng = SeededStream::for_shard(seed, s as u64, k as u64).rng();
                for i in 0..rows {
                    let (mut u, mut v) = (jumps.drift, jumps.drift);
                    for _ in 0..poisson_count(diag, &mut rng) {
                        let j = jumps.jump(&mut rng);
                        u += j;
                        v += j;
                    }
                    for _ in 0..poisson_count(side, &mut rng) {
                        u += jumps.jump(&mut rng);
                    }
                    for _ in 0..poisson_count(side, &mut rng) {
                        v += jumps.jump(&mut rng);
                    }
                    block[i * 2 * d + k] = u;
                    block[i * 2 * d + d + k] = v;
                }
            }
            block
        })
        .collect();
    SampleMatrix::from_rows(n, 2 * d, parts.concat())
}

/// Sample covariance of `f(X)` and `g(X)` with its jackknife standard error.
pub fn covariance_lhs(
    model: &IdVectorModel,
    f: TestFn<'_>,
    g: TestFn<'_>,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n < 3 {
        return Err(Error::Sampling("covariance needs at least three draws".into()));
    }
    let x = sample_vector(model, n, seed)?;
    let rows: Vec<&[f64]> = x.rows().collect();
    let fg: Vec<(f64, f64)> = rows.par_iter().map(|r| (f(r), g(r))).collect();
    Ok(covariance_with_jackknife(&fg))
}

/// Unbiased covariance and the jackknife standard error of it, using the
/// closed form of each leave-one-out estimate.
fn covariance_with_jackknife(fg: &[(f64, f64)]) -> (f64, f64) {
    let nf = fg.len() as f64;
    let mf = fg.iter().map(|p| p.0).sum::<f64>() / nf;
    let mg = fg.iter().map(|p| p.1).sum::<f64>() / nf;
    let centred: Vec<(f64, f64)> = fg.iter().map(|&(a, b)| (a - mf, b - mg)).collect();
    let sf: f64 = centred.iter().map(|p| p.0).sum();
    let sg: f64 = centred.iter().map(|p| p.1).sum();
    let sfg: f64 = centred.iter().map(|p| p.0 * p.1).sum();
    let cov = (sfg - sf * sg / nf) / (nf - 1.0);
    let loo: Vec<f64> = centred
        .iter()
        .map(|&(a, b)| (sfg - a * b - (sf - a) * (sg - b) / (nf - 1.0)) / (nf - 2.0))
        .collect();
    let mean_loo = loo.iter().sum::<f64>() / nf;
    let ss: f64 = loo.iter().map(|c| (c - mean_loo).powi(2)).sum();
    (cov, ((nf - 1.0) / nf * ss).sqrt())
}

/// Monte Carlo estimate of the inner expectation at one quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEstimate {
    pub z: f64,
    pub weight: f64,
    pub inner_mean: f64,
    pub inner_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceRhs {
    pub estimate: f64,
    pub se: f64,
    pub nodes: Vec<NodeEstimate>,
}

/// `Σ_k Σ_j m_j (f(U + u_j e_k) − f(U))(g(V + u_j e_k) − g(V))` for one row `(U, V)`.
fn inner_term(row: &[f64], d: usize, jumps: &[Jumps], f: TestFn<'_>, g: TestFn<'_>) -> f64 {
    let (u, v) = row.split_at(d);
    let (fu, gv) = (f(u), g(v));
    let mut up = u.to_vec();
    let mut vp = v.to_vec();
    let mut total = 0.0;
    for (k, jk) in jumps.iter().enumerate() {
        for (&pos, &mass) in jk.positions.iter().zip(&jk.masses) {
            up[k] = u[k] + pos;
            vp[k] = v[k] + pos;
            total += mass * (f(&up) - fu) * (g(&vp) - gv);
        }
        up[k] = u[k];
        vp[k] = v[k];
    }
    total
}

/// Gauss–Legendre quadrature over `z` of Monte Carlo estimates of the inner
/// expectation, each node on its own derived seed.
pub fn covariance_rhs(
    model: &IdVectorModel,
    f: TestFn<'_>,
    g: TestFn<'_>,
    n_per_node: usize,
    z_nodes: usize,
    seed: u64,
) -> Result<CovarianceRhs> {
    if z_nodes < 2 {
        return Err(Error::Quadrature(format!(
            "z quadrature needs at least 2 nodes, got {z_nodes}"
        )));
    }
    let d = model.dim();
    let mut nodes = Vec::with_capacity(z_nodes);
    for (i, (z, weight)) in gauss_legendre_unit(z_nodes).into_iter().enumerate() {
        let cm = CouplingModel::new(model.clone(), z)?;
        let pairs = sample_pair(&cm, n_per_node, splitmix64(seed ^ i as u64))?;
        let rows: Vec<&[f64]> = pairs.rows().collect();
        let terms: Vec<f64> = rows
            .par_iter()
            .map(|r| inner_term(r, d, &cm.jumps, f, g))
            .collect();
        let (inner_mean, inner_se) = mean_and_se(&terms);
        nodes.push(NodeEstimate {
            z,
            weight,
            inner_mean,
            inner_se,
        });
    }
    let estimate = nodes.iter().map(|n| n.weight * n.inner_mean).sum();
    let se = nodes
        .iter()
        .map(|n| (n.weight * n.inner_se).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(CovarianceRhs {
        estimate,
        se,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id_model::Component;

    fn poisson1() -> IdVectorModel {
        IdVectorModel::iid(Component::poisson(1.0).unwrap(), 1).unwrap()
    }

    #[test]
    fn full_coupling_is_diagonal() {
        let cm = CouplingModel::new(poisson1(), 1.0).unwrap();
        let s = sample_pair(&cm, 5000, 3).unwrap();
        assert!(s.rows().all(|r| r[0] == r[1]));
        assert_eq!(cm.total_mass(), 1.0);
    }

    #[test]
    fn half_coupling_covariance() {
        let cm = CouplingModel::new(poisson1(), 0.5).unwrap();
        let s = sample_pair(&cm, 100_000, 11).unwrap();
        let fg: Vec<(f64, f64)> = s.rows().map(|r| (r[0], r[1])).collect();
        let (cov, se) = covariance_with_jackknife(&fg);
        assert!((cov - 0.5).abs() < 4.0 * se, "{cov} ± {se}");
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let fg: Vec<(f64, f64)> = (0..25)
            .map(|i| {
                let x = (i as f64 * 0.37).sin();
                (x, x * x + 0.1 * i as f64)
            })
            .collect();
        let cov = |s: &[(f64, f64)]| {
            let n = s.len() as f64;
            let mf = s.iter().map(|p| p.0).sum::<f64>() / n;
            let mg = s.iter().map(|p| p.1).sum::<f64>() / n;
            s.iter().map(|p| (p.0 - mf) * (p.1 - mg)).sum::<f64>() / (n - 1.0)
        };
        let loo: Vec<f64> = (0..fg.len())
            .map(|i| {
                let mut s = fg.clone();
                s.remove(i);
                cov(&s)
            })
            .collect();
        let n = fg.len() as f64;
        let m = loo.iter().sum::<f64>() / n;
        let se = ((n - 1.0) / n * loo.iter().map(|c| (c - m).powi(2)).sum::<f64>()).sqrt();
        let (c, s) = covariance_with_jackknife(&fg);
        assert!((c - cov(&fg)).abs() < 1e-13);
        assert!((s - se).abs() < 1e-12, "{s} vs {se}");
    }

    #[test]
    fn identity_rhs_is_second_moment() {
        let id = |x: &[f64]| x[0];
        let r = covariance_rhs(&poisson1(), &id, &id, 1000, 8, 1).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-12);
        assert_eq!(r.se, 0.0);
        let sym = IdVectorModel::iid(
            Component::new(0.0, crate::levy::LevyMeasure1D::from_atoms(&[(-1.0, 1.0), (1.0, 1.0)]).unwrap()),
            1,
        )
        .unwrap();
        let r = covariance_rhs(&sym, &id, &id, 1000, 8, 1).unwrap();
        assert!((r.estimate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_nodes_rejected() {
        let id = |x: &[f64]| x[0];
        assert!(matches!(
            covariance_rhs(&poisson1(), &id, &id, 10, 1, 1),
            Err(Error::Quadrature(_))
        ));
    }

    #[test]
    fn density_base_rejected() {
        let m = IdVectorModel::iid(Component::laplace(), 2).unwrap();
        assert!(matches!(CouplingModel::new(m, 0.5), Err(Error::Sampling(_))));
    }
}
