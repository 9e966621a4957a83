//! Seeded, shard-parallel sampling of ID vectors.
//!
//! Rows are produced in fixed shards of [`SHARD_ROWS`]; component `k` of shard
//! `s` draws from its own ChaCha8 stream, so the output depends only on the
//! seed and not on the thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::id_model::{Component, IdVectorModel};
use crate::levy::{LevyKind, LevyMeasure1D};

pub const SHARD_ROWS: usize = 4096;

/// A `(seed, stream)` pair naming an independent ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeededStream {
    pub seed: u64,
    pub stream: u64,
}

impl SeededStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        SeededStream { seed, stream }
    }

    /// Stream for component `component` of shard `shard`.
    pub fn for_shard(seed: u64, shard: u64, component: u64) -> Self {
        SeededStream::new(seed, splitmix64(splitmix64(shard) ^ component))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Row-major `n × d` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(SampleMatrix { rows, cols, data })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// `γ_eff + Σ_{i ≤ N} J_i` with `N ~ Poisson(m)` and jumps drawn from the
/// normalised atoms.
#[derive(Debug, Clone)]
pub struct CompoundPoisson {
    drift: f64,
    poisson: Poisson<f64>,
    positions: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CompoundPoisson {
    pub fn new(levy: &LevyMeasure1D, gamma: f64) -> Result<Self> {
        let atoms = levy
            .atoms()
            .ok_or_else(|| Error::Sampling(format!("{levy} is not atomic")))?;
        let drift = gamma - levy.small_jump_mean()?;
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        let poisson = Poisson::new(total)
            .map_err(|e| Error::Sampling(format!("Poisson({total}): {e}")))?;
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.mass / total;
                acc
            })
            .collect();
        Ok(CompoundPoisson {
            drift,
            poisson,
            positions: atoms.iter().map(|a| a.position).collect(),
            cumulative,
        })
    }

    /// Number of jumps in one draw.
    pub fn jump_count<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.poisson.sample(rng) as u64
    }

    pub fn jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.positions.len() == 1 {
            return self.positions[0];
        }
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.positions[i.min(self.positions.len() - 1)]
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = self.jump_count(rng);
        if self.positions.len() == 1 {
            return self.drift + self.positions[0] * n as f64;
        }
        let mut x = self.drift;
        for _ in 0..n {
            x += self.jump(rng);
        }
        x
    }
}

/// One draw of `ID(γ, 0, ν̃)` for atomic `ν̃`.
pub fn compound_poisson_component<R: Rng + ?Sized>(
    levy: &LevyMeasure1D,
    gamma: f64,
    rng: &mut R,
) -> Result<f64> {
    Ok(CompoundPoisson::new(levy, gamma)?.sample(rng))
}

#[derive(Debug, Clone)]
enum ComponentSampler {
    Compound(CompoundPoisson),
    Laplace { shift: f64 },
}

impl ComponentSampler {
    fn new(c: &Component) -> Result<Self> {
        match c.levy.kind() {
            LevyKind::Atomic(_) => Ok(ComponentSampler::Compound(CompoundPoisson::new(
                &c.levy, c.gamma,
            )?)),
            LevyKind::Density(_) if c.levy.is_laplace() => {
                Ok(ComponentSampler::Laplace { shift: c.gamma })
            }
            LevyKind::Density(_) => Err(Error::Sampling(format!(
                "no sampler for the density measure {}",
                c.levy
            ))),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ComponentSampler::Compound(cp) => cp.sample(rng),
            ComponentSampler::Laplace { shift } => {
                // inverse CDF of e^{-|x|}/2
                let u: f64 = rng.random::<f64>() - 0.5;
                shift - u.signum() * (-2.0 * u.abs()).ln_1p()
            }
        }
    }
}

/// `n` independent draws of `X`, row-major.
pub fn sample_vector(model: &IdVectorModel, n: usize, seed: u64) -> Result<SampleMatrix> {
    let d = model.dim();
    let samplers: Vec<ComponentSampler> = if model.is_iid() {
        vec![ComponentSampler::new(model.component(0))?; d]
    } else {
        model
            .components()
            .iter()
            .map(ComponentSampler::new)
            .collect::<Result<_>>()?
    };
    let shards = n.div_ceil(SHARD_ROWS);
    let parts: Vec<Vec<f64>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let rows = SHARD_ROWS.min(n - s * SHARD_ROWS);
            let mut block = vec![0.0; rows * d];
            for (k, sampler) in samplers.iter().enumerate() {
                let mut rng = SeededStream::for_shard(seed, s as u64, k as u64).rng();
                for i in 0..rows {
                    block[i * d + k] = sampler.sample(&mut rng);
                }
            }
            block
        })
        .collect();
    SampleMatrix::from_rows(n, d, parts.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_and_se;

    #[test]
    fn same_seed_same_sample() {
        let m = IdVectorModel::iid(Component::poisson(1.5).unwrap(), 3).unwrap();
        let a = sample_vector(&m, 10_000, 42).unwrap();
        let b = sample_vector(&m, 10_000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_vector(&m, 10_000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn prefix_is_stable_across_sizes() {
        let m = IdVectorModel::iid(Component::laplace(), 2).unwrap();
        let small = sample_vector(&m, SHARD_ROWS + 10, 7).unwrap();
        let large = sample_vector(&m, 3 * SHARD_ROWS, 7).unwrap();
        assert_eq!(small.as_slice(), &large.as_slice()[..small.as_slice().len()]);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let m = IdVectorModel::iid(Component::poisson(0.7).unwrap(), 4).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let one = pool.install(|| sample_vector(&m, 20_000, 9).unwrap());
        let many = sample_vector(&m, 20_000, 9).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn poisson_moments() {
        let m = IdVectorModel::iid(Component::poisson(1.0).unwrap(), 1).unwrap();
        let x = sample_vector(&m, 200_000, 1).unwrap().column(0);
        let (mean, se) = mean_and_se(&x);
        assert!((mean - 1.0).abs() < 4.0 * se);
        assert!(x.iter().all(|v| v.fract() == 0.0 && *v >= 0.0));
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn laplace_moments() {
        let m = IdVectorModel::iid(Component::laplace(), 1).unwrap();
        let x = sample_vector(&m, 200_000, 2).unwrap().column(0);
        let (mean, se) = mean_and_se(&x);
        assert!(mean.abs() < 4.0 * se);
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((var - 2.0).abs() < 0.05);
    }

    #[test]
    fn mixed_sign_atoms_match_moments() {
        let levy = LevyMeasure1D::from_atoms(&[(0.5, 2.0), (-2.0, 0.25)]).unwrap();
        let c = Component::new(0.3, levy);
        let m = IdVectorModel::new(vec![c.clone()]).unwrap();
        let x = sample_vector(&m, 200_000, 5).unwrap().column(0);
        let (mean, se) = mean_and_se(&x);
        assert!((mean - c.mean().unwrap()).abs() < 4.0 * se);
    }

    #[test]
    fn unknown_density_cannot_be_sampled() {
        let levy = LevyMeasure1D::density(
            "one-sided",
            std::sync::Arc::new(|u: f64| -u - u.ln()),
            0.0,
            f64::INFINITY,
        )
        .unwrap();
        let m = IdVectorModel::new(vec![Component::new(0.0, levy)]).unwrap();
        assert!(matches!(sample_vector(&m, 10, 0), Err(Error::Sampling(_))));
    }
}
