//! Lipschitz functionals `f: ℝ^d → ℝ` and the envelope constants the tail
//! bounds consume.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::id_model::{IdVectorModel, DEFAULT_ORACLE_SAMPLES, DEFAULT_ORACLE_SEED};
use crate::samplers;
use crate::stats::mean_and_se;

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Gradient = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Caller-declared functional with its own constants.
#[derive(Clone)]
pub struct CustomFunctional {
    pub name: String,
    pub dim: usize,
    pub evaluator: Evaluator,
    /// Supergradient, used to estimate `b̃_k` for concave functionals.
    pub gradient: Option<Gradient>,
    pub a: f64,
    pub b_k: Vec<f64>,
    /// Defaults to `Σ b_k²`.
    pub a_tilde_sq: Option<f64>,
    pub a_bar_sq: Option<f64>,
    pub b_tilde_k: Option<Vec<f64>>,
    pub concave: bool,
}

#[derive(Clone)]
pub enum Functional {
    Linear { c: Vec<f64> },
    EuclideanNorm,
    MinCoordinate,
    /// `‖x‖_A = √(xᵀAx)` for symmetric positive-definite `A`.
    ANorm { a: DMatrix<f64> },
    /// `−‖x‖`, concave.
    NegativeNorm,
    Custom(CustomFunctional),
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Functional::Linear { c } => f.debug_struct("Linear").field("c", c).finish(),
            Functional::EuclideanNorm => f.write_str("EuclideanNorm"),
            Functional::MinCoordinate => f.write_str("MinCoordinate"),
            Functional::ANorm { a } => f.debug_struct("ANorm").field("a", a).finish(),
            Functional::NegativeNorm => f.write_str("NegativeNorm"),
            Functional::Custom(c) => f.debug_struct("Custom").field("name", &c.name).finish(),
        }
    }
}

/// Lipschitz data of `f` relative to a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalEnvelope {
    /// Euclidean Lipschitz constant.
    pub a: f64,
    /// `|f(x + u e_k) − f(x)| ≤ b_k |u|`.
    pub b_k: Vec<f64>,
    pub b: f64,
    /// `sup Σ_k |f(x + u e_k) − f(x)|² / u²`.
    pub a_tilde_sq: f64,
    /// `sup_x Σ_k ∫_{|u| ≤ R_k} |f(x + u e_k) − f(x)|² ν̃_k(du)`; bounded supports only.
    pub a_bar_sq: Option<f64>,
    /// `|E ∂f/∂x_k (X)|`, concave functionals only.
    pub b_tilde_k: Option<Vec<f64>>,
    pub concave: bool,
    /// Some entry of `b_tilde_k` is a simulation estimate.
    pub estimate_backed: bool,
}

impl FunctionalEnvelope {
    /// Checks nonnegativity and `a² ≤ ã² ≤ d b²`.
    pub fn validate(&self) -> Result<()> {
        let d = self.b_k.len() as f64;
        let entries = [self.a, self.b, self.a_tilde_sq];
        if entries.iter().chain(&self.b_k).any(|v| !(*v >= 0.0)) {
            return Err(Error::Envelope("envelope constants must be nonnegative".into()));
        }
        let slack = 1e-12 * (1.0 + self.a_tilde_sq);
        if self.a * self.a > self.a_tilde_sq + slack {
            return Err(Error::Envelope(format!(
                "a² = {} exceeds ã² = {}",
                self.a * self.a,
                self.a_tilde_sq
            )));
        }
        if self.a_tilde_sq > d * self.b * self.b + slack {
            return Err(Error::Envelope(format!(
                "ã² = {} exceeds d·b² = {}",
                self.a_tilde_sq,
                d * self.b * self.b
            )));
        }
        Ok(())
    }

    pub fn a_bar_sq(&self) -> Result<f64> {
        self.a_bar_sq
            .ok_or_else(|| Error::Envelope("ā² needs bounded support or a declared value".into()))
    }

    pub fn b_tilde_k(&self) -> Result<&[f64]> {
        self.b_tilde_k
            .as_deref()
            .ok_or_else(|| Error::Envelope("b̃_k needs a concave functional".into()))
    }
}

fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Functional {
    pub fn linear(c: Vec<f64>) -> Self {
        Functional::Linear { c }
    }

    pub fn a_norm(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(domain("A must be square"));
        }
        if (&a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
            return Err(domain("A must be symmetric"));
        }
        if a.clone().cholesky().is_none() {
            return Err(domain("A must be positive definite"));
        }
        Ok(Functional::ANorm { a })
    }

    pub fn name(&self) -> &str {
        match self {
            Functional::Linear { .. } => "linear",
            Functional::EuclideanNorm => "norm",
            Functional::MinCoordinate => "min",
            Functional::ANorm { .. } => "a-norm",
            Functional::NegativeNorm => "negative-norm",
            Functional::Custom(c) => &c.name,
        }
    }

    /// Dimension fixed by the functional itself, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Functional::Linear { c } => Some(c.len()),
            Functional::ANorm { a } => Some(a.nrows()),
            Functional::Custom(c) => Some(c.dim),
            _ => None,
        }
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(expected) if expected != d => Err(Error::Dimension { expected, got: d }),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        if x.is_empty() {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Functional::Linear { c } => c.iter().zip(x).map(|(c, x)| c * x).sum(),
            Functional::EuclideanNorm => euclidean(x),
            Functional::MinCoordinate => x.iter().copied().fold(f64::INFINITY, f64::min),
            Functional::ANorm { a } => {
                let v = DVector::from_column_slice(x);
                v.dot(&(a * &v)).max(0.0).sqrt()
            }
            Functional::NegativeNorm => -euclidean(x),
            Functional::Custom(c) => (c.evaluator)(x),
        }
    }

    pub fn is_concave(&self) -> bool {
        match self {
            Functional::Linear { .. } | Functional::NegativeNorm => true,
            Functional::Custom(c) => c.concave,
            _ => false,
        }
    }

    /// `f(0)`.
    pub fn at_origin(&self, d: usize) -> Result<f64> {
        self.evaluate(&vec![0.0; d])
    }

    pub fn envelope(&self, model: &IdVectorModel) -> Result<FunctionalEnvelope> {
        self.envelope_with(model, DEFAULT_ORACLE_SAMPLES, DEFAULT_ORACLE_SEED)
    }

    /// As [`Functional::envelope`]; `samples` and `seed` drive the estimate of
    /// `b̃_k` for nonlinear concave functionals.
    pub fn envelope_with(
        &self,
        model: &IdVectorModel,
        samples: usize,
        seed: u64,
    ) -> Result<FunctionalEnvelope> {
        let d = model.dim();
        self.check_dim(d)?;
        let bounded = model
            .components()
            .iter()
            .all(|c| c.levy.support_radius().is_finite());
        let second_moments = || -> Result<Vec<f64>> {
            model
                .components()
                .iter()
                .map(|c| c.levy.absolute_moment(2))
                .collect()
        };
        let mut estimate_backed = false;
        let env = match self {
            Functional::Linear { c } => {
                let b_k: Vec<f64> = c.iter().map(|v| v.abs()).collect();
                let norm_sq: f64 = c.iter().map(|v| v * v).sum();
                let a_bar_sq = if bounded {
                    let m2 = second_moments()?;
                    Some(c.iter().zip(&m2).map(|(c, m)| c * c * m).sum())
                } else {
                    None
                };
                FunctionalEnvelope {
                    a: norm_sq.sqrt(),
                    b: max_of(&b_k),
                    b_tilde_k: Some(b_k.clone()),
                    b_k,
                    a_tilde_sq: norm_sq,
                    a_bar_sq,
                    concave: true,
                    estimate_backed: false,
                }
            }
            Functional::EuclideanNorm | Functional::MinCoordinate | Functional::NegativeNorm => {
                let a_tilde_sq = match self {
                    // increments only matter for u > 0, and then only at the argmin
                    Functional::MinCoordinate
                        if model.components().iter().all(|c| c.levy.is_nonnegative()) =>
                    {
                        1.0
                    }
                    _ => d as f64,
                };
                let a_bar_sq = if bounded {
                    Some(second_moments()?.iter().sum())
                } else {
                    None
                };
                let b_tilde_k = if let Functional::NegativeNorm = self {
                    estimate_backed = true;
                    Some(negative_norm_gradient_mean(model, samples, seed)?)
                } else {
                    None
                };
                FunctionalEnvelope {
                    a: 1.0,
                    b_k: vec![1.0; d],
                    b: 1.0,
                    a_tilde_sq,
                    a_bar_sq,
                    b_tilde_k,
                    concave: self.is_concave(),
                    estimate_backed,
                }
            }
            Functional::ANorm { a } => {
                let eigen = a.clone().symmetric_eigen();
                let lambda_max = eigen.eigenvalues.max();
                let diag: Vec<f64> = a.diagonal().iter().copied().collect();
                // λ_max alone is not a valid increment constant when λ_max < 1
                let b_k: Vec<f64> = diag.iter().map(|akk| lambda_max.max(akk.sqrt())).collect();
                let a_bar_sq = if bounded {
                    let m2 = second_moments()?;
                    Some(diag.iter().zip(&m2).map(|(akk, m)| akk * m).sum())
                } else {
                    None
                };
                FunctionalEnvelope {
                    a: lambda_max.sqrt(),
                    b: max_of(&b_k),
                    b_k,
                    a_tilde_sq: a.trace(),
                    a_bar_sq,
                    b_tilde_k: None,
                    concave: false,
                    estimate_backed: false,
                }
            }
            Functional::Custom(c) => {
                if c.b_k.len() != d {
                    return Err(Error::Dimension { expected: d, got: c.b_k.len() });
                }
                let b_tilde_k = match (&c.b_tilde_k, &c.gradient, c.concave) {
                    (Some(v), _, _) => Some(v.clone()),
                    (None, Some(grad), true) => {
                        estimate_backed = true;
                        Some(gradient_mean(model, grad, samples, seed)?)
                    }
                    _ => None,
                };
                FunctionalEnvelope {
                    a: c.a,
                    b: max_of(&c.b_k),
                    b_k: c.b_k.clone(),
                    a_tilde_sq: c
                        .a_tilde_sq
                        .unwrap_or_else(|| c.b_k.iter().map(|b| b * b).sum()),
                    a_bar_sq: c.a_bar_sq,
                    b_tilde_k,
                    concave: c.concave,
                    estimate_backed,
                }
            }
        };
        env.validate()?;
        Ok(env)
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// `|E X_k/‖X‖|` inflated by three standard errors; rows with `X = 0` use the
/// supergradient 0.
fn negative_norm_gradient_mean(model: &IdVectorModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    let grad: Gradient = Arc::new(|x: &[f64]| {
        let norm = euclidean(x);
        if norm == 0.0 {
            vec![0.0; x.len()]
        } else {
            x.iter().map(|v| -v / norm).collect()
        }
    });
    gradient_mean(model, &grad, n, seed)
}

fn gradient_mean(model: &IdVectorModel, grad: &Gradient, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sample = samplers::sample_vector(model, n, seed)?;
    let d = model.dim();
    let grads: Vec<Vec<f64>> = sample.rows().map(|r| grad(r)).collect();
    if model.is_iid() {
        // every coordinate has the same mean; pool them
        let pooled: Vec<f64> = grads.iter().map(|g| g.iter().sum::<f64>() / d as f64).collect();
        let (m, se) = mean_and_se(&pooled);
        return Ok(vec![m.abs() + 3.0 * se; d]);
    }
    Ok((0..d)
        .map(|k| {
            let col: Vec<f64> = grads.iter().map(|g| g[k]).collect();
            let (m, se) = mean_and_se(&col);
            m.abs() + 3.0 * se
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id_model::Component;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson(d: usize) -> IdVectorModel {
        IdVectorModel::iid(Component::poisson(1.0).unwrap(), d).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(Functional::EuclideanNorm.evaluate(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(Functional::MinCoordinate.evaluate(&[2.0, -1.0, 7.0]).unwrap(), -1.0);
        let lin = Functional::linear(vec![1.0, 1.0]);
        assert_eq!(lin.evaluate(&[2.0, 3.0]).unwrap(), 5.0);
        assert!(matches!(
            lin.evaluate(&[1.0, 2.0, 3.0]),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn a_norm_value() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let f = Functional::a_norm(a).unwrap();
        // xᵀAx = 2 + 2·2 + 3·4 = 18 at x = (1, 2)
        assert!((f.evaluate(&[1.0, 2.0]).unwrap() - 18f64.sqrt()).abs() < 1e-14);
        let not_pd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Functional::a_norm(not_pd).is_err());
    }

    #[test]
    fn envelope_examples() {
        let e = Functional::EuclideanNorm.envelope(&poisson(9)).unwrap();
        assert_eq!((e.a, e.b, e.a_tilde_sq), (1.0, 1.0, 9.0));
        assert!(e.b_k.iter().all(|b| *b == 1.0));
        assert_eq!(e.a_bar_sq, Some(9.0));
        for d in [1, 5, 40] {
            let e = Functional::MinCoordinate.envelope(&poisson(d)).unwrap();
            assert_eq!((e.a, e.b, e.a_tilde_sq), (1.0, 1.0, 1.0));
        }
        let c = vec![3.0, -4.0];
        let e = Functional::linear(c).envelope(&poisson(2)).unwrap();
        assert_eq!((e.a, e.a_tilde_sq), (5.0, 25.0));
        assert_eq!(e.b_k, vec![3.0, 4.0]);
        assert_eq!(e.a_bar_sq, Some(25.0));
    }

    #[test]
    fn min_coordinate_on_signed_support_uses_d() {
        let m = IdVectorModel::iid(Component::laplace(), 6).unwrap();
        let e = Functional::MinCoordinate.envelope(&m).unwrap();
        assert_eq!(e.a_tilde_sq, 6.0);
        assert_eq!(e.a_bar_sq, None);
    }

    #[test]
    fn a_norm_envelope() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let lambda_max = (5.0 + 5f64.sqrt()) / 2.0;
        let e = Functional::a_norm(a).unwrap().envelope(&poisson(2)).unwrap();
        assert!((e.a - lambda_max.sqrt()).abs() < 1e-12);
        assert!(e.b_k.iter().all(|b| (b - lambda_max).abs() < 1e-12));
        assert_eq!(e.a_tilde_sq, 5.0);
        let small = DMatrix::from_diagonal_element(3, 3, 0.25);
        let e = Functional::a_norm(small).unwrap().envelope(&poisson(3)).unwrap();
        assert_eq!(e.b_k, vec![0.5; 3]);
    }

    #[test]
    fn negative_norm_gradient_is_small_for_centred_model() {
        let m = IdVectorModel::iid(Component::laplace(), 4).unwrap();
        let e = Functional::NegativeNorm.envelope_with(&m, 20_000, 3).unwrap();
        assert!(e.estimate_backed);
        assert!(e.b_tilde_k.unwrap().iter().all(|b| *b < 0.05));
    }

    #[test]
    fn custom_requires_matching_dim() {
        let c = CustomFunctional {
            name: "sum".into(),
            dim: 2,
            evaluator: Arc::new(|x: &[f64]| x.iter().sum()),
            gradient: None,
            a: 2f64.sqrt(),
            b_k: vec![1.0, 1.0],
            a_tilde_sq: None,
            a_bar_sq: None,
            b_tilde_k: None,
            concave: true,
        };
        let f = Functional::Custom(c);
        let e = f.envelope(&poisson(2)).unwrap();
        assert_eq!(e.a_tilde_sq, 2.0);
        assert!(e.b_tilde_k().is_err());
        assert!(f.envelope(&poisson(3)).is_err());
    }

    #[test]
    fn invalid_chain_is_rejected() {
        let env = FunctionalEnvelope {
            a: 2.0,
            b_k: vec![1.0],
            b: 1.0,
            a_tilde_sq: 1.0,
            a_bar_sq: None,
            b_tilde_k: None,
            concave: false,
            estimate_backed: false,
        };
        assert!(matches!(env.validate(), Err(Error::Envelope(_))));
    }

    #[test]
    fn increments_respect_declared_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 5;
        let a = DMatrix::from_fn(d, d, |i, j| if i == j { 1.5 } else { 0.2 });
        let fs = [
            Functional::EuclideanNorm,
            Functional::MinCoordinate,
            Functional::NegativeNorm,
            Functional::linear(vec![0.5, -1.0, 2.0, 0.0, 1.0]),
            Functional::a_norm(a).unwrap(),
        ];
        for f in fs {
            let e = f.envelope_with(&poisson(d), 1000, 1).unwrap();
            for _ in 0..2000 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
                let u: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let xu: Vec<f64> = x.iter().zip(&u).map(|(x, u)| x + u).collect();
                let lhs = (f.evaluate(&xu).unwrap() - f.evaluate(&x).unwrap()).abs();
                assert!(lhs <= e.a * euclidean(&u) + 1e-12, "{f:?}");
                let k = rng.random_range(0..d);
                let mut xk = x.clone();
                xk[k] += u[k];
                let lhs = (f.evaluate(&xk).unwrap() - f.evaluate(&x).unwrap()).abs();
                assert!(lhs <= e.b_k[k] * u[k].abs() + 1e-12, "{f:?}");
            }
        }
    }
}
