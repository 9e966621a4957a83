//! Config-driven command line front end.
//!
//! Every subcommand reads a TOML file with the sections `[model]`,
//! `[functional]`, `[bound]`, `[mc]` and `[output]` (plus `[couple]`,
//! `[sweep]` or `[chi]` where relevant) and writes CSV into the output
//! directory. Exit codes: 0 on success, 1 on configuration or runtime errors,
//! 2 when a verification assertion fails.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Deserialize;

use crate::bounds::{
    assemble_tail_bound, combine_bounds, BoundParams, BoundPoint, Tail, TailBound, Theorem,
};
use crate::chi::{chi_model, ChiExperimentConfig};
use crate::coupling::{covariance_lhs, covariance_rhs, DEFAULT_Z_NODES};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::id_model::{Component, IdVectorModel, NormBracket};
use crate::levy::LevyMeasure1D;
use crate::samplers::sample_vector;
use crate::verifier::{verify_domination, VerificationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "IDCONC_THREADS";

const DEFAULT_BOUND_GRID: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, Parser)]
#[command(name = "idconc", version, about = "Tail bounds for infinitely divisible vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bound curve on a grid (bound.csv).
    Bound(Flags),
    /// Monte Carlo domination check (verify.csv).
    Verify(Flags),
    /// Raw draws of X (sample.csv).
    Sample(Flags),
    /// Covariance representation check (couple.csv).
    Couple(Flags),
    /// Bound curves over several dimensions (sweep.csv).
    Sweep(Flags),
    /// Poisson-process χ experiment (chi.csv).
    Chi(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub functional: FunctionalSpec,
    #[serde(default)]
    pub bound: BoundSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub output: OutputSpec,
    pub couple: Option<CoupleSpec>,
    pub sweep: Option<SweepSpec>,
    pub chi: Option<ChiExperimentConfig>,
}

/// One component family: `poisson` (`lambda`), `laplace` (`gamma` shift) or
/// `atomic` (`atoms = [[position, mass], ...]`, `gamma`).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub family: String,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub atoms: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Option<String>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub atoms: Option<Vec<[f64; 2]>>,
    pub d: Option<usize>,
    /// Per-coordinate components; replaces the iid family when present.
    pub components: Option<Vec<ComponentSpec>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    /// `norm`, `linear`, `min`, `a-norm` or `negative-norm`.
    pub kind: Option<String>,
    pub c: Option<Vec<f64>>,
    pub a: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub theorem: Option<String>,
    pub eps: Option<f64>,
    /// `upper` or `lower`.
    pub tail: Option<String>,
    pub bernstein_c: Option<f64>,
    pub v_sq: Option<f64>,
    pub radius: Option<f64>,
    pub b_k: Option<Vec<f64>>,
    /// `[lower, upper]` for `E‖X‖`.
    pub bracket: Option<[f64; 2]>,
    pub grid: Option<Vec<f64>>,
    pub oracle_samples: Option<usize>,
    pub oracle_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

/// Test function of the covariance check: `identity` (`Σ x_k`), `clip`
/// (`Σ x_k` clamped to `[lo, hi]`) or `linear` (`Σ c_k x_k`).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFnSpec {
    pub kind: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub c: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleSpec {
    pub f: TestFnSpec,
    pub g: TestFnSpec,
    pub z_nodes: Option<usize>,
    /// Draws per quadrature node; defaults to `[mc] n`.
    pub n_per_node: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub dims: Vec<usize>,
}

/// Parses a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

impl ComponentSpec {
    pub fn build(&self) -> Result<Component> {
        match self.family.as_str() {
            "poisson" => {
                if self.gamma.is_some() || self.atoms.is_some() {
                    return Err(Error::Config("poisson takes only `lambda`".into()));
                }
                Component::poisson(self.lambda.unwrap_or(1.0))
            }
            "laplace" => {
                if self.lambda.is_some() || self.atoms.is_some() {
                    return Err(Error::Config("laplace takes only `gamma`".into()));
                }
                Ok(Component::new(self.gamma.unwrap_or(0.0), LevyMeasure1D::laplace()))
            }
            "atomic" => {
                let atoms = self
                    .atoms
                    .as_ref()
                    .ok_or_else(|| Error::Config("atomic family needs `atoms`".into()))?;
                let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a[0], a[1])).collect();
                Ok(Component::new(
                    self.gamma.unwrap_or(0.0),
                    LevyMeasure1D::from_atoms(&pairs)?,
                ))
            }
            other => Err(Error::Config(format!("unknown model family `{other}`"))),
        }
    }
}

impl ModelSpec {
    fn iid_component(&self) -> Result<ComponentSpec> {
        let family = self
            .family
            .clone()
            .ok_or_else(|| Error::Config("[model] needs `family` or `components`".into()))?;
        Ok(ComponentSpec {
            family,
            lambda: self.lambda,
            gamma: self.gamma,
            atoms: self.atoms.clone(),
        })
    }

    pub fn build(&self) -> Result<IdVectorModel> {
        match &self.components {
            Some(list) => {
                if self.family.is_some() {
                    return Err(Error::Config("give either `family` or `components`".into()));
                }
                if let Some(d) = self.d {
                    if d != list.len() {
                        return Err(Error::Config(format!(
                            "d = {d} but {} components listed",
                            list.len()
                        )));
                    }
                }
                IdVectorModel::new(list.iter().map(|c| c.build()).collect::<Result<_>>()?)
            }
            None => self.build_with_dim(self.d.unwrap_or(1)),
        }
    }

    /// The iid family in dimension `d`.
    pub fn build_with_dim(&self, d: usize) -> Result<IdVectorModel> {
        if d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        IdVectorModel::iid(self.iid_component()?.build()?, d)
    }
}

impl FunctionalSpec {
    pub fn build(&self, d: usize) -> Result<Functional> {
        match self.kind.as_deref().unwrap_or("norm") {
            "norm" => Ok(Functional::EuclideanNorm),
            "min" => Ok(Functional::MinCoordinate),
            "negative-norm" => Ok(Functional::NegativeNorm),
            "linear" => Ok(Functional::linear(
                self.c.clone().unwrap_or_else(|| vec![1.0; d]),
            )),
            "a-norm" => {
                let rows = self
                    .a
                    .as_ref()
                    .ok_or_else(|| Error::Config("a-norm needs the matrix `a`".into()))?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("`a` must be square".into()));
                }
                let a = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                Functional::a_norm(a)
            }
            other => Err(Error::Config(format!("unknown functional `{other}`"))),
        }
    }
}

fn parse_tail(s: Option<&str>) -> Result<Tail> {
    match s.unwrap_or("upper") {
        "upper" => Ok(Tail::Upper),
        "lower" => Ok(Tail::Lower),
        other => Err(Error::Config(format!("unknown tail `{other}`"))),
    }
}

impl BoundSpec {
    pub fn theorem(&self) -> Result<Theorem> {
        self.theorem
            .as_deref()
            .ok_or_else(|| Error::Config("[bound] needs `theorem`".into()))?
            .parse()
    }

    pub fn params(&self) -> Result<BoundParams> {
        let bernstein = match (self.bernstein_c, self.v_sq) {
            (Some(c), Some(v)) => Some((c, v)),
            (Some(_), None) => return Err(Error::Config("`bernstein_c` needs `v_sq`".into())),
            _ => None,
        };
        Ok(BoundParams {
            eps: self.eps,
            tail: parse_tail(self.tail.as_deref())?,
            bracket: self.bracket.map(|[lower, upper]| NormBracket {
                lower,
                upper,
                estimate_backed: false,
            }),
            bernstein,
            v_sq: self.v_sq,
            radius: self.radius,
            b_k: self.b_k.clone(),
            envelope: None,
            oracle_samples: self.oracle_samples,
            oracle_seed: self.oracle_seed,
        })
    }
}

impl TestFnSpec {
    fn build(&self) -> Result<Box<dyn Fn(&[f64]) -> f64 + Sync>> {
        match self.kind.as_str() {
            "identity" => Ok(Box::new(|x: &[f64]| x.iter().sum())),
            "clip" => {
                let (lo, hi) = (self.lo.unwrap_or(0.0), self.hi.unwrap_or(2.0));
                if !(lo <= hi) {
                    return Err(Error::Config(format!("clip needs lo ≤ hi, got [{lo}, {hi}]")));
                }
                Ok(Box::new(move |x: &[f64]| x.iter().sum::<f64>().clamp(lo, hi)))
            }
            "linear" => {
                let c = self
                    .c
                    .clone()
                    .ok_or_else(|| Error::Config("linear test function needs `c`".into()))?;
                Ok(Box::new(move |x: &[f64]| {
                    x.iter().zip(&c).map(|(x, c)| x * c).sum()
                }))
            }
            other => Err(Error::Config(format!("unknown test function `{other}`"))),
        }
    }
}

/// Config plus command-line overrides.
struct Resolved {
    cfg: ExperimentConfig,
    out: PathBuf,
    seed: u64,
    n: usize,
    delta: f64,
}

impl Resolved {
    fn new(flags: &Flags) -> Result<Self> {
        let cfg = load_config(&flags.config)?;
        let out = flags
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("."));
        let seed = flags.seed.or(cfg.mc.seed).unwrap_or(1);
        let n = flags.samples.or(cfg.mc.n).unwrap_or(100_000);
        let delta = flags.delta.or(cfg.mc.delta).unwrap_or(0.01);
        if n == 0 {
            return Err(Error::Config("sample count must be positive".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("δ must be in (0, 1), got {delta}")));
        }
        fs::create_dir_all(&out)?;
        Ok(Resolved {
            cfg,
            out,
            seed,
            n,
            delta,
        })
    }

    fn writer(&self, name: &str) -> Result<csv::Writer<fs::File>> {
        csv::WriterBuilder::new()
            .flexible(true)
            .from_path(self.out.join(name))
            .map_err(csv_error)
    }

    fn mc_grid(&self) -> Option<&[f64]> {
        self.cfg.mc.grid.as_deref()
    }

    fn bound_grid(&self) -> Vec<f64> {
        self.cfg
            .bound
            .grid
            .clone()
            .or_else(|| self.cfg.mc.grid.clone())
            .unwrap_or_else(|| DEFAULT_BOUND_GRID.to_vec())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("{other:?}")),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// `beyond` past the inversion range, `estimate` when a simulation estimate
/// entered the bound, `exact` otherwise.
fn flag(p: &BoundPoint, b: &TailBound) -> String {
    let mut parts = Vec::new();
    if p.beyond {
        parts.push("beyond");
    }
    if b.estimate_backed {
        parts.push("estimate");
    }
    if parts.is_empty() {
        "exact".into()
    } else {
        parts.join("+")
    }
}

fn run_bound(r: &Resolved) -> Result<i32> {
    let model = r.cfg.model.build()?;
    let f = r.cfg.functional.build(model.dim())?;
    let theorem = r.cfg.bound.theorem()?;
    let b = assemble_tail_bound(&model, &f, theorem, &r.cfg.bound.params()?)?;
    let mut w = r.writer("bound.csv")?;
    w.write_record(["x", "exponent", "bound", "theorem", "flag"])
        .map_err(csv_error)?;
    for p in b.curve(&r.bound_grid())? {
        w.write_record([num(p.x), num(p.exponent), num(p.bound), b.theorem.tag().into(), flag(&p, &b)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn write_verify(r: &Resolved, report: &VerificationReport) -> Result<()> {
    let mut w = r.writer("verify.csv")?;
    w.write_record(["x", "freq", "ci_upper", "bound", "dominated"])
        .map_err(csv_error)?;
    for row in &report.rows {
        w.write_record([
            num(row.x),
            num(row.freq),
            num(row.ci_upper),
            num(row.bound),
            row.dominated.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn verdict(report: &VerificationReport) -> i32 {
    let failed = report.rows.iter().filter(|r| !r.dominated).count();
    println!(
        "{}: {} of {} grid points dominated (n = {}, seed = {}, delta = {})",
        report.theorem,
        report.rows.len() - failed,
        report.rows.len(),
        report.n,
        report.seed,
        report.delta
    );
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}

fn run_verify(r: &Resolved) -> Result<i32> {
    let model = r.cfg.model.build()?;
    let f = r.cfg.functional.build(model.dim())?;
    let theorem = r.cfg.bound.theorem()?;
    let b = assemble_tail_bound(&model, &f, theorem, &r.cfg.bound.params()?)?;
    let report = verify_domination(&model, &f, &b, r.n, r.seed, r.mc_grid(), r.delta)?;
    write_verify(r, &report)?;
    Ok(verdict(&report))
}

fn run_sample(r: &Resolved) -> Result<i32> {
    let model = r.cfg.model.build()?;
    let x = sample_vector(&model, r.n, r.seed)?;
    let mut w = r.writer("sample.csv")?;
    w.write_record((1..=model.dim()).map(|k| format!("x{k}")))
        .map_err(csv_error)?;
    for row in x.rows() {
        w.write_record(row.iter().map(|v| num(*v))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn run_couple(r: &Resolved) -> Result<i32> {
    let spec = r
        .cfg
        .couple
        .as_ref()
        .ok_or_else(|| Error::Config("`couple` needs a [couple] section".into()))?;
    let model = r.cfg.model.build()?;
    let f = spec.f.build()?;
    let g = spec.g.build()?;
    let (lhs, lhs_se) = covariance_lhs(&model, &*f, &*g, r.n, r.seed)?;
    let rhs = covariance_rhs(
        &model,
        &*f,
        &*g,
        spec.n_per_node.unwrap_or(r.n),
        spec.z_nodes.unwrap_or(DEFAULT_Z_NODES),
        r.seed ^ 0x636f_7570,
    )?;
    let combined = (lhs_se * lhs_se + rhs.se * rhs.se).sqrt();
    let pass = (lhs - rhs.estimate).abs() <= 3.0 * combined + 1e-12;
    let mut w = r.writer("couple.csv")?;
    w.write_record(["z", "inner_mean", "inner_se"]).map_err(csv_error)?;
    for node in &rhs.nodes {
        w.write_record([num(node.z), num(node.inner_mean), num(node.inner_se)])
            .map_err(csv_error)?;
    }
    w.write_record(["lhs", "rhs", "combined_se", "pass"]).map_err(csv_error)?;
    w.write_record([num(lhs), num(rhs.estimate), num(combined), pass.to_string()])
        .map_err(csv_error)?;
    w.flush()?;
    println!("couple: lhs = {lhs}, rhs = {}, combined se = {combined}, pass = {pass}", rhs.estimate);
    Ok(if pass { EXIT_OK } else { EXIT_ASSERTION })
}

fn run_sweep(r: &Resolved) -> Result<i32> {
    let spec = r
        .cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("`sweep` needs a [sweep] section".into()))?;
    if spec.dims.is_empty() {
        return Err(Error::Config("[sweep] dims is empty".into()));
    }
    if r.cfg.model.components.is_some() {
        return Err(Error::Config("sweep needs an iid `family` model".into()));
    }
    let theorem = r.cfg.bound.theorem()?;
    let params = r.cfg.bound.params()?;
    let grid = r.bound_grid();
    let mut columns = Vec::with_capacity(spec.dims.len());
    let mut slack = Vec::with_capacity(spec.dims.len());
    for &d in &spec.dims {
        let model = r.cfg.model.build_with_dim(d)?;
        let f = r.cfg.functional.build(d)?;
        let b = assemble_tail_bound(&model, &f, theorem, &params)?;
        columns.push(b.curve(&grid)?);
        let bracket = match params.bracket {
            Some(b) => b,
            None => model.expected_norm_bracket()?,
        };
        // (U/L)² = max_k E X_k² / min_k (E|X_k|)²
        slack.push((bracket.upper / bracket.lower).powi(2));
    }
    let mut w = r.writer("sweep.csv")?;
    let mut header = vec!["x".to_string()];
    header.extend(spec.dims.iter().map(|d| format!("bound_d{d}")));
    w.write_record(&header).map_err(csv_error)?;
    let mut max_rel = 0.0f64;
    for (i, &x) in grid.iter().enumerate() {
        let values: Vec<f64> = columns.iter().map(|c| c[i].bound).collect();
        let hi = values.iter().copied().fold(0.0, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        if hi > 0.0 {
            max_rel = max_rel.max((hi - lo) / hi);
        }
        let mut rec = vec![num(x)];
        rec.extend(values.iter().map(|v| num(*v)));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    let s0 = slack[0];
    let uniform = slack.iter().all(|s| s.is_finite() && (s - s0).abs() <= 1e-9 * s0);
    println!("sweep: max relative difference = {max_rel}, bracket slack = {s0}, uniform in d = {uniform}");
    Ok(if uniform && max_rel <= s0 { EXIT_OK } else { EXIT_ASSERTION })
}

fn run_chi(r: &Resolved) -> Result<i32> {
    let cfg = r
        .cfg
        .chi
        .as_ref()
        .ok_or_else(|| Error::Config("`chi` needs a [chi] section".into()))?;
    let model = chi_model(cfg)?;
    let f = Functional::EuclideanNorm;
    let params = BoundParams {
        eps: Some(cfg.eps),
        radius: Some(cfg.radius()),
        ..r.cfg.bound.params()?
    };
    let bennett = assemble_tail_bound(&model, &f, Theorem::Eq11a, &params)?;
    let two_regime = assemble_tail_bound(&model, &f, Theorem::Eq11aa, &params)?;
    let combined = combine_bounds(&[bennett.clone(), two_regime.clone()])?;
    let report = verify_domination(&model, &f, &bennett, r.n, r.seed, r.mc_grid(), r.delta)?;
    write_verify(r, &report)?;
    let mut w = r.writer("chi.csv")?;
    w.write_record(["x", "freq", "ci_upper", "bound", "bound_two_regime", "bound_combined", "dominated"])
        .map_err(csv_error)?;
    for row in &report.rows {
        w.write_record([
            num(row.x),
            num(row.freq),
            num(row.ci_upper),
            num(row.bound),
            num(two_regime.bound(row.x)?),
            num(combined.bound(row.x)?),
            row.dominated.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(verdict(&report))
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // the pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let (flags, job): (&Flags, fn(&Resolved) -> Result<i32>) = match &cli.command {
        Command::Bound(f) => (f, run_bound),
        Command::Verify(f) => (f, run_verify),
        Command::Sample(f) => (f, run_sample),
        Command::Couple(f) => (f, run_couple),
        Command::Sweep(f) => (f, run_sweep),
        Command::Chi(f) => (f, run_chi),
    };
    match Resolved::new(flags).and_then(|r| job(&r)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("idconc: {e}");
            EXIT_CONFIG
        }
    }
}
