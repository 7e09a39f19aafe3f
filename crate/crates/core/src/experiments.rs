//! Synthetic instance generators, path metrics and batch benchmark runners.
//!
//! Every generator is a pure function of its config. Instance `id` of a
//! batch seeded with `seed` draws from `ChaCha8Rng::seed_from_u64(seed)`
//! on stream `id`, so a single instance can be regenerated on its own.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::SolveOptions;
use crate::error::{PsmError, Result};
use crate::matrix::SparseMatrix;
use crate::path::{SolutionPath, Termination};
use crate::program::{ConstraintKind, ParametricProgram};
use crate::reductions::{
    diffnet::unvec, solve_dantzig, solve_diffnet, support_of, DantzigInstance, DiffNetInstance, DiffNetStop,
    PathInOriginalCoords,
};

pub use crate::reductions::dantzig::feasibility_violation;

/// RNG for instance `id` of a batch seeded with `seed`.
pub fn instance_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------------------
// Dantzig selector

/// How the nonzero entries of θ⁰ are drawn (`s` is a random sign, `a ~ N(0,1)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    /// `s(1 + a)`
    SignedOnePlusGaussian,
    /// `s(1 + |a|)`, bounded away from zero
    SignedOnePlusAbsGaussian,
    /// `a`
    Gaussian,
}

impl FromStr for Amplitude {
    type Err = PsmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signed-one-plus-gaussian" => Ok(Self::SignedOnePlusGaussian),
            "signed-one-plus-abs-gaussian" => Ok(Self::SignedOnePlusAbsGaussian),
            "gaussian" => Ok(Self::Gaussian),
            _ => Err(PsmError::Parse(format!("unknown amplitude rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DantzigGenConfig {
    pub n: usize,
    pub d: usize,
    pub s: usize,
    pub sigma: f64,
    pub amplitude: Amplitude,
    pub seed: u64,
}

impl DantzigGenConfig {
    /// n = 100, d = 250, s = 8, σ = 1.
    pub fn path_demo(seed: u64) -> Self {
        Self {
            n: 100,
            d: 250,
            s: 8,
            sigma: 1.0,
            amplitude: Amplitude::SignedOnePlusGaussian,
            seed,
        }
    }

    /// n = 200 with 2% of the d coordinates nonzero and Gaussian amplitudes.
    pub fn benchmark(d: usize, seed: u64) -> Self {
        Self {
            n: 200,
            d,
            s: ((d as f64) * 0.02).round().max(1.0) as usize,
            sigma: 1.0,
            amplitude: Amplitude::Gaussian,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DantzigData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub theta0: DVector<f64>,
}

/// Gaussian design with every column scaled to Euclidean norm √n, a random
/// `s`-sparse θ⁰ and `y = Xθ⁰ + ε`, `ε ~ N(0, σ²)`.
pub fn gen_dantzig(cfg: &DantzigGenConfig, id: u64) -> Result<DantzigData> {
    if cfg.n == 0 || cfg.d == 0 {
        return Err(PsmError::InvalidOptions("n and d must be positive".into()));
    }
    if cfg.s > cfg.d {
        return Err(PsmError::InvalidOptions(format!("s = {} exceeds d = {}", cfg.s, cfg.d)));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(PsmError::InvalidOptions(format!("sigma = {} must be nonnegative", cfg.sigma)));
    }
    let mut rng = instance_rng(cfg.seed, id);
    let mut x = DMatrix::from_fn(cfg.n, cfg.d, |_, _| normal(&mut rng));
    let target = (cfg.n as f64).sqrt();
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col *= target / norm;
        }
    }
    let mut theta0 = DVector::zeros(cfg.d);
    for k in sample(&mut rng, cfg.d, cfg.s).into_vec() {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let a = normal(&mut rng);
        theta0[k] = match cfg.amplitude {
            Amplitude::SignedOnePlusGaussian => sign * (1.0 + a),
            Amplitude::SignedOnePlusAbsGaussian => sign * (1.0 + a.abs()),
            Amplitude::Gaussian => a,
        };
    }
    let eps = DVector::from_fn(cfg.n, |_, _| cfg.sigma * normal(&mut rng));
    let y = &x * &theta0 + eps;
    Ok(DantzigData { x, y, theta0 })
}

/// Where a path run stops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// λ = σn√(log d / n)
    PathDemo,
    /// λ = 2σ√(n log d), the same threshold for the `1/n`-scaled constraint
    Benchmark,
    Value(f64),
    /// Stop once the estimate has this many nonzeros.
    Sparsity(usize),
    /// [`StopRule::Sparsity`] with the number of nonzeros of the generating truth.
    TrueSupport,
}

impl StopRule {
    /// The λ to stop at, for rules that name one.
    pub fn lambda(&self, n: usize, d: usize, sigma: f64) -> Option<f64> {
        let (n, d) = (n as f64, d as f64);
        match *self {
            Self::PathDemo => Some(sigma * n * (d.ln() / n).sqrt()),
            Self::Benchmark => Some(2.0 * sigma * (n * d.ln()).sqrt()),
            Self::Value(l) => Some(l),
            Self::Sparsity(_) | Self::TrueSupport => None,
        }
    }
}

impl FromStr for StopRule {
    type Err = PsmError;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || PsmError::Parse(format!("unknown stop rule {s:?}"));
        match s {
            "path-demo" => Ok(Self::PathDemo),
            "benchmark" => Ok(Self::Benchmark),
            "true-support" => Ok(Self::TrueSupport),
            _ => match s.split_once(':') {
                Some(("value", v)) => {
                    let l: f64 = v.parse().map_err(|_| bad())?;
                    if !l.is_finite() {
                        return Err(bad());
                    }
                    Ok(Self::Value(l))
                }
                Some(("sparsity", v)) => v.parse().map(Self::Sparsity).map_err(|_| bad()),
                _ => Err(bad()),
            },
        }
    }
}

impl fmt::Display for StopRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PathDemo => f.write_str("path-demo"),
            Self::Benchmark => f.write_str("benchmark"),
            Self::TrueSupport => f.write_str("true-support"),
            Self::Value(l) => write!(f, "value:{l}"),
            Self::Sparsity(k) => write!(f, "sparsity:{k}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Small random programs

/// Random `Ax ≤ b + λb̄` program with up to `max_m` rows and `max_n`
/// columns, entries of `A` and `b` uniform on [−2, 2] and `b̄ = 1`, so the
/// slack basis is optimal once λ is large. Even ids have `c̄ = 0` and
/// `c` uniform on [−2, 0]; odd ids draw `c̄` from [−2, 0] and `c` from [−2, 2].
pub fn gen_random_lp(max_m: usize, max_n: usize, seed: u64, id: u64) -> ParametricProgram {
    let mut rng = instance_rng(seed, id);
    let m = rng.random_range(1..=max_m.max(1));
    let n = rng.random_range(1..=max_n.max(1));
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-2.0..=2.0)).collect())
        .collect();
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..=2.0)).collect();
    let (c, c_bar): (Vec<f64>, Vec<f64>) = if id.is_multiple_of(2) {
        ((0..n).map(|_| rng.random_range(-2.0..=0.0)).collect(), vec![0.0; n])
    } else {
        (0..n)
            .map(|_| (rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=0.0)))
            .unzip()
    };
    ParametricProgram::new(
        SparseMatrix::from_dense_rows(&rows),
        b,
        vec![1.0; m],
        c,
        c_bar,
        ConstraintKind::LessEqual,
    )
    .expect("dimensions are consistent by construction")
}

// ---------------------------------------------------------------------------
// Records

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub id: u64,
    pub d: usize,
    pub n: usize,
    pub pivots: usize,
    pub seconds: f64,
    /// Largest violation over the breakpoints, clamped at zero.
    pub max_violation: f64,
    /// The terminal estimate's support contains the true support.
    pub support_ok: bool,
    pub terminal_lambda: f64,
    /// Unclamped version of `max_violation`.
    pub raw_max_violation: f64,
    /// Pivots taken when the true support was first contained in the estimate's.
    pub first_full_support_pivot: Option<usize>,
    pub terminal_nonzeros: usize,
    pub true_nonzeros: usize,
    pub termination: Option<Termination>,
    pub error: Option<String>,
}

impl BenchRecord {
    fn failed(id: u64, d: usize, n: usize, true_nonzeros: usize, seconds: f64, err: &PsmError) -> Self {
        Self {
            id,
            d,
            n,
            pivots: 0,
            seconds,
            max_violation: f64::NAN,
            support_ok: false,
            terminal_lambda: f64::NAN,
            raw_max_violation: f64::NAN,
            first_full_support_pivot: None,
            terminal_nonzeros: 0,
            true_nonzeros,
            termination: None,
            error: Some(err.to_string()),
        }
    }

    /// The record with its timing zeroed, for comparisons across runs.
    pub fn without_timing(&self) -> Self {
        Self { seconds: 0.0, ..self.clone() }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "id",
    "d",
    "n",
    "pivots",
    "seconds",
    "max_violation",
    "support_ok",
    "terminal_lambda",
];

pub fn write_records_csv<W: Write>(records: &[BenchRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            r.id.to_string(),
            r.d.to_string(),
            r.n.to_string(),
            r.pivots.to_string(),
            r.seconds.to_string(),
            r.max_violation.to_string(),
            r.support_ok.to_string(),
            r.terminal_lambda.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std_err: f64,
    pub median: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len();
        if k == 0 {
            return Self { mean: f64::NAN, std_err: f64::NAN, median: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let std_err = if k > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_err, median: median(values) }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}({:.3})", self.mean, self.std_err)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub runs: usize,
    pub failures: usize,
    pub pivots: Stat,
    pub seconds: Stat,
    pub max_violation: Stat,
    pub support_rate: f64,
}

impl BenchSummary {
    /// Aggregates the runs that did not fail.
    pub fn of(records: &[BenchRecord]) -> Self {
        let ok: Vec<&BenchRecord> = records.iter().filter(|r| r.error.is_none()).collect();
        let col = |f: fn(&BenchRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
        Self {
            runs: records.len(),
            failures: records.len() - ok.len(),
            pivots: Stat::of(&col(|r| r.pivots as f64)),
            seconds: Stat::of(&col(|r| r.seconds)),
            max_violation: Stat::of(&col(|r| r.max_violation)),
            support_rate: if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().filter(|r| r.support_ok).count() as f64 / ok.len() as f64
            },
        }
    }
}

fn contains_all(support: &[usize], truth: &[usize]) -> bool {
    truth.iter().all(|k| support.binary_search(k).is_ok())
}

/// Pivots taken when the estimate's support first contains `truth`. The
/// dictionary of segment `k` is the one reached after `k` pivots.
fn first_full_support(coords: &PathInOriginalCoords, truth: &[usize]) -> Option<usize> {
    coords
        .segments
        .iter()
        .position(|seg| contains_all(&support_of(&seg.value_at(seg.lambda_lo, coords.dim)), truth))
}

// ---------------------------------------------------------------------------
// Dantzig benchmark

/// Solves one Dantzig instance and scores it against `theta0` (when known).
pub fn evaluate_dantzig(
    id: u64,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    theta0: Option<&DVector<f64>>,
    lambda_stop: f64,
    opts: &SolveOptions,
) -> (BenchRecord, Option<(SolutionPath, PathInOriginalCoords)>) {
    let (n, d) = x.shape();
    let truth = theta0.map(|t| support_of(t.as_slice())).unwrap_or_default();
    let start = Instant::now();
    let solved = DantzigInstance::new(x.clone(), y.clone())
        .and_then(|inst| solve_dantzig(&inst, &SolveOptions { lambda_target: lambda_stop, ..opts.clone() }));
    let seconds = start.elapsed().as_secs_f64();
    let (path, coords) = match solved {
        Ok(r) => r,
        Err(e) => return (BenchRecord::failed(id, d, n, truth.len(), seconds, &e), None),
    };
    let raw = coords
        .breakpoints
        .iter()
        .map(|bp| feasibility_violation(x, y, &bp.values, bp.lambda))
        .fold(f64::NEG_INFINITY, f64::max);
    let terminal = coords.terminal();
    let terminal_support = terminal.map(|b| b.support.clone()).unwrap_or_default();
    let record = BenchRecord {
        id,
        d,
        n,
        pivots: path.pivots.len(),
        seconds,
        max_violation: raw.max(0.0),
        support_ok: theta0.is_some() && contains_all(&terminal_support, &truth),
        terminal_lambda: path.terminal_lambda,
        raw_max_violation: raw,
        first_full_support_pivot: theta0.and_then(|_| first_full_support(&coords, &truth)),
        terminal_nonzeros: terminal_support.len(),
        true_nonzeros: truth.len(),
        termination: Some(path.termination),
        error: None,
    };
    (record, Some((path, coords)))
}

/// Generates and solves `reps` instances (ids `0..reps`) in parallel.
pub fn run_dantzig_bench(
    cfg: &DantzigGenConfig,
    rule: StopRule,
    reps: usize,
    opts: &SolveOptions,
) -> Result<Vec<BenchRecord>> {
    let lambda = rule
        .lambda(cfg.n, cfg.d, cfg.sigma)
        .ok_or_else(|| PsmError::InvalidOptions(format!("stop rule {rule} names no lambda for the Dantzig selector")))?;
    (0..reps as u64)
        .into_par_iter()
        .map(|id| {
            let data = gen_dantzig(cfg, id)?;
            let (rec, _) = evaluate_dantzig(id, &data.x, &data.y, Some(&data.theta0), lambda, opts);
            if let Some(e) = &rec.error {
                log::warn!("dantzig instance {id}: {e}");
            }
            Ok(rec)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Differential networks

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffNetGenConfig {
    pub d: usize,
    /// Samples per population.
    pub n: usize,
    pub sparsity: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffNetData {
    pub sx: DMatrix<f64>,
    pub sy: DMatrix<f64>,
    /// `Ω_x − Ω_y = −D` of the generating model.
    pub delta0: DMatrix<f64>,
    /// The sparse perturbation `D`.
    pub d_matrix: DMatrix<f64>,
    pub sigma_x: DMatrix<f64>,
    pub sigma_y: DMatrix<f64>,
}

const DIFFNET_RETRIES: usize = 20;

/// Covariance pair whose precision matrices differ by a sparse PD matrix,
/// and the centered sample covariances of `n` draws from each.
pub fn gen_diffnet(cfg: &DiffNetGenConfig, id: u64) -> Result<DiffNetData> {
    if cfg.d == 0 || cfg.n < 2 {
        return Err(PsmError::InvalidOptions("need d >= 1 and n >= 2".into()));
    }
    if !(0.0..1.0).contains(&cfg.sparsity) {
        return Err(PsmError::InvalidOptions(format!("sparsity {} must lie in [0, 1)", cfg.sparsity)));
    }
    let mut rng = instance_rng(cfg.seed, id);
    for attempt in 0..DIFFNET_RETRIES {
        if let Some(data) = try_gen_diffnet(cfg, &mut rng) {
            return Ok(data);
        }
        log::debug!("diffnet instance {id}: attempt {attempt} was not positive definite");
    }
    Err(PsmError::Solver(format!(
        "no positive definite model after {DIFFNET_RETRIES} attempts"
    )))
}

fn try_gen_diffnet(cfg: &DiffNetGenConfig, rng: &mut ChaCha8Rng) -> Option<DiffNetData> {
    let d = cfg.d;
    let u = DMatrix::from_fn(d, d, |_, _| normal(rng));
    let lam = DVector::from_fn(d, |_, _| rng.random_range(1.0..2.0));
    let sigma_x = symmetrize(u.transpose() * DMatrix::from_diagonal(&lam) * &u);
    let mut d1 = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            if rng.random_bool(cfg.sparsity) {
                let v = normal(rng);
                d1[(i, j)] = v;
                d1[(j, i)] = v;
            }
        }
    }
    let lmin = d1.clone().symmetric_eigenvalues().min();
    let dm = &d1 + DMatrix::identity(d, d) * (2.0 * lmin.abs());
    let omega_x = symmetrize(sigma_x.clone().cholesky()?.inverse());
    let omega_y = &omega_x + &dm;
    let sigma_y = symmetrize(omega_y.cholesky()?.inverse());
    let sx = sample_covariance(&sigma_x, cfg.n, rng)?;
    let sy = sample_covariance(&sigma_y, cfg.n, rng)?;
    Some(DiffNetData { sx, sy, delta0: -&dm, d_matrix: dm, sigma_x, sigma_y })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `(1/n) Σ (v_j − v̄)(v_j − v̄)ᵀ` over `n` draws from `N(0, sigma)`.
fn sample_covariance(sigma: &DMatrix<f64>, n: usize, rng: &mut ChaCha8Rng) -> Option<DMatrix<f64>> {
    let d = sigma.nrows();
    let l = sigma.clone().cholesky()?.unpack();
    let z = DMatrix::from_fn(d, n, |_, _| normal(rng));
    let mut v = l * z;
    let mean = v.column_mean();
    for mut c in v.column_iter_mut() {
        c -= &mean;
    }
    Some(symmetrize(&v * v.transpose() / n as f64))
}

/// `‖S_X Δ S_Y − S_X + S_Y‖max − λ`
pub fn diffnet_violation(inst: &DiffNetInstance, delta: &DMatrix<f64>, lambda: f64) -> f64 {
    (&inst.x * delta * &inst.z - &inst.y).amax() - lambda
}

fn matrix_support(m: &DMatrix<f64>) -> Vec<usize> {
    support_of(m.as_slice())
}

/// Solves one differential-network instance and scores it against `delta0`
/// (when known) by support only; the estimate targets `Ω_y − Ω_x`.
pub fn evaluate_diffnet(
    id: u64,
    sx: &DMatrix<f64>,
    sy: &DMatrix<f64>,
    delta0: Option<&DMatrix<f64>>,
    stop: DiffNetStop,
    opts: &SolveOptions,
    n: usize,
) -> (BenchRecord, Option<(SolutionPath, PathInOriginalCoords)>) {
    let d = sx.nrows();
    let truth = delta0.map(matrix_support).unwrap_or_default();
    let start = Instant::now();
    let solved = DiffNetInstance::from_covariances(sx.clone(), sy.clone())
        .and_then(|inst| solve_diffnet(&inst, opts, stop).map(|r| (inst, r)));
    let seconds = start.elapsed().as_secs_f64();
    let (inst, (path, coords)) = match solved {
        Ok(r) => r,
        Err(e) => return (BenchRecord::failed(id, d, n, truth.len(), seconds, &e), None),
    };
    let layout = inst.layout();
    let raw = coords
        .breakpoints
        .iter()
        .map(|bp| diffnet_violation(&inst, &unvec(&bp.values, layout), bp.lambda))
        .fold(f64::NEG_INFINITY, f64::max);
    let terminal_support = coords.terminal().map(|b| b.support.clone()).unwrap_or_default();
    let record = BenchRecord {
        id,
        d,
        n,
        pivots: path.pivots.len(),
        seconds,
        max_violation: raw.max(0.0),
        support_ok: delta0.is_some() && contains_all(&terminal_support, &truth),
        terminal_lambda: path.terminal_lambda,
        raw_max_violation: raw,
        first_full_support_pivot: delta0.and_then(|_| first_full_support(&coords, &truth)),
        terminal_nonzeros: terminal_support.len(),
        true_nonzeros: truth.len(),
        termination: Some(path.termination),
        error: None,
    };
    (record, Some((path, coords)))
}

/// Maps a stop rule to the differential-network solver's, resolving
/// [`StopRule::TrueSupport`] against `delta0`.
pub fn diffnet_stop(rule: StopRule, delta0: Option<&DMatrix<f64>>) -> Result<DiffNetStop> {
    match rule {
        StopRule::Value(l) => Ok(DiffNetStop::Lambda(l)),
        StopRule::Sparsity(k) => Ok(DiffNetStop::Sparsity(k)),
        StopRule::TrueSupport => delta0
            .map(|t| DiffNetStop::Sparsity(matrix_support(t).len()))
            .ok_or_else(|| PsmError::InvalidOptions("true-support needs the generating matrix".into())),
        StopRule::PathDemo | StopRule::Benchmark => Err(PsmError::InvalidOptions(format!(
            "stop rule {rule} applies to the Dantzig selector only"
        ))),
    }
}

pub fn run_diffnet_bench(
    cfg: &DiffNetGenConfig,
    rule: StopRule,
    reps: usize,
    opts: &SolveOptions,
) -> Result<Vec<BenchRecord>> {
    diffnet_stop(rule, Some(&DMatrix::zeros(1, 1)))?;
    (0..reps as u64)
        .into_par_iter()
        .map(|id| {
            let data = gen_diffnet(cfg, id)?;
            let stop = diffnet_stop(rule, Some(&data.delta0))?;
            let (rec, _) = evaluate_diffnet(id, &data.sx, &data.sy, Some(&data.delta0), stop, opts, cfg.n);
            if let Some(e) = &rec.error {
                log::warn!("diffnet instance {id}: {e}");
            }
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dantzig_shapes_and_sparsity() {
        let data = gen_dantzig(&DantzigGenConfig::path_demo(7), 0).unwrap();
        assert_eq!(data.x.shape(), (100, 250));
        assert_eq!(data.y.len(), 100);
        assert_eq!(data.theta0.iter().filter(|v| **v != 0.0).count(), 8);
        for c in data.x.column_iter() {
            assert!((c.norm() - 10.0).abs() < 1e-10);
        }
    }

    #[test]
    fn noiseless_response() {
        let cfg = DantzigGenConfig { sigma: 0.0, ..DantzigGenConfig::path_demo(3) };
        let data = gen_dantzig(&cfg, 2).unwrap();
        assert_eq!(data.y, &data.x * &data.theta0);
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = DantzigGenConfig::path_demo(11);
        assert_eq!(gen_dantzig(&cfg, 4).unwrap(), gen_dantzig(&cfg, 4).unwrap());
        assert_ne!(gen_dantzig(&cfg, 4).unwrap().x, gen_dantzig(&cfg, 5).unwrap().x);
        let dcfg = DiffNetGenConfig { d: 6, n: 30, sparsity: 0.2, seed: 1 };
        assert_eq!(gen_diffnet(&dcfg, 0).unwrap(), gen_diffnet(&dcfg, 0).unwrap());
    }

    #[test]
    fn rejects_oversized_support() {
        let cfg = DantzigGenConfig { s: 300, ..DantzigGenConfig::path_demo(0) };
        assert!(gen_dantzig(&cfg, 0).is_err());
    }

    #[test]
    fn diffnet_construction_identities() {
        let cfg = DiffNetGenConfig { d: 25, n: 100, sparsity: 0.02, seed: 9 };
        let g = gen_diffnet(&cfg, 0).unwrap();
        assert_eq!(g.sx.shape(), (25, 25));
        let ox = g.sigma_x.clone().try_inverse().unwrap();
        let oy = g.sigma_y.clone().try_inverse().unwrap();
        let gap = (&oy - &ox - &g.d_matrix).amax();
        assert!(gap < 1e-6 * (1.0 + oy.amax()), "{gap}");
        assert!(g.sigma_x.clone().symmetric_eigenvalues().min() > 0.0);
        assert!(g.sigma_y.clone().symmetric_eigenvalues().min() > 0.0);
        assert!(g.sx.clone().symmetric_eigenvalues().min() > -1e-10);
        assert_eq!(g.delta0, -&g.d_matrix);
    }

    #[test]
    fn zero_sparsity_is_a_null_perturbation() {
        let g = gen_diffnet(&DiffNetGenConfig { d: 4, n: 20, sparsity: 0.0, seed: 2 }, 0).unwrap();
        assert_eq!(g.delta0, DMatrix::zeros(4, 4));
    }

    #[test]
    fn stop_rules_parse_and_print() {
        for s in ["path-demo", "benchmark", "value:0.5", "sparsity:12", "true-support"] {
            assert_eq!(s.parse::<StopRule>().unwrap().to_string(), s);
        }
        assert!("value:abc".parse::<StopRule>().is_err());
        assert!("value:inf".parse::<StopRule>().is_err());
        assert!("fast".parse::<StopRule>().is_err());
        let l = StopRule::PathDemo.lambda(100, 250, 1.0).unwrap();
        assert!((l - (100.0 * 250f64.ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn violation_metric_boundaries() {
        let data = gen_dantzig(&DantzigGenConfig::path_demo(1), 0).unwrap();
        let top = data.x.tr_mul(&data.y).amax();
        let zero = vec![0.0; 250];
        assert!(feasibility_violation(&data.x, &data.y, &zero, top).abs() < 1e-12);
        assert!((feasibility_violation(&data.x, &data.y, &zero, top / 2.0) - top / 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_rep_bench_is_deterministic() {
        let cfg = DantzigGenConfig { n: 30, d: 40, s: 3, ..DantzigGenConfig::path_demo(5) };
        let opts = SolveOptions::default();
        let a = run_dantzig_bench(&cfg, StopRule::PathDemo, 1, &opts).unwrap();
        let b = run_dantzig_bench(&cfg, StopRule::PathDemo, 1, &opts).unwrap();
        assert_eq!(a[0].without_timing(), b[0].without_timing());
        assert!(a[0].error.is_none());
        assert!(a[0].max_violation <= 1e-9);
    }

    #[test]
    fn summary_statistics() {
        let s = Stat::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!((s.std_err - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.to_string(), "2.500(0.645)");
    }

    #[test]
    fn records_csv_header() {
        let mut buf = Vec::new();
        write_records_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,d,n,pivots,seconds,max_violation,support_ok,terminal_lambda\n");
    }

    #[test]
    fn small_diffnet_bench_runs() {
        let cfg = DiffNetGenConfig { d: 5, n: 40, sparsity: 0.1, seed: 3 };
        let recs = run_diffnet_bench(&cfg, StopRule::TrueSupport, 2, &SolveOptions::default()).unwrap();
        for r in &recs {
            assert!(r.error.is_none(), "{:?}", r.error);
            assert!(r.terminal_nonzeros >= r.true_nonzeros || r.termination != Some(Termination::ReachedTarget));
            assert!(r.max_violation <= 1e-8, "{}", r.max_violation);
        }
    }
}
