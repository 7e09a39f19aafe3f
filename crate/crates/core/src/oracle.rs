//! Brute-force reference solver: enumerates every basis of a small program.
//!
//! Nothing here shares code with the simplex engine; the elimination
//! routines are local so that a bug in one cannot hide in the other.

use serde::{Deserialize, Serialize};

use crate::error::{PsmError, Result};
use crate::path::SolutionPath;
use crate::program::ParametricProgram;

pub const MAX_COLUMNS: usize = 24;
pub const MAX_BASES: u64 = 200_000;

const FEAS_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OracleOutcome {
    /// `x` in the columns of the equality form (originals, then slacks).
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl OracleOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            OracleOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

// Square LU with partial pivoting on a row-major copy.
struct SmallLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl SmallLu {
    fn new(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))?;
            if a[piv * n + k].abs() <= SINGULAR_TOL * scale.max(1e-300) {
                return None;
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
            }
            for i in k + 1..n {
                let f = a[i * n + k] / a[k * n + k];
                a[i * n + k] = f;
                for c in k + 1..n {
                    a[i * n + c] -= f * a[k * n + c];
                }
            }
        }
        Some(Self { n, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.lu[i * n + k] * y[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.lu[i * n + k] * y[k];
            }
            y[i] /= self.lu[i * n + i];
        }
        y
    }

    fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.lu[k * n + i] * z[k];
            }
            z[i] /= self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= self.lu[k * n + i] * z[k];
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

struct Candidate {
    cols: Vec<usize>,
    lu: SmallLu,
    xb: Vec<f64>,
    xb_bar: Vec<f64>,
}

/// A program reduced to independent rows with all bases precomputed.
pub struct BruteForce {
    // Columns of the equality form before splitting free variables.
    num_vars: usize,
    // Column map of the split system: (original column, sign).
    col_map: Vec<(usize, f64)>,
    rows: usize,
    // Reduced system, row-major rows × cols.
    a: Vec<f64>,
    c: Vec<f64>,
    c_bar: Vec<f64>,
    // Zero rows of the reduced system: their right-hand sides must vanish.
    residual_rows: Vec<(f64, f64)>,
    rhs_scale: f64,
    candidates: Vec<Candidate>,
}

fn binomial_capped(n: usize, k: usize, cap: u64) -> u64 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return cap + 1;
        }
    }
    acc as u64
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

impl BruteForce {
    pub fn new(program: &ParametricProgram) -> Result<Self> {
        let (sf, _) = program.to_standard_form();
        let (m, n) = (sf.num_rows(), sf.num_cols());
        let free = sf.free_mask();
        let mut col_map: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
        col_map.extend((0..n).filter(|&j| free[j]).map(|j| (j, -1.0)));
        let nc = col_map.len();
        if nc > MAX_COLUMNS {
            return Err(PsmError::SizeGuard(format!("{nc} columns exceed the limit of {MAX_COLUMNS}")));
        }

        // Augmented [A | b | b̄], row-major.
        let w = nc + 2;
        let mut aug = vec![0.0; m * w];
        for (k, &(j, sign)) in col_map.iter().enumerate() {
            for i in 0..m {
                aug[i * w + k] = sign * sf.a().get(i, j);
            }
        }
        for i in 0..m {
            aug[i * w + nc] = sf.b()[i];
            aug[i * w + nc + 1] = sf.b_bar()[i];
        }
        let scale = aug.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        let mut rank = 0;
        for col in 0..nc {
            if rank == m {
                break;
            }
            let piv = (rank..m).max_by(|&i, &j| aug[i * w + col].abs().total_cmp(&aug[j * w + col].abs())).unwrap();
            if aug[piv * w + col].abs() <= 1e-12 * scale {
                continue;
            }
            for c in 0..w {
                aug.swap(rank * w + c, piv * w + c);
            }
            for i in rank + 1..m {
                let f = aug[i * w + col] / aug[rank * w + col];
                if f != 0.0 {
                    for c in col..w {
                        aug[i * w + c] -= f * aug[rank * w + c];
                    }
                }
            }
            rank += 1;
        }
        let residual_rows = (rank..m).map(|i| (aug[i * w + nc], aug[i * w + nc + 1])).collect();
        let mut a = Vec::with_capacity(rank * nc);
        let mut b = Vec::with_capacity(rank);
        let mut b_bar = Vec::with_capacity(rank);
        for i in 0..rank {
            a.extend_from_slice(&aug[i * w..i * w + nc]);
            b.push(aug[i * w + nc]);
            b_bar.push(aug[i * w + nc + 1]);
        }
        let count = binomial_capped(nc, rank, MAX_BASES);
        if count > MAX_BASES {
            return Err(PsmError::SizeGuard(format!("C({nc}, {rank}) exceeds {MAX_BASES} bases")));
        }
        let c = col_map.iter().map(|&(j, s)| s * sf.c()[j]).collect();
        let c_bar = col_map.iter().map(|&(j, s)| s * sf.c_bar()[j]).collect();

        let mut candidates = Vec::new();
        let mut idx: Vec<usize> = (0..rank).collect();
        loop {
            let mut bm = vec![0.0; rank * rank];
            for (p, &j) in idx.iter().enumerate() {
                for i in 0..rank {
                    bm[i * rank + p] = a[i * nc + j];
                }
            }
            if let Some(lu) = SmallLu::new(bm, rank) {
                let xb = lu.solve(&b);
                let xb_bar = lu.solve(&b_bar);
                candidates.push(Candidate {
                    cols: idx.clone(),
                    lu,
                    xb,
                    xb_bar,
                });
            }
            if rank == 0 || !next_combination(&mut idx, nc) {
                break;
            }
        }
        Ok(Self {
            num_vars: n,
            col_map,
            rows: rank,
            a,
            c,
            c_bar,
            residual_rows,
            rhs_scale: scale,
            candidates,
        })
    }

    pub fn num_bases(&self) -> usize {
        self.candidates.len()
    }

    pub fn solve(&self, lambda: f64) -> OracleOutcome {
        let tol = FEAS_TOL * (1.0 + self.rhs_scale * (1.0 + lambda.abs()));
        if self
            .residual_rows
            .iter()
            .any(|&(r, rb)| (r + lambda * rb).abs() > tol)
        {
            return OracleOutcome::Infeasible;
        }
        let nc = self.col_map.len();
        let r = self.rows;
        let cost: Vec<f64> = self.c.iter().zip(&self.c_bar).map(|(c, cb)| c + lambda * cb).collect();
        let cost_scale = cost.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut best: Option<(f64, usize)> = None;
        for (k, cand) in self.candidates.iter().enumerate() {
            let x: Vec<f64> = cand.xb.iter().zip(&cand.xb_bar).map(|(a, b)| a + lambda * b).collect();
            if x.iter().any(|&v| v < -tol) {
                continue;
            }
            let value: f64 = cand.cols.iter().zip(&x).map(|(&j, v)| cost[j] * v).sum();
            if best.is_none_or(|(bv, _)| value > bv) {
                best = Some((value, k));
            }
            // Improving column with a nonpositive tableau column: a ray.
            let cb: Vec<f64> = cand.cols.iter().map(|&j| cost[j]).collect();
            let y = cand.lu.solve_t(&cb);
            for j in 0..nc {
                if cand.cols.contains(&j) {
                    continue;
                }
                let col: Vec<f64> = (0..r).map(|i| self.a[i * nc + j]).collect();
                let zj: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - cost[j];
                if zj < -1e-9 * cost_scale {
                    let d = cand.lu.solve(&col);
                    let dscale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                    if d.iter().all(|&v| v <= 1e-12 * dscale) {
                        return OracleOutcome::Unbounded;
                    }
                }
            }
        }
        match best {
            None => OracleOutcome::Infeasible,
            Some((value, k)) => {
                let cand = &self.candidates[k];
                let mut x = vec![0.0; self.num_vars];
                for (&j, (a, b)) in cand.cols.iter().zip(cand.xb.iter().zip(&cand.xb_bar)) {
                    let (orig, sign) = self.col_map[j];
                    x[orig] += sign * (a + lambda * b);
                }
                OracleOutcome::Optimal { x, value }
            }
        }
    }
}

/// Optimum of `program` at a fixed `lambda` by basis enumeration.
pub fn brute_force_optimum(program: &ParametricProgram, lambda: f64) -> Result<OracleOutcome> {
    Ok(BruteForce::new(program)?.solve(lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub samples: usize,
    pub worst_gap: f64,
    pub worst_lambda: f64,
    /// Samples at which the oracle found no optimum.
    pub status_mismatches: Vec<(f64, String)>,
    pub passed: bool,
}

/// Evenly spaced points of `[lo, hi]`, both ends included. An infinite upper
/// end is replaced by `lo + max(1, |lo|)`.
pub fn sample_lambdas(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let hi = if hi.is_finite() { hi } else { lo + lo.abs().max(1.0) };
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Compares the path objective against the oracle at `samples_per_segment`
/// points of every segment. `program` is the program the path was solved
/// from (inequality programs are converted the same way the engine does).
pub fn check_path_against_oracle(
    program: &ParametricProgram,
    path: &SolutionPath,
    samples_per_segment: usize,
) -> Result<OracleReport> {
    let (sf, _) = program.to_standard_form();
    let oracle = BruteForce::new(program)?;
    let mut report = OracleReport {
        samples: 0,
        worst_gap: 0.0,
        worst_lambda: f64::NAN,
        status_mismatches: Vec::new(),
        passed: true,
    };
    for seg in &path.segments {
        for lam in sample_lambdas(seg.lambda_lo, seg.lambda_hi, samples_per_segment) {
            report.samples += 1;
            let ours = seg.objective(&sf, lam);
            match oracle.solve(lam) {
                OracleOutcome::Optimal { value, .. } => {
                    let gap = (ours - value).abs() / (1.0 + value.abs());
                    if !(gap <= report.worst_gap) {
                        report.worst_gap = gap;
                        report.worst_lambda = lam;
                    }
                }
                other => report.status_mismatches.push((lam, format!("{other:?}"))),
            }
        }
    }
    report.passed = report.worst_gap <= 1e-7 && report.status_mismatches.is_empty();
    Ok(report)
}
