//! ℓ1-constrained hinge-loss SVM:
//! `min Σ (1 − y_i(θ₀ + θᵀx_i))₊  s.t.  ‖θ‖₁ ≤ λ`.
//!
//! Columns are `(t⁺, t⁻, θ⁺, θ⁻, θ₀⁺, θ₀⁻, w)` with one scalar slack `w` on
//! the norm row; the `n` margin rows read `t⁺ − t⁻ + Zθ⁺ − Zθ⁻ + yθ₀⁺ − yθ₀⁻ = 1`
//! where row `i` of `Z` is `y_i x_iᵀ`.

use nalgebra::DMatrix;

use super::PathInOriginalCoords;
use crate::engine::{find_large_lambda_basis, solve_path, SolveOptions};
use crate::error::{PsmError, Result};
use crate::matrix::SparseMatrix;
use crate::path::SolutionPath;
use crate::program::{ConstraintKind, ParametricProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmInstance {
    /// `n × d`, one sample per row.
    pub features: DMatrix<f64>,
    pub labels: Vec<f64>,
}

impl SvmInstance {
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(PsmError::InvalidProgram("feature matrix is empty".into()));
        }
        if features.nrows() != labels.len() {
            return Err(PsmError::InvalidProgram(format!(
                "{} samples but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(PsmError::InvalidProgram(format!("label {l} is not +1 or -1")));
        }
        Ok(Self { features, labels })
    }
}

/// Column offsets of the SVM program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SvmLayout {
    pub n: usize,
    pub d: usize,
}

impl SvmLayout {
    pub fn t_plus(&self, i: usize) -> usize {
        i
    }
    pub fn t_minus(&self, i: usize) -> usize {
        self.n + i
    }
    pub fn theta_plus(&self, k: usize) -> usize {
        2 * self.n + k
    }
    pub fn theta_minus(&self, k: usize) -> usize {
        2 * self.n + self.d + k
    }
    pub fn theta0_plus(&self) -> usize {
        2 * self.n + 2 * self.d
    }
    pub fn theta0_minus(&self) -> usize {
        2 * self.n + 2 * self.d + 1
    }
    pub fn w(&self) -> usize {
        2 * self.n + 2 * self.d + 2
    }
    pub fn num_cols(&self) -> usize {
        2 * self.n + 2 * self.d + 3
    }
    pub fn num_rows(&self) -> usize {
        self.n + 1
    }
}

/// The program and the basis `{t⁺, w}`, which is primal feasible for every
/// λ ≥ 0 but usually not dual feasible; [`solve_svm`] repairs that.
pub fn build_svm(inst: &SvmInstance) -> (ParametricProgram, Vec<usize>) {
    let (n, d) = inst.features.shape();
    let l = SvmLayout { n, d };
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); l.num_cols()];
    for i in 0..n {
        let yi = inst.labels[i];
        cols[l.t_plus(i)].push((i, 1.0));
        cols[l.t_minus(i)].push((i, -1.0));
        for k in 0..d {
            let z = yi * inst.features[(i, k)];
            cols[l.theta_plus(k)].push((i, z));
            cols[l.theta_minus(k)].push((i, -z));
        }
        cols[l.theta0_plus()].push((i, yi));
        cols[l.theta0_minus()].push((i, -yi));
    }
    for k in 0..d {
        cols[l.theta_plus(k)].push((n, 1.0));
        cols[l.theta_minus(k)].push((n, 1.0));
    }
    cols[l.w()].push((n, 1.0));
    let a = SparseMatrix::from_columns(n + 1, cols);

    let mut b = vec![1.0; n + 1];
    b[n] = 0.0;
    let mut b_bar = vec![0.0; n + 1];
    b_bar[n] = 1.0;
    let mut c = vec![0.0; l.num_cols()];
    c[..n].fill(-1.0);
    let program = ParametricProgram::new(a, b, b_bar, c, vec![0.0; l.num_cols()], ConstraintKind::Equality)
        .expect("dimensions are consistent by construction");
    let mut basis: Vec<usize> = (0..n).map(|i| l.t_plus(i)).collect();
    basis.push(l.w());
    (program, basis)
}

/// (θ, θ₀)(λ) as a `d + 1` vector with θ₀ last.
pub fn recover_svm(path: &SolutionPath, n: usize, d: usize) -> Result<PathInOriginalCoords> {
    let l = SvmLayout { n, d };
    let mut pairs: Vec<(usize, usize)> = (0..d).map(|k| (l.theta_plus(k), l.theta_minus(k))).collect();
    pairs.push((l.theta0_plus(), l.theta0_minus()));
    PathInOriginalCoords::from_path(
        path,
        d + 1,
        |j| {
            if (l.theta_plus(0)..l.theta_minus(0)).contains(&j) {
                Some((j - l.theta_plus(0), 1.0))
            } else if (l.theta_minus(0)..l.theta0_plus()).contains(&j) {
                Some((j - l.theta_minus(0), -1.0))
            } else if j == l.theta0_plus() {
                Some((d, 1.0))
            } else if j == l.theta0_minus() {
                Some((d, -1.0))
            } else {
                None
            }
        },
        &pairs,
    )
}

/// Builds the program, finds a basis that is optimal for all large λ, and
/// solves the path.
pub fn solve_svm(inst: &SvmInstance, opts: &SolveOptions) -> Result<(SolutionPath, PathInOriginalCoords)> {
    let (program, start) = build_svm(inst);
    let basis = find_large_lambda_basis(&program, &start, opts)?;
    let path = solve_path(&program, opts, Some(&basis))?;
    let coords = recover_svm(&path, inst.features.nrows(), inst.features.ncols())?;
    Ok((path, coords))
}

/// `sign(θ₀ + θᵀz)` with ties sent to +1; `model` is a `d + 1` vector with θ₀ last.
pub fn predict(model: &[f64], z: &[f64]) -> f64 {
    let (theta, theta0) = model.split_at(model.len() - 1);
    let s = theta0[0] + theta.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
    if s >= 0.0 { 1.0 } else { -1.0 }
}
