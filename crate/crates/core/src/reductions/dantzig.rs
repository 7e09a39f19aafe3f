//! Dantzig selector: `min ‖θ‖₁  s.t.  ‖Xᵀ(y − Xθ)‖∞ ≤ λ`.
//!
//! With `θ = θ⁺ − θ⁻` and `G = XᵀX` the program is
//! `max −1ᵀ(θ⁺, θ⁻)  s.t.  [G −G; −G G](θ⁺, θ⁻) ≤ (Xᵀy, −Xᵀy) + λ1`, whose
//! slack basis is optimal for `λ ≥ ‖Xᵀy‖∞`.

use nalgebra::{DMatrix, DVector};

use super::PathInOriginalCoords;
use crate::engine::{solve_path, SolveOptions};
use crate::error::{PsmError, Result};
use crate::matrix::SparseMatrix;
use crate::path::SolutionPath;
use crate::program::{ConstraintKind, ParametricProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct DantzigInstance {
    /// `n × d` design.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl DantzigInstance {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(PsmError::InvalidProgram("design matrix is empty".into()));
        }
        if x.nrows() != y.len() {
            return Err(PsmError::InvalidProgram(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// `Xᵀy`
    pub fn correlation(&self) -> DVector<f64> {
        self.x.tr_mul(&self.y)
    }

    /// `‖Xᵀy‖∞`, the smallest λ at which θ = 0 is optimal.
    pub fn lambda_max(&self) -> f64 {
        self.correlation().amax()
    }
}

pub fn build_dantzig(inst: &DantzigInstance) -> ParametricProgram {
    let d = inst.d();
    let g = inst.x.tr_mul(&inst.x);
    let xty = inst.correlation();
    let a = SparseMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let sign = if (i < d) == (j < d) { 1.0 } else { -1.0 };
        sign * g[(i % d, j % d)]
    });
    let b: Vec<f64> = xty.iter().copied().chain(xty.iter().map(|v| -v)).collect();
    ParametricProgram::new(
        a,
        b,
        vec![1.0; 2 * d],
        vec![-1.0; 2 * d],
        vec![0.0; 2 * d],
        ConstraintKind::LessEqual,
    )
    .expect("dimensions are consistent by construction")
}

/// θ(λ) from a path of [`build_dantzig`]'s program.
pub fn recover_dantzig(path: &SolutionPath, d: usize) -> Result<PathInOriginalCoords> {
    let pairs: Vec<(usize, usize)> = (0..d).map(|k| (k, d + k)).collect();
    PathInOriginalCoords::from_path(
        path,
        d,
        |j| match j {
            j if j < d => Some((j, 1.0)),
            j if j < 2 * d => Some((j - d, -1.0)),
            _ => None,
        },
        &pairs,
    )
}

pub fn solve_dantzig(inst: &DantzigInstance, opts: &SolveOptions) -> Result<(SolutionPath, PathInOriginalCoords)> {
    let program = build_dantzig(inst);
    let path = solve_path(&program, opts, None)?;
    let theta = recover_dantzig(&path, inst.d())?;
    Ok((path, theta))
}

/// `‖XᵀXθ − Xᵀy‖∞ − λ`; positive values are constraint violations.
pub fn feasibility_violation(x: &DMatrix<f64>, y: &DVector<f64>, theta: &[f64], lambda: f64) -> f64 {
    let theta = DVector::from_column_slice(theta);
    let r = x.tr_mul(&(x * theta - y));
    r.amax() - lambda
}
