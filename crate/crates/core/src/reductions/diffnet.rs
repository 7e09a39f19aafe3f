//! Differential network estimation:
//! `min ‖D‖₁  s.t.  ‖X D Z − Y‖max ≤ λ`, with `X = S_X`, `Z = S_Y` and
//! `Y = S_X − S_Y` for two sample covariances.
//!
//! The auxiliary matrix `C = X D` is a block of free columns, which keeps
//! the constraint matrix sparse:
//!
//! ```text
//!   (I ⊗ X) vec(D⁺ − D⁻) − vec(C)        = 0
//!   (Zᵀ ⊗ I) vec(C)       + w₁           = vec(Y)  + λ1
//!  −(Zᵀ ⊗ I) vec(C)       + w₂           = −vec(Y) + λ1
//! ```
//!
//! `vec` stacks columns. The starting basis is all of `C` and both slack
//! blocks; it is a permuted triangle, so large instances can use the
//! bordered factorization.

use std::ops::ControlFlow;

use nalgebra::DMatrix;

use super::PathInOriginalCoords;
use crate::engine::{solve_path_with_observer, SolveOptions};
use crate::error::{PsmError, Result};
use crate::matrix::SparseMatrix;
use crate::path::{PathSegment, SolutionPath};
use crate::program::{ConstraintKind, ParametricProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct DiffNetInstance {
    /// `m₁ × d₁`
    pub x: DMatrix<f64>,
    /// `d₂ × m₂`
    pub z: DMatrix<f64>,
    /// `m₁ × m₂`
    pub y: DMatrix<f64>,
}

impl DiffNetInstance {
    pub fn new(x: DMatrix<f64>, z: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.is_empty() || z.is_empty() {
            return Err(PsmError::InvalidProgram("empty factor matrix".into()));
        }
        if y.nrows() != x.nrows() || y.ncols() != z.ncols() {
            return Err(PsmError::InvalidProgram(format!(
                "target is {}x{}, expected {}x{}",
                y.nrows(),
                y.ncols(),
                x.nrows(),
                z.ncols()
            )));
        }
        Ok(Self { x, z, y })
    }

    /// `X = S_X`, `Z = S_Y`, `Y = S_X − S_Y`.
    pub fn from_covariances(sx: DMatrix<f64>, sy: DMatrix<f64>) -> Result<Self> {
        if !sx.is_square() || sx.shape() != sy.shape() {
            return Err(PsmError::InvalidProgram(format!(
                "covariances must be square and equal in size, got {:?} and {:?}",
                sx.shape(),
                sy.shape()
            )));
        }
        let y = &sx - &sy;
        Self::new(sx, sy, y)
    }

    pub fn layout(&self) -> DiffNetLayout {
        DiffNetLayout {
            m1: self.x.nrows(),
            d1: self.x.ncols(),
            d2: self.z.nrows(),
            m2: self.z.ncols(),
        }
    }
}

/// Row and column offsets of the differential-network program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiffNetLayout {
    pub m1: usize,
    pub d1: usize,
    pub d2: usize,
    pub m2: usize,
}

impl DiffNetLayout {
    /// Entries of `D`.
    pub fn dim(&self) -> usize {
        self.d1 * self.d2
    }
    pub fn d_plus(&self, k: usize, j: usize) -> usize {
        k + self.d1 * j
    }
    pub fn d_minus(&self, k: usize, j: usize) -> usize {
        self.dim() + self.d_plus(k, j)
    }
    pub fn c_col(&self, i: usize, j: usize) -> usize {
        2 * self.dim() + i + self.m1 * j
    }
    pub fn w1(&self, i: usize, l: usize) -> usize {
        2 * self.dim() + self.m1 * self.d2 + i + self.m1 * l
    }
    pub fn w2(&self, i: usize, l: usize) -> usize {
        self.w1(i, l) + self.m1 * self.m2
    }
    pub fn c_range(&self) -> std::ops::Range<usize> {
        2 * self.dim()..2 * self.dim() + self.m1 * self.d2
    }
    pub fn num_rows(&self) -> usize {
        self.m1 * self.d2 + 2 * self.m1 * self.m2
    }
    pub fn num_cols(&self) -> usize {
        2 * self.dim() + self.m1 * self.d2 + 2 * self.m1 * self.m2
    }
    fn c_row(&self, i: usize, j: usize) -> usize {
        i + self.m1 * j
    }
    fn ineq_row(&self, i: usize, l: usize) -> usize {
        self.m1 * self.d2 + i + self.m1 * l
    }
}

/// The program and its starting basis (all `C` columns, then all slacks).
pub fn build_diffnet(inst: &DiffNetInstance) -> (ParametricProgram, Vec<usize>) {
    let l = inst.layout();
    let mm = l.m1 * l.m2;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); l.num_cols()];
    for j in 0..l.d2 {
        for k in 0..l.d1 {
            for i in 0..l.m1 {
                let v = inst.x[(i, k)];
                if v != 0.0 {
                    cols[l.d_plus(k, j)].push((l.c_row(i, j), v));
                    cols[l.d_minus(k, j)].push((l.c_row(i, j), -v));
                }
            }
        }
    }
    for j in 0..l.d2 {
        for i in 0..l.m1 {
            let col = &mut cols[l.c_col(i, j)];
            col.push((l.c_row(i, j), -1.0));
            for ll in 0..l.m2 {
                let v = inst.z[(j, ll)];
                if v != 0.0 {
                    col.push((l.ineq_row(i, ll), v));
                    col.push((l.ineq_row(i, ll) + mm, -v));
                }
            }
        }
    }
    for ll in 0..l.m2 {
        for i in 0..l.m1 {
            cols[l.w1(i, ll)].push((l.ineq_row(i, ll), 1.0));
            cols[l.w2(i, ll)].push((l.ineq_row(i, ll) + mm, 1.0));
        }
    }
    let a = SparseMatrix::from_columns(l.num_rows(), cols);
    let m_c = l.m1 * l.d2;
    let mut b = vec![0.0; l.num_rows()];
    let mut b_bar = vec![0.0; l.num_rows()];
    for ll in 0..l.m2 {
        for i in 0..l.m1 {
            let r = l.ineq_row(i, ll);
            b[r] = inst.y[(i, ll)];
            b[r + mm] = -inst.y[(i, ll)];
            b_bar[r] = 1.0;
            b_bar[r + mm] = 1.0;
        }
    }
    let mut c = vec![0.0; l.num_cols()];
    c[..2 * l.dim()].fill(-1.0);
    let program = ParametricProgram::new(a, b, b_bar, c, vec![0.0; l.num_cols()], ConstraintKind::Equality)
        .and_then(|p| p.with_free_columns(l.c_range().collect()))
        .expect("dimensions are consistent by construction");
    let basis: Vec<usize> = (l.c_range().start..l.num_cols()).collect();
    debug_assert_eq!(basis.len(), m_c + 2 * mm);
    (program, basis)
}

/// `vec(D⁺ − D⁻)` along the path (column-major, length `d₁d₂`).
pub fn recover_diffnet(path: &SolutionPath, layout: DiffNetLayout) -> Result<PathInOriginalCoords> {
    let dim = layout.dim();
    let pairs: Vec<(usize, usize)> = (0..dim).map(|k| (k, dim + k)).collect();
    PathInOriginalCoords::from_path(
        path,
        dim,
        |j| match j {
            j if j < dim => Some((j, 1.0)),
            j if j < 2 * dim => Some((j - dim, -1.0)),
            _ => None,
        },
        &pairs,
    )
}

/// Reshapes a `vec`'d estimate into a `d₁ × d₂` matrix.
pub fn unvec(values: &[f64], layout: DiffNetLayout) -> DMatrix<f64> {
    DMatrix::from_column_slice(layout.d1, layout.d2, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffNetStop {
    Lambda(f64),
    /// Stop at the first breakpoint where the estimate has at least this many nonzeros.
    Sparsity(usize),
}

/// Nonzero entries of `D` in a segment evaluated at its lower end.
pub fn segment_nonzeros(seg: &PathSegment, layout: DiffNetLayout) -> usize {
    let dim = layout.dim();
    let vals: Vec<f64> = seg
        .primal
        .iter()
        .filter(|(&j, _)| j < 2 * dim)
        .map(|(_, f)| f.at(seg.lambda_lo))
        .collect();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = super::SUPPORT_TOL * (1.0 + scale);
    vals.iter().filter(|v| v.abs() > tol).count()
}

pub fn solve_diffnet(
    inst: &DiffNetInstance,
    opts: &SolveOptions,
    stop: DiffNetStop,
) -> Result<(SolutionPath, PathInOriginalCoords)> {
    let layout = inst.layout();
    let (program, basis) = build_diffnet(inst);
    let mut opts = opts.clone();
    let path = match stop {
        DiffNetStop::Lambda(lam) => {
            opts.lambda_target = lam;
            solve_path_with_observer(&program, &opts, Some(&basis), |_| ControlFlow::Continue(()))?
        }
        DiffNetStop::Sparsity(k) => {
            opts.lambda_target = 0.0;
            solve_path_with_observer(&program, &opts, Some(&basis), |seg| {
                if segment_nonzeros(seg, layout) >= k {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?
        }
    };
    let coords = recover_diffnet(&path, layout)?;
    Ok((path, coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisFactorization;
    use crate::basis::FactorizationMode;
    use crate::oracle::brute_force_optimum;

    #[test]
    fn scalar_closed_form() {
        let inst = DiffNetInstance::from_covariances(DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 1.0))
            .unwrap();
        let (program, basis) = build_diffnet(&inst);
        assert_eq!((program.num_rows(), program.num_cols()), (3, 5));
        assert_eq!(basis, vec![2, 3, 4]);
        assert_eq!(program.b_bar(), &[0.0, 1.0, 1.0]);
        let (path, coords) = solve_diffnet(&inst, &SolveOptions::default(), DiffNetStop::Lambda(0.0)).unwrap();
        assert!(path.termination.is_success());
        for lam in [0.0, 0.25, 0.5, 1.0, 3.0] {
            let v = coords.value_at(lam).unwrap();
            assert!((v[0] - ((1.0 - lam) / 2.0).max(0.0)).abs() < 1e-12, "{lam}: {v:?}");
        }
        // the oracle agrees at a fixed λ
        let oracle = brute_force_optimum(&program, 0.5).unwrap().value().unwrap();
        assert!((oracle + 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_target_needs_no_pivot() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let inst = DiffNetInstance::from_covariances(s.clone(), s).unwrap();
        let (path, coords) = solve_diffnet(&inst, &SolveOptions::default(), DiffNetStop::Lambda(0.0)).unwrap();
        assert!(path.pivots.is_empty());
        assert!(coords.breakpoints.iter().all(|b| b.support.is_empty()));
    }

    #[test]
    fn shapes_and_triangular_start() {
        let sx = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0]);
        let sy = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 2.0, 0.4, 0.0, 0.4, 1.2]);
        let inst = DiffNetInstance::from_covariances(sx, sy).unwrap();
        let (program, basis) = build_diffnet(&inst);
        let l = inst.layout();
        assert_eq!(program.num_rows(), 9 + 18);
        assert_eq!(program.num_cols(), 18 + 9 + 18);
        assert_eq!(l.c_range(), 18..27);
        assert!(BasisFactorization::factorize_with(program.a(), &basis, FactorizationMode::Bordered, 50).is_ok());
    }

    #[test]
    fn sparsity_stop() {
        let sx = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0]);
        let sy = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.0, 0.1, 2.0, 0.4, 0.0, 0.4, 1.2]);
        let inst = DiffNetInstance::from_covariances(sx, sy).unwrap();
        let (path, coords) = solve_diffnet(&inst, &SolveOptions::default(), DiffNetStop::Sparsity(2)).unwrap();
        assert!(path.termination.is_success());
        assert!(coords.terminal().unwrap().support.len() >= 2);
        let full = solve_diffnet(&inst, &SolveOptions::default(), DiffNetStop::Lambda(0.0)).unwrap().0;
        assert!(full.pivots.len() >= path.pivots.len());
    }
}
