//! Factorized basis matrices with column-replacement updates.
//!
//! Two representations are kept behind one interface. Small bases are
//! factored densely and updated in product form; each replacement appends an
//! elementary matrix `E = I − θ p e_kᵀ` so that `B'⁻¹ = E B⁻¹`. Large bases
//! whose starting columns form a permuted triangle keep that triangle as a
//! fixed anchor and carry every later replacement as a low-rank correction
//! (Woodbury), which needs only sparse triangular solves and a small dense
//! system whose order is the number of replaced positions.

mod dense;
mod triangular;

pub use dense::DenseLu;
pub use triangular::TriangularAnchor;

use serde::{Deserialize, Serialize};

use crate::error::LinalgError;
use crate::matrix::SparseMatrix;

/// Relative pivot tolerance used for every factorization.
pub const PIVOT_REL_TOL: f64 = 1e-11;
pub const DEFAULT_REFACTOR_LIMIT: usize = 50;
/// A product-form update whose pivot is this small relative to the
/// transformed column is replaced by a fresh factorization; such etas
/// amplify the error of every later solve.
pub const ETA_STABILITY_TOL: f64 = 1e-2;
/// Above this order `Auto` prefers the triangular anchor when one exists.
pub const DENSE_ORDER_LIMIT: usize = 1200;
/// Above this order a dense factorization is refused.
pub const DENSE_ORDER_MAX: usize = 6000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorizationMode {
    #[default]
    Auto,
    Dense,
    Bordered,
}

/// One logged product-form update.
#[derive(Debug, Clone)]
struct Eta {
    k: usize,
    p: Vec<f64>,
    theta: f64,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense {
        lu: DenseLu,
        etas: Vec<Eta>,
    },
    Bordered {
        anchor: TriangularAnchor,
        anchor_cols: Vec<usize>,
        // Positions whose column differs from the anchor, and B₀⁻¹ of the
        // current column at each of them.
        changed: Vec<usize>,
        g: Vec<Vec<f64>>,
        core: Option<DenseLu>,
    },
}

#[derive(Debug, Clone)]
pub struct BasisFactorization {
    m: usize,
    basic: Vec<usize>,
    repr: Repr,
    refactor_limit: usize,
    updates_since_refactor: usize,
}

fn dense_basis(a: &SparseMatrix, basic: &[usize]) -> Vec<f64> {
    let m = a.nrows();
    let mut out = vec![0.0; m * m];
    for (p, &j) in basic.iter().enumerate() {
        let c = a.column(j);
        for (&r, &v) in c.rows.iter().zip(c.values) {
            out[r * m + p] = v;
        }
    }
    out
}

impl BasisFactorization {
    pub fn factorize(a: &SparseMatrix, basic: &[usize]) -> Result<Self, LinalgError> {
        Self::factorize_with(a, basic, FactorizationMode::Auto, DEFAULT_REFACTOR_LIMIT)
    }

    pub fn factorize_with(
        a: &SparseMatrix,
        basic: &[usize],
        mode: FactorizationMode,
        refactor_limit: usize,
    ) -> Result<Self, LinalgError> {
        let m = a.nrows();
        if basic.len() != m {
            return Err(LinalgError::DimensionMismatch {
                expected: m,
                got: basic.len(),
            });
        }
        let bordered = match mode {
            FactorizationMode::Dense => None,
            FactorizationMode::Bordered => Some(
                TriangularAnchor::detect(a, basic, PIVOT_REL_TOL)
                    .ok_or(LinalgError::TooLarge(m))?,
            ),
            FactorizationMode::Auto if m > DENSE_ORDER_LIMIT => {
                TriangularAnchor::detect(a, basic, PIVOT_REL_TOL)
            }
            FactorizationMode::Auto => None,
        };
        let repr = match bordered {
            Some(anchor) => Repr::Bordered {
                anchor,
                anchor_cols: basic.to_vec(),
                changed: Vec::new(),
                g: Vec::new(),
                core: None,
            },
            None => {
                if m > DENSE_ORDER_MAX {
                    return Err(LinalgError::TooLarge(m));
                }
                Repr::Dense {
                    lu: DenseLu::factor(dense_basis(a, basic), m, PIVOT_REL_TOL)?,
                    etas: Vec::new(),
                }
            }
        };
        let f = Self {
            m,
            basic: basic.to_vec(),
            repr,
            refactor_limit: refactor_limit.max(1),
            updates_since_refactor: 0,
        };
        log::debug!(
            "factorized basis of order {m} ({}), condition estimate {:.3e}",
            if f.is_bordered() { "bordered" } else { "dense" },
            f.condition_estimate(a)
        );
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Current basic column indices by position.
    pub fn basic(&self) -> &[usize] {
        &self.basic
    }

    pub fn updates_since_refactor(&self) -> usize {
        self.updates_since_refactor
    }

    pub fn is_bordered(&self) -> bool {
        matches!(self.repr, Repr::Bordered { .. })
    }

    /// `A_B⁻¹ v`
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.m);
        match &self.repr {
            Repr::Dense { lu, etas } => {
                let mut w = lu.solve(v);
                for e in etas {
                    apply_eta(e, &mut w);
                }
                w
            }
            Repr::Bordered {
                anchor,
                changed,
                g,
                core,
                ..
            } => {
                let mut y = anchor.solve(v);
                if let Some(core) = core {
                    let rhs: Vec<f64> = changed.iter().map(|&p| y[p]).collect();
                    let s = core.solve(&rhs);
                    woodbury_correct(&mut y, changed, g, &s);
                }
                y
            }
        }
    }

    /// `A_B⁻ᵀ v`
    pub fn solve_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.m);
        match &self.repr {
            Repr::Dense { lu, etas } => {
                let mut w = v.to_vec();
                for e in etas.iter().rev() {
                    apply_eta_transpose(e, &mut w);
                }
                lu.solve_transpose(&w)
            }
            Repr::Bordered {
                anchor,
                changed,
                g,
                core,
                ..
            } => {
                let mut w = v.to_vec();
                if let Some(core) = core {
                    // Wᵀv with W = G − E_P
                    let wt: Vec<f64> = changed
                        .iter()
                        .zip(g)
                        .map(|(&p, col)| dot(col, v) - v[p])
                        .collect();
                    let s = core.solve_transpose(&wt);
                    for (&p, sp) in changed.iter().zip(&s) {
                        w[p] -= sp;
                    }
                }
                anchor.solve_transpose(&w)
            }
        }
    }

    /// Puts column `entering` of `a` at basis `position`. On error the
    /// factorization is left unchanged.
    pub fn replace_column(
        &mut self,
        a: &SparseMatrix,
        position: usize,
        entering: usize,
    ) -> Result<(), LinalgError> {
        if position >= self.m {
            return Err(LinalgError::DimensionMismatch {
                expected: self.m,
                got: position,
            });
        }
        let col = a.column(entering).to_dense(self.m);
        let w = self.solve(&col);
        let alpha = w[position];
        let scale = w.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if !(alpha.abs() >= PIVOT_REL_TOL * scale) {
            return Err(LinalgError::UpdateDegenerate { position, pivot: alpha });
        }
        let unstable = matches!(self.repr, Repr::Dense { .. }) && alpha.abs() < ETA_STABILITY_TOL * scale;
        if unstable || self.updates_since_refactor + 1 >= self.refactor_limit {
            let mut basic = self.basic.clone();
            basic[position] = entering;
            return self.set_basis(a, &basic);
        }
        match &mut self.repr {
            Repr::Dense { etas, .. } => {
                let mut p = w;
                p[position] -= 1.0;
                etas.push(Eta {
                    k: position,
                    p,
                    theta: 1.0 / alpha,
                });
            }
            Repr::Bordered {
                anchor,
                anchor_cols,
                changed,
                g,
                core,
            } => {
                let mut new_changed = changed.clone();
                let mut new_g = g.clone();
                let slot = new_changed.iter().position(|&p| p == position);
                if anchor_cols[position] == entering {
                    if let Some(s) = slot {
                        new_changed.remove(s);
                        new_g.remove(s);
                    }
                } else {
                    let gcol = anchor.solve(&col);
                    match slot {
                        Some(s) => new_g[s] = gcol,
                        None => {
                            new_changed.push(position);
                            new_g.push(gcol);
                        }
                    }
                }
                let new_core = build_core(&new_changed, &new_g)?;
                *changed = new_changed;
                *g = new_g;
                *core = new_core;
            }
        }
        self.basic[position] = entering;
        self.updates_since_refactor += 1;
        Ok(())
    }

    /// Rebuilds the factorization of the current basis from `a`.
    pub fn refactorize(&mut self, a: &SparseMatrix) -> Result<(), LinalgError> {
        let basic = self.basic.clone();
        self.set_basis(a, &basic)
    }

    /// Refactors from scratch at an arbitrary basis. In bordered mode the
    /// original anchor is kept. On error the factorization is unchanged.
    pub fn set_basis(&mut self, a: &SparseMatrix, basic: &[usize]) -> Result<(), LinalgError> {
        if basic.len() != self.m {
            return Err(LinalgError::DimensionMismatch {
                expected: self.m,
                got: basic.len(),
            });
        }
        match &mut self.repr {
            Repr::Dense { .. } => {
                let lu = DenseLu::factor(dense_basis(a, basic), self.m, PIVOT_REL_TOL)?;
                self.repr = Repr::Dense {
                    lu,
                    etas: Vec::new(),
                };
            }
            Repr::Bordered {
                anchor,
                anchor_cols,
                changed,
                g,
                core,
            } => {
                let new_changed: Vec<usize> =
                    (0..self.m).filter(|&p| basic[p] != anchor_cols[p]).collect();
                let new_g: Vec<Vec<f64>> = new_changed
                    .iter()
                    .map(|&p| anchor.solve(&a.column(basic[p]).to_dense(self.m)))
                    .collect();
                let new_core = build_core(&new_changed, &new_g)?;
                *changed = new_changed;
                *g = new_g;
                *core = new_core;
            }
        }
        self.basic = basic.to_vec();
        self.updates_since_refactor = 0;
        Ok(())
    }

    /// Rough `‖A_B‖∞·‖A_B⁻¹‖∞` estimate (Hager's method on `A_B⁻ᵀ`). Diagnostic only.
    pub fn condition_estimate(&self, a: &SparseMatrix) -> f64 {
        let m = self.m;
        if m == 0 {
            return 1.0;
        }
        let mut row_sums = vec![0.0; m];
        for &j in &self.basic {
            let c = a.column(j);
            for (&r, &v) in c.rows.iter().zip(c.values) {
                row_sums[r] += v.abs();
            }
        }
        let norm_b = row_sums.into_iter().fold(0.0, f64::max);
        // ‖B⁻¹‖∞ = ‖B⁻ᵀ‖₁
        let mut x = vec![1.0 / m as f64; m];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve_transpose(&x);
            let new_est: f64 = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bj, bv), (j, v)| if v.abs() > bv { (j, v.abs()) } else { (bj, bv) });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            est = f64::max(est, new_est);
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; m];
            x[jmax] = 1.0;
        }
        norm_b * est
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn apply_eta(e: &Eta, w: &mut [f64]) {
    let wk = e.theta * w[e.k];
    if wk == 0.0 {
        w[e.k] = 0.0;
        return;
    }
    for (l, pl) in e.p.iter().enumerate() {
        if l != e.k {
            w[l] -= pl * wk;
        }
    }
    w[e.k] = wk;
}

fn apply_eta_transpose(e: &Eta, w: &mut [f64]) {
    let s: f64 = e
        .p
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != e.k)
        .map(|(l, pl)| pl * w[l])
        .sum();
    w[e.k] = e.theta * (w[e.k] - s);
}

// C = E_Pᵀ G, the rows of G at the changed positions.
fn build_core(changed: &[usize], g: &[Vec<f64>]) -> Result<Option<DenseLu>, LinalgError> {
    let k = changed.len();
    if k == 0 {
        return Ok(None);
    }
    let mut c = vec![0.0; k * k];
    for (col, gcol) in g.iter().enumerate() {
        for (row, &p) in changed.iter().enumerate() {
            c[row * k + col] = gcol[p];
        }
    }
    DenseLu::factor(c, k, PIVOT_REL_TOL).map(Some)
}

// y ← y − (G − E_P) s
fn woodbury_correct(y: &mut [f64], changed: &[usize], g: &[Vec<f64>], s: &[f64]) {
    for ((&p, gcol), &sp) in changed.iter().zip(g).zip(s) {
        if sp == 0.0 {
            continue;
        }
        for (yi, gi) in y.iter_mut().zip(gcol) {
            *yi -= gi * sp;
        }
        y[p] += sp;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(m: usize) -> SparseMatrix {
        SparseMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_and_diagonal_solves() {
        let f = BasisFactorization::factorize(&identity(2), &[0, 1]).unwrap();
        assert_eq!(f.solve(&[3.0, 4.0]), vec![3.0, 4.0]);
        assert_eq!(f.solve(&[1.0, 0.0]), vec![1.0, 0.0]);
        let d = SparseMatrix::from_dense_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let f = BasisFactorization::factorize(&d, &[0, 1]).unwrap();
        assert!(close(&f.solve(&[2.0, 4.0]), &[1.0, 1.0], 1e-15));
        assert!(close(&f.solve_transpose(&[2.0, 4.0]), &[1.0, 1.0], 1e-15));
    }

    #[test]
    fn known_inverse_residual() {
        // A = L·U with unit-diagonal integer factors, so A⁻¹ is exact.
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0, 0.0, 1.0, 3.0],
            vec![2.0, 5.0, 1.0, 2.0, 6.0],
            vec![0.0, 1.0, 2.0, 1.0, 1.0],
            vec![1.0, 2.0, 1.0, 3.0, 4.0],
            vec![3.0, 6.0, 1.0, 4.0, 11.0],
        ];
        let a = SparseMatrix::from_dense_rows(&rows);
        let f = BasisFactorization::factorize(&a, &[0, 1, 2, 3, 4]).unwrap();
        let v = [1.0, -1.0, 2.0, 0.5, 3.0];
        let x = f.solve(&v);
        assert!(close(&a.mul_vec(&x), &v, 1e-8 * 4.0));
        let y = f.solve_transpose(&v);
        assert!(close(&a.transpose_mul_vec(&y), &v, 1e-8 * 4.0));
    }

    #[test]
    fn single_update_matches_fresh_factor() {
        // Columns 0,1 = I₂, column 2 = (2,0).
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 0.0]]);
        let mut f = BasisFactorization::factorize(&a, &[0, 1]).unwrap();
        f.replace_column(&a, 0, 2).unwrap();
        assert!(close(&f.solve(&[4.0, 6.0]), &[2.0, 6.0], 1e-15));
        assert!(close(&f.solve(&[2.0, 0.0]), &[1.0, 0.0], 1e-15));
        let fresh = BasisFactorization::factorize(&a, &[2, 1]).unwrap();
        assert!(close(&f.solve_transpose(&[4.0, 6.0]), &fresh.solve_transpose(&[4.0, 6.0]), 1e-15));
        assert_eq!(f.basic(), &[2, 1]);
    }

    #[test]
    fn replacing_a_column_by_itself_changes_nothing() {
        let a = SparseMatrix::from_dense_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let mut f = BasisFactorization::factorize(&a, &[0, 1]).unwrap();
        let before = f.solve(&[1.0, 1.0]);
        f.replace_column(&a, 1, 1).unwrap();
        assert!(close(&f.solve(&[1.0, 1.0]), &before, 1e-8));
    }

    #[test]
    fn duplicate_column_is_degenerate() {
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]);
        let mut f = BasisFactorization::factorize(&a, &[0, 1]).unwrap();
        let err = f.replace_column(&a, 0, 2).unwrap_err();
        assert!(matches!(err, LinalgError::UpdateDegenerate { position: 0, .. }));
        // unchanged after the failure
        assert_eq!(f.basic(), &[0, 1]);
        assert!(close(&f.solve(&[1.0, 2.0]), &[1.0, 2.0], 0.0));
    }

    #[test]
    fn duplicate_basis_columns_are_singular() {
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert!(matches!(
            BasisFactorization::factorize(&a, &[0, 0]),
            Err(LinalgError::SingularBasis { .. })
        ));
    }

    #[test]
    fn bordered_mode_tracks_replacements() {
        // [I | dense block]
        let m = 4;
        let a = SparseMatrix::from_fn(m, 2 * m, |i, j| {
            if j < m {
                if i == j { 1.0 } else { 0.0 }
            } else {
                1.0 + ((i * 7 + j * 3) % 5) as f64 + if i == j - m { 6.0 } else { 0.0 }
            }
        });
        let mut b = BasisFactorization::factorize_with(&a, &[0, 1, 2, 3], FactorizationMode::Bordered, 50)
            .unwrap();
        assert!(b.is_bordered());
        let v = [1.0, 2.0, -1.0, 0.5];
        for (pos, j) in [(0, 4), (2, 6), (0, 5), (0, 0), (3, 7)] {
            b.replace_column(&a, pos, j).unwrap();
            let d = BasisFactorization::factorize_with(&a, b.basic(), FactorizationMode::Dense, 50).unwrap();
            assert!(close(&b.solve(&v), &d.solve(&v), 1e-10));
            assert!(close(&b.solve_transpose(&v), &d.solve_transpose(&v), 1e-10));
        }
        b.refactorize(&a).unwrap();
        let d = BasisFactorization::factorize_with(&a, b.basic(), FactorizationMode::Dense, 50).unwrap();
        assert!(close(&b.solve(&v), &d.solve(&v), 1e-10));
    }

    #[test]
    fn refactor_limit_resets_counter() {
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0, 2.0, 1.0], vec![0.0, 1.0, 1.0, 3.0]]);
        let mut f = BasisFactorization::factorize_with(&a, &[0, 1], FactorizationMode::Dense, 2).unwrap();
        f.replace_column(&a, 0, 2).unwrap();
        assert_eq!(f.updates_since_refactor(), 1);
        f.replace_column(&a, 1, 3).unwrap();
        assert_eq!(f.updates_since_refactor(), 0);
        let x = f.solve(&[3.0, 4.0]);
        assert!(close(&a.mul_vec(&[0.0, 0.0, x[0], x[1]]), &[3.0, 4.0], 1e-12));
    }

    #[test]
    fn condition_estimate_of_diagonal() {
        let d = SparseMatrix::from_dense_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        let f = BasisFactorization::factorize(&d, &[0, 1]).unwrap();
        assert!((f.condition_estimate(&d) - 4.0).abs() < 1e-12);
    }
}
