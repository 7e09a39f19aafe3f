use crate::matrix::SparseMatrix;

/// A basis matrix that is triangular up to row and column permutations,
/// found by repeatedly peeling rows with a single remaining nonzero.
#[derive(Debug, Clone)]
pub struct TriangularAnchor {
    m: usize,
    // Pivot sequence: (row, basis position).
    order: Vec<(usize, usize)>,
    // Per position: sparse column (row, value).
    cols: Vec<Vec<(usize, f64)>>,
    // Diagonal entry for each position.
    diag: Vec<f64>,
}

impl TriangularAnchor {
    /// Returns `None` when the basis columns are not a permuted triangle or a
    /// pivot is smaller than `rel_tol` times the largest entry.
    pub fn detect(a: &SparseMatrix, basic: &[usize], rel_tol: f64) -> Option<Self> {
        let m = a.nrows();
        if basic.len() != m {
            return None;
        }
        let cols: Vec<Vec<(usize, f64)>> = basic
            .iter()
            .map(|&j| {
                let c = a.column(j);
                c.rows.iter().copied().zip(c.values.iter().copied()).collect()
            })
            .collect();
        let max_abs = cols
            .iter()
            .flatten()
            .fold(0.0f64, |acc, &(_, v)| acc.max(v.abs()));
        let threshold = rel_tol * max_abs;

        let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut count = vec![0usize; m];
        for (p, col) in cols.iter().enumerate() {
            for &(r, _) in col {
                row_cols[r].push(p);
                count[r] += 1;
            }
        }
        let mut col_done = vec![false; m];
        let mut row_done = vec![false; m];
        let mut stack: Vec<usize> = (0..m).filter(|&r| count[r] == 1).collect();
        let mut order = Vec::with_capacity(m);
        let mut diag = vec![0.0; m];
        while let Some(r) = stack.pop() {
            if row_done[r] || count[r] != 1 {
                continue;
            }
            let p = *row_cols[r].iter().find(|&&p| !col_done[p])?;
            let v = cols[p].iter().find(|&&(rr, _)| rr == r)?.1;
            if v.abs() <= threshold {
                return None;
            }
            row_done[r] = true;
            col_done[p] = true;
            diag[p] = v;
            order.push((r, p));
            for &(rr, _) in &cols[p] {
                if !row_done[rr] {
                    count[rr] -= 1;
                    if count[rr] == 1 {
                        stack.push(rr);
                    }
                }
            }
        }
        if order.len() != m {
            return None;
        }
        Some(Self { m, order, cols, diag })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// `B₀⁻¹ v`, result indexed by basis position.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        let mut y = vec![0.0; self.m];
        for &(row, p) in &self.order {
            let yp = r[row] / self.diag[p];
            y[p] = yp;
            if yp != 0.0 {
                for &(rr, val) in &self.cols[p] {
                    r[rr] -= val * yp;
                }
            }
        }
        y
    }

    /// `B₀⁻ᵀ v`, `v` indexed by basis position, result by row.
    pub fn solve_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.m];
        for &(row, p) in self.order.iter().rev() {
            let s: f64 = self.cols[p]
                .iter()
                .filter(|&&(rr, _)| rr != row)
                .map(|&(rr, val)| val * u[rr])
                .sum();
            u[row] = (v[p] - s) / self.diag[p];
        }
        u
    }
}
