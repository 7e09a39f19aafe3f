use crate::error::LinalgError;

/// Dense LU with row partial pivoting, `P·A = L·U`, stored row-major with the
/// unit lower factor below the diagonal.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    // perm[i] is the original row sitting at row i of the factors.
    perm: Vec<usize>,
    norm_inf: f64,
}

/// Maximum absolute row sum of a row-major square matrix.
pub fn norm_inf(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl DenseLu {
    /// Factors a row-major `n × n` matrix. Fails when a pivot falls below
    /// `rel_tol · ‖A‖∞`.
    pub fn factor(mut a: Vec<f64>, n: usize, rel_tol: f64) -> Result<Self, LinalgError> {
        if a.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                got: a.len(),
            });
        }
        let norm = norm_inf(&a, n);
        let threshold = rel_tol * norm.max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut piv, mut best) = (k, a[k * n + k].abs());
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if !(best >= threshold) || best == 0.0 {
                return Err(LinalgError::SingularBasis { pivot: best, threshold });
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
            }
            let d = a[k * n + k];
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..];
            for i in 0..n - k - 1 {
                let row_i = &mut tail[i * n..(i + 1) * n];
                let f = row_i[k] / d;
                if f == 0.0 {
                    row_i[k] = 0.0;
                    continue;
                }
                row_i[k] = f;
                for c in k + 1..n {
                    row_i[c] -= f * row_k[c];
                }
            }
        }
        Ok(Self {
            n,
            lu: a,
            perm,
            norm_inf: norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn norm_inf(&self) -> f64 {
        self.norm_inf
    }

    /// `A⁻¹ b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / row[i];
        }
        y
    }

    /// `A⁻ᵀ b`
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        // Uᵀ z = b, column sweep so rows of U are read contiguously.
        for i in 0..n {
            let row = &self.lu[i * n..(i + 1) * n];
            z[i] /= row[i];
            let zi = z[i];
            if zi != 0.0 {
                for c in i + 1..n {
                    z[c] -= row[c] * zi;
                }
            }
        }
        // Lᵀ w = z
        for i in (0..n).rev() {
            let row = &self.lu[i * n..i * n + i];
            let wi = z[i];
            if wi != 0.0 {
                for (c, l) in row.iter().enumerate() {
                    z[c] -= l * wi;
                }
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    fn mat_t_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n).map(|j| (0..n).map(|i| a[i * n + j] * x[i]).sum()).collect()
    }

    #[test]
    fn solves_needing_pivoting() {
        let a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = DenseLu::factor(a.clone(), 3, 1e-11).unwrap();
        let b = [1.0, -2.0, 4.0];
        let x = lu.solve(&b);
        for (r, bi) in mat_vec(&a, 3, &x).iter().zip(b) {
            assert!((r - bi).abs() < 1e-12);
        }
        let y = lu.solve_transpose(&b);
        for (r, bi) in mat_t_vec(&a, 3, &y).iter().zip(b) {
            assert!((r - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(
            DenseLu::factor(a, 2, 1e-11),
            Err(LinalgError::SingularBasis { .. })
        ));
    }
}
