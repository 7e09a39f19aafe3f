use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::path::PathSegment;
use crate::program::ParametricProgram;

pub const CERTIFICATE_REL_TOL: f64 = 1e-7;

/// Optimality residuals of a primal/dual pair at one λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub lambda: f64,
    /// `‖Ax − (b + λb̄)‖∞`, or the largest sign violation of a restricted `x_j` if larger.
    pub primal_residual: f64,
    /// Largest negative reduced cost (recomputed from the multipliers); free
    /// columns count with their absolute value.
    pub dual_infeasibility: f64,
    /// `max_j |x_j z_j|`
    pub complementarity: f64,
    /// `|(c + λc̄)ᵀx − (b + λb̄)ᵀy|`
    pub duality_gap: f64,
    pub scale: f64,
    pub passed: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Checks that `(x, z)` certify optimality at `lambda`. The multipliers `y`
/// are recovered as the least-squares solution of `Aᵀy = c_λ + z` and the
/// reduced costs are then recomputed from them. The program must be in
/// equality form.
pub fn verify_certificate(p: &ParametricProgram, x: &[f64], z: &[f64], lambda: f64) -> CertificateReport {
    let (m, n) = (p.num_rows(), p.num_cols());
    let a = p.a();
    let rhs = p.rhs_at(lambda);
    let cost = p.objective_at(lambda);
    let free = p.free_mask();

    let ax = a.mul_vec(x);
    let residual = ax.iter().zip(&rhs).fold(0.0f64, |acc, (u, v)| acc.max((u - v).abs()));
    let sign = x
        .iter()
        .zip(&free)
        .filter(|(_, &f)| !f)
        .fold(0.0f64, |acc, (&v, _)| acc.max(-v));
    let primal_residual = residual.max(sign);

    let mut at = DMatrix::<f64>::zeros(n, m);
    for (i, j, v) in a.triplets() {
        at[(j, i)] = v;
    }
    let target = DVector::from_iterator(n, cost.iter().zip(z).map(|(c, zj)| c + zj));
    let y = at
        .svd(true, true)
        .solve(&target, 1e-13)
        .map(|v| v.as_slice().to_vec())
        .unwrap_or_else(|_| vec![0.0; m]);
    let z_re: Vec<f64> = (0..n).map(|j| a.column(j).dot(&y) - cost[j]).collect();
    let dual_infeasibility = z_re
        .iter()
        .zip(&free)
        .fold(0.0f64, |acc, (&v, &f)| acc.max(if f { v.abs() } else { -v }));
    let complementarity = x.iter().zip(&z_re).fold(0.0f64, |acc, (a, b)| acc.max((a * b).abs()));
    let primal_obj: f64 = cost.iter().zip(x).map(|(c, v)| c * v).sum();
    let dual_obj: f64 = rhs.iter().zip(&y).map(|(b, v)| b * v).sum();
    let duality_gap = (primal_obj - dual_obj).abs();

    let scale = [inf_norm(x), inf_norm(z), inf_norm(&rhs), inf_norm(&cost), primal_obj.abs()]
        .into_iter()
        .fold(0.0, f64::max);
    let tol = CERTIFICATE_REL_TOL * (1.0 + scale);
    let passed = [primal_residual, dual_infeasibility, complementarity, duality_gap]
        .iter()
        .all(|&r| r <= tol);
    CertificateReport {
        lambda,
        primal_residual,
        dual_infeasibility,
        complementarity,
        duality_gap,
        scale,
        passed,
    }
}

/// Certificate of a path segment's solution at `lambda` (no interval check).
pub fn verify_segment(p: &ParametricProgram, seg: &PathSegment, lambda: f64) -> CertificateReport {
    let n = p.num_cols();
    verify_certificate(p, &seg.primal_unchecked(lambda, n), &seg.dual_unchecked(lambda, n), lambda)
}
