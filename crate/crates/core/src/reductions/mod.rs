//! Sparse-learning problems posed as parametric linear programs, and maps
//! from solver paths back to the statistical parameters.

pub mod dantzig;
pub mod diffnet;
pub mod svm;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{PsmError, Result};
use crate::path::{inf_f64, Affine, SolutionPath, Termination};

pub use dantzig::{build_dantzig, recover_dantzig, solve_dantzig, DantzigInstance};
pub use diffnet::{build_diffnet, recover_diffnet, solve_diffnet, DiffNetInstance, DiffNetLayout, DiffNetStop};
pub use svm::{build_svm, recover_svm, solve_svm, SvmInstance, SvmLayout};

/// Relative size below which a recovered coordinate counts as zero.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Support of `v`: indices with `|v_k| > SUPPORT_TOL·(1 + ‖v‖∞)`.
pub fn support_of(v: &[f64]) -> Vec<usize> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = SUPPORT_TOL * (1.0 + scale);
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > tol)
        .map(|(k, _)| k)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalSegment {
    #[serde(with = "inf_f64")]
    pub lambda_lo: f64,
    #[serde(with = "inf_f64")]
    pub lambda_hi: f64,
    /// Affine pieces of the coordinates that are not identically zero.
    pub coefs: BTreeMap<usize, Affine>,
}

impl OriginalSegment {
    pub fn value_at(&self, lambda: f64, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (&k, f) in &self.coefs {
            v[k] = f.at(lambda);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub support: Vec<usize>,
}

/// A solution path expressed in the original parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathInOriginalCoords {
    pub dim: usize,
    pub segments: Vec<OriginalSegment>,
    /// The lower end of every segment, plus the upper end of the first one
    /// when finite, in decreasing order of λ.
    pub breakpoints: Vec<Breakpoint>,
    pub termination: Termination,
    #[serde(with = "inf_f64")]
    pub terminal_lambda: f64,
    pub pivots: usize,
}

impl PathInOriginalCoords {
    /// Maps a path through `coord`, which sends a solver column to an
    /// original coordinate and a sign (or `None` for auxiliary columns).
    /// `pairs` lists the `(plus, minus)` split columns that must never be
    /// positive together.
    pub fn from_path(
        path: &SolutionPath,
        dim: usize,
        coord: impl Fn(usize) -> Option<(usize, f64)>,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let mut segments = Vec::with_capacity(path.segments.len());
        let mut breakpoints = Vec::new();
        for (k, seg) in path.segments.iter().enumerate() {
            let mut coefs: BTreeMap<usize, Affine> = BTreeMap::new();
            for (&j, f) in &seg.primal {
                if let Some((o, sign)) = coord(j) {
                    let e = coefs.entry(o).or_insert(Affine::new(0.0, 0.0));
                    e.base += sign * f.base;
                    e.slope += sign * f.slope;
                }
            }
            let mut ends = Vec::new();
            if k == 0 && seg.lambda_hi.is_finite() {
                ends.push(seg.lambda_hi);
            }
            ends.push(seg.lambda_lo);
            for lam in ends {
                check_pairs(seg, lam, pairs)?;
                let values = {
                    let mut v = vec![0.0; dim];
                    for (&o, f) in &coefs {
                        v[o] = f.at(lam);
                    }
                    v
                };
                breakpoints.push(Breakpoint {
                    lambda: lam,
                    support: support_of(&values),
                    values,
                });
            }
            segments.push(OriginalSegment {
                lambda_lo: seg.lambda_lo,
                lambda_hi: seg.lambda_hi,
                coefs,
            });
        }
        Ok(Self {
            dim,
            segments,
            breakpoints,
            termination: path.termination,
            terminal_lambda: path.terminal_lambda,
            pivots: path.pivots.len(),
        })
    }

    /// Value at `lambda` from the first (largest-λ) segment containing it.
    pub fn value_at(&self, lambda: f64) -> Option<Vec<f64>> {
        let tol = 1e-12 * (1.0 + lambda.abs());
        self.segments
            .iter()
            .find(|s| lambda >= s.lambda_lo - tol && lambda <= s.lambda_hi + tol)
            .map(|s| s.value_at(lambda, self.dim))
    }

    /// The estimate at the end of the path.
    pub fn terminal(&self) -> Option<&Breakpoint> {
        self.breakpoints.last()
    }

    /// Flat CSV in the solution-path layout, with original indices.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["segment_id", "lambda_lo", "lambda_hi", "var_index", "base", "slope"])?;
        for (k, seg) in self.segments.iter().enumerate() {
            for (j, f) in &seg.coefs {
                out.write_record([
                    k.to_string(),
                    seg.lambda_lo.to_string(),
                    seg.lambda_hi.to_string(),
                    j.to_string(),
                    f.base.to_string(),
                    f.slope.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn check_pairs(seg: &crate::path::PathSegment, lambda: f64, pairs: &[(usize, usize)]) -> Result<()> {
    let scale = seg
        .primal
        .values()
        .fold(0.0f64, |m, f| m.max(f.at(lambda).abs()));
    let tol = 1e-12 * (1.0 + scale * scale);
    for (index, &(plus, minus)) in pairs.iter().enumerate() {
        if let (Some(p), Some(q)) = (seg.primal.get(&plus), seg.primal.get(&minus)) {
            let (p, q) = (p.at(lambda), q.at(lambda));
            if (p * q).abs() > tol && p > 0.0 && q > 0.0 {
                return Err(PsmError::ComplementarityViolation { index, plus: p, minus: q });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::PathSegment;

    type Seg = (f64, f64, Vec<(usize, f64, f64)>);

    fn path(segs: Vec<Seg>) -> SolutionPath {
        SolutionPath {
            num_vars: 4,
            segments: segs
                .into_iter()
                .map(|(lo, hi, p)| PathSegment {
                    lambda_lo: lo,
                    lambda_hi: hi,
                    primal: p.into_iter().map(|(j, b, s)| (j, Affine::new(b, s))).collect(),
                    dual: BTreeMap::new(),
                    entering: None,
                    leaving: None,
                })
                .collect(),
            terminal_lambda: 0.0,
            termination: Termination::LambdaNonpositive,
            pivots: vec![],
        }
    }

    #[test]
    fn split_columns_combine() {
        let p = path(vec![(3.0, f64::INFINITY, vec![(2, 1.0, 0.0)]), (0.0, 3.0, vec![(1, 3.0, -1.0)])]);
        let o = PathInOriginalCoords::from_path(&p, 1, |j| match j {
            0 => Some((0, 1.0)),
            1 => Some((0, -1.0)),
            _ => None,
        }, &[(0, 1)])
        .unwrap();
        assert_eq!(o.value_at(1.0).unwrap(), vec![-2.0]);
        assert_eq!(o.breakpoints.len(), 2);
        assert_eq!(o.breakpoints[0].support, Vec::<usize>::new());
        assert_eq!(o.terminal().unwrap().values, vec![-3.0]);
    }

    #[test]
    fn overlapping_split_is_an_error() {
        let p = path(vec![(0.0, 1.0, vec![(0, 1.0, 0.0), (1, 1.0, 0.0)])]);
        let err = PathInOriginalCoords::from_path(&p, 1, |j| (j < 2).then_some((0, 1.0)), &[(0, 1)]).unwrap_err();
        assert!(matches!(err, PsmError::ComplementarityViolation { index: 0, .. }));
    }

    #[test]
    fn support_is_relative() {
        assert_eq!(support_of(&[1.0, 1e-12, -2.0]), vec![0, 2]);
    }
}
