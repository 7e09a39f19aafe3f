//! Piecewise-affine solution paths and their export formats.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::PivotEvent;
use crate::error::{PsmError, Result};
use crate::program::ParametricProgram;

/// `base + λ·slope`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub base: f64,
    pub slope: f64,
}

impl Affine {
    pub fn new(base: f64, slope: f64) -> Self {
        Self { base, slope }
    }

    #[inline]
    pub fn at(&self, lambda: f64) -> f64 {
        self.base + lambda * self.slope
    }
}

/// JSON has no infinities; unbounded interval ends are written as strings.
pub(crate) mod inf_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// One dictionary's worth of the path: affine primal and dual solutions that
/// are optimal for every λ in `[lambda_lo, lambda_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    #[serde(with = "inf_f64")]
    pub lambda_lo: f64,
    #[serde(with = "inf_f64")]
    pub lambda_hi: f64,
    /// Basic variables; every other primal entry is zero.
    pub primal: BTreeMap<usize, Affine>,
    /// Nonbasic reduced costs; basic ones are zero.
    pub dual: BTreeMap<usize, Affine>,
    /// The pivot that closed this segment, if any.
    pub entering: Option<usize>,
    pub leaving: Option<usize>,
}

impl PathSegment {
    fn check_range(&self, lambda: f64) -> Result<()> {
        let tol = 1e-12 * (1.0 + lambda.abs());
        if lambda < self.lambda_lo - tol || lambda > self.lambda_hi + tol {
            return Err(PsmError::LambdaOutOfRange {
                lambda,
                lo: self.lambda_lo,
                hi: self.lambda_hi,
            });
        }
        Ok(())
    }

    /// Dense primal vector at `lambda`.
    pub fn evaluate_primal(&self, lambda: f64, num_vars: usize) -> Result<Vec<f64>> {
        self.check_range(lambda)?;
        Ok(self.primal_unchecked(lambda, num_vars))
    }

    /// Dense reduced-cost vector at `lambda`.
    pub fn evaluate_dual(&self, lambda: f64, num_vars: usize) -> Result<Vec<f64>> {
        self.check_range(lambda)?;
        Ok(self.dual_unchecked(lambda, num_vars))
    }

    /// Evaluates the affine pieces without the interval check.
    pub fn primal_unchecked(&self, lambda: f64, num_vars: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_vars];
        for (&j, f) in &self.primal {
            x[j] = f.at(lambda);
        }
        x
    }

    pub fn dual_unchecked(&self, lambda: f64, num_vars: usize) -> Vec<f64> {
        let mut z = vec![0.0; num_vars];
        for (&j, f) in &self.dual {
            z[j] = f.at(lambda);
        }
        z
    }

    /// Objective `(c + λc̄)ᵀx` of `program` (in the same column space) at `lambda`.
    pub fn objective(&self, program: &ParametricProgram, lambda: f64) -> f64 {
        let (c, cb) = (program.c(), program.c_bar());
        self.primal
            .iter()
            .map(|(&j, f)| (c[j] + lambda * cb[j]) * f.at(lambda))
            .sum()
    }

    pub fn basis(&self) -> Vec<usize> {
        self.primal.keys().copied().collect()
    }

    pub fn contains(&self, lambda: f64) -> bool {
        self.check_range(lambda).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// The caller's stopping target was reached.
    ReachedTarget,
    /// λ* dropped to zero or below with a zero target.
    LambdaNonpositive,
    /// No blocking variable in a primal pivot: the program is unbounded below the last breakpoint.
    Unbounded,
    /// No admissible entering variable in a dual pivot: infeasible below the last breakpoint.
    Infeasible,
    IterationCap,
    NumericalFailure,
}

impl Termination {
    pub fn is_success(self) -> bool {
        matches!(self, Termination::ReachedTarget | Termination::LambdaNonpositive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    /// Number of columns of the (equality-form) program the indices refer to.
    pub num_vars: usize,
    /// Ordered by decreasing λ.
    pub segments: Vec<PathSegment>,
    #[serde(with = "inf_f64")]
    pub terminal_lambda: f64,
    pub termination: Termination,
    pub pivots: Vec<PivotEvent>,
}

impl SolutionPath {
    /// Breakpoints from largest to smallest (each segment's `lambda_lo`).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.lambda_lo).collect()
    }

    /// First (largest-λ) segment containing `lambda`.
    pub fn segment_at(&self, lambda: f64) -> Option<&PathSegment> {
        self.segments.iter().find(|s| s.contains(lambda))
    }

    pub fn primal_at(&self, lambda: f64) -> Option<Vec<f64>> {
        self.segment_at(lambda)
            .map(|s| s.primal_unchecked(lambda, self.num_vars))
    }

    pub fn last(&self) -> Option<&PathSegment> {
        self.segments.last()
    }

    pub fn num_pivots(&self) -> usize {
        self.pivots.len()
    }

    /// Flat CSV: `segment_id,lambda_lo,lambda_hi,var_index,base,slope`, one
    /// row per basic variable per segment.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["segment_id", "lambda_lo", "lambda_hi", "var_index", "base", "slope"])?;
        for (k, seg) in self.segments.iter().enumerate() {
            for (j, f) in &seg.primal {
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

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
