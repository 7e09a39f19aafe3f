//! The parametric simplex loop.
//!
//! Starting from a dictionary that is optimal for all sufficiently large λ,
//! the engine repeatedly finds the breakpoint λ* where the dictionary stops
//! being optimal, pivots (primal when a reduced cost hits zero, dual when a
//! basic value does), and records the affine solution on each interval.

mod certificate;
mod phase_one;
mod ratio;

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

pub use certificate::{verify_certificate, verify_segment, CertificateReport};
pub use phase_one::find_large_lambda_basis;
pub use ratio::{compute_lambda_max, compute_lambda_star, ratio_test, LambdaStar, TightConstraint};

use crate::basis::{BasisFactorization, FactorizationMode, DEFAULT_REFACTOR_LIMIT};
use crate::dictionary::{BasisPartition, DictionaryState};
use crate::error::{LinalgError, PsmError, Result};
use crate::matrix::SparseMatrix;
use crate::path::{Affine, PathSegment, SolutionPath, Termination};
use crate::program::{ConstraintKind, ParametricProgram};

const LAMBDA_SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    SmallestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once λ* falls to or below this value.
    pub lambda_target: f64,
    /// Defaults to ten times the number of columns.
    pub max_pivots: Option<usize>,
    pub eps_feas: f64,
    pub eps_ratio: f64,
    pub tie_break: TieBreak,
    pub factorization: FactorizationMode,
    pub refactor_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            lambda_target: 0.0,
            max_pivots: None,
            eps_feas: 1e-9,
            eps_ratio: 1e-9,
            tie_break: TieBreak::SmallestIndex,
            factorization: FactorizationMode::Auto,
            refactor_limit: DEFAULT_REFACTOR_LIMIT,
        }
    }
}

impl SolveOptions {
    pub fn with_target(lambda_target: f64) -> Self {
        Self {
            lambda_target,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_target >= 0.0) || self.lambda_target.is_infinite() {
            return Err(PsmError::InvalidOptions(format!(
                "lambda_target must be a finite value >= 0, got {}",
                self.lambda_target
            )));
        }
        if self.max_pivots == Some(0) {
            return Err(PsmError::InvalidOptions("max_pivots must be at least 1".into()));
        }
        if !(self.eps_feas > 0.0) || !(self.eps_ratio > 0.0) {
            return Err(PsmError::InvalidOptions("tolerances must be positive".into()));
        }
        if self.refactor_limit == 0 {
            return Err(PsmError::InvalidOptions("refactor_limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PivotKind {
    PrimalPivot,
    DualPivot,
}

impl std::fmt::Display for PivotKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PivotKind::PrimalPivot => "primal",
            PivotKind::DualPivot => "dual",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotEvent {
    pub kind: PivotKind,
    pub entering: usize,
    pub leaving: usize,
    pub lambda_star: f64,
    pub t: f64,
    pub t_bar: f64,
    pub s: f64,
    pub s_bar: f64,
}

impl PivotEvent {
    /// `pivot#  kind  entering  leaving  lambda_star  t  s`, tab-separated.
    pub fn trace_line(&self, number: usize) -> String {
        format!(
            "{number}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.kind, self.entering, self.leaving, self.lambda_star, self.t, self.s
        )
    }
}

/// Writes one trace line per pivot.
pub fn write_trace<W: std::io::Write>(pivots: &[PivotEvent], mut w: W) -> std::io::Result<()> {
    for (k, ev) in pivots.iter().enumerate() {
        writeln!(w, "{}", ev.trace_line(k + 1))?;
    }
    Ok(())
}

enum PivotOutcome {
    Done(PivotEvent),
    Unbounded,
    Infeasible,
}

/// An owned simplex run on an equality-form program.
pub struct Engine<'a> {
    program: &'a ParametricProgram,
    free: Vec<bool>,
    opts: SolveOptions,
    fact: BasisFactorization,
    state: DictionaryState,
}

impl<'a> Engine<'a> {
    /// Factors the initial basis and builds its dictionary. The program must
    /// be in equality form; free columns must be basic.
    pub fn initialize(
        program: &'a ParametricProgram,
        initial_basis: &[usize],
        opts: &SolveOptions,
    ) -> Result<Self> {
        opts.validate()?;
        if program.kind() != ConstraintKind::Equality {
            return Err(PsmError::InvalidProgram(
                "the engine needs an equality-form program; convert it first".into(),
            ));
        }
        let (m, n) = (program.num_rows(), program.num_cols());
        if initial_basis.len() != m {
            return Err(PsmError::InvalidBasis(format!(
                "basis has {} columns, program has {m} rows",
                initial_basis.len()
            )));
        }
        let partition = BasisPartition::new(n, initial_basis.to_vec())?;
        let free = program.free_mask();
        if let Some(&j) = partition.nonbasic().iter().find(|&&j| free[j]) {
            return Err(PsmError::InvalidBasis(format!("free column {j} must be basic")));
        }
        let fact = BasisFactorization::factorize_with(
            program.a(),
            partition.basic(),
            opts.factorization,
            opts.refactor_limit,
        )?;
        let mut engine = Self {
            program,
            free,
            opts: opts.clone(),
            fact,
            state: DictionaryState {
                partition,
                x_base: Vec::new(),
                x_pert: Vec::new(),
                z_base: Vec::new(),
                z_pert: Vec::new(),
                lambda_lo: f64::NEG_INFINITY,
                lambda_hi: f64::INFINITY,
                objective_base: 0.0,
            },
        };
        engine.recompute_dictionary();
        engine.check_large_lambda_feasible()?;
        Ok(engine)
    }

    pub fn state(&self) -> &DictionaryState {
        &self.state
    }

    pub fn factorization(&self) -> &BasisFactorization {
        &self.fact
    }

    fn a(&self) -> &'a SparseMatrix {
        self.program.a()
    }

    /// Rebuilds all four dictionary vectors from the factorization.
    fn recompute_dictionary(&mut self) {
        let p = self.program;
        let basic = self.state.partition.basic();
        let nonbasic = self.state.partition.nonbasic();
        self.state.x_base = self.fact.solve(p.b());
        self.state.x_pert = self.fact.solve(p.b_bar());
        let cb: Vec<f64> = basic.iter().map(|&j| p.c()[j]).collect();
        let cbb: Vec<f64> = basic.iter().map(|&j| p.c_bar()[j]).collect();
        let y = self.fact.solve_transpose(&cb);
        let yb = self.fact.solve_transpose(&cbb);
        let a = p.a();
        self.state.z_base = nonbasic.iter().map(|&j| a.column(j).dot(&y) - p.c()[j]).collect();
        self.state.z_pert = nonbasic
            .iter()
            .map(|&j| a.column(j).dot(&yb) - p.c_bar()[j])
            .collect();
        self.state.objective_base = cb.iter().zip(&self.state.x_base).map(|(c, x)| c * x).sum();
        self.refresh_interval();
    }

    fn refresh_interval(&mut self) {
        let ls = compute_lambda_star(&self.state, &self.free, self.opts.eps_ratio);
        self.state.lambda_lo = ls.value;
        self.state.lambda_hi = compute_lambda_max(&self.state, &self.free, self.opts.eps_ratio);
    }

    fn scale(&self) -> f64 {
        self.state
            .x_base
            .iter()
            .chain(&self.state.x_pert)
            .chain(&self.state.z_base)
            .chain(&self.state.z_pert)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn check_large_lambda_feasible(&self) -> Result<()> {
        let s = &self.state;
        let eps = self.opts.eps_ratio;
        let tol = self.opts.eps_feas * (1.0 + self.scale());
        for (p, &j) in s.partition.basic().iter().enumerate() {
            if !self.free[j] && s.x_pert[p].abs() <= eps && s.x_base[p] < -tol {
                return Err(PsmError::InfeasibleAtLargeLambda(format!(
                    "basic column {j} is {} independently of lambda",
                    s.x_base[p]
                )));
            }
        }
        for (q, &j) in s.partition.nonbasic().iter().enumerate() {
            if s.z_pert[q].abs() <= eps && s.z_base[q] < -tol {
                return Err(PsmError::InfeasibleAtLargeLambda(format!(
                    "reduced cost of column {j} is {} independently of lambda",
                    s.z_base[q]
                )));
            }
        }
        let (lo, hi) = (s.lambda_lo, s.lambda_hi);
        if hi < lo - 1e-9 * (1.0 + lo.abs()) {
            return Err(PsmError::InfeasibleAtLargeLambda(format!(
                "optimality interval is empty (lambda* = {lo}, lambda_max = {hi})"
            )));
        }
        if hi.is_finite() {
            log::warn!("initial dictionary is optimal only up to lambda = {hi}");
        }
        Ok(())
    }

    /// `Δz_N = −(A_B⁻¹A_N)ᵀ e_p`
    fn tableau_row(&self, p: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.fact.dim()];
        e[p] = 1.0;
        let rho = self.fact.solve_transpose(&e);
        let a = self.a();
        self.state
            .partition
            .nonbasic()
            .iter()
            .map(|&j| -a.column(j).dot(&rho))
            .collect()
    }

    /// `Δx_B = A_B⁻¹ a_j`
    fn tableau_column(&self, j: usize) -> Vec<f64> {
        self.fact.solve(&self.a().column(j).to_dense(self.fact.dim()))
    }

    fn pivot(&mut self, tight: TightConstraint, lambda: f64) -> Result<PivotOutcome> {
        let (eps_ratio, eps_feas) = (self.opts.eps_ratio, self.opts.eps_feas);
        let (p, q, dx, dz, kind) = match tight {
            TightConstraint::Nonbasic { position: q, index: j } => {
                let dx = self.tableau_column(j);
                let basic = self.state.partition.basic();
                let free = &self.free;
                let Some(p) = ratio_test(
                    &dx,
                    &self.state.x_base,
                    &self.state.x_pert,
                    lambda,
                    basic,
                    |p| !free[basic[p]],
                    eps_ratio,
                    eps_feas,
                ) else {
                    return Ok(PivotOutcome::Unbounded);
                };
                (p, q, dx, self.tableau_row(p), PivotKind::PrimalPivot)
            }
            TightConstraint::Basic { position: p, .. } => {
                let dz = self.tableau_row(p);
                let Some(q) = ratio_test(
                    &dz,
                    &self.state.z_base,
                    &self.state.z_pert,
                    lambda,
                    self.state.partition.nonbasic(),
                    |_| true,
                    eps_ratio,
                    eps_feas,
                ) else {
                    return Ok(PivotOutcome::Infeasible);
                };
                let j = self.state.partition.nonbasic()[q];
                (p, q, self.tableau_column(j), dz, PivotKind::DualPivot)
            }
        };
        self.apply_pivot(p, q, dx, dz, kind, lambda).map(PivotOutcome::Done)
    }

    fn apply_pivot(
        &mut self,
        p: usize,
        q: usize,
        dx: Vec<f64>,
        mut dz: Vec<f64>,
        kind: PivotKind,
        lambda: f64,
    ) -> Result<PivotEvent> {
        if dx[p] == 0.0 {
            return Err(LinalgError::UpdateDegenerate { position: p, pivot: 0.0 }.into());
        }
        dz[q] = -dx[p];
        let s = &mut self.state;
        let t = s.x_base[p] / dx[p];
        let t_bar = s.x_pert[p] / dx[p];
        let sz = s.z_base[q] / dz[q];
        let sz_bar = s.z_pert[q] / dz[q];
        for (r, d) in dx.iter().enumerate() {
            s.x_base[r] -= t * d;
            s.x_pert[r] -= t_bar * d;
        }
        s.x_base[p] = t;
        s.x_pert[p] = t_bar;
        for (r, d) in dz.iter().enumerate() {
            s.z_base[r] -= sz * d;
            s.z_pert[r] -= sz_bar * d;
        }
        s.z_base[q] = sz;
        s.z_pert[q] = sz_bar;
        let leaving = s.partition.basic()[p];
        let entering = s.partition.nonbasic()[q];
        s.partition.swap(p, q);
        self.fact.replace_column(self.program.a(), p, entering)?;
        if self.fact.updates_since_refactor() == 0 {
            log::debug!("refactorized basis; rebuilding dictionary");
            self.recompute_dictionary();
        } else {
            let c = self.program.c();
            self.state.objective_base = self
                .state
                .partition
                .basic()
                .iter()
                .zip(&self.state.x_base)
                .map(|(&j, x)| c[j] * x)
                .sum();
            self.refresh_interval();
        }
        self.check_feasible_at(lambda)?;
        Ok(PivotEvent {
            kind,
            entering,
            leaving,
            lambda_star: lambda,
            t,
            t_bar,
            s: sz,
            s_bar: sz_bar,
        })
    }

    /// The new dictionary must still be optimal at the breakpoint.
    fn check_feasible_at(&self, lambda: f64) -> Result<()> {
        let s = &self.state;
        let xs: Vec<f64> = s.x_base.iter().zip(&s.x_pert).map(|(b, p)| b + lambda * p).collect();
        let zs: Vec<f64> = s.z_base.iter().zip(&s.z_pert).map(|(b, p)| b + lambda * p).collect();
        let scale = xs.iter().chain(&zs).fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-7 * (1.0 + scale);
        let bad_x = s
            .partition
            .basic()
            .iter()
            .zip(&xs)
            .find(|(&j, &v)| !self.free[j] && (v < -tol || !v.is_finite()));
        if let Some((&j, &v)) = bad_x {
            return Err(PsmError::Solver(format!("basic column {j} is {v:e} after pivot at lambda = {lambda}")));
        }
        let bad_z = s.partition.nonbasic().iter().zip(&zs).find(|(_, &v)| v < -tol || !v.is_finite());
        if let Some((&j, &v)) = bad_z {
            return Err(PsmError::Solver(format!(
                "reduced cost of column {j} is {v:e} after pivot at lambda = {lambda}"
            )));
        }
        Ok(())
    }

    /// Returns to `state`'s basis with a fresh factorization.
    fn restore(&mut self, state: DictionaryState) -> Result<()> {
        self.fact.set_basis(self.program.a(), state.partition.basic())?;
        self.state = state;
        self.recompute_dictionary();
        Ok(())
    }

    fn segment(&self, lo: f64, hi: f64) -> PathSegment {
        let s = &self.state;
        PathSegment {
            lambda_lo: lo,
            lambda_hi: hi,
            primal: s
                .partition
                .basic()
                .iter()
                .enumerate()
                .map(|(p, &j)| (j, Affine::new(s.x_base[p], s.x_pert[p])))
                .collect(),
            dual: s
                .partition
                .nonbasic()
                .iter()
                .enumerate()
                .map(|(q, &j)| (j, Affine::new(s.z_base[q], s.z_pert[q])))
                .collect(),
            entering: None,
            leaving: None,
        }
    }

    /// Runs the homotopy. `observer` sees every segment before the pivot that
    /// would close it and may stop the run there.
    pub fn run(mut self, mut observer: impl FnMut(&PathSegment) -> ControlFlow<()>) -> SolutionPath {
        let n = self.program.num_cols();
        let max_pivots = self.opts.max_pivots.unwrap_or(10 * n);
        let target = self.opts.lambda_target;
        // breakpoints this close to the target are round-off of a degenerate end point
        let snap = LAMBDA_SNAP * (1.0 + target.abs());
        let mut segments = Vec::new();
        let mut pivots: Vec<PivotEvent> = Vec::new();
        let mut hi = self.state.lambda_hi;
        let mut retried = false;
        let (termination, terminal_lambda) = loop {
            let ls = compute_lambda_star(&self.state, &self.free, self.opts.eps_ratio);
            let lambda_star = ls.value.min(hi);
            let tight = match ls.tight {
                Some(t) if lambda_star > target + snap => t,
                _ => {
                    segments.push(self.segment(target, hi.max(target)));
                    let status = if ls.value == f64::NEG_INFINITY || target > 0.0 {
                        Termination::ReachedTarget
                    } else {
                        Termination::LambdaNonpositive
                    };
                    break (status, target);
                }
            };
            let mut seg = self.segment(lambda_star, hi);
            if observer(&seg).is_break() {
                segments.push(seg);
                break (Termination::ReachedTarget, lambda_star);
            }
            if pivots.len() >= max_pivots {
                segments.push(seg);
                break (Termination::IterationCap, lambda_star);
            }
            let snapshot = self.state.clone();
            match self.pivot(tight, lambda_star) {
                Ok(PivotOutcome::Done(ev)) => {
                    log::trace!("{}", ev.trace_line(pivots.len() + 1));
                    seg.entering = Some(ev.entering);
                    seg.leaving = Some(ev.leaving);
                    segments.push(seg);
                    pivots.push(ev);
                    hi = lambda_star;
                    retried = false;
                }
                Ok(PivotOutcome::Unbounded) => {
                    segments.push(seg);
                    break (Termination::Unbounded, lambda_star);
                }
                Ok(PivotOutcome::Infeasible) => {
                    segments.push(seg);
                    break (Termination::Infeasible, lambda_star);
                }
                Err(e) if !retried => {
                    log::warn!("pivot at lambda = {lambda_star} failed ({e}); refactorizing and retrying");
                    retried = true;
                    if let Err(e) = self.restore(snapshot) {
                        log::error!("refactorization failed: {e}");
                        segments.push(seg);
                        break (Termination::NumericalFailure, lambda_star);
                    }
                }
                Err(e) => {
                    log::error!("pivot at lambda = {lambda_star} failed again: {e}");
                    self.state = snapshot;
                    segments.push(seg);
                    break (Termination::NumericalFailure, lambda_star);
                }
            }
        };
        SolutionPath {
            num_vars: n,
            segments,
            terminal_lambda,
            termination,
            pivots,
        }
    }
}

/// Basis used when none is supplied: the slack columns of a converted
/// inequality program.
pub fn slack_basis(original_cols: usize, rows: usize) -> Vec<usize> {
    (original_cols..original_cols + rows).collect()
}

/// Solves the path of `program`. Inequality programs are converted to
/// equality form first and, without an explicit basis, start from their
/// slack basis; the returned path then indexes the converted columns
/// (originals first, slacks after).
pub fn solve_path(
    program: &ParametricProgram,
    opts: &SolveOptions,
    initial_basis: Option<&[usize]>,
) -> Result<SolutionPath> {
    solve_path_with_observer(program, opts, initial_basis, |_| ControlFlow::Continue(()))
}

pub fn solve_path_with_observer(
    program: &ParametricProgram,
    opts: &SolveOptions,
    initial_basis: Option<&[usize]>,
    observer: impl FnMut(&PathSegment) -> ControlFlow<()>,
) -> Result<SolutionPath> {
    let (standard, slack) = program.to_standard_form();
    let basis = match (initial_basis, program.kind()) {
        (Some(b), _) => b.to_vec(),
        (None, ConstraintKind::LessEqual) => slack_basis(slack.original_cols, program.num_rows()),
        (None, ConstraintKind::Equality) => return Err(PsmError::MissingBasis),
    };
    let engine = Engine::initialize(&standard, &basis, opts)?;
    Ok(engine.run(observer))
}

#[cfg(test)]
mod tests;
