use super::{Engine, SolveOptions};
use crate::error::{PsmError, Result};
use crate::path::Termination;
use crate::program::{ConstraintKind, ParametricProgram};

const MAX_ROUNDS: usize = 40;

/// Finds a basis whose dictionary is optimal for every λ from some finite
/// value upward, starting from `start`, which must be primal feasible for
/// large λ.
///
/// Each round fixes λ at a large value `Λ` and runs the homotopy on an
/// auxiliary program in a new parameter μ: right-hand side `b + Λb̄`,
/// objective `c + μc̄'` with `c̄'` equal to −1 on the nonbasic columns. The
/// starting dictionary is optimal for large μ, so the run down to μ = 0 ends
/// at an optimal basis for λ = Λ. If that basis does not stay optimal as
/// λ → ∞, `Λ` grows and the search restarts.
pub fn find_large_lambda_basis(
    program: &ParametricProgram,
    start: &[usize],
    opts: &SolveOptions,
) -> Result<Vec<usize>> {
    if program.kind() != ConstraintKind::Equality {
        return Err(PsmError::InvalidProgram("phase one needs an equality-form program".into()));
    }
    let aux_opts = SolveOptions {
        lambda_target: 0.0,
        ..opts.clone()
    };
    let mut big = primal_threshold(program, start, opts)?.max(1.0) * 2.0;
    if let Some(b) = try_original(program, start, big, opts)? {
        return Ok(b);
    }
    let mut c_aux = vec![-1.0; program.num_cols()];
    for &j in start {
        c_aux[j] = 0.0;
    }
    for round in 0..MAX_ROUNDS {
        let rhs = program.rhs_at(big);
        let aux = ParametricProgram::new(
            program.a().clone(),
            rhs,
            vec![0.0; program.num_rows()],
            program.c().to_vec(),
            c_aux.clone(),
            ConstraintKind::Equality,
        )?
        .with_free_columns(program.free_columns().to_vec())?;
        let engine = Engine::initialize(&aux, start, &aux_opts)?;
        let path = engine.run(|_| std::ops::ControlFlow::Continue(()));
        log::debug!(
            "phase one round {round} at lambda = {big}: {} pivots, {:?}",
            path.pivots.len(),
            path.termination
        );
        match path.termination {
            t if t.is_success() => {}
            Termination::Unbounded => {
                return Err(PsmError::InfeasibleAtLargeLambda(format!("unbounded at lambda = {big}")));
            }
            other => {
                return Err(PsmError::Solver(format!("phase one ended with {other:?} at lambda = {big}")));
            }
        }
        let basis = path
            .last()
            .map(|s| s.basis())
            .ok_or_else(|| PsmError::Solver("phase one produced no segment".into()))?;
        if let Some(b) = try_original(program, &basis, big, opts)? {
            return Ok(b);
        }
        big *= 4.0;
    }
    Err(PsmError::InfeasibleAtLargeLambda(format!(
        "no basis stays optimal up to lambda = infinity after {MAX_ROUNDS} rounds"
    )))
}

// Smallest λ at which `basis` is primal feasible, or an error if it never is.
fn primal_threshold(program: &ParametricProgram, basis: &[usize], opts: &SolveOptions) -> Result<f64> {
    let fact = crate::basis::BasisFactorization::factorize_with(
        program.a(),
        basis,
        opts.factorization,
        opts.refactor_limit,
    )?;
    let x = fact.solve(program.b());
    let xb = fact.solve(program.b_bar());
    let free = program.free_mask();
    let mut lo = f64::NEG_INFINITY;
    for ((&j, &v), &d) in basis.iter().zip(&x).zip(&xb) {
        if free[j] {
            continue;
        }
        if d > opts.eps_ratio {
            lo = lo.max(-v / d);
        } else if d < -opts.eps_ratio || v < -opts.eps_feas {
            return Err(PsmError::InfeasibleAtLargeLambda(format!(
                "starting basis is infeasible for large lambda at column {j}"
            )));
        }
    }
    Ok(lo)
}

// The basis, if its dictionary for the original program is optimal on
// `[λ*, ∞)` with `λ* ≤ big`.
fn try_original(
    program: &ParametricProgram,
    basis: &[usize],
    big: f64,
    opts: &SolveOptions,
) -> Result<Option<Vec<usize>>> {
    match Engine::initialize(program, basis, opts) {
        Ok(e) => {
            let s = e.state();
            let ok = s.lambda_hi == f64::INFINITY && s.lambda_lo <= big;
            Ok(ok.then(|| s.partition.basic().to_vec()))
        }
        Err(PsmError::InfeasibleAtLargeLambda(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
