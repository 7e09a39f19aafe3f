use std::ops::ControlFlow;

use super::*;
use crate::matrix::SparseMatrix;

fn le(rows: &[Vec<f64>], b: &[f64], b_bar: &[f64], c: &[f64], c_bar: &[f64]) -> ParametricProgram {
    ParametricProgram::new(
        SparseMatrix::from_dense_rows(rows),
        b.to_vec(),
        b_bar.to_vec(),
        c.to_vec(),
        c_bar.to_vec(),
        ConstraintKind::LessEqual,
    )
    .unwrap()
}

// Dantzig program for X = I_d, y given.
fn identity_dantzig(y: &[f64]) -> ParametricProgram {
    let d = y.len();
    let rows: Vec<Vec<f64>> = (0..2 * d)
        .map(|i| {
            (0..2 * d)
                .map(|j| {
                    let same = i % d == j % d;
                    let sign = if (i < d) == (j < d) { 1.0 } else { -1.0 };
                    if same { sign } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let b: Vec<f64> = y.iter().copied().chain(y.iter().map(|v| -v)).collect();
    le(&rows, &b, &vec![1.0; 2 * d], &vec![-1.0; 2 * d], &vec![0.0; 2 * d])
}

#[test]
fn dantzig_scalar_single_dual_pivot() {
    let p = identity_dantzig(&[3.0]);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(path.termination, Termination::LambdaNonpositive);
    assert_eq!(path.pivots.len(), 1);
    let ev = &path.pivots[0];
    assert_eq!(ev.kind, PivotKind::DualPivot);
    assert_eq!((ev.entering, ev.leaving), (0, 3));
    assert_eq!(ev.lambda_star, 3.0);
    assert_eq!((ev.t, ev.t_bar), (3.0, -1.0));

    assert_eq!(path.segments.len(), 2);
    let (s0, s1) = (&path.segments[0], &path.segments[1]);
    assert_eq!((s0.lambda_lo, s0.lambda_hi), (3.0, f64::INFINITY));
    assert_eq!((s1.lambda_lo, s1.lambda_hi), (0.0, 3.0));
    assert_eq!(s1.primal[&0], Affine::new(3.0, -1.0));
    let x = s1.evaluate_primal(1.0, 4).unwrap();
    assert_eq!(x[0], 2.0);
    assert_eq!(x[1], 0.0);
}

#[test]
fn dantzig_initial_dictionary_by_substitution() {
    let p = identity_dantzig(&[3.0, -1.0]);
    let (sf, _) = p.to_standard_form();
    let e = Engine::initialize(&sf, &[4, 5, 6, 7], &SolveOptions::default()).unwrap();
    let s = e.state();
    assert_eq!(s.x_base, vec![3.0, -1.0, -3.0, 1.0]);
    assert_eq!(s.x_pert, vec![1.0; 4]);
    assert_eq!(s.z_base, vec![1.0; 4]);
    assert_eq!(s.z_pert, vec![0.0; 4]);
    assert_eq!(s.lambda_lo, 3.0);
    assert_eq!(s.lambda_hi, f64::INFINITY);
}

#[test]
fn dantzig_identity_two_dims_soft_threshold() {
    let p = identity_dantzig(&[3.0, 0.0]);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(path.pivots.len(), 1);
    let last = path.last().unwrap();
    for lam in [0.0, 0.5, 1.7, 3.0] {
        let x = last.evaluate_primal(lam, 8).unwrap();
        assert!((x[0] - (3.0 - lam)).abs() < 1e-14);
        assert_eq!(x[1], 0.0);
        assert_eq!(x[2] + x[3], 0.0);
    }
    let first = &path.segments[0];
    assert!(first.primal.keys().all(|&j| j >= 4));
}

#[test]
fn primal_pivot_when_reduced_cost_hits_zero() {
    // max (2 − λ) x  s.t.  x ≤ 1
    let p = le(&[vec![1.0]], &[1.0], &[0.0], &[2.0], &[-1.0]);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(path.pivots.len(), 1);
    let ev = &path.pivots[0];
    assert_eq!(ev.kind, PivotKind::PrimalPivot);
    assert_eq!((ev.entering, ev.leaving, ev.lambda_star), (0, 1, 2.0));
    assert_eq!(path.termination, Termination::ReachedTarget);
    let (sf, _) = p.to_standard_form();
    for seg in &path.segments {
        for lam in [seg.lambda_lo, seg.lambda_hi.min(10.0)] {
            let rep = verify_segment(&sf, seg, lam);
            assert!(rep.passed, "{rep:?}");
        }
    }
    assert_eq!(path.primal_at(1.0).unwrap()[0], 1.0);
}

#[test]
fn unbounded_below_breakpoint() {
    // max (1 − λ) x  s.t.  −x ≤ 0
    let p = le(&[vec![-1.0]], &[0.0], &[0.0], &[1.0], &[-1.0]);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(path.termination, Termination::Unbounded);
    assert_eq!(path.terminal_lambda, 1.0);
    assert!(path.pivots.is_empty());
}

#[test]
fn infeasible_below_breakpoint() {
    // x ≤ λ − 1
    let p = le(&[vec![1.0]], &[-1.0], &[1.0], &[-1.0], &[0.0]);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(path.termination, Termination::Infeasible);
    assert_eq!(path.terminal_lambda, 1.0);
}

#[test]
fn zero_rhs_uses_reduced_costs_only() {
    let p = le(&[vec![1.0, 1.0]], &[0.0], &[0.0], &[-1.0, -1.0], &[0.0, 0.0]);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(path.termination, Termination::ReachedTarget);
    assert_eq!(path.segments.len(), 1);
    assert!(path.pivots.is_empty());
}

#[test]
fn infeasible_at_large_lambda_is_rejected() {
    let p = le(&[vec![1.0]], &[-1.0], &[0.0], &[-1.0], &[0.0]);
    assert!(matches!(
        solve_path(&p, &SolveOptions::default(), None),
        Err(PsmError::InfeasibleAtLargeLambda(_))
    ));
}

#[test]
fn duplicate_basis_columns_are_singular() {
    let a = SparseMatrix::from_dense_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 1.0]]);
    let p = ParametricProgram::new(a, vec![1.0, 1.0], vec![1.0, 1.0], vec![0.0; 3], vec![0.0; 3], ConstraintKind::Equality)
        .unwrap();
    let err = solve_path(&p, &SolveOptions::default(), Some(&[0, 1])).unwrap_err();
    assert!(matches!(err, PsmError::Linalg(LinalgError::SingularBasis { .. })));
}

#[test]
fn equality_program_needs_basis() {
    let a = SparseMatrix::from_dense_rows(&[vec![1.0, 1.0]]);
    let p = ParametricProgram::new(a, vec![1.0], vec![0.0], vec![0.0; 2], vec![0.0; 2], ConstraintKind::Equality).unwrap();
    assert!(matches!(solve_path(&p, &SolveOptions::default(), None), Err(PsmError::MissingBasis)));
}

#[test]
fn iteration_cap_and_target() {
    let p = identity_dantzig(&[3.0, 2.0]);
    let full = solve_path(&p, &SolveOptions::default(), None).unwrap();
    assert_eq!(full.pivots.len(), 2);

    let opts = SolveOptions {
        max_pivots: Some(1),
        ..SolveOptions::default()
    };
    let capped = solve_path(&p, &opts, None).unwrap();
    assert_eq!(capped.termination, Termination::IterationCap);
    assert_eq!(capped.terminal_lambda, 2.0);

    let stopped = solve_path(&p, &SolveOptions::with_target(2.5), None).unwrap();
    assert_eq!(stopped.termination, Termination::ReachedTarget);
    assert_eq!(stopped.pivots.len(), 1);
    assert_eq!(stopped.last().unwrap().lambda_lo, 2.5);
}

#[test]
fn observer_can_stop_the_run() {
    let p = identity_dantzig(&[3.0, 2.0, 1.0]);
    let mut seen = 0;
    let path = solve_path_with_observer(&p, &SolveOptions::default(), None, |_| {
        seen += 1;
        if seen == 2 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
    })
    .unwrap();
    assert_eq!(path.termination, Termination::ReachedTarget);
    assert_eq!(path.pivots.len(), 1);
    assert_eq!(path.terminal_lambda, 2.0);
}

#[test]
fn refactor_every_pivot_gives_same_path() {
    let p = identity_dantzig(&[3.0, -2.0, 1.5, 0.5]);
    let a = solve_path(&p, &SolveOptions::default(), None).unwrap();
    let opts = SolveOptions {
        refactor_limit: 1,
        ..SolveOptions::default()
    };
    let b = solve_path(&p, &opts, None).unwrap();
    assert_eq!(a.pivots.len(), b.pivots.len());
    for (sa, sb) in a.segments.iter().zip(&b.segments) {
        assert_eq!(sa.basis(), sb.basis());
        assert!((sa.lambda_lo - sb.lambda_lo).abs() < 1e-12);
    }
}

#[test]
fn phase_one_finds_optimal_basis() {
    // x1 + x2 + w = λ, maximize x1 + 2 x2
    let a = SparseMatrix::from_dense_rows(&[vec![1.0, 1.0, 1.0]]);
    let p = ParametricProgram::new(a, vec![0.0], vec![1.0], vec![1.0, 2.0, 0.0], vec![0.0; 3], ConstraintKind::Equality)
        .unwrap();
    assert!(matches!(
        Engine::initialize(&p, &[2], &SolveOptions::default()),
        Err(PsmError::InfeasibleAtLargeLambda(_))
    ));
    let basis = find_large_lambda_basis(&p, &[2], &SolveOptions::default()).unwrap();
    assert_eq!(basis, vec![1]);
    let path = solve_path(&p, &SolveOptions::default(), Some(&basis)).unwrap();
    assert_eq!(path.primal_at(2.0).unwrap(), vec![0.0, 2.0, 0.0]);
}

#[test]
fn trace_lines_are_tab_separated() {
    let p = identity_dantzig(&[3.0]);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    let mut out = Vec::new();
    write_trace(&path.pivots, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "1\tdual\t0\t3\t3\t3\t1\n");
}

#[test]
fn certificate_flags_perturbed_solution() {
    let p = identity_dantzig(&[3.0]);
    let (sf, _) = p.to_standard_form();
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    let seg = path.last().unwrap();
    let x = seg.primal_unchecked(1.0, 4);
    let z = seg.dual_unchecked(1.0, 4);
    assert!(verify_certificate(&sf, &x, &z, 1.0).passed);
    let mut bad = x.clone();
    bad[0] += 1e-3;
    let rep = verify_certificate(&sf, &bad, &z, 1.0);
    assert!(!rep.passed);
    assert!((rep.primal_residual - 1e-3).abs() < 1e-12);
    // outside the segment the basic values go negative
    let rep = verify_segment(&sf, seg, seg.lambda_hi + 1.0);
    assert!(!rep.passed);
}

#[test]
fn invalid_options_are_rejected() {
    let p = identity_dantzig(&[1.0]);
    for opts in [
        SolveOptions::with_target(-1.0),
        SolveOptions {
            max_pivots: Some(0),
            ..SolveOptions::default()
        },
    ] {
        assert!(matches!(solve_path(&p, &opts, None), Err(PsmError::InvalidOptions(_))));
    }
}
