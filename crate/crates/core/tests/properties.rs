use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use psm_core::engine::verify_segment;
use psm_core::experiments::{feasibility_violation, gen_random_lp};
use psm_core::oracle::BruteForce;
use psm_core::reductions::{solve_dantzig, DantzigInstance};
use psm_core::{
    solve_path, BasisFactorization, FactorizationMode, ParametricProgram, SolutionPath, SolveOptions, SparseMatrix,
};

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn solve(seed: u64, id: u64) -> (ParametricProgram, SolutionPath) {
    let p = gen_random_lp(6, 12, seed, id);
    let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
    (p, path)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_stay_valid(seed in any::<u64>(), id in 0u64..1000) {
        let (p, path) = solve(seed, id);
        let m = p.num_rows();
        let n = path.num_vars;
        for (k, seg) in path.segments.iter().enumerate() {
            let basis = seg.basis();
            prop_assert_eq!(basis.len(), m);
            prop_assert!(basis.iter().all(|&j| j < n));
            if k + 1 < path.segments.len() {
                let ev = &path.pivots[k];
                let next: HashSet<usize> = path.segments[k + 1].basis().into_iter().collect();
                let mut expect: HashSet<usize> = basis.iter().copied().collect();
                prop_assert!(expect.remove(&ev.leaving));
                prop_assert!(expect.insert(ev.entering));
                prop_assert_eq!(next, expect);
            }
        }
    }

    #[test]
    fn segments_tile_downward(seed in any::<u64>(), id in 0u64..1000) {
        let (_, path) = solve(seed, id);
        prop_assert!(path.segments[0].lambda_hi == f64::INFINITY || path.segments.len() == 1);
        for w in path.segments.windows(2) {
            prop_assert!(w[0].lambda_lo <= w[0].lambda_hi);
            prop_assert_eq!(w[1].lambda_hi, w[0].lambda_lo);
        }
        for w in path.pivots.windows(2) {
            prop_assert!(w[1].lambda_star <= w[0].lambda_star);
        }
        let last = path.segments.last().unwrap();
        prop_assert_eq!(last.lambda_lo, path.terminal_lambda);
    }

    #[test]
    fn segments_satisfy_the_constraints(seed in any::<u64>(), id in 0u64..1000) {
        let (p, path) = solve(seed, id);
        let (sf, _) = p.to_standard_form();
        let bn = sf.b().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bbn = sf.b_bar().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for seg in &path.segments {
            let hi = if seg.lambda_hi.is_finite() { seg.lambda_hi } else { seg.lambda_lo + 10.0 };
            for k in 0..10 {
                let lam = seg.lambda_lo + (hi - seg.lambda_lo) * k as f64 / 9.0;
                let x = seg.evaluate_primal(lam, sf.num_cols()).unwrap();
                let ax = sf.a().mul_vec(&x);
                let rhs = sf.rhs_at(lam);
                let tol = 1e-8 * (1.0 + bn + lam.abs() * bbn);
                for (u, v) in ax.iter().zip(&rhs) {
                    prop_assert!((u - v).abs() <= tol, "{} vs {} at {}", u, v, lam);
                }
            }
        }
    }

    #[test]
    fn certificates_hold_at_segment_ends(seed in any::<u64>(), id in 0u64..1000) {
        let (p, path) = solve(seed, id);
        let (sf, _) = p.to_standard_form();
        for seg in &path.segments {
            for lam in [seg.lambda_lo, seg.lambda_hi] {
                if lam.is_finite() {
                    let rep = verify_segment(&sf, seg, lam);
                    prop_assert!(rep.passed, "{:?}", rep);
                }
            }
        }
    }

    #[test]
    fn bases_never_repeat(seed in any::<u64>(), id in 0u64..1000) {
        let (p, path) = solve(seed, id);
        let mut seen = HashSet::new();
        for seg in &path.segments {
            prop_assert!(seen.insert(seg.basis()));
        }
        let (m, n) = (p.num_rows(), path.num_vars);
        prop_assert!(path.pivots.len() as f64 <= binomial(n, m));
    }

    #[test]
    fn refactor_limit_does_not_change_the_path(seed in any::<u64>(), id in 0u64..1000) {
        let p = gen_random_lp(6, 12, seed, id);
        let a = solve_path(&p, &SolveOptions::default(), None).unwrap();
        let opts = SolveOptions { refactor_limit: 1, ..SolveOptions::default() };
        let b = solve_path(&p, &opts, None).unwrap();
        prop_assert_eq!(a.pivots.len(), b.pivots.len());
        prop_assert_eq!(a.termination, b.termination);
        for (u, v) in a.segments.iter().zip(&b.segments) {
            prop_assert_eq!(u.basis(), v.basis());
            prop_assert!((u.lambda_lo - v.lambda_lo).abs() <= 1e-9 * (1.0 + u.lambda_lo.abs()));
        }
    }

    #[test]
    fn oracle_is_deterministic(seed in any::<u64>(), id in 0u64..1000, lam in 0.0f64..4.0) {
        let p = gen_random_lp(4, 6, seed, id);
        let o = BruteForce::new(&p).unwrap();
        prop_assert_eq!(o.solve(lam), o.solve(lam));
    }
}

fn random_basis_matrix(entries: &[f64], m: usize, extra: usize) -> SparseMatrix {
    SparseMatrix::from_fn(m, m + extra, |i, j| {
        if j < m {
            if i == j { 1.0 } else { 0.0 }
        } else {
            entries[i * extra + (j - m)]
        }
    })
}

fn gap(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn updates_match_fresh_factorizations(
        entries in prop::collection::vec(-1.0f64..1.0, 8 * 16),
        moves in prop::collection::vec((0usize..8, 8usize..24), 1..50),
        rhs in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let a = random_basis_matrix(&entries, 8, 16);
        let mut basic: Vec<usize> = (0..8).collect();
        let mut f = BasisFactorization::factorize_with(&a, &basic, FactorizationMode::Dense, 50).unwrap();
        for (pos, col) in moves {
            if basic.contains(&col) || f.replace_column(&a, pos, col).is_err() {
                continue;
            }
            basic[pos] = col;
            let fresh = BasisFactorization::factorize_with(&a, &basic, FactorizationMode::Dense, 50).unwrap();
            prop_assert!(gap(&f.solve(&rhs), &fresh.solve(&rhs)) <= 1e-7);
            prop_assert!(gap(&f.solve_transpose(&rhs), &fresh.solve_transpose(&rhs)) <= 1e-7);
        }
    }

    #[test]
    fn transpose_solves_invert_the_basis(
        entries in prop::collection::vec(-1.0f64..1.0, 8 * 8),
        moves in prop::collection::vec((0usize..8, 8usize..16), 0..20),
    ) {
        let a = random_basis_matrix(&entries, 8, 8);
        let mut basic: Vec<usize> = (0..8).collect();
        let mut f = BasisFactorization::factorize(&a, &basic).unwrap();
        for (pos, col) in moves {
            if !basic.contains(&col) && f.replace_column(&a, pos, col).is_ok() {
                basic[pos] = col;
            }
        }
        let cond = f.condition_estimate(&a);
        for i in 0..8 {
            let mut e = vec![0.0; 8];
            e[i] = 1.0;
            let r = f.solve_transpose(&e);
            for (k, &j) in basic.iter().enumerate() {
                let v = a.column(j).dot(&r);
                let want = if k == i { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() <= 1e-12 * cond.max(1.0), "{} vs {}", v, want);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dantzig_paths_are_feasible_and_sign_equivariant(
        xs in prop::collection::vec(-1.0f64..1.0, 6 * 4),
        ys in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        let x = DMatrix::from_row_slice(6, 4, &xs);
        let y = DVector::from_vec(ys);
        prop_assume!(x.tr_mul(&y).amax() > 1e-3);
        let (pa, ta) = solve_dantzig(&DantzigInstance::new(x.clone(), y.clone()).unwrap(), &SolveOptions::default()).unwrap();
        let (_, tb) = solve_dantzig(&DantzigInstance::new(x.clone(), -&y).unwrap(), &SolveOptions::default()).unwrap();
        prop_assert!(pa.termination.is_success());
        for bp in &ta.breakpoints {
            prop_assert!(feasibility_violation(&x, &y, &bp.values, bp.lambda) <= 1e-9 * (1.0 + bp.lambda));
            let neg = tb.value_at(bp.lambda).unwrap();
            for (u, v) in bp.values.iter().zip(&neg) {
                prop_assert!((u + v).abs() <= 1e-8 * (1.0 + u.abs()));
            }
        }
    }
}
