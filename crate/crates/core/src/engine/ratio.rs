//! Breakpoint and ratio-test selection rules.

use serde::{Deserialize, Serialize};

use crate::dictionary::DictionaryState;

/// Relative slack under which two candidate ratios count as tied.
pub const TIE_REL_TOL: f64 = 1e-10;

/// Which part of the dictionary hits zero at λ*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TightConstraint {
    /// A reduced cost; resolved by a primal pivot bringing `index` in.
    Nonbasic { position: usize, index: usize },
    /// A basic value; resolved by a dual pivot sending `index` out.
    Basic { position: usize, index: usize },
}

impl TightConstraint {
    pub fn index(&self) -> usize {
        match *self {
            TightConstraint::Nonbasic { index, .. } | TightConstraint::Basic { index, .. } => index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaStar {
    /// `-∞` when no perturbation entry is positive.
    pub value: f64,
    pub tight: Option<TightConstraint>,
}

fn is_free(free: &[bool], j: usize) -> bool {
    free.get(j).copied().unwrap_or(false)
}

fn tied(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_REL_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Largest λ at which some entry of the dictionary reaches zero, over entries
/// whose perturbation exceeds `eps_ratio`. Ties go to the nonbasic family,
/// then to the smaller column index. Entries of `free` columns are ignored.
pub fn compute_lambda_star(s: &DictionaryState, free: &[bool], eps_ratio: f64) -> LambdaStar {
    // (ratio, family, column, position); family 0 = nonbasic
    let mut cands: Vec<(f64, u8, usize, usize)> = Vec::new();
    for (q, (&zb, &zp)) in s.z_base.iter().zip(&s.z_pert).enumerate() {
        if zp > eps_ratio {
            cands.push((-zb / zp, 0, s.partition.nonbasic()[q], q));
        }
    }
    for (p, (&xb, &xp)) in s.x_base.iter().zip(&s.x_pert).enumerate() {
        let j = s.partition.basic()[p];
        if xp > eps_ratio && !is_free(free, j) {
            cands.push((-xb / xp, 1, j, p));
        }
    }
    let Some(best) = cands.iter().map(|c| c.0).reduce(f64::max) else {
        return LambdaStar {
            value: f64::NEG_INFINITY,
            tight: None,
        };
    };
    let &(_, family, index, position) = cands
        .iter()
        .filter(|c| tied(c.0, best))
        .min_by_key(|c| (c.1, c.2))
        .expect("the maximum is always among the candidates");
    let tight = if family == 0 {
        TightConstraint::Nonbasic { position, index }
    } else {
        TightConstraint::Basic { position, index }
    };
    LambdaStar {
        value: best,
        tight: Some(tight),
    }
}

/// Smallest λ above which some entry with a negative perturbation turns
/// negative; `+∞` if there is none.
pub fn compute_lambda_max(s: &DictionaryState, free: &[bool], eps_ratio: f64) -> f64 {
    let z = s
        .z_base
        .iter()
        .zip(&s.z_pert)
        .filter(|(_, &zp)| zp < -eps_ratio)
        .map(|(&zb, &zp)| -zb / zp);
    let x = s
        .x_base
        .iter()
        .zip(&s.x_pert)
        .zip(s.partition.basic())
        .filter(|((_, &xp), &j)| xp < -eps_ratio && !is_free(free, j))
        .map(|((&xb, &xp), _)| -xb / xp);
    z.chain(x).fold(f64::INFINITY, f64::min)
}

/// Ratio test shared by both pivot kinds. Among positions with
/// `dir > eps_ratio` (and `eligible`), picks the one maximizing
/// `dir / (base + λ·pert)`. Denominators below `eps_feas` act as `+∞`.
/// Ties, including among infinite ratios, go to the smallest column index.
#[allow(clippy::too_many_arguments)]
pub fn ratio_test(
    dir: &[f64],
    base: &[f64],
    pert: &[f64],
    lambda: f64,
    columns: &[usize],
    eligible: impl Fn(usize) -> bool,
    eps_ratio: f64,
    eps_feas: f64,
) -> Option<usize> {
    let mut degenerate: Option<usize> = None;
    let mut finite: Vec<(f64, usize)> = Vec::new();
    for (p, &d) in dir.iter().enumerate() {
        if !(d > eps_ratio) || !eligible(p) {
            continue;
        }
        let val = base[p] + lambda * pert[p];
        if val < eps_feas {
            if degenerate.is_none_or(|b| columns[p] < columns[b]) {
                degenerate = Some(p);
            }
        } else {
            finite.push((d / val, p));
        }
    }
    if degenerate.is_some() {
        return degenerate;
    }
    let best = finite.iter().map(|c| c.0).reduce(f64::max)?;
    finite
        .iter()
        .filter(|c| tied(c.0, best))
        .min_by_key(|c| columns[c.1])
        .map(|c| c.1)
}
