//! Parametric linear programs
//!
//! ```text
//! max (c + λ c̄)ᵀ x   s.t.  A x = b + λ b̄   (or  A x ≤ b + λ b̄),   x ≥ 0
//! ```
//!
//! plus conversion of the inequality form to equality form by slack
//! augmentation, and the JSON / COO text file formats.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PsmError, Result};
use crate::matrix::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    #[serde(alias = "Equality", alias = "eq")]
    Equality,
    #[serde(alias = "LessEqual", alias = "le")]
    LessEqual,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::Equality => "equality",
            ConstraintKind::LessEqual => "less_equal",
        })
    }
}

impl FromStr for ConstraintKind {
    type Err = PsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equality" | "Equality" | "eq" => Ok(ConstraintKind::Equality),
            "less_equal" | "LessEqual" | "le" => Ok(ConstraintKind::LessEqual),
            other => Err(PsmError::Parse(format!("unknown constraint kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricProgram {
    a: SparseMatrix,
    b: Vec<f64>,
    b_bar: Vec<f64>,
    c: Vec<f64>,
    c_bar: Vec<f64>,
    kind: ConstraintKind,
    /// Columns exempt from `x ≥ 0`. Reducers use this for auxiliary
    /// variables that are defined by an equality and carry no sign.
    free: Vec<usize>,
}

/// Where the slack columns of a converted program live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlackInfo {
    pub original_cols: usize,
    pub num_slacks: usize,
}

impl SlackInfo {
    pub fn slack_range(&self) -> std::ops::Range<usize> {
        self.original_cols..self.original_cols + self.num_slacks
    }

    pub fn is_slack(&self, col: usize) -> bool {
        self.slack_range().contains(&col)
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PsmError::InvalidProgram(format!("{name} has non-finite entries")))
    }
}

impl ParametricProgram {
    pub fn new(
        a: SparseMatrix,
        b: Vec<f64>,
        b_bar: Vec<f64>,
        c: Vec<f64>,
        c_bar: Vec<f64>,
        kind: ConstraintKind,
    ) -> Result<Self> {
        let (m, n) = (a.nrows(), a.ncols());
        if m == 0 || n == 0 {
            return Err(PsmError::InvalidProgram(format!("empty program ({m}x{n})")));
        }
        for (name, v, want) in [("b", &b, m), ("b_bar", &b_bar, m), ("c", &c, n), ("c_bar", &c_bar, n)] {
            if v.len() != want {
                return Err(PsmError::InvalidProgram(format!(
                    "{name} has length {}, expected {want}",
                    v.len()
                )));
            }
            check_finite(name, v)?;
        }
        if a.triplets().any(|(_, _, v)| !v.is_finite()) {
            return Err(PsmError::InvalidProgram("A has non-finite entries".into()));
        }
        Ok(Self {
            a,
            b,
            b_bar,
            c,
            c_bar,
            kind,
            free: Vec::new(),
        })
    }

    /// Marks columns as sign-unrestricted.
    pub fn with_free_columns(mut self, mut cols: Vec<usize>) -> Result<Self> {
        cols.sort_unstable();
        cols.dedup();
        if cols.last().is_some_and(|&j| j >= self.num_cols()) {
            return Err(PsmError::InvalidProgram("free column out of range".into()));
        }
        self.free = cols;
        Ok(self)
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn b_bar(&self) -> &[f64] {
        &self.b_bar
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn c_bar(&self) -> &[f64] {
        &self.c_bar
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn free_columns(&self) -> &[usize] {
        &self.free
    }

    pub fn free_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_cols()];
        for &j in &self.free {
            mask[j] = true;
        }
        mask
    }

    /// `b + λ b̄`
    pub fn rhs_at(&self, lambda: f64) -> Vec<f64> {
        self.b.iter().zip(&self.b_bar).map(|(b, bb)| b + lambda * bb).collect()
    }

    /// `c + λ c̄`
    pub fn objective_at(&self, lambda: f64) -> Vec<f64> {
        self.c.iter().zip(&self.c_bar).map(|(c, cb)| c + lambda * cb).collect()
    }

    pub fn objective_value(&self, x: &[f64], lambda: f64) -> f64 {
        self.c
            .iter()
            .zip(&self.c_bar)
            .zip(x)
            .map(|((c, cb), x)| (c + lambda * cb) * x)
            .sum()
    }

    /// Equality form with slacks appended as columns `n..n+m`. Equality
    /// programs pass through unchanged with zero slacks.
    pub fn to_standard_form(&self) -> (ParametricProgram, SlackInfo) {
        let n = self.num_cols();
        match self.kind {
            ConstraintKind::Equality => (
                self.clone(),
                SlackInfo {
                    original_cols: n,
                    num_slacks: 0,
                },
            ),
            ConstraintKind::LessEqual => {
                let m = self.num_rows();
                let mut c = self.c.clone();
                c.resize(n + m, 0.0);
                let mut c_bar = self.c_bar.clone();
                c_bar.resize(n + m, 0.0);
                let program = ParametricProgram {
                    a: self.a.append_identity(),
                    b: self.b.clone(),
                    b_bar: self.b_bar.clone(),
                    c,
                    c_bar,
                    kind: ConstraintKind::Equality,
                    free: self.free.clone(),
                };
                (
                    program,
                    SlackInfo {
                        original_cols: n,
                        num_slacks: m,
                    },
                )
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProgramDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProgramDoc = serde_json::from_str(text)?;
        doc.try_into()
    }

    /// Writes the sparse text variant:
    ///
    /// ```text
    /// psm-coo <m> <n> <kind>
    /// b <m values>
    /// b_bar <m values>
    /// c <n values>
    /// c_bar <n values>
    /// free <indices>        (optional)
    /// <i> <j> <value>       (one line per nonzero of A)
    /// ```
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "psm-coo {} {} {}", self.num_rows(), self.num_cols(), self.kind)?;
        for (name, v) in [("b", &self.b), ("b_bar", &self.b_bar), ("c", &self.c), ("c_bar", &self.c_bar)] {
            write!(w, "{name}")?;
            for x in v.iter() {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        if !self.free.is_empty() {
            write!(w, "free")?;
            for j in &self.free {
                write!(w, " {j}")?;
            }
            writeln!(w)?;
        }
        for (i, j, v) in self.a.triplets() {
            writeln!(w, "{i} {j} {v}")?;
        }
        Ok(())
    }

    pub fn read_coo<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .map(|l| l.map_err(PsmError::from))
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));
        let header = lines
            .next()
            .ok_or_else(|| PsmError::Parse("empty COO file".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "psm-coo" {
            return Err(PsmError::Parse(format!("bad COO header `{header}`")));
        }
        let m: usize = parse_tok(h[1])?;
        let n: usize = parse_tok(h[2])?;
        let kind: ConstraintKind = h[3].parse()?;
        let (mut b, mut b_bar, mut c, mut c_bar) = (None, None, None, None);
        let mut free = Vec::new();
        let mut triplets = Vec::new();
        for line in lines {
            let line = line?;
            let mut toks = line.split_whitespace();
            let first = toks.next().unwrap_or_default();
            let rest = || -> Result<Vec<f64>> { line.split_whitespace().skip(1).map(parse_tok).collect() };
            match first {
                "b" => b = Some(rest()?),
                "b_bar" => b_bar = Some(rest()?),
                "c" => c = Some(rest()?),
                "c_bar" => c_bar = Some(rest()?),
                "free" => free = toks.map(parse_tok).collect::<Result<Vec<usize>>>()?,
                _ => {
                    let i: usize = parse_tok(first)?;
                    let j: usize = parse_tok(toks.next().unwrap_or_default())?;
                    let v: f64 = parse_tok(toks.next().unwrap_or_default())?;
                    if i >= m || j >= n {
                        return Err(PsmError::Parse(format!("entry ({i}, {j}) outside {m}x{n}")));
                    }
                    triplets.push((i, j, v));
                }
            }
        }
        let need = |v: Option<Vec<f64>>, name: &str| v.ok_or_else(|| PsmError::Parse(format!("missing `{name}` line")));
        let a = SparseMatrix::from_triplets(m, n, triplets);
        ParametricProgram::new(a, need(b, "b")?, need(b_bar, "b_bar")?, need(c, "c")?, need(c_bar, "c_bar")?, kind)?
            .with_free_columns(free)
    }

    /// Reads either format, choosing by extension (`.json` / anything else).
    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::read_coo(text.as_bytes())
        }
    }
}

fn parse_tok<T: FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| PsmError::Parse(format!("cannot parse `{s}`")))
}

#[derive(Serialize, Deserialize)]
struct ProgramDoc {
    m: usize,
    n: usize,
    kind: ConstraintKind,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    b_bar: Vec<f64>,
    c: Vec<f64>,
    c_bar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    free: Vec<usize>,
}

impl From<&ParametricProgram> for ProgramDoc {
    fn from(p: &ParametricProgram) -> Self {
        Self {
            m: p.num_rows(),
            n: p.num_cols(),
            kind: p.kind,
            a: p.a.to_dense_rows(),
            b: p.b.clone(),
            b_bar: p.b_bar.clone(),
            c: p.c.clone(),
            c_bar: p.c_bar.clone(),
            free: p.free.clone(),
        }
    }
}

impl TryFrom<ProgramDoc> for ParametricProgram {
    type Error = PsmError;

    fn try_from(doc: ProgramDoc) -> Result<Self> {
        if doc.a.len() != doc.m || doc.a.iter().any(|r| r.len() != doc.n) {
            return Err(PsmError::InvalidProgram(format!("`A` is not {}x{}", doc.m, doc.n)));
        }
        let a = SparseMatrix::from_dense_rows(&doc.a);
        ParametricProgram::new(a, doc.b, doc.b_bar, doc.c, doc.c_bar, doc.kind)?.with_free_columns(doc.free)
    }
}
