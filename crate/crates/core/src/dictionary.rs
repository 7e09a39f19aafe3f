//! Basis partitions and perturbed dictionaries.

use serde::{Deserialize, Serialize};

use crate::error::{PsmError, Result};

/// Split of the column indices into basic and nonbasic sets. Positions
/// matter: basic position `p` is the `p`-th column of the basis matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisPartition {
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
}

impl BasisPartition {
    /// Builds the partition of `0..n` with the given basic columns; the
    /// nonbasic set is the complement in increasing order.
    pub fn new(n: usize, basic: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; n];
        for &j in &basic {
            if j >= n {
                return Err(PsmError::InvalidBasis(format!("column {j} out of range 0..{n}")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(PsmError::InvalidBasis(format!("column {j} listed twice")));
            }
        }
        let nonbasic = (0..n).filter(|&j| !seen[j]).collect();
        Ok(Self { basic, nonbasic })
    }

    pub fn basic(&self) -> &[usize] {
        &self.basic
    }

    pub fn nonbasic(&self) -> &[usize] {
        &self.nonbasic
    }

    pub fn num_vars(&self) -> usize {
        self.basic.len() + self.nonbasic.len()
    }

    /// Exchanges basic position `p` with nonbasic position `q`.
    pub fn swap(&mut self, p: usize, q: usize) {
        std::mem::swap(&mut self.basic[p], &mut self.nonbasic[q]);
    }

    /// Disjoint cover of `0..n` with the expected sizes.
    pub fn is_valid(&self, m: usize) -> bool {
        let n = self.num_vars();
        let mut seen = vec![false; n];
        self.basic.len() == m
            && self
                .basic
                .iter()
                .chain(&self.nonbasic)
                .all(|&j| j < n && !std::mem::replace(&mut seen[j], true))
    }

    /// Order-independent fingerprint of the basic set.
    pub fn basis_key(&self) -> Vec<usize> {
        let mut k = self.basic.clone();
        k.sort_unstable();
        k
    }
}

/// The dictionary of one basis with its λ-perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryState {
    pub partition: BasisPartition,
    /// `x*_B`, by basis position.
    pub x_base: Vec<f64>,
    /// `x̄_B`
    pub x_pert: Vec<f64>,
    /// `z*_N`, by nonbasic position.
    pub z_base: Vec<f64>,
    /// `z̄_N`
    pub z_pert: Vec<f64>,
    #[serde(with = "crate::path::inf_f64")]
    pub lambda_lo: f64,
    #[serde(with = "crate::path::inf_f64")]
    pub lambda_hi: f64,
    /// `c_Bᵀ x*_B`
    pub objective_base: f64,
}

impl DictionaryState {
    pub fn primal_at(&self, lambda: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.partition.num_vars()];
        for (p, &j) in self.partition.basic().iter().enumerate() {
            x[j] = self.x_base[p] + lambda * self.x_pert[p];
        }
        x
    }

    pub fn dual_at(&self, lambda: f64) -> Vec<f64> {
        let mut z = vec![0.0; self.partition.num_vars()];
        for (q, &j) in self.partition.nonbasic().iter().enumerate() {
            z[j] = self.z_base[q] + lambda * self.z_pert[q];
        }
        z
    }
}
