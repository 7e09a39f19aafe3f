//! Parametric simplex solver for linear programs whose right-hand side and
//! objective depend affinely on a scalar λ, with reductions from sparse
//! learning problems.
//!
//! ```
//! use psm_core::{solve_path, ConstraintKind, ParametricProgram, SolveOptions, SparseMatrix};
//!
//! // max −u − v  s.t.  4u − 4v ≤ 2 + λ,  −4u + 4v ≤ −2 + λ
//! let a = SparseMatrix::from_dense_rows(&[vec![4.0, -4.0], vec![-4.0, 4.0]]);
//! let p = ParametricProgram::new(
//!     a,
//!     vec![2.0, -2.0],
//!     vec![1.0, 1.0],
//!     vec![-1.0, -1.0],
//!     vec![0.0, 0.0],
//!     ConstraintKind::LessEqual,
//! )
//! .unwrap();
//! let path = solve_path(&p, &SolveOptions::default(), None).unwrap();
//! assert!(path.termination.is_success());
//! let x = path.primal_at(0.0).unwrap();
//! assert!((x[0] - 0.5).abs() < 1e-12);
//! ```

pub mod basis;
pub mod dictionary;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod path;
pub mod program;
pub mod reductions;

pub use basis::{BasisFactorization, FactorizationMode};
pub use dictionary::{BasisPartition, DictionaryState};
pub use engine::{solve_path, solve_path_with_observer, verify_certificate, CertificateReport, PivotEvent, PivotKind, SolveOptions};
pub use error::{LinalgError, PsmError, Result};
pub use matrix::SparseMatrix;
pub use path::{Affine, PathSegment, SolutionPath, Termination};
pub use program::{ConstraintKind, ParametricProgram, SlackInfo};
