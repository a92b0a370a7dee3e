//! Small dense semidefinite programs over complex Hermitian PSD blocks.
//!
//! Variables are Hermitian positive semidefinite matrix blocks plus real
//! scalars (optionally sign-constrained). Objective and constraints are
//! linear in the real inner product `Re Tr(A X)`. Problems are solved with a
//! primal-dual interior-point method; see [`solve`].

pub mod io;
pub mod linalg;
mod problem;
mod solver;

pub use linalg::{dominant_rank_ratio, psd_factor, psd_sqrt_columns, CMat, CVec, C64};
pub use problem::{
    BlockId, BlockSpec, Coeff, Constraint, Objective, ScalarId, ScalarSpec, SdpProblem, Sense,
};
pub use solver::{solve, solve_with, SdpSolution, SolveOptions, SolveStatus};

#[derive(Debug, thiserror::Error)]
pub enum ConicError {
    #[error("problem has no variables")]
    Empty,
    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },
    #[error("{context}: matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { context: String, defect: f64 },
    #[error("{0}: non-finite coefficient")]
    NonFinite(String),
    #[error("unknown variable referenced in {0}")]
    UnknownVariable(String),
    #[error(
        "matrix is not positive semidefinite: eigenvalue {min_eigenvalue:.3e} below {floor:.3e}"
    )]
    NotPsd { min_eigenvalue: f64, floor: f64 },
    #[error("problem file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
