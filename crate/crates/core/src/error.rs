use alloc::boxed::Box;
use alloc::string::String;
use nalgebra::{DMatrix, DVector};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    VectorSolver {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        last: DVector<f64>,
    },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    MatrixSolver {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        last: DMatrix<f64>,
    },

    #[error("band sampling exceeded {max_rejects} rejections (band width {band_width})")]
    RejectionBudget { max_rejects: u64, band_width: f64 },

    #[error("hinge minimization missed its optimality contract: loss {loss:.6} vs probe {probe:.6} + kappa {kappa:.6}")]
    ErmContract {
        loss: f64,
        probe: f64,
        kappa: f64,
        best: DVector<f64>,
    },

    #[error("hard thresholding produced the zero vector")]
    DegenerateIterate,

    #[error("weights sum to zero")]
    DegenerateWeights,

    #[error("dimension {dim} exceeds the brute-force limit {limit}")]
    GuardExceeded { dim: usize, limit: usize },

    #[error("soft outlier removal found no feasible weights after {cuts} cuts (certified value {value:.6} > bound {bound:.6})")]
    Infeasible { cuts: usize, value: f64, bound: f64 },

    #[error("phase {phase}: {source}")]
    Phase { phase: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_phase(self, phase: usize) -> Self {
        match self {
            e @ Error::Phase { .. } => e,
            e => Error::Phase {
                phase,
                source: Box::new(e),
            },
        }
    }
}
