use thiserror::Error;

use crate::sandpile::Stabilization;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("grid functions live on different lattices")]
    LatticeMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spectral synthesis left an imaginary residue of {0:e}")]
    ImaginaryResidue(f64),

    /// The sweep budget ran out; `partial` holds the state after the last sweep.
    #[error("stabilization did not converge after {sweeps} sweeps (max excess {residual:e})")]
    NonConvergence {
        sweeps: u64,
        residual: f64,
        partial: Box<Stabilization>,
    },

    #[error("stabilization cancelled after {sweeps} sweeps")]
    Cancelled {
        sweeps: u64,
        partial: Box<Stabilization>,
    },

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("Poisson right-hand side has nonzero total {imbalance:e}")]
    ZeroMeanViolation { imbalance: f64 },

    #[error("epsilon {eps} must exceed {threshold}")]
    EpsilonTooSmall { eps: f64, threshold: f64 },

    #[error("the bare kernel sum diverges in dimension {d}; use a mollified sum")]
    DivergentSum { d: usize },

    #[error("kernel evaluated at a lattice point")]
    SingularPoint,

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for requests that are mathematically ill-posed rather than malformed.
    pub fn is_invalid_math(&self) -> bool {
        matches!(
            self,
            Error::DivergentSum { .. }
                | Error::SingularPoint
                | Error::EpsilonTooSmall { .. }
                | Error::ZeroMeanViolation { .. }
        )
    }
}
