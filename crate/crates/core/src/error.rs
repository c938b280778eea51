use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grids of the operands differ")]
    GridMismatch,

    #[error("wave function vanishes on the whole grid")]
    VanishingWaveFunction,

    #[error("packet tail {ratio:.3e} of peak at the domain edge exceeds {limit:.0e}; enlarge the grid")]
    DomainTooSmall { ratio: f64, limit: f64 },

    #[error("norm drifted by {drift:.3e} at t = {time} fs")]
    NormDrift { time: f64, drift: f64 },

    #[error("wave reached the boundary at t = {time} fs (edge amplitude {ratio:.3e} of peak)")]
    BoundaryReached { time: f64, ratio: f64 },

    #[error("momentum content {outside:.3e} lies beyond the Wigner band |k| < {k_max:.4} nm^-1")]
    NyquistViolation { outside: f64, k_max: f64 },

    #[error("imaginary residue {residue:.3e} of the Wigner assembly exceeds tolerance")]
    ImaginaryResidue { residue: f64 },

    #[error("coherent probe of width {s} nm is not resolved: {reason}")]
    ProbeUnresolved { s: f64, reason: String },

    #[error("{aborted} of {total} trajectories aborted, above the allowed fraction")]
    TooManyAborted { aborted: usize, total: usize },

    #[error("trajectories still cross at t = {time} fs after {refinements} refinements")]
    TrajectoryCrossing { time: f64, refinements: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error("malformed artifact {path}: {reason}")]
    MalformedArtifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
