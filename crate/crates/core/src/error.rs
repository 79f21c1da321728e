use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry out of range: {0}")]
    GeometryOutOfRange(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver failed on {context}")]
    EigenFailure { context: String },

    #[error("self-orthogonal eigenvector in degenerate cluster {cluster:?} (bilinear norm {norm:.3e})")]
    DefectiveMode { cluster: Vec<usize>, norm: f64 },

    #[error("non-finite state at t = {t} (dt = {dt})")]
    Instability { t: f64, dt: f64 },

    #[error("unsupported initial state: {0}")]
    UnsupportedState(String),

    #[error("steady-state pole for mode {mode}: |G - i delta| = {magnitude:.3e}")]
    Singularity { mode: usize, magnitude: f64 },

    #[error("imaginary residual {imag:.3e} too large against real part {real:.3e} ({what})")]
    ImaginaryResidual { what: String, real: f64, imag: f64 },

    #[error("resonance scan failed: {0}")]
    Resonance(String),

    #[error("missing species data: {0}")]
    MissingSpecies(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: arguments, geometry, configuration.
    Input,
    /// The numerics failed on valid input.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::GeometryOutOfRange(_)
            | Error::InvalidGeometry(_)
            | Error::Domain(_)
            | Error::DimensionMismatch { .. }
            | Error::UnsupportedState(_)
            | Error::MissingSpecies(_) => ErrorKind::Input,
            Error::EigenFailure { .. }
            | Error::DefectiveMode { .. }
            | Error::Instability { .. }
            | Error::Singularity { .. }
            | Error::ImaginaryResidual { .. }
            | Error::Resonance(_)
            | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }
}
