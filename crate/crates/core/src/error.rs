use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("exponent {0} is outside [1, inf]")]
    InvalidExponent(f64),
    #[error("potential is negative ({value}) at grid index {index}")]
    NegativePotential { index: usize, value: f64 },
    #[error("potential must be real, nonnegative and not identically zero: {0}")]
    InvalidPotential(String),
    #[error("resource guard: {0}")]
    ResourceGuard(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid sigma grid: {0}")]
    InvalidSigmaGrid(String),
    #[error("sigma coverage defect {defect:e} exceeds tolerance {tolerance:e}")]
    CoverageDefect { defect: f64, tolerance: f64 },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("heat propagator requires t >= 0, got {0}")]
    NegativeTime(f64),
    #[error("ball of radius {radius} around {center:?} leaves the box")]
    BallExitsBox { center: Vec<f64>, radius: f64 },
    #[error("zero average of the potential on a sampled ball")]
    ZeroAverage,
    #[error("resolution guard: min rho {rho_min} is below 4h = {limit}")]
    ResolutionGuard { rho_min: f64, limit: f64 },
    #[error("criticality unattainable for cubes {0:?}")]
    CriticalityUnattainable(Vec<usize>),
    #[error("eta lattice incompatible with the frequency lattice: {0}")]
    LatticeIncompatible(String),
    #[error("omega count {given} too small, at least {required} directions are needed")]
    OmegaCount { given: usize, required: usize },
    #[error("family mismatch: {0}")]
    FamilyMismatch(String),
    #[error("remainder block {label} has eigenvalue {value:e} below -1e-10 * {scale:e}")]
    NegativeRemainder { label: usize, value: f64, scale: f64 },
    #[error("zero-norm input")]
    ZeroNorm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that come from a size or resolution guard.
    pub fn is_resource_guard(&self) -> bool {
        matches!(self, Error::ResourceGuard(_) | Error::ResolutionGuard { .. })
    }
}
