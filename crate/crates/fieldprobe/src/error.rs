//! Error type shared across the library.

use thiserror::Error;

/// Errors raised by lattice, solver, algebra and state operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty region")]
    EmptyRegion,

    #[error("cell ({t}, {x}) out of range for lattice {n_t}x{n_x}")]
    CellOutOfRange { t: usize, x: usize, n_t: usize, n_x: usize },

    #[error("lattice mismatch")]
    LatticeMismatch,

    #[error("operator context mismatch")]
    ContextMismatch,

    #[error("component layout mismatch")]
    LayoutMismatch,

    #[error("support touches marching boundary")]
    SupportTouchesBoundary,

    #[error("cone wrap detected")]
    ConeWrap,

    #[error("coupling region touches temporal boundary")]
    CouplingTouchesBoundary,

    #[error("target lacks two consecutive slices")]
    TargetLacksSlices,

    #[error("mode instability: omega_k dt >= 2 (k = {mode}, omega_k dt = {omega_dt})")]
    ModeInstability { mode: usize, omega_dt: f64 },

    #[error("degree overflow")]
    DegreeOverflow,

    #[error("vanishing normalization: effect has zero amplitude in omega")]
    VanishingNormalization,

    #[error("regions not causally orderable")]
    NotOrderable,

    #[error("perturbative formula requires centered probe state")]
    CenteredStateRequired,

    #[error("coupling profile must be real-valued")]
    ComplexCoupling,

    #[error("input must be real-valued")]
    RealInputRequired,

    #[error("mass must be strictly positive, got {0}")]
    NonpositiveMass(f64),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("window touches boundary")]
    WindowTouchesBoundary,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
