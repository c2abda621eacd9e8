use thiserror::Error;

/// Errors produced by the simulation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kick coefficients not decayed: |W(±{n_max})| = {tail:.3e} exceeds {tolerance:.1e}; increase n_max")]
    TailNotDecayed {
        n_max: usize,
        tail: f64,
        tolerance: f64,
    },

    #[error("floquet matrix needs kick coefficients up to |n| = {needed}, only {available} available")]
    InsufficientCoefficients { needed: usize, available: usize },

    #[error("eigensolver failed to converge ({0}); try a smaller truncation or non-Hermiticity")]
    EigenFailure(String),

    #[error("participation ratio of a zero vector")]
    ZeroVector,

    #[error("all {total} Floquet modes were flagged as edge states; increase the truncation")]
    AllFiltered { total: usize },

    #[error("threshold detector is not monotone across the scanned bracket")]
    NonMonotoneDetector { scan: Vec<(f64, f64)> },

    #[error("beta = {numerator}/{denominator} is not in lowest terms")]
    NotCoprime { numerator: u64, denominator: u64 },

    #[error("edge spill {spill:.3e} exceeds {tolerance:.1e} after kick {kick}; increase the truncation")]
    SpillExceeded { kick: usize, spill: f64, tolerance: f64 },

    #[error("state norm is no longer finite after kick {kick}")]
    NormOverflow { kick: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("quadrature not converged with {nodes} nodes (relative change {change:.3e})")]
    QuadratureUnresolved { nodes: usize, change: f64 },

    #[error("{edge_fraction:.3e} of the field power reached the absorbing window after round trip {round_trip}; enlarge the grid")]
    WindowOverflow { round_trip: usize, edge_fraction: f64 },

    #[error("mismatched parameters: {0}")]
    MismatchedParams(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
