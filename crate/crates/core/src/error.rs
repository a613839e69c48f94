use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The field couples to a conserved quantity (uniform shift) and carries no information.
    #[error("degenerate potential: gamma = {gamma} must be > 0 (uniform shift carries no signal)")]
    DegeneratePotential { gamma: f64 },

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("half-filling sector undefined for odd L = {l}")]
    SectorUndefined { l: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("near-degenerate ground state: gap {gap:e} below threshold {threshold:e}")]
    Degenerate { gap: f64, threshold: f64 },

    #[error("adaptive step search left the overlap window after {adjustments} adjustments (deficit {deficit:e}, step {step:e})")]
    StepSearch {
        adjustments: usize,
        deficit: f64,
        step: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("ill-conditioned bound: Fisher matrix not positive definite (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("zero energy gap")]
    ZeroGap,

    #[error("fit error: {0}")]
    Fit(String),

    #[error("no abscissa overlap between scaled curves")]
    NoOverlap,

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("missing inputs: {}", .0.join(", "))]
    MissingInputs(Vec<String>),

    #[error("nothing to report in {0}")]
    NothingToReport(std::path::PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
