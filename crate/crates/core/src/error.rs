use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid too coarse: {0}")]
    TooCoarse(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("h = {h} out of the double-precision range (e^(-2 kappa/h) = {scale:e})")]
    HOutOfRange { h: f64, scale: f64 },
    #[error("factorization failed at pivot {pivot} (value {value:e})")]
    Factorization { pivot: usize, value: f64 },
    #[error("eigensolver did not converge after {restarts} restarts ({converged} of {wanted} pairs)")]
    NoConvergence { restarts: usize, converged: usize, wanted: usize },
    #[error("count inconclusive: all {0} computed eigenvalues are below the threshold")]
    Inconclusive(usize),
    #[error("eigenvector changes sign (negative mass {0:e})")]
    Sign(f64),
    #[error("exit density has negative mass {0:e} after clipping")]
    NegativeMass(f64),
    #[error("Newton refinement failed near {0:?}")]
    NonConvergence([f64; 2]),
    #[error("no critical points found")]
    EmptyCriticalSet,
    #[error("degenerate minimum at {0:?}: Hessian formula unavailable")]
    DegenerateMinimum([f64; 2]),
    #[error("normal derivative {value} <= 0 at boundary point {at:?}")]
    NegativeNormalDerivative { at: [f64; 2], value: f64 },
    #[error("perturbation is nonzero outside the inner domain ({value:e} at {at:?})")]
    SupportViolation { at: [f64; 2], value: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("contingency table too sparse even after merging bins")]
    SparseTable,
    #[error("rejection envelope exceeded")]
    EnvelopeBust,
    #[error("h values span less than a factor 1.5")]
    IllConditioned,
}

pub type Result<T> = std::result::Result<T, Error>;
