use num_complex::Complex64;
use thiserror::Error;

/// Errors produced anywhere in the mesh → assembly → eigensolve pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid cannot be aligned with interface at {coordinate} = {value} (spacing {spacing})")]
    InterfaceMisaligned {
        coordinate: &'static str,
        value: f64,
        spacing: f64,
    },

    #[error("left and right edge nodes do not match (no left partner for x2 = {x2})")]
    NonmatchingEdges { x2: f64 },

    #[error("x2 = {x2} lies outside the PML-extended cell (|x2| <= {limit})")]
    OutOfDomain { x2: f64, limit: f64 },

    #[error("beta_n vanishes for n = {n}: cut-off value")]
    CutoffMode { n: i64 },

    #[error("z = {z} lies in neither admissible case of the decay bound")]
    RegionViolation { z: Complex64 },

    #[error("triangle {index} is degenerate (area {area:e})")]
    SingularElement { index: usize, area: f64 },

    #[error("factorization of the shifted pencil failed at shift {shift}")]
    FactorizationFailed { shift: Complex64 },

    #[error("Arnoldi iteration did not converge at shift {shift} after {restarts} restarts")]
    NoConvergence { shift: Complex64, restarts: usize },

    #[error("no guided mode in the admissible propagation-constant interval")]
    NoGuidedMode,

    #[error("numerical field has vanishing norm ({norm:e})")]
    DegenerateField { norm: f64 },

    #[error("candidate {candidate} is within the ambiguity radius of several references")]
    MatchAmbiguous { candidate: Complex64 },

    #[error("convergence orders need positive errors, got {value:e} at position {index}")]
    NonpositiveError { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("level hmax = {hmax}: {source}")]
    AtLevel {
        hmax: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn at_level(self, hmax: f64) -> Self {
        Error::AtLevel {
            hmax,
            source: Box::new(self),
        }
    }
}
