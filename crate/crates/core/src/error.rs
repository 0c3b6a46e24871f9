use std::fmt;

use thiserror::Error;

use crate::coupling::FixedPointTrace;

/// Hypotheses on the problem data that the validators can falsify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Assumption {
    /// Coercivity and boundedness of the diffusion matrix.
    A1,
    /// Coercivity of the monotone flux.
    A2,
    /// Monotonicity of the flux.
    A3,
    /// Linear growth of the flux.
    A4,
    /// Positivity of the zeroth-order coefficients.
    A5,
    /// Square integrability of the source `g`.
    A7,
    /// Power growth `|f(r)| <= a + M |r|^alpha`.
    PowerGrowth,
    /// Lipschitz continuity of `f` on the nonnegative half-line.
    Lipschitz,
    /// Strong monotonicity of the flux.
    StrongMonotonicity,
    /// `f(r0) = 0` at the declared zero point.
    ZeroPoint,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::A1 => "A1",
            Assumption::A2 => "A2",
            Assumption::A3 => "A3",
            Assumption::A4 => "A4",
            Assumption::A5 => "A5",
            Assumption::A7 => "A7",
            Assumption::PowerGrowth => "power growth",
            Assumption::Lipschitz => "Lipschitz",
            Assumption::StrongMonotonicity => "strong monotonicity",
            Assumption::ZeroPoint => "zero point",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid exponent {0}")]
    InvalidExponent(f64),
    #[error("invalid truncation height {0} (must be > 0)")]
    InvalidTruncation(f64),
    #[error("invalid range: lo = {lo} must be < hi = {hi}")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fields live on different meshes ({0} vs {1})")]
    MeshMismatch(usize, usize),
    #[error("assumption ({assumption}) violated: {detail}")]
    AssumptionViolated {
        assumption: Assumption,
        detail: String,
    },
    #[error("solver failed after {iterations} iterations, relative residual {residual:e}")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("fixed-point iteration did not converge in {} iterations", .0.iterations)]
    NotConverged(Box<FixedPointTrace>),
    #[error("unknown family key `{0}`")]
    UnknownKey(String),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
