use std::fmt;

/// A location inside a field expression, as a byte offset into the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("event at distance {distance:.3e} from a singular axis (exclusion radius {radius:.1e})")]
    AxisProximity { distance: f64, radius: f64 },

    #[error("expression domain error at {span}: {message}")]
    ExpressionDomain { span: SourceSpan, message: String },

    #[error("syntax error at byte {offset}: found {found}, expected one of {}", expected.join(", "))]
    Syntax { offset: usize, found: String, expected: Vec<String> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("adaptive quadrature did not reach tolerance {tolerance:.1e} (error estimate {estimate:.3e})")]
    QuadratureNonconvergence { tolerance: f64, estimate: f64 },

    #[error("spanning surface crosses a field singularity; use the line integral instead")]
    SurfaceCrossesSingularity,

    #[error("path passes within {distance:.3e} of the winding axis")]
    PathIntersectsAxis { distance: f64 },

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverNonconvergence { residual: f64, iterations: usize },

    #[error("packet overlap {overlap:.3e} too small to define a relative phase")]
    OverlapTooSmall { overlap: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
