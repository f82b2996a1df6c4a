use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("points are not collinear (deviation {0:e})")]
    NonCollinear(f64),
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("ray leaves the bounding box without meeting the boundary")]
    UnboundedRay,
    #[error("directions are linearly dependent")]
    DependentDirections,
    #[error("point is not interior to the body")]
    ExteriorPoint,
    #[error("midpoint convexity fails near u = {0:?}")]
    NonConvexSample(Vec<f64>),
    #[error("no convergence (last delta {last_delta:e})")]
    NoConvergence { last_delta: f64 },
    #[error("flow parameter overflow at t = {t}")]
    ParameterOverflow { t: f64 },
    #[error("body is not strictly convex")]
    NotStrictlyConvex,
    #[error("boundary is not C1 at the chord endpoints")]
    NotC1,
    #[error("tangent lines meet on the chord")]
    TangentIntersectionOnChord,
    #[error("precision exhausted, usable t_max = {t_max}")]
    PrecisionExhausted { t_max: f64 },
    #[error("clusters {0} and {1} are closer than twice the pooled stderr")]
    AmbiguousClustering(f64, f64),
    #[error("value {0} out of range")]
    OutOfRange(f64),
    #[error("non-positive germ value at t = {0:e}")]
    NonPositiveValue(f64),
    #[error("no root in the germ domain (s = {0:e})")]
    NoRoot(f64),
    #[error("quadrature budget exceeded ({0} evaluations)")]
    QuadratureBudgetExceeded(usize),
    #[error("slope {0} exceeds the attained slopes")]
    SlopeOutOfRange(f64),
    #[error("isometry is not hyperbolic")]
    NotHyperbolic,
    #[error("map does not preserve the body (defect {0:e})")]
    NotInvariant(f64),
    #[error("spectrum does not define a convex invariant arc (alpha = {0})")]
    BadSpectrum(f64),
    #[error("ray distance does not tend to zero")]
    DivergentRays,
    #[error("invalid body id '{0}'")]
    InvalidBodyId(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
