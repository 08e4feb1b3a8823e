use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("points are antipodal (distance {dist} reaches the model diameter)")]
    AntipodalPoints { dist: f64 },
    #[error("degenerate vertex: a side adjacent to the angle vertex has zero length")]
    DegenerateVertex,
    #[error("perimeter {perimeter} is not below twice the model diameter {bound}")]
    PerimeterTooLarge { perimeter: f64, bound: f64 },
    #[error("side lengths violate the triangle inequality (cosine {cosine})")]
    TriangleInequality { cosine: f64 },
    #[error("point is not intermediate: {d_bd} + {d_dc} differs from {d_bc}")]
    NotIntermediate { d_bd: f64, d_dc: f64, d_bc: f64 },
    #[error("geodesic is not unique")]
    NonUniqueGeodesic,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("sampler could not produce admissible configurations after {attempts} attempts")]
    SamplingFailed { attempts: usize },
    #[error("limit did not converge (last difference {diff:e})")]
    NoConvergence { diff: f64 },
    #[error("difference quotients are not monotone (excess {excess:e})")]
    NotSemiconvex { excess: f64 },
    #[error("curve is constant")]
    ConstantCurve,
    #[error("time {t} is a knot of the sampled curve")]
    KnotPoint { t: f64 },
    #[error("space is not CAT(0) (curvature bound {kappa})")]
    NotCat0 { kappa: f64 },
    #[error("barycenter solver stalled with gap {gap:e}")]
    NonConvergence { gap: f64 },
    #[error("function failed the convexity sanity check (excess {excess:e})")]
    NotConvex { excess: f64 },
    #[error("point lies on a node of the graph")]
    NodePoint,
    #[error("quadrature did not reach the requested accuracy")]
    QuadratureFailure,
    #[error("fibre measure is not concentrated on a half-line (defect {defect:e})")]
    RigidityViolation { defect: f64 },
    #[error("operands belong to different spaces or base points")]
    SpaceMismatch,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
