//! Error type shared by all numerical operations in this crate.

use thiserror::Error;

/// Errors raised by chart geometry, geodesic integration, transport,
/// operator application and the inversion quadrature.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {coords:?} lies outside the chart bounds")]
    OutOfChart { coords: Vec<f64> },

    #[error("metric at {coords:?} is not symmetric positive definite")]
    NotSpd { coords: Vec<f64> },

    #[error("unknown manifold `{0}`")]
    UnknownManifold(String),

    #[error("initial speed {speed} reaches the injectivity radius {radius}")]
    OutsideInjectivity { speed: f64, radius: f64 },

    #[error("geodesic left the chart near {coords:?}")]
    LeftChart { coords: Vec<f64> },

    #[error("injectivity radius vanishes at the base point")]
    ZeroInjectivityRadius,

    #[error("transport basis is numerically singular (|det| = {det:e})")]
    SingularTransport { det: f64 },

    #[error("fiber shape {got:?} does not match the expected shape {expected:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("incompatible tensor types: {0}")]
    TypeMismatch(String),

    #[error("cotangent base {got:?} differs from the evaluation point {expected:?}")]
    BaseMismatch { expected: Vec<f64>, got: Vec<f64> },

    #[error("operator order {0} > 2 is outside the inversion formula; see the order-3 breakdown demo")]
    OrderTooHigh(usize),

    #[error("quadrature plan mismatch: {0}")]
    PlanMismatch(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
