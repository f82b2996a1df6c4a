//! Hilbert geometries on proper convex bodies.
//!
//! Distances, the Finsler structure and the geodesic flow of a convex body are
//! computed from boundary exits only. Near-boundary quantities are always
//! expressed as offsets from an anchored boundary point so that gaps down to
//! 1e-12 of the chord length keep full relative precision.

pub mod body;
pub mod duality;
pub mod entropy;
pub mod error;
pub mod fit;
pub mod flow;
pub mod halfdisc;
pub mod isometry;
pub mod metric;
pub mod projective;
pub mod regularity;
pub mod transport;

pub use body::{parse_body_id, BoundaryGraph, ConvexBody, GraphFn};
pub use error::{Error, Result};
pub use fit::ExponentEstimate;
pub use metric::HPoint;
pub use projective::{Point, PlaneSection, ProjectiveMap, Ray};

use std::fmt;
use std::str::FromStr;

/// Working precision of the near-boundary estimators.
///
/// `Extended` lowers the sampling floor and evaluates germs in the log domain
/// when they provide a `ln f` hook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

impl Precision {
    /// Smallest germ argument sampled by the regularity estimators.
    pub fn germ_floor(self) -> f64 {
        match self {
            Precision::Double => 1e-6,
            Precision::Extended => 1e-12,
        }
    }

    /// Smallest relative chord gap the flow and transport code will evaluate.
    pub fn gap_floor(self) -> f64 {
        match self {
            Precision::Double => 1e-12,
            Precision::Extended => 1e-24,
        }
    }

    /// Largest admissible |log(|xx⁻|/|xx⁺|)| before the barycentric parameter
    /// is indistinguishable from 0 or 1.
    pub fn logit_limit(self) -> f64 {
        match self {
            Precision::Double => 52.0 * std::f64::consts::LN_2,
            Precision::Extended => 700.0,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::Extended => "extended",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(Error::InvalidArgument(format!("precision '{other}'"))),
        }
    }
}
