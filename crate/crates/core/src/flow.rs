//! The geodesic flow in closed form, radial flow and flip symmetry.

use crate::body::ConvexBody;
use crate::error::{Error, Result};
use crate::metric::HPoint;
use crate::projective::Point;
use crate::Precision;

/// Chord parameters of a point of HΩ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordParam {
    pub len: f64,
    /// `s` with `x = x⁻ + s(x⁺ − x⁻)`.
    pub s: f64,
    pub logit: f64,
}

impl ChordParam {
    pub fn of(w: &HPoint) -> Self {
        ChordParam {
            len: w.len,
            s: 1.0 / (1.0 + (-w.logit).exp()),
            logit: w.logit,
        }
    }
}

/// `φ^t`: `|x_t x⁻|/|x_t x⁺| = e^{2t}|xx⁻|/|xx⁺|`, i.e. the logit moves by `2t`.
pub fn flow(w: &HPoint, t: f64, precision: Precision) -> Result<HPoint> {
    let l = w.logit + 2.0 * t;
    if !(l.abs() <= precision.logit_limit()) {
        return Err(Error::ParameterOverflow { t });
    }
    Ok(w.with_logit(l))
}

/// `σ(x, [ξ]) = (x, [−ξ])`.
pub fn flip(w: &HPoint) -> HPoint {
    HPoint {
        body: w.body.clone(),
        xi: -&w.xi,
        plus: w.minus.clone(),
        minus: w.plus.clone(),
        len: w.len,
        logit: -w.logit,
    }
}

/// `φ^t_{x⁺}`: moves `x` a Hilbert time `t` along the chord toward `x⁺`.
pub fn radial_flow(body: &ConvexBody, xplus: &Point, x: &Point, t: f64, precision: Precision) -> Result<Point> {
    if t == 0.0 {
        return Ok(x.clone());
    }
    let w = HPoint::new(body, x, &(xplus - x))?;
    Ok(flow(&w, t, precision)?.point())
}

/// `‖dφ^t Z^s‖`, normalized to 1 at `t = 0`.
pub fn stable_norm(w: &HPoint, v: &Point, t: f64) -> Result<f64> {
    let sec = crate::transport::adapt_section(&w.body, w, v)?;
    Ok((-t).exp() * sec.transport_norm(t)?)
}

/// `‖dφ^t Z^u‖ = e^{2t}·stable_norm`.
pub fn unstable_norm(w: &HPoint, v: &Point, t: f64) -> Result<f64> {
    let sec = crate::transport::adapt_section(&w.body, w, v)?;
    Ok(t.exp() * sec.transport_norm(t)?)
}
