//! Hilbert distance, Finsler norm, Busemann functions and horospheres.

use crate::body::ConvexBody;
use crate::error::{Error, Result};
use crate::projective::Point;

/// A point of HΩ: a base point with a direction class, stored through its
/// chord. The base point is `x⁻ + s(x⁺ − x⁻)` with `logit = ln(s/(1−s))`,
/// which keeps it exactly representable arbitrarily close to either end.
#[derive(Debug, Clone)]
pub struct HPoint {
    pub body: ConvexBody,
    pub xi: Point,
    pub plus: Point,
    pub minus: Point,
    pub len: f64,
    pub logit: f64,
}

impl HPoint {
    pub fn new(body: &ConvexBody, x: &Point, xi: &Point) -> Result<Self> {
        let n = xi.norm();
        if !(n > 0.0) {
            return Err(Error::DegenerateConfiguration("zero direction"));
        }
        let xi = xi / n;
        let lp = body.exit_from(x, &xi)?;
        let lm = body.exit_from(x, &(-&xi))?;
        Ok(HPoint {
            body: body.clone(),
            plus: body.snap(x + &xi * lp),
            minus: body.snap(x - &xi * lm),
            xi,
            len: lp + lm,
            logit: (lm / lp).ln(),
        })
    }

    /// Same chord, different position.
    pub fn with_logit(&self, logit: f64) -> Self {
        HPoint {
            logit,
            ..self.clone()
        }
    }

    /// `|xx⁺|`.
    pub fn gap_plus(&self) -> f64 {
        gap(self.len, self.logit)
    }

    /// `|xx⁻|`.
    pub fn gap_minus(&self) -> f64 {
        gap(self.len, -self.logit)
    }

    /// The nearer chord endpoint and the offset of the base point from it.
    pub fn anchored(&self) -> (&Point, Point) {
        if self.logit >= 0.0 {
            (&self.plus, &self.xi * -self.gap_plus())
        } else {
            (&self.minus, &self.xi * self.gap_minus())
        }
    }

    pub fn point(&self) -> Point {
        let (a, w) = self.anchored();
        a + w
    }

    /// `m(x,[ξ]) = 2/(1/|xx⁺| + 1/|xx⁻|)`.
    pub fn m_value(&self) -> f64 {
        let (a, b) = (self.gap_plus(), self.gap_minus());
        2.0 * a * b / (a + b)
    }

    /// `F(x, c·ξ) = |c|/m` for vectors along the chord.
    pub fn finsler_norm_along(&self, c: f64) -> f64 {
        c.abs() / self.m_value()
    }

    /// `|xx⁻|/|xx⁺|`.
    pub fn ratio(&self) -> f64 {
        self.logit.exp()
    }
}

/// `L/(1 + e^ℓ)` without overflow.
pub(crate) fn gap(len: f64, logit: f64) -> f64 {
    if logit > 0.0 {
        let e = (-logit).exp();
        len * e / (1.0 + e)
    } else {
        len / (1.0 + logit.exp())
    }
}

/// Hilbert distance between `anchor + wx` and `anchor + wy`.
///
/// With exits `α` behind `x` and `β` beyond `y` along the chord and `ρ = |xy|`,
/// `d = ½(ln(1 + ρ/α) + ln(1 + ρ/β))`, which has no cancellation.
pub fn hilbert_distance_offsets(body: &ConvexBody, anchor: &Point, wx: &Point, wy: &Point) -> Result<f64> {
    let dvec = wy - wx;
    let rho = dvec.norm();
    if rho == 0.0 {
        if body.shape().level_at_offset(anchor.as_slice(), wx.as_slice()) < 0.0 {
            return Ok(0.0);
        }
        return Err(Error::ExteriorPoint);
    }
    let u = dvec / rho;
    let back = body.exit_offset(anchor, wx, &(-&u))?;
    let fwd = body.exit_offset(anchor, wy, &u)?;
    Ok(0.5 * ((rho / back).ln_1p() + (rho / fwd).ln_1p()))
}

pub fn hilbert_distance(body: &ConvexBody, x: &Point, y: &Point) -> Result<f64> {
    hilbert_distance_offsets(body, &Point::zeros(x.len()), x, y)
}

/// `F(x, ξ) = (|ξ|/2)(1/|xx⁺| + 1/|xx⁻|)`.
pub fn finsler_norm(body: &ConvexBody, x: &Point, xi: &Point) -> Result<f64> {
    let n = xi.norm();
    if n == 0.0 {
        return Ok(0.0);
    }
    let lp = body.exit_from(x, xi)?;
    let lm = body.exit_from(x, &(-xi))?;
    Ok(0.5 * n * (1.0 / lp + 1.0 / lm))
}

pub fn m_value(w: &HPoint) -> f64 {
    w.m_value()
}

/// Busemann times at which the along-geodesic differences are sampled.
const BUSEMANN_TIMES: [f64; 3] = [8.0, 12.0, 16.0];

/// `b_{x⁺}(x, y) = lim d(x,p) − d(y,p)` as `p → x⁺`.
///
/// `p` runs along the geodesic from `x` toward `x⁺`, so `d(x, p_T) = T`
/// exactly and only `d(y, p_T)` is computed, in offsets from `x⁺`.
pub fn busemann(body: &ConvexBody, xplus: &Point, x: &Point, y: &Point) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    let w = HPoint::new(body, x, &(xplus - x))?;
    if (&w.plus - xplus).norm() > 1e-8 * (1.0 + xplus.norm()) {
        return Err(Error::InvalidArgument("x⁺ is not on the boundary".into()));
    }
    let anchor = &w.plus;
    let wy = y - anchor;
    let mut vals = [0.0; 3];
    for (k, t) in BUSEMANN_TIMES.iter().enumerate() {
        let delta = gap(w.len, w.logit + 2.0 * t);
        let wp = &w.xi * -delta;
        vals[k] = t - hilbert_distance_offsets(body, anchor, &wy, &wp)?;
    }
    let d1 = vals[1] - vals[0];
    let d2 = vals[2] - vals[1];
    if d2.abs() >= 1e-8 {
        return Err(Error::NoConvergence { last_delta: d2.abs() });
    }
    // Aitken's Δ² when the two differences shrink geometrically
    if d1 != 0.0 && d2 / d1 > 0.0 && d2 / d1 < 0.5 {
        Ok(vals[2] - d2 * d2 / (d2 - d1))
    } else {
        Ok(vals[2])
    }
}

/// Walks a Euclidean arclength `s` along the horosphere about `x⁺` through
/// `o`, starting in `dir` (projected onto the horosphere tangent).
pub fn horosphere_point(body: &ConvexBody, xplus: &Point, o: &Point, dir: &Point, s: f64) -> Result<Point> {
    if s == 0.0 {
        return Ok(o.clone());
    }
    let steps = (s.abs() / 0.01).ceil().max(1.0) as usize;
    let h = s.abs() / steps as f64;
    let mut y = o.clone();
    let mut t = dir * s.signum();
    for _ in 0..steps {
        let g = busemann_gradient(body, xplus, o, &y)?;
        let gn = g.norm();
        let ghat = &g / gn;
        let k = &t - &ghat * t.dot(&ghat);
        if k.norm() < 1e-12 {
            return Err(Error::DegenerateConfiguration("direction is normal to the horosphere"));
        }
        t = k.normalize();
        let mut z = &y + &t * h;
        let mut last = f64::INFINITY;
        for _ in 0..6 {
            let b = busemann(body, xplus, o, &z)?;
            last = b.abs();
            if last < 1e-10 {
                break;
            }
            z = crate::flow::radial_flow(body, xplus, &z, -b, crate::Precision::Double)?;
        }
        if last > 1e-8 {
            return Err(Error::NoConvergence { last_delta: last });
        }
        y = z;
    }
    Ok(y)
}

fn busemann_gradient(body: &ConvexBody, xplus: &Point, o: &Point, y: &Point) -> Result<Point> {
    let h = 1e-6;
    let mut g = Point::zeros(y.len());
    for i in 0..y.len() {
        let mut a = y.clone();
        let mut b = y.clone();
        a[i] += h;
        b[i] -= h;
        g[i] = (busemann(body, xplus, o, &a)? - busemann(body, xplus, o, &b)?) / (2.0 * h);
    }
    Ok(g)
}
