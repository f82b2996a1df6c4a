//! Geodesic rays in bodies that are neither strictly convex nor C¹, with the
//! closed half-disc `{x² + y² < 1, y > 0}` as the model case.
//!
//! Two rays ending at the same point approach each other like `e^{−t}` when
//! the endpoint is a strictly convex C¹ point and like `e^{−2t}` in the
//! interior of a flat piece; at a corner their distance stays bounded below.

use crate::body::ConvexBody;
use crate::error::{Error, Result};
use crate::fit::{self, ExponentEstimate};
use crate::metric::{busemann, gap, hilbert_distance_offsets, HPoint};
use crate::projective::{cross_ratio, Point};
use crate::Precision;

/// Unit-speed ray from `p` to the boundary point `x`, with `x⁺ = x` exactly.
fn ray_to(body: &ConvexBody, p: &Point, x: &Point) -> Result<HPoint> {
    let d = x - p;
    let fwd = d.norm();
    if !(fwd > 0.0) {
        return Err(Error::DegenerateConfiguration("ray starts at its endpoint"));
    }
    let xi = d / fwd;
    let back = body.exit_from(p, &(-&xi))?;
    Ok(HPoint {
        body: body.clone(),
        minus: p - &xi * back,
        plus: x.clone(),
        len: fwd + back,
        logit: (back / fwd).ln(),
        xi,
    })
}

/// Offset of the ray point at time `t` from its endpoint.
fn offset(w: &HPoint, t: f64) -> Point {
    &w.xi * -gap(w.len, w.logit + 2.0 * t)
}

/// `d(c₁(t + τ), c₂(t))` for rays into the common endpoint `x`.
fn paired_distance(body: &ConvexBody, x: &Point, c1: &HPoint, c2: &HPoint, t: f64, tau: f64) -> Result<f64> {
    hilbert_distance_offsets(body, x, &offset(c1, t + tau), &offset(c2, t))
}

/// Minimizes `f` on `[a, b]` by golden-section search.
fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Time offset `τ` that minimizes `d(c₁(T + τ), c₂(T))` at `T = 12`.
fn matching_offset(body: &ConvexBody, x: &Point, c1: &HPoint, c2: &HPoint) -> f64 {
    let t = 12.0;
    golden_min(
        |tau| paired_distance(body, x, c1, c2, t, tau).map(f64::ln).unwrap_or(f64::INFINITY),
        -3.0,
        3.0,
        1e-9,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayDecay {
    /// Slope of `log d(c₁(t + τ), c₂(t))` over `t ∈ [3, 10]`.
    pub slope: ExponentEstimate,
    /// The distance-minimizing time offset `τ`.
    pub offset: f64,
    /// The offset that puts both rays on one horocycle, where the boundary is
    /// C¹ at the endpoint.
    pub busemann_offset: Option<f64>,
    /// `(t, d)` samples.
    pub distances: Vec<(f64, f64)>,
}

/// Decay rate of the distance between two rays from `p1`, `p2` into the same
/// boundary point `x`.
pub fn asymptotic_ray_distance(body: &ConvexBody, x: &Point, p1: &Point, p2: &Point) -> Result<RayDecay> {
    let c1 = ray_to(body, p1, x)?;
    let c2 = ray_to(body, p2, x)?;
    if (&c1.xi - &c2.xi).norm() < 1e-9 {
        return Err(Error::DegenerateConfiguration("rays lie on one line"));
    }
    let tau = matching_offset(body, x, &c1, &c2);
    let busemann_offset = if body.is_c1_at(x) && body.shape().gradient(x.as_slice()).is_some() {
        busemann(body, x, p2, p1).ok().map(|b| -b)
    } else {
        None
    };
    let ts: Vec<f64> = (0..=28).map(|k| 3.0 + 0.25 * k as f64).collect();
    let ds = ts
        .iter()
        .map(|t| paired_distance(body, x, &c1, &c2, *t, tau))
        .collect::<Result<Vec<_>>>()?;
    if ds.last().unwrap() > &(0.5 * ds[0]) {
        return Err(Error::DivergentRays);
    }
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    Ok(RayDecay {
        slope: fit::estimate(&ts, &ys, 3.0, Precision::Double),
        offset: tau,
        busemann_offset,
        distances: ts.into_iter().zip(ds).collect(),
    })
}

/// `lim inf d(c₁(t + τ), c₂(t))` over the best offset, for rays into `x1`
/// and `x2`, evaluated at `T = 12`. Distinct endpoints are admitted only
/// when the segment between them lies in the boundary.
pub fn limit_distance(body: &ConvexBody, x1: &Point, x2: &Point, p1: &Point, p2: &Point) -> Result<f64> {
    let same = (x1 - x2).norm() < 1e-12;
    if !same && !segment_in_boundary(body, x1, x2) {
        return Err(Error::DivergentRays);
    }
    let c1 = ray_to(body, p1, x1)?;
    let c2 = ray_to(body, p2, x2)?;
    let t = 12.0;
    let d = |tau: f64| -> Result<f64> {
        if same {
            paired_distance(body, x1, &c1, &c2, t, tau)
        } else {
            let a = offset(&c1, t + tau) + (x1 - x2);
            hilbert_distance_offsets(body, x2, &a, &offset(&c2, t))
        }
    };
    let tau = golden_min(|tau| d(tau).unwrap_or(f64::INFINITY), -3.0, 3.0, 1e-10);
    d(tau)
}

fn segment_in_boundary(body: &ConvexBody, a: &Point, b: &Point) -> bool {
    (1..8).all(|k| {
        let s = k as f64 / 8.0;
        let m = a * (1.0 - s) + b * s;
        body.level(&m).abs() <= 1e-12
    })
}

/// `½|log[a b x₁ x₂]|` for points of a common line.
pub fn flat_limit(a: &Point, b: &Point, x1: &Point, x2: &Point) -> Result<f64> {
    Ok(0.5 * cross_ratio(a, b, x1, x2)?.ln().abs())
}

/// `½|log[L₁ L₂ L₃ L₄]|` for four lines through `o` with directions `dᵢ`,
/// computed on a transversal.
pub fn line_cross_ratio_limit(o: &Point, dirs: [&Point; 4]) -> Result<f64> {
    // a transversal meeting every line at a finite point
    let n = Point::from_vec(vec![dirs.iter().map(|d| d[0]).sum(), dirs.iter().map(|d| d[1]).sum()]);
    let mut n = if n.norm() > 1e-9 { n.normalize() } else { dirs[0].normalize() };
    if dirs.iter().any(|d| d.dot(&n).abs() < 1e-9) {
        n = Point::from_vec(vec![n[0] + 0.3 * n[1], n[1] - 0.3 * n[0]]).normalize();
    }
    let p: Vec<Point> = dirs.iter().map(|d| o + *d / d.dot(&n)).collect();
    Ok(0.5 * cross_ratio(&p[0], &p[1], &p[2], &p[3])?.ln().abs())
}

/// The corner constant `½|log[(ab) D c₁ c₂]|` of the half-disc at
/// `a = (−1, 0)` for rays from `p1`, `p2`.
pub fn corner_constant(p1: &Point, p2: &Point) -> Result<f64> {
    let a = Point::from_vec(vec![-1.0, 0.0]);
    let ab = Point::from_vec(vec![1.0, 0.0]);
    let tangent = Point::from_vec(vec![0.0, 1.0]);
    line_cross_ratio_limit(&a, [&ab, &tangent, &(p1 - &a), &(p2 - &a)])
}

/// Spanning sets of the maximal flat `F(x)` (as directions) and of the C¹
/// directions `D(x)` at a boundary point of a planar body.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSubspaces {
    pub flat: Vec<Point>,
    pub c1: Vec<Point>,
}

pub fn direction_subspaces(body: &ConvexBody, x: &Point) -> Result<DirectionSubspaces> {
    if body.dim() != 2 {
        return Err(Error::InvalidArgument("direction subspaces are sampled for planar bodies".into()));
    }
    let c = body.interior_point();
    let on_boundary = |p: &Point| body.level(p).abs() <= 1e-8;
    let eps = 1e-3;
    let mut flat: Vec<Point> = Vec::new();
    for k in 0..180 {
        let t = std::f64::consts::PI * k as f64 / 180.0;
        let d = Point::from_vec(vec![t.cos(), t.sin()]);
        if on_boundary(&(x + &d * eps)) && on_boundary(&(x - &d * eps)) {
            flat.push(d);
            break;
        }
    }
    // one-sided secant directions from neighbouring boundary points
    let th = (x[1] - c[1]).atan2(x[0] - c[0]);
    let boundary_at = |t: f64| -> Result<Point> {
        let d = Point::from_vec(vec![t.cos(), t.sin()]);
        Ok(&c + &d * body.exit_from(&c, &d)?)
    };
    let delta = 1e-6;
    let sp = (boundary_at(th + delta)? - x).normalize();
    let sm = (boundary_at(th - delta)? - x).normalize();
    let c1 = if (&sp + &sm).norm() < 1e-3 { vec![sp] } else { Vec::new() };
    Ok(DirectionSubspaces { flat, c1 })
}
