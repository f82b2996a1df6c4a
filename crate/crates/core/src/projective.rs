//! Chart arithmetic, cross-ratios, boundary exits and plane sections.

use crate::body::{ConvexBody, Shape};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub type Point = DVector<f64>;

/// An affine chart: origin plus orthonormal frame, optionally related to a
/// parent chart by a projective map.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub origin: Point,
    pub frame: DMatrix<f64>,
    pub parent_map: Option<ProjectiveMap>,
}

impl Chart {
    pub fn standard(n: usize) -> Self {
        Chart {
            origin: Point::zeros(n),
            frame: DMatrix::identity(n, n),
            parent_map: None,
        }
    }

    pub fn new(origin: Point, frame: DMatrix<f64>, parent_map: Option<ProjectiveMap>) -> Result<Self> {
        let n = origin.len();
        if !(2..=4).contains(&n) || frame.nrows() != n || frame.ncols() != n {
            return Err(Error::InvalidArgument(format!("chart dimension {n}")));
        }
        let gram = frame.transpose() * &frame;
        if (gram - DMatrix::identity(n, n)).amax() > 1e-12 {
            return Err(Error::InvalidArgument("chart frame is not orthonormal".into()));
        }
        Ok(Chart {
            origin,
            frame,
            parent_map,
        })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    /// Chart coordinates to parent coordinates.
    pub fn to_parent(&self, p: &Point) -> Option<Point> {
        let q = &self.origin + &self.frame * p;
        match &self.parent_map {
            Some(m) => m.apply(&q),
            None => Some(q),
        }
    }
}

/// A projective transformation of Rⁿ given by an (n+1)×(n+1) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMap {
    pub matrix: DMatrix<f64>,
}

impl ProjectiveMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.determinant().abs() <= 1e-12 {
            return Err(Error::DegenerateConfiguration("singular projective map"));
        }
        Ok(ProjectiveMap { matrix })
    }

    pub fn identity(n: usize) -> Self {
        ProjectiveMap {
            matrix: DMatrix::identity(n + 1, n + 1),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows() - 1
    }

    /// Image of `p`, or `None` when it is sent to the hyperplane at infinity.
    pub fn apply(&self, p: &Point) -> Option<Point> {
        let n = self.dim();
        let h = self.matrix.columns(0, n) * p + self.matrix.column(n);
        let w = h[n];
        if w.abs() < 1e-300 {
            return None;
        }
        Some(h.rows(0, n) / w)
    }

    pub fn inverse(&self) -> ProjectiveMap {
        ProjectiveMap {
            matrix: self.matrix.clone().try_inverse().expect("invertible map"),
        }
    }

    pub fn compose(&self, other: &ProjectiveMap) -> ProjectiveMap {
        ProjectiveMap {
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// A random perturbation of the identity of size `eps`.
    pub fn random_near_identity<R: rand::Rng>(n: usize, eps: f64, rng: &mut R) -> Self {
        let m = DMatrix::from_fn(n + 1, n + 1, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d + eps * (2.0 * rng.gen::<f64>() - 1.0)
        });
        ProjectiveMap { matrix: m }
    }
}

/// A half-line `base + t·dir`, `t > 0`, with unit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub base: Point,
    pub dir: Point,
}

impl Ray {
    pub fn new(base: Point, dir: Point) -> Result<Self> {
        let n = dir.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateConfiguration("zero ray direction"));
        }
        Ok(Ray { base, dir: dir / n })
    }

    pub fn at(&self, t: f64) -> Point {
        &self.base + &self.dir * t
    }
}

/// Cross-ratio `[a,b,x,y] = (|ax|/|bx|)/(|ay|/|by|)` of four collinear points.
pub fn cross_ratio(a: &Point, b: &Point, x: &Point, y: &Point) -> Result<f64> {
    let pts = [a, b, x, y];
    let mut best = (0, 1, 0.0);
    for i in 0..4 {
        for j in i + 1..4 {
            let d = (pts[j] - pts[i]).norm();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i0, j0, span) = best;
    if !(span > 0.0) {
        return Err(Error::DegenerateConfiguration("coincident points"));
    }
    let u = (pts[j0] - pts[i0]) / span;
    let o = pts[i0];
    let mut tau = [0.0; 4];
    for (k, p) in pts.iter().enumerate() {
        let d = *p - o;
        let s = d.dot(&u);
        let off = (&d - &u * s).norm();
        if off > 1e-10 * span.max(1.0) {
            return Err(Error::NonCollinear(off));
        }
        tau[k] = s;
    }
    let tiny = 1e-300_f64.max(1e-15 * span);
    let (ta, tb, tx, ty) = (tau[0], tau[1], tau[2], tau[3]);
    let (ax, bx, ay, by) = ((tx - ta).abs(), (tx - tb).abs(), (ty - ta).abs(), (ty - tb).abs());
    if (tx - ty).abs() < tiny || ax < tiny || by < tiny || bx < tiny || ay < tiny {
        return Err(Error::DegenerateConfiguration("cross-ratio denominator underflow"));
    }
    Ok((ax / bx) / (ay / by))
}

/// Exit parameter `λ > 0` of `anchor + w0 + λ·dir` from the body described by
/// `shape`. `dir` must be a unit vector. The root is bracketed by doubling and
/// refined by an Illinois iteration with periodic bisection steps.
pub(crate) fn solve_exit(shape: &dyn Shape, anchor: &[f64], w0: &[f64], dir: &[f64]) -> Result<f64> {
    if let Some(l) = shape.exit(anchor, w0, dir) {
        return if l.is_finite() && l > 0.0 {
            Ok(l)
        } else if l.is_nan() || l <= 0.0 {
            Err(Error::ExteriorPoint)
        } else {
            Err(Error::UnboundedRay)
        };
    }
    let n = w0.len();
    let mut buf = vec![0.0; n];
    let mut g = |lam: f64| {
        for i in 0..n {
            buf[i] = w0[i] + lam * dir[i];
        }
        shape.level_at_offset(anchor, &buf)
    };
    let g0 = g(0.0);
    if !(g0 < 0.0) {
        return Err(Error::ExteriorPoint);
    }
    let radius = shape.radius();
    let limit = 8.0 * radius;
    let (mut a, mut fa) = (0.0, g0);
    let mut b = radius * (2.0f64).powi(-10);
    let mut fb = g(b);
    while !(fb > 0.0) {
        if fb.is_nan() {
            return Err(Error::UnboundedRay);
        }
        a = b;
        fa = fb;
        b *= 2.0;
        if b > limit {
            return Err(Error::UnboundedRay);
        }
        fb = g(b);
    }
    let mut side = 0i8;
    for it in 0..200 {
        if b - a <= 4.0 * f64::EPSILON * b {
            break;
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if it % 3 == 2 || !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = g(c);
        if fc == 0.0 {
            return Ok(c);
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}

/// Boundary point where the ray leaves the body.
pub fn ray_boundary(body: &ConvexBody, r: &Ray) -> Result<Point> {
    let t = body.exit_from(&r.base, &r.dir)?;
    Ok(r.at(t))
}

/// A two-dimensional slice `{q + s·e1 + t·e2}` of a body.
#[derive(Debug, Clone)]
pub struct PlaneSection {
    pub parent: ConvexBody,
    pub q: Point,
    pub e1: Point,
    pub e2: Point,
}

impl PlaneSection {
    pub fn lift(&self, p: &[f64]) -> Point {
        &self.q + &self.e1 * p[0] + &self.e2 * p[1]
    }

    pub fn lift_vec(&self, v: &[f64]) -> Point {
        &self.e1 * v[0] + &self.e2 * v[1]
    }

    pub fn project(&self, p: &Point) -> Point {
        let d = p - &self.q;
        Point::from_vec(vec![d.dot(&self.e1), d.dot(&self.e2)])
    }

    /// The section as a 2D body in its own coordinates (q at the origin).
    pub fn body(&self) -> ConvexBody {
        ConvexBody::from_shape(
            format!("section({})", self.parent.id),
            Arc::new(self.clone()),
            self.parent.strictly_convex,
            self.parent.c1,
        )
    }
}

impl Shape for PlaneSection {
    fn dim(&self) -> usize {
        2
    }
    fn level(&self, x: &[f64]) -> f64 {
        self.parent.level(&self.lift(x))
    }
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        self.parent
            .shape()
            .level_at_offset(self.lift(anchor).as_slice(), self.lift_vec(w).as_slice())
    }
    fn exit(&self, anchor: &[f64], w0: &[f64], dir: &[f64]) -> Option<f64> {
        self.parent.shape().exit(
            self.lift(anchor).as_slice(),
            self.lift_vec(w0).as_slice(),
            self.lift_vec(dir).as_slice(),
        )
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let g = Point::from_vec(self.parent.shape().gradient(self.lift(x).as_slice())?);
        Some(vec![g.dot(&self.e1), g.dot(&self.e2)])
    }
    fn is_c1_at(&self, x: &[f64]) -> bool {
        self.parent.is_c1_at(&self.lift(x))
    }
    fn radius(&self) -> f64 {
        self.parent.radius() + (&self.q).norm()
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }
}

/// Slices `body` by the plane through `q` spanned by `v1`, `v2`
/// (Gram–Schmidt applied in that order).
pub fn section(body: &ConvexBody, q: &Point, v1: &Point, v2: &Point) -> Result<PlaneSection> {
    if !body.contains(q) {
        return Err(Error::ExteriorPoint);
    }
    let n1 = v1.norm();
    if !(n1 > 0.0) {
        return Err(Error::DependentDirections);
    }
    let e1 = v1 / n1;
    let r = v2 - &e1 * e1.dot(v2);
    let n2 = r.norm();
    if !(n2 > 1e-9 * v2.norm()) || !(n2 > 0.0) {
        return Err(Error::DependentDirections);
    }
    Ok(PlaneSection {
        parent: body.clone(),
        q: q.clone(),
        e1,
        e2: r / n2,
    })
}
