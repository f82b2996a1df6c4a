//! Convex body oracles and the body catalog.
//!
//! Every body is described by a level function that is negative exactly on
//! the interior. Shapes also evaluate the level at `anchor + w` without forming
//! the sum, which keeps offsets of size 1e-13 from a boundary anchor exact.

use crate::error::{Error, Result};
use crate::fit::log_add_exp;
use crate::projective::{solve_exit, Chart, Point, ProjectiveMap};
use nalgebra::DMatrix;
use rand::Rng;
use std::fmt;
use std::sync::Arc;

/// Anchor residuals below this are treated as exactly on the boundary.
const SNAP: f64 = 1e-13;

fn snap(r: f64) -> f64 {
    if r.abs() < SNAP {
        0.0
    } else {
        r
    }
}

pub trait Shape: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    /// Negative inside, zero on the boundary, positive outside.
    fn level(&self, x: &[f64]) -> f64;
    /// Level at `anchor + w`, evaluated without cancellation when the anchor is
    /// a boundary point.
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        let p: Vec<f64> = anchor.iter().zip(w).map(|(a, b)| a + b).collect();
        self.level(&p)
    }
    /// Closed-form exit parameter along the unit direction `dir`, if known.
    fn exit(&self, _anchor: &[f64], _w0: &[f64], _dir: &[f64]) -> Option<f64> {
        None
    }
    /// Gradient of the level function, if known in closed form.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
    fn is_c1_at(&self, _x: &[f64]) -> bool {
        true
    }
    /// Boundary points of a planar body where it fails to be C¹.
    fn corners(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
    /// Radius of a ball about the chart origin containing the body.
    fn radius(&self) -> f64;
    fn interior_point(&self) -> Vec<f64>;
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A convex function `f: U ⊂ Rᵏ → [0, ∞)` with `f(0) = 0`, `∇f(0) = 0`.
#[derive(Clone)]
pub struct GraphFn {
    pub name: String,
    pub dim: usize,
    /// Radius of the domain on which `f` is convex and cheap to evaluate.
    pub radius: f64,
    pub strict: bool,
    f: ScalarFn,
    ln_f: Option<ScalarFn>,
    df: Option<RealFn>,
}

impl fmt::Debug for GraphFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GraphFn({}, dim {})", self.name, self.dim)
    }
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl GraphFn {
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        radius: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        GraphFn {
            name: name.into(),
            dim,
            radius,
            strict: true,
            f: Arc::new(f),
            ln_f: None,
            df: None,
        }
    }

    pub fn with_ln(mut self, ln_f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.ln_f = Some(Arc::new(ln_f));
        self
    }

    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        (self.f)(u)
    }

    /// `ln f(u)`; uses the log hook when present so that super-polynomially
    /// flat germs stay representable.
    pub fn ln_eval(&self, u: &[f64]) -> f64 {
        match &self.ln_f {
            Some(g) => g(u),
            None => (self.f)(u).ln(),
        }
    }

    pub fn has_ln(&self) -> bool {
        self.ln_f.is_some()
    }

    /// Derivative of a one-dimensional germ (central differences if no
    /// closed form was supplied).
    pub fn deriv(&self, t: f64) -> f64 {
        match &self.df {
            Some(d) => d(t),
            None => {
                let h = 1e-6 * t.abs().max(1e-3);
                ((self.f)(&[t + h]) - (self.f)(&[t - h])) / (2.0 * h)
            }
        }
    }

    pub fn has_derivative(&self) -> bool {
        self.df.is_some()
    }

    /// `c·|u|^p`.
    pub fn power(p: f64, dim: usize, c: f64) -> Self {
        GraphFn::custom(format!("power({p})"), dim, 1.0, move |u| c * norm(u).powf(p))
            .with_ln(move |u| c.ln() + p * norm(u).ln())
            .with_derivative(move |t| c * p * t.abs().powf(p - 1.0) * t.signum())
    }

    /// `t²` for `t ≥ 0`, `t⁴` for `t < 0`.
    pub fn asymmetric() -> Self {
        GraphFn::custom("asym", 1, 1.0, |u| if u[0] >= 0.0 { u[0] * u[0] } else { u[0].powi(4) })
            .with_ln(|u| if u[0] >= 0.0 { 2.0 * u[0].ln() } else { 4.0 * (-u[0]).ln() })
            .with_derivative(|t| if t >= 0.0 { 2.0 * t } else { 4.0 * t.powi(3) })
    }

    /// `|u|³(2 + sin log|u|)`.
    pub fn oscillatory(dim: usize) -> Self {
        GraphFn::custom("oscillatory", dim, 1.0, |u| {
            let r = norm(u);
            if r == 0.0 {
                0.0
            } else {
                r.powi(3) * (2.0 + r.ln().sin())
            }
        })
        .with_ln(|u| {
            let r = norm(u);
            3.0 * r.ln() + (2.0 + r.ln().sin()).ln()
        })
        .with_derivative(|t| {
            if t == 0.0 {
                return 0.0;
            }
            let l = t.abs().ln();
            t.signum() * t * t * (6.0 + 3.0 * l.sin() + l.cos())
        })
    }

    /// `e^{−1/|u|²}`, continued by its tangent cone beyond `|u| = 0.75` where
    /// it would stop being convex.
    pub fn flat_exp(dim: usize) -> Self {
        const R0: f64 = 0.75;
        let f0 = (-1.0 / (R0 * R0)).exp();
        let d0 = 2.0 / R0.powi(3) * f0;
        GraphFn::custom("flat-exp", dim, R0, move |u| {
            let r = norm(u);
            if r == 0.0 {
                0.0
            } else if r <= R0 {
                (-1.0 / (r * r)).exp()
            } else {
                f0 + d0 * (r - R0)
            }
        })
        .with_ln(move |u| {
            let r = norm(u);
            if r <= R0 {
                -1.0 / (r * r)
            } else {
                (f0 + d0 * (r - R0)).ln()
            }
        })
        .with_derivative(move |t| {
            let r = t.abs();
            if r == 0.0 {
                0.0
            } else if r <= R0 {
                t.signum() * 2.0 / r.powi(3) * (-1.0 / (r * r)).exp()
            } else {
                t.signum() * d0
            }
        })
    }

    /// `u₁² + u₂⁴`.
    pub fn product() -> Self {
        GraphFn::custom("product", 2, 1.0, |u| u[0] * u[0] + u[1].powi(4))
            .with_ln(|u| log_add_exp(2.0 * u[0].abs().ln(), 4.0 * u[1].abs().ln()))
    }

    /// `u₁² + e^{−1/u₂²}`.
    pub fn flat_product() -> Self {
        GraphFn::custom("flat-product", 2, 0.75, |u| {
            let e = if u[1] == 0.0 { 0.0 } else { (-1.0 / (u[1] * u[1])).exp() };
            u[0] * u[0] + e
        })
        .with_ln(|u| log_add_exp(2.0 * u[0].abs().ln(), -1.0 / (u[1] * u[1])))
    }

    /// Pole graph of the p-ball: `1 − (1 − Σ|uᵢ|^p)^{1/p}`.
    pub fn pball_pole(p: f64, dim: usize) -> Self {
        GraphFn::custom(format!("pball-pole({p})"), dim, 0.5, move |u| {
            let s: f64 = u.iter().map(|v| v.abs().powf(p)).sum();
            -((-s).ln_1p() / p).exp_m1()
        })
        .with_derivative(move |t| {
            let s = t.abs().powf(p);
            (1.0 - s).powf(1.0 / p - 1.0) * t.abs().powf(p - 1.0) * t.signum()
        })
    }

    /// Graph of an ellipsoid at the pole of its last semiaxis.
    pub fn ellipsoid_pole(semiaxes: &[f64]) -> Self {
        let k = semiaxes.len() - 1;
        let a: Vec<f64> = semiaxes[..k].to_vec();
        let c = semiaxes[k];
        let a1 = a[0];
        let r = 0.5 * a.iter().cloned().fold(f64::MAX, f64::min);
        GraphFn::custom("ellipsoid-pole", k, r, move |u| {
            let s: f64 = u.iter().zip(&a).map(|(v, ai)| (v / ai).powi(2)).sum();
            -c * (0.5 * (-s).ln_1p()).exp_m1()
        })
        .with_derivative(move |t| {
            let s = (t / a1).powi(2);
            c * t / (a1 * a1) / (1.0 - s).sqrt()
        })
    }

    /// Boundary of `{X(1−X)^{α−1} > |Y|^α}` at the origin, as `X = f(Y)`.
    pub fn arc(alpha: f64) -> Self {
        let peak = (1.0 / alpha) * (1.0 - 1.0 / alpha).powf(alpha - 1.0);
        let radius = (0.5 * peak).powf(1.0 / alpha);
        let solve = move |y: f64| -> f64 {
            if y == 0.0 {
                return f64::NEG_INFINITY;
            }
            let target = alpha * y.abs().ln();
            let mut l = target;
            for _ in 0..60 {
                let x = l.exp();
                let phi = l + (alpha - 1.0) * (-x).ln_1p() - target;
                let dphi = 1.0 - (alpha - 1.0) * x / (1.0 - x);
                let step = phi / dphi;
                l -= step;
                if step.abs() < 1e-16 * l.abs().max(1.0) {
                    break;
                }
            }
            l
        };
        GraphFn::custom(format!("arc({alpha})"), 1, radius, move |u| solve(u[0]).exp())
            .with_ln(move |u| solve(u[0]))
            .with_derivative(move |t| {
                if t == 0.0 {
                    return 0.0;
                }
                let x = solve(t).exp();
                // implicit differentiation of X(1−X)^{α−1} = |Y|^α
                let dg = (1.0 - x).powf(alpha - 2.0) * (1.0 - alpha * x);
                alpha * t.abs().powf(alpha - 1.0) * t.signum() / dg
            })
    }

    /// Midpoint convexity on random pairs inside the domain radius.
    pub fn check_convex<R: Rng>(&self, samples: usize, rng: &mut R) -> Result<()> {
        for _ in 0..samples {
            let a: Vec<f64> = (0..self.dim).map(|_| self.radius * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            let b: Vec<f64> = (0..self.dim).map(|_| self.radius * (2.0 * rng.gen::<f64>() - 1.0)).collect();
            if norm(&a) > self.radius || norm(&b) > self.radius {
                continue;
            }
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let (fa, fb, fm) = (self.eval(&a), self.eval(&b), self.eval(&m));
            if fm > 0.5 * (fa + fb) + 1e-12 * (1.0 + fa.abs() + fb.abs()) || fa < 0.0 {
                return Err(Error::NonConvexSample(m));
            }
        }
        Ok(())
    }
}

/// The boundary near a marked point `x⁺`, written as `x⁺ + Σuᵢτᵢ + f(u)ν`
/// with `ν` the inward normal.
#[derive(Debug, Clone)]
pub struct BoundaryGraph {
    pub point: Point,
    /// Columns: tangent basis `τ₁..τₖ`.
    pub tangents: DMatrix<f64>,
    pub normal: Point,
    pub f: GraphFn,
}

impl BoundaryGraph {
    pub fn boundary_point(&self, u: &[f64]) -> Point {
        let mut p = self.point.clone();
        for (i, ui) in u.iter().enumerate() {
            p += self.tangents.column(i) * *ui;
        }
        p + &self.normal * self.f.eval(u)
    }

    /// Offset of the graph point from the marked point.
    pub fn offset(&self, u: &[f64]) -> Point {
        let mut p = &self.normal * self.f.eval(u);
        for (i, ui) in u.iter().enumerate() {
            p += self.tangents.column(i) * *ui;
        }
        p
    }
}

/// A proper open convex body in a fixed affine chart.
#[derive(Clone)]
pub struct ConvexBody {
    pub id: String,
    pub chart: Chart,
    shape: Arc<dyn Shape>,
    pub strictly_convex: bool,
    pub c1: bool,
    pub marked: Option<BoundaryGraph>,
}

impl fmt::Debug for ConvexBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConvexBody({})", self.id)
    }
}

impl ConvexBody {
    pub fn from_shape(id: impl Into<String>, shape: Arc<dyn Shape>, strictly_convex: bool, c1: bool) -> Self {
        let n = shape.dim();
        ConvexBody {
            id: id.into(),
            chart: Chart::standard(n),
            shape,
            strictly_convex,
            c1,
            marked: None,
        }
    }

    pub fn with_marked(mut self, g: BoundaryGraph) -> Self {
        self.marked = Some(g);
        self
    }

    pub fn shape(&self) -> &dyn Shape {
        self.shape.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn level(&self, x: &Point) -> f64 {
        self.shape.level(x.as_slice())
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.level(x) < 0.0
    }

    pub fn radius(&self) -> f64 {
        self.shape.radius()
    }

    pub fn interior_point(&self) -> Point {
        Point::from_vec(self.shape.interior_point())
    }

    /// Euclidean distance from `anchor + w0` to the boundary along `dir`.
    pub fn exit_offset(&self, anchor: &Point, w0: &Point, dir: &Point) -> Result<f64> {
        let n = dir.norm();
        if !(n > 0.0) {
            return Err(Error::DegenerateConfiguration("zero direction"));
        }
        let u = dir / n;
        solve_exit(self.shape.as_ref(), anchor.as_slice(), w0.as_slice(), u.as_slice())
    }

    pub fn exit_from(&self, x: &Point, dir: &Point) -> Result<f64> {
        self.exit_offset(&Point::zeros(x.len()), x, dir)
    }

    /// Outward unit normal at a boundary point (closed form or central
    /// differences with step 1e-6).
    pub fn normal(&self, x: &Point) -> Point {
        let g = match self.shape.gradient(x.as_slice()) {
            Some(g) => Point::from_vec(g),
            None => {
                let h = 1e-6;
                Point::from_fn(x.len(), |i, _| {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[i] += h;
                    b[i] -= h;
                    (self.level(&a) - self.level(&b)) / (2.0 * h)
                })
            }
        };
        let n = g.norm();
        g / n
    }

    pub fn is_c1_at(&self, x: &Point) -> bool {
        self.c1 || self.shape.is_c1_at(x.as_slice())
    }

    /// Non-C¹ boundary points, for planar bodies with isolated corners.
    pub fn corners(&self) -> Vec<Point> {
        self.shape.corners().into_iter().map(Point::from_vec).collect()
    }

    /// Replaces a computed boundary point by the marked point when they agree
    /// to rounding, so that anchors are exact.
    pub fn snap(&self, x: Point) -> Point {
        if let Some(m) = &self.marked {
            if (&x - &m.point).norm() < 1e-12 * (1.0 + m.point.norm()) {
                return m.point.clone();
            }
        }
        x
    }

    /// Image of the body under a projective map that keeps it in the chart.
    pub fn transformed(&self, map: &ProjectiveMap) -> ConvexBody {
        let inv = map.inverse();
        let centre = map
            .apply(&self.interior_point())
            .expect("interior point stays finite");
        let shape = Projected {
            inner: self.shape.clone(),
            fwd: map.clone(),
            inv,
            radius: 4.0 * (self.radius() + centre.norm()),
            centre: centre.iter().copied().collect(),
        };
        ConvexBody::from_shape(
            format!("{}∘proj", self.id),
            Arc::new(shape),
            self.strictly_convex,
            self.c1,
        )
    }

    /// A random interior point: random direction from the interior point, at
    /// a random fraction of the exit distance.
    pub fn random_interior<R: Rng>(&self, rng: &mut R, margin: f64) -> Point {
        let o = self.interior_point();
        let n = self.dim();
        loop {
            let d = Point::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            if d.norm() < 1e-3 || d.norm() > 1.0 {
                continue;
            }
            if let Ok(l) = self.exit_from(&o, &d) {
                let s = rng.gen::<f64>() * (1.0 - margin);
                return &o + d.normalize() * (s * l);
            }
        }
    }

    /// Midpoint property on random interior pairs.
    pub fn check_convexity<R: Rng>(&self, samples: usize, rng: &mut R) -> Result<()> {
        for _ in 0..samples {
            let a = self.random_interior(rng, 0.0);
            let b = self.random_interior(rng, 0.0);
            let lam: f64 = rng.gen();
            let m = &a * lam + &b * (1.0 - lam);
            if !self.contains(&m) {
                return Err(Error::NonConvexSample(m.iter().copied().collect()));
            }
        }
        Ok(())
    }
}

fn quad_offset(anchor: &[f64], w: &[f64], inv_sq: &[f64]) -> f64 {
    let r: f64 = anchor.iter().zip(inv_sq).map(|(a, s)| a * a * s).sum::<f64>() - 1.0;
    let d: f64 = anchor
        .iter()
        .zip(w)
        .zip(inv_sq)
        .map(|((a, wi), s)| (2.0 * a + wi) * wi * s)
        .sum();
    snap(r) + d
}

/// Positive root along `dir` of the quadric offset `Σ sᵢ(2aᵢwᵢ + wᵢ²) + r`.
fn quad_exit(anchor: &[f64], w0: &[f64], dir: &[f64], inv_sq: &[f64]) -> Option<f64> {
    let c = quad_offset(anchor, w0, inv_sq);
    if !(c < 0.0) {
        return Some(f64::NAN);
    }
    let a: f64 = dir.iter().zip(inv_sq).map(|(d, s)| d * d * s).sum();
    let b: f64 = anchor
        .iter()
        .zip(w0)
        .zip(dir)
        .zip(inv_sq)
        .map(|(((x, w), d), s)| 2.0 * (x + w) * d * s)
        .sum();
    let disc = (b * b - 4.0 * a * c).sqrt();
    Some(if b > 0.0 {
        -2.0 * c / (b + disc)
    } else {
        (-b + disc) / (2.0 * a)
    })
}

#[derive(Debug)]
struct Ellipsoid {
    semiaxes: Vec<f64>,
    inv_sq: Vec<f64>,
}

impl Shape for Ellipsoid {
    fn dim(&self) -> usize {
        self.semiaxes.len()
    }
    fn level(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.inv_sq).map(|(v, s)| v * v * s).sum::<f64>() - 1.0
    }
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        quad_offset(anchor, w, &self.inv_sq)
    }
    fn exit(&self, anchor: &[f64], w0: &[f64], dir: &[f64]) -> Option<f64> {
        quad_exit(anchor, w0, dir, &self.inv_sq)
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().zip(&self.inv_sq).map(|(v, s)| 2.0 * v * s).collect())
    }
    fn radius(&self) -> f64 {
        self.semiaxes.iter().cloned().fold(0.0, f64::max)
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.0; self.semiaxes.len()]
    }
}

pub fn make_ellipsoid(semiaxes: &[f64]) -> Result<ConvexBody> {
    let n = semiaxes.len();
    if !(2..=4).contains(&n) || semiaxes.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("ellipsoid semiaxes".into()));
    }
    let shape = Ellipsoid {
        semiaxes: semiaxes.to_vec(),
        inv_sq: semiaxes.iter().map(|s| 1.0 / (s * s)).collect(),
    };
    let mut pole = Point::zeros(n);
    pole[n - 1] = semiaxes[n - 1];
    let mut normal = Point::zeros(n);
    normal[n - 1] = -1.0;
    let id = format!(
        "ellipsoid:{}",
        semiaxes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    );
    Ok(ConvexBody::from_shape(id, Arc::new(shape), true, true).with_marked(BoundaryGraph {
        point: pole,
        tangents: DMatrix::identity(n, n - 1),
        normal,
        f: GraphFn::ellipsoid_pole(semiaxes),
    }))
}

#[derive(Debug)]
struct PBall {
    p: f64,
    n: usize,
}

/// `|a + w|^p − |a|^p` without cancellation for `|w| ≪ |a|`.
fn pow_diff(a: f64, w: f64, p: f64) -> f64 {
    if a == 0.0 {
        w.abs().powf(p)
    } else if w.abs() < 0.5 * a.abs() {
        a.abs().powf(p) * (p * (w / a).ln_1p()).exp_m1()
    } else {
        (a + w).abs().powf(p) - a.abs().powf(p)
    }
}

impl Shape for PBall {
    fn dim(&self) -> usize {
        self.n
    }
    fn level(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| v.abs().powf(self.p)).sum::<f64>() - 1.0
    }
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        let r = snap(self.level(anchor));
        r + anchor.iter().zip(w).map(|(a, wi)| pow_diff(*a, *wi, self.p)).sum::<f64>()
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(
            x.iter()
                .map(|v| self.p * v.abs().powf(self.p - 1.0) * v.signum())
                .collect(),
        )
    }
    fn radius(&self) -> f64 {
        (self.n as f64).sqrt()
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.0; self.n]
    }
}

pub fn make_pball(p: f64, n: usize) -> Result<ConvexBody> {
    if !(p > 1.0 && p.is_finite()) || !(2..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!("pball p={p} n={n}")));
    }
    let mut pole = Point::zeros(n);
    pole[n - 1] = 1.0;
    let mut normal = Point::zeros(n);
    normal[n - 1] = -1.0;
    Ok(
        ConvexBody::from_shape(format!("pball:{p},{n}"), Arc::new(PBall { p, n }), true, true).with_marked(
            BoundaryGraph {
                point: pole,
                tangents: DMatrix::identity(n, n - 1),
                normal,
                f: GraphFn::pball_pole(p, n - 1),
            },
        ),
    )
}

#[derive(Debug)]
struct HalfDisc;

impl Shape for HalfDisc {
    fn dim(&self) -> usize {
        2
    }
    fn level(&self, x: &[f64]) -> f64 {
        (x[0] * x[0] + x[1] * x[1] - 1.0).max(-x[1])
    }
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        let circ = quad_offset(anchor, w, &[1.0, 1.0]);
        let flat = -(snap(anchor[1]) + w[1]);
        circ.max(flat)
    }
    fn exit(&self, anchor: &[f64], w0: &[f64], dir: &[f64]) -> Option<f64> {
        let flat0 = -(snap(anchor[1]) + w0[1]);
        if !(flat0 < 0.0) {
            return Some(f64::NAN);
        }
        let c = quad_exit(anchor, w0, dir, &[1.0, 1.0])?;
        if dir[1] < 0.0 {
            Some(c.min(flat0 / dir[1]))
        } else {
            Some(c)
        }
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        if !self.is_c1_at(x) {
            return None;
        }
        let circ = x[0] * x[0] + x[1] * x[1] - 1.0;
        Some(if circ >= -x[1] {
            vec![2.0 * x[0], 2.0 * x[1]]
        } else {
            vec![0.0, -1.0]
        })
    }
    fn is_c1_at(&self, x: &[f64]) -> bool {
        ((x[0] - 1.0).powi(2) + x[1] * x[1]).sqrt() > 1e-9 && ((x[0] + 1.0).powi(2) + x[1] * x[1]).sqrt() > 1e-9
    }
    fn corners(&self) -> Vec<Vec<f64>> {
        vec![vec![-1.0, 0.0], vec![1.0, 0.0]]
    }
    fn radius(&self) -> f64 {
        1.0
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.0, 0.5]
    }
}

pub fn make_halfdisc() -> ConvexBody {
    ConvexBody::from_shape("halfdisc", Arc::new(HalfDisc), false, false)
}

/// The standard simplex `{xᵢ > 0, Σxᵢ < 1}`.
#[derive(Debug)]
struct Simplex {
    n: usize,
}

impl Simplex {
    fn facets_at_offset(&self, anchor: &[f64], w: &[f64]) -> Vec<f64> {
        let k = 1.0 / (self.n as f64).sqrt();
        let mut v: Vec<f64> = anchor.iter().zip(w).map(|(a, wi)| -(snap(*a) + wi)).collect();
        let r = snap(anchor.iter().sum::<f64>() - 1.0);
        v.push((r + w.iter().sum::<f64>()) * k);
        v
    }
}

impl Shape for Simplex {
    fn dim(&self) -> usize {
        self.n
    }
    fn level(&self, x: &[f64]) -> f64 {
        self.level_at_offset(&vec![0.0; self.n], x)
    }
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        self.facets_at_offset(anchor, w).into_iter().fold(f64::MIN, f64::max)
    }
    fn exit(&self, anchor: &[f64], w0: &[f64], dir: &[f64]) -> Option<f64> {
        let vals = self.facets_at_offset(anchor, w0);
        if vals.iter().any(|v| !(*v < 0.0)) {
            return Some(f64::NAN);
        }
        let k = 1.0 / (self.n as f64).sqrt();
        let mut slopes: Vec<f64> = dir.iter().map(|d| -d).collect();
        slopes.push(dir.iter().sum::<f64>() * k);
        let t = vals
            .iter()
            .zip(&slopes)
            .filter(|(_, s)| **s > 0.0)
            .map(|(v, s)| -v / s)
            .fold(f64::INFINITY, f64::min);
        Some(t)
    }
    fn is_c1_at(&self, x: &[f64]) -> bool {
        let z = vec![0.0; self.n];
        self.facets_at_offset(&z, x).iter().filter(|v| v.abs() < 1e-9).count() < 2
    }
    fn corners(&self) -> Vec<Vec<f64>> {
        if self.n != 2 {
            return Vec::new();
        }
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]
    }
    fn radius(&self) -> f64 {
        1.0
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![1.0 / (self.n as f64 + 1.0); self.n]
    }
}

pub fn make_simplex(n: usize) -> Result<ConvexBody> {
    if !(2..=4).contains(&n) {
        return Err(Error::InvalidArgument(format!("simplex dimension {n}")));
    }
    Ok(ConvexBody::from_shape(format!("simplex:{n}"), Arc::new(Simplex { n }), false, false))
}

/// `max(a, b)` smoothed on `|a − b| < κ`; convex, nondecreasing in both
/// arguments and exactly the maximum elsewhere.
fn smooth_max(a: f64, b: f64, kappa: f64) -> f64 {
    let d = (a - b).abs();
    if d >= kappa {
        a.max(b)
    } else {
        let s = 1.0 - d / kappa;
        a.max(b) + 0.25 * kappa * s * s
    }
}

/// `{z > f(u)}` intersected, through a smooth maximum, with an ellipsoid
/// `Σuᵢ²/A² + ((z − c)/B)² < 1` reaching height `top`.
#[derive(Debug)]
struct GraphBody {
    f: GraphFn,
    a: f64,
    c: f64,
    b: f64,
    kappa: f64,
}

impl Shape for GraphBody {
    fn dim(&self) -> usize {
        self.f.dim + 1
    }
    fn level(&self, x: &[f64]) -> f64 {
        self.level_at_offset(&vec![0.0; x.len()], x)
    }
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        let k = self.f.dim;
        let g1 = if anchor.iter().all(|v| *v == 0.0) {
            self.f.eval(&w[..k]) - w[k]
        } else {
            let u: Vec<f64> = (0..k).map(|i| anchor[i] + w[i]).collect();
            self.f.eval(&u) - (anchor[k] + w[k])
        };
        let mut inv = vec![1.0 / (self.a * self.a); k];
        inv.push(1.0 / (self.b * self.b));
        let mut sh = anchor.to_vec();
        sh[k] -= self.c;
        let e = quad_offset(&sh, w, &inv);
        smooth_max(g1, e, self.kappa)
    }
    fn radius(&self) -> f64 {
        (self.a * self.a + (self.c.abs() + self.b).powi(2)).sqrt()
    }
    fn interior_point(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.f.dim + 1];
        v[self.f.dim] = self.c + 0.5 * self.b;
        v
    }
}

pub fn make_graph_body(f: GraphFn) -> Result<ConvexBody> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(11);
    f.check_convex(2000, &mut rng)?;
    let k = f.dim;
    let r = f.radius;
    // height of the graph over the rim of its domain
    let mut top = 0.0f64;
    for i in 0..64 {
        let th = std::f64::consts::TAU * i as f64 / 64.0;
        let mut u = vec![0.0; k];
        u[0] = r * th.cos();
        if k > 1 {
            u[1] = r * th.sin();
        }
        top = top.max(f.eval(&u));
    }
    let depth = 0.5 * top;
    let shape = GraphBody {
        a: 1.25 * r,
        c: 0.5 * (top - depth),
        b: 0.5 * (top + depth),
        kappa: 0.05 * top,
        f: f.clone(),
    };
    let n = k + 1;
    let mut normal = Point::zeros(n);
    normal[k] = 1.0;
    Ok(
        ConvexBody::from_shape(format!("graph:{}", f.name), Arc::new(shape), true, true).with_marked(
            BoundaryGraph {
                point: Point::zeros(n),
                tangents: DMatrix::identity(n, k),
                normal,
                f,
            },
        ),
    )
}

/// `{0 < X < 1, |Y|^α < X(1−X)^{α−1}}`, invariant under `diag(b^α, b, 1)`
/// conjugated into this chart.
#[derive(Debug)]
struct ArcBody {
    alpha: f64,
}

impl Shape for ArcBody {
    fn dim(&self) -> usize {
        2
    }
    fn level(&self, x: &[f64]) -> f64 {
        self.level_at_offset(&[0.0, 0.0], x)
    }
    fn level_at_offset(&self, anchor: &[f64], w: &[f64]) -> f64 {
        let x = anchor[0] + w[0];
        let one_minus = (1.0 - anchor[0]) - w[0];
        let y = (anchor[1] + w[1]).abs();
        let ya = y.powf(self.alpha);
        if x < 0.0 || one_minus < 0.0 {
            return (-x).max(-one_minus) + ya;
        }
        ya - x * one_minus.powf(self.alpha - 1.0)
    }
    fn is_c1_at(&self, _x: &[f64]) -> bool {
        true
    }
    fn radius(&self) -> f64 {
        1.5
    }
    fn interior_point(&self) -> Vec<f64> {
        vec![0.5, 0.0]
    }
}

pub fn make_arc_body(alpha: f64) -> Result<ConvexBody> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::BadSpectrum(alpha));
    }
    let mut tangents = DMatrix::zeros(2, 1);
    tangents[(1, 0)] = 1.0;
    Ok(
        ConvexBody::from_shape(format!("arc:{alpha}"), Arc::new(ArcBody { alpha }), true, true).with_marked(
            BoundaryGraph {
                point: Point::zeros(2),
                tangents,
                normal: Point::from_vec(vec![1.0, 0.0]),
                f: GraphFn::arc(alpha),
            },
        ),
    )
}

#[derive(Debug)]
struct Projected {
    inner: Arc<dyn Shape>,
    fwd: ProjectiveMap,
    inv: ProjectiveMap,
    radius: f64,
    centre: Vec<f64>,
}

impl Shape for Projected {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn level(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let h = self.inv.matrix.columns(0, n) * Point::from_column_slice(x) + self.inv.matrix.column(n);
        // points sent through infinity are outside
        if h[n] <= 0.0 {
            return 1.0;
        }
        let y: Vec<f64> = (0..n).map(|i| h[i] / h[n]).collect();
        self.inner.level(&y)
    }
    fn is_c1_at(&self, x: &[f64]) -> bool {
        match self.inv.apply(&Point::from_column_slice(x)) {
            Some(y) => self.inner.is_c1_at(y.as_slice()),
            None => true,
        }
    }
    fn corners(&self) -> Vec<Vec<f64>> {
        self.inner
            .corners()
            .iter()
            .filter_map(|c| self.fwd.apply(&Point::from_column_slice(c)))
            .map(|p| p.iter().copied().collect())
            .collect()
    }
    fn radius(&self) -> f64 {
        self.radius
    }
    fn interior_point(&self) -> Vec<f64> {
        self.centre.clone()
    }
}

/// Preset germs addressable as `graph:<preset>`.
pub fn graph_preset(name: &str) -> Result<GraphFn> {
    match name {
        "parabola" => Ok(GraphFn::power(2.0, 1, 1.0)),
        "paraboloid" => Ok(GraphFn::power(2.0, 2, 1.0)),
        "product" => Ok(GraphFn::product()),
        "oscillatory" => Ok(GraphFn::oscillatory(1)),
        "oscillatory2" => Ok(GraphFn::oscillatory(2)),
        "quartic" => Ok(GraphFn::power(4.0, 1, 1.0)),
        "flat-exp" => Ok(GraphFn::flat_exp(1)),
        _ => Err(Error::InvalidBodyId(format!("graph:{name}"))),
    }
}

fn parse_list(s: &str, id: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::InvalidBodyId(id.to_string())))
        .collect()
}

/// Parses catalog ids: `ellipsoid:a,b[,..]`, `pball:p,n`, `halfdisc`,
/// `simplex:n`, `graph:<preset>`, `arc:a,b`.
pub fn parse_body_id(id: &str) -> Result<ConvexBody> {
    let bad = || Error::InvalidBodyId(id.to_string());
    let (kind, args) = match id.split_once(':') {
        Some((k, a)) => (k, a),
        None => (id, ""),
    };
    match kind {
        "ellipsoid" => make_ellipsoid(&parse_list(args, id)?).map_err(|_| bad()),
        "disc" if args.is_empty() => make_ellipsoid(&[1.0, 1.0]),
        "pball" => {
            let v = parse_list(args, id)?;
            if v.len() != 2 || v[1].fract() != 0.0 {
                return Err(bad());
            }
            make_pball(v[0], v[1] as usize).map_err(|_| bad())
        }
        "halfdisc" if args.is_empty() => Ok(make_halfdisc()),
        "simplex" => {
            let n: usize = args.trim().parse().map_err(|_| bad())?;
            make_simplex(n).map_err(|_| bad())
        }
        "graph" => make_graph_body(graph_preset(args)?),
        "arc" => {
            let v = parse_list(args, id)?;
            if v.len() != 2 || !(v[0] > 1.0 && v[1] > 1.0) {
                return Err(bad());
            }
            make_arc_body(v[0].ln() / v[1].ln())
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    #[test]
    fn ellipse_exit_along_axis() {
        let e = make_ellipsoid(&[2.0, 1.0]).unwrap();
        assert!((e.exit_from(&p(&[0.0, 0.0]), &p(&[1.0, 0.0])).unwrap() - 2.0).abs() < 1e-15);
        for k in 0..16 {
            let th = k as f64 * 0.4;
            assert!((make_ellipsoid(&[1.0, 1.0]).unwrap().exit_from(&p(&[0.0, 0.0]), &p(&[th.cos(), th.sin()])).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn four_ball_diagonal_exit_matches_quartic_root() {
        // independent oracle: bisection on 2(t/√2)⁴ = 1
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if 2.0 * (m / 2f64.sqrt()).powi(4) < 1.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let b = make_pball(4.0, 2).unwrap();
        let t = b.exit_from(&p(&[0.0, 0.0]), &p(&[1.0, 1.0])).unwrap();
        assert!((t - lo).abs() < 1e-12 * lo);
        assert!((t - 2f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn anchored_exit_near_pole_keeps_relative_precision() {
        let b = make_pball(4.0, 2).unwrap();
        let pole = p(&[0.0, 1.0]);
        for &d in &[1e-4, 1e-8, 1e-12] {
            let l = b.exit_offset(&pole, &p(&[0.0, -d]), &p(&[1.0, 0.0])).unwrap();
            let exact = (1.0 - (1.0 - d).powi(4)).powf(0.25);
            let exact_small = (4.0 * d - 6.0 * d * d).powf(0.25);
            let e = if d < 1e-6 { exact_small } else { exact };
            assert!((l - e).abs() < 1e-12 * e, "d={d} l={l} e={e}");
        }
    }

    #[test]
    fn halfdisc_membership_and_flat_part() {
        let h = make_halfdisc();
        assert!(h.contains(&p(&[0.0, 0.5])));
        assert!(!h.contains(&p(&[0.0, -0.1])));
        for k in 1..10 {
            let x = -0.9 + 0.18 * k as f64;
            assert_eq!(h.level(&p(&[x, 0.0])), 0.0);
        }
        assert!(!h.is_c1_at(&p(&[-1.0, 0.0])));
        assert!(h.is_c1_at(&p(&[0.3, 0.0])));
    }

    #[test]
    fn simplex_centroid_interior() {
        let s = make_simplex(2).unwrap();
        assert!(s.contains(&p(&[1.0 / 3.0, 1.0 / 3.0])));
        assert!(!s.is_c1_at(&p(&[0.0, 0.0])));
        let t = s.exit_from(&p(&[0.25, 0.25]), &p(&[1.0, 1.0])).unwrap();
        assert!((t - 0.5f64.sqrt() * 0.5).abs() < 1e-15);
    }

    #[test]
    fn catalog_bodies_are_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for id in [
            "ellipsoid:2,1",
            "pball:1.5,2",
            "pball:4,3",
            "halfdisc",
            "simplex:2",
            "simplex:3",
            "graph:product",
            "graph:oscillatory",
            "graph:parabola",
            "arc:8,2",
        ] {
            let b = parse_body_id(id).unwrap();
            b.check_convexity(10_000, &mut rng).unwrap_or_else(|e| panic!("{id}: {e}"));
        }
    }

    #[test]
    fn marked_graphs_lie_on_boundary() {
        for id in ["ellipsoid:2,1", "ellipsoid:1,2,3", "pball:4,2", "pball:1.5,3", "graph:product", "graph:oscillatory", "arc:8,2", "arc:4,2"] {
            let b = parse_body_id(id).unwrap();
            let g = b.marked.clone().unwrap();
            let k = g.f.dim;
            for i in 1..20 {
                let t = 0.02 * i as f64 * g.f.radius;
                let mut u = vec![0.0; k];
                u[0] = t;
                if k > 1 {
                    u[1] = -0.5 * t;
                }
                let w = g.offset(&u);
                // walk inward a little along the normal: must be interior
                let lev = b.shape().level_at_offset(g.point.as_slice(), w.as_slice());
                let scale = g.f.eval(&u).max(1e-300);
                assert!(lev.abs() < 1e-10 * scale.max(1e-6) + 1e-15, "{id} t={t} level={lev}");
                let inner = &w + &g.normal * (1e-3 * scale + 1e-9);
                assert!(b.shape().level_at_offset(g.point.as_slice(), inner.as_slice()) < 0.0, "{id}");
            }
        }
    }

    #[test]
    fn pball_graph_matches_ray_oracle() {
        let b = make_pball(4.0, 2).unwrap();
        let g = b.marked.clone().unwrap();
        for i in 1..=10 {
            let u = 0.03 * i as f64;
            // vertical ray from inside, offset from the pole
            let w0 = p(&[u, -0.5]);
            let l = b.exit_offset(&g.point, &w0, &p(&[0.0, 1.0])).unwrap();
            let z = 0.5 - l;
            assert!((z - g.f.eval(&[u])).abs() < 1e-10, "u={u}");
        }
    }

    #[test]
    fn arc_germ_solves_implicit_equation() {
        let g = GraphFn::arc(3.0);
        for &y in &[1e-6, 1e-3, 0.05] {
            let x = g.eval(&[y]);
            let lhs = x * (1.0 - x).powi(2);
            assert!((lhs - y.powi(3)).abs() < 1e-14 * y.powi(3));
            let h = 1e-7 * y;
            let fd = (g.eval(&[y + h]) - g.eval(&[y - h])) / (2.0 * h);
            assert!((fd - g.deriv(y)).abs() < 1e-5 * fd.abs());
        }
    }

    #[test]
    fn bad_ids_are_rejected() {
        for id in ["cube", "pball:1,2", "pball:3", "simplex:9", "graph:nope", "ellipsoid:1,-1", "arc:2,4"] {
            assert!(parse_body_id(id).is_err(), "{id}");
        }
    }

    #[test]
    fn non_convex_germ_is_rejected() {
        let f = GraphFn::custom("bump", 1, 1.0, |u| u[0] * u[0] * (1.0 + (8.0 * u[0]).sin()).max(0.0));
        assert!(matches!(make_graph_body(f), Err(Error::NonConvexSample(_))));
    }
}
