//! Adapted charts, the parallel-transport norm and parallel Lyapunov
//! exponents.
//!
//! Everything is computed in the plane spanned by the chord and the
//! transported vector. The plane is normalized by a projective map that sends
//! the intersection of the two tangent lines to infinity and makes the chord
//! orthogonal to them; in that chart the transport norm is
//! `(|x_t x⁺||x_t x⁻|)^{1/2}(1/|x_t y_t⁺| + 1/|x_t y_t⁻|)` up to a constant.

use crate::body::ConvexBody;
use crate::error::{Error, Result};
use crate::fit::{self, ExponentEstimate};
use crate::flow::flow;
use crate::metric::HPoint;
use crate::projective::{PlaneSection, Point};
use crate::Precision;
use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A tangent vector of HΩ in the splitting `aX + h + Y`, stored through the
/// Finsler norms of `dπh` and `dπJY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HNorm {
    pub a: f64,
    pub fh: f64,
    pub fjy: f64,
}

impl HNorm {
    pub fn norm(&self) -> f64 {
        (self.a * self.a + 0.5 * (self.fh * self.fh + self.fjy * self.fjy)).sqrt()
    }

    /// The flow generator `X`.
    pub fn generator() -> Self {
        HNorm { a: 1.0, fh: 0.0, fjy: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
enum Toward {
    Finite(Vector2<f64>),
    Infinite(Vector2<f64>),
}

/// A plane section through a chord and a transverse direction, with the
/// projective normalization to a good chart.
#[derive(Debug, Clone)]
pub struct AdaptedSection {
    pub section: PlaneSection,
    pub plane_body: ConvexBody,
    /// The chord in section coordinates: `x⁺` at the origin, `ξ = e₁`.
    pub w: HPoint,
    /// Section coordinates to good-chart coordinates.
    pub normalization: Matrix3<f64>,
    toward: Toward,
    norm0: f64,
    pub precision: Precision,
    normals: (Vector2<f64>, Vector2<f64>),
}

fn v2(p: &Point) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

pub fn adapt_section(body: &ConvexBody, w: &HPoint, v: &Point) -> Result<AdaptedSection> {
    if !body.c1 {
        return Err(Error::NotC1);
    }
    if !body.strictly_convex {
        return Err(Error::NotStrictlyConvex);
    }
    if !body.is_c1_at(&w.plus) || !body.is_c1_at(&w.minus) {
        return Err(Error::NotC1);
    }
    let e1 = w.xi.clone();
    let r = v - &e1 * e1.dot(v);
    if !(r.norm() > 1e-9 * v.norm()) {
        return Err(Error::DependentDirections);
    }
    let section = PlaneSection {
        parent: body.clone(),
        q: w.plus.clone(),
        e1: e1.clone(),
        e2: r.normalize(),
    };
    let plane_body = section.body();
    let len = w.len;
    let w2 = HPoint {
        body: plane_body.clone(),
        xi: Point::from_vec(vec![1.0, 0.0]),
        plus: Point::zeros(2),
        minus: Point::from_vec(vec![-len, 0.0]),
        len,
        logit: w.logit,
    };
    let proj = |n: &Point| Vector2::new(n.dot(&section.e1), n.dot(&section.e2)).normalize();
    let np = proj(&body.normal(&w.plus));
    let nm = proj(&body.normal(&w.minus));
    if np.x.abs() < 1e-12 || nm.x.abs() < 1e-12 {
        return Err(Error::TangentIntersectionOnChord);
    }
    // tangent lines n·p = n·p₀ in homogeneous form, p⁺ = 0, p⁻ = (−L, 0)
    let lp = Vector3::new(np.x, np.y, 0.0);
    let lm = Vector3::new(nm.x, nm.y, nm.x * len);
    let ah = lp.cross(&lm);
    let x = Vector2::new(-w.gap_plus(), 0.0);
    let tangent = Vector2::new(-np.y, np.x);
    let finite = ah.z.abs() * 1e12 * len > Vector2::new(ah.x, ah.y).norm();
    let (m, toward) = if finite {
        let a = Vector2::new(ah.x / ah.z, ah.y / ah.z);
        if a.y.abs() < 1e-12 * len {
            return Err(Error::TangentIntersectionOnChord);
        }
        let u1 = (Vector2::zeros() - a).normalize();
        let u2 = (Vector2::new(-len, 0.0) - a).normalize();
        let beta = (u1 + u2).normalize();
        // p ↦ (p − x)/(β·(p − a)) sends the line through a orthogonal to the
        // bisector to infinity; that line misses the wedge containing Ω
        let p = Matrix3::new(1.0, 0.0, -x.x, 0.0, 1.0, -x.y, beta.x, beta.y, -beta.dot(&a));
        let img = |q: Vector2<f64>| {
            let h = p * Vector3::new(q.x, q.y, 1.0);
            Vector2::new(h.x / h.z, h.y / h.z)
        };
        let c_dir = img(Vector2::zeros()).normalize();
        let t_dir = (a - x).normalize();
        let l = nalgebra::Matrix2::from_columns(&[c_dir, t_dir])
            .try_inverse()
            .ok_or(Error::TangentIntersectionOnChord)?;
        let mut big = Matrix3::identity();
        big.fixed_view_mut::<2, 2>(0, 0).copy_from(&l);
        (big * p, Toward::Finite(a))
    } else {
        let tau = Vector2::new(ah.x, ah.y).normalize();
        let l = nalgebra::Matrix2::from_columns(&[Vector2::new(1.0, 0.0), tau])
            .try_inverse()
            .ok_or(Error::TangentIntersectionOnChord)?;
        let mut big = Matrix3::identity();
        big.fixed_view_mut::<2, 2>(0, 0).copy_from(&l);
        let shift = -(l * x);
        big[(0, 2)] = shift.x;
        big[(1, 2)] = shift.y;
        (big, Toward::Infinite(tangent))
    };
    let mut sec = AdaptedSection {
        section,
        plane_body,
        w: w2,
        normalization: m,
        toward,
        norm0: 1.0,
        precision: Precision::Double,
        normals: (np, nm),
    };
    sec.norm0 = sec.raw_norm(0.0)?;
    Ok(sec)
}

impl AdaptedSection {
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    /// Good-chart image of the segment from `p` to `p + v`, without
    /// cancellation for small `v`.
    fn mapped_diff(&self, p: &Vector2<f64>, v: &Vector2<f64>) -> Vector2<f64> {
        let m = &self.normalization;
        let a = m.fixed_view::<2, 2>(0, 0);
        let n = a * p + Vector2::new(m[(0, 2)], m[(1, 2)]);
        let mrow = Vector2::new(m[(2, 0)], m[(2, 1)]);
        let d = mrow.dot(p) + m[(2, 2)];
        let mv = mrow.dot(v);
        (a * v * d - n * mv) / (d * (d + mv))
    }

    /// Largest angle between a normalized tangent line at x± and the
    /// normalized chord's orthogonal.
    pub fn tangent_defect(&self) -> f64 {
        let pts = [Vector2::zeros(), Vector2::new(-self.w.len, 0.0)];
        let chord = self.mapped_diff(&pts[1], &Vector2::new(self.w.len, 0.0)).normalize();
        let mut worst = 0.0f64;
        for (p, n) in pts.iter().zip([self.normals.0, self.normals.1]) {
            let tau = Vector2::new(-n.y, n.x) * 1e-7;
            let img = self.mapped_diff(p, &tau).normalize();
            worst = worst.max(img.dot(&chord).abs());
        }
        worst
    }

    /// Time at which the gap to the approached endpoint reaches the floor.
    pub fn t_max(&self) -> f64 {
        let lmax = (1.0 / self.precision.gap_floor() - 1.0).ln();
        0.5 * (lmax - self.w.logit)
    }

    pub fn t_min(&self) -> f64 {
        let lmax = (1.0 / self.precision.gap_floor() - 1.0).ln();
        -0.5 * (lmax + self.w.logit)
    }

    fn raw_norm(&self, t: f64) -> Result<f64> {
        let wt = flow(&self.w, t, self.precision).map_err(|_| Error::PrecisionExhausted {
            t_max: if t > 0.0 { self.t_max() } else { self.t_min() },
        })?;
        let (gp, gm) = (wt.gap_plus(), wt.gap_minus());
        if gp.min(gm) < self.precision.gap_floor() * self.w.len {
            return Err(Error::PrecisionExhausted {
                t_max: if t > 0.0 { self.t_max() } else { self.t_min() },
            });
        }
        let (anchor, off) = wt.anchored();
        let xt = v2(anchor) + v2(&off);
        let d = match self.toward {
            Toward::Finite(a) => (a - v2(anchor)) - v2(&off),
            Toward::Infinite(tau) => tau,
        }
        .normalize();
        let dp = Point::from_vec(vec![d.x, d.y]);
        let l1 = self.plane_body.exit_offset(anchor, &off, &dp)?;
        let l2 = self.plane_body.exit_offset(anchor, &off, &(-&dp))?;
        let g = |v: Vector2<f64>| self.mapped_diff(&xt, &v).norm();
        let to_plus = g(Vector2::new(gp, 0.0));
        let to_minus = g(Vector2::new(-gm, 0.0));
        let y1 = g(d * l1);
        let y2 = g(-d * l2);
        Ok((to_plus * to_minus).sqrt() * (1.0 / y1 + 1.0 / y2))
    }

    /// `‖T^t v‖`, equal to 1 at `t = 0`.
    pub fn transport_norm(&self, t: f64) -> Result<f64> {
        Ok(self.raw_norm(t)? / self.norm0)
    }
}

/// Half-width in `t` of the excluded last decade of the gap.
const LAST_DECADE: f64 = 0.5 * std::f64::consts::LN_10;

/// `η(w, v) = lim (1/t) log ‖T^t v‖` along the chord from `x` to `x⁺`.
pub fn parallel_exponent(
    body: &ConvexBody,
    xplus: &Point,
    x: &Point,
    v: &Point,
    precision: Precision,
) -> Result<ExponentEstimate> {
    let w = HPoint::new(body, x, &(xplus - x))?;
    if (&w.plus - xplus).norm() > 1e-8 * (1.0 + xplus.norm()) {
        return Err(Error::InvalidArgument("x⁺ is not the forward chord endpoint".into()));
    }
    let sec = adapt_section(body, &w, v)?.with_precision(precision);
    exponent_on_section(&sec)
}

pub fn exponent_on_section(sec: &AdaptedSection) -> Result<ExponentEstimate> {
    let hi = sec.t_max() - LAST_DECADE;
    let ts: Vec<f64> = (0..)
        .map(|k| 2.0 + 0.25 * k as f64)
        .take_while(|t| *t <= hi + 1e-12)
        .collect();
    if ts.len() < 8 {
        return Err(Error::PrecisionExhausted { t_max: sec.t_max() });
    }
    let ys: Vec<f64> = ts
        .par_iter()
        .map(|t| sec.transport_norm(*t).map(f64::ln))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit::estimate(&ts, &ys, 3.0, sec.precision))
}

/// Flow side and boundary side of `η(x⁺, v) = 2/α(x⁺, p(v)) − 1`, with
/// `p(v)` the projection of `v` to the tangent space along the chord.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCheck {
    pub eta: ExponentEstimate,
    pub alpha: ExponentEstimate,
    /// `2/α − 1`, with `α = ∞` giving `−1`.
    pub predicted: f64,
    pub defect: f64,
}

pub fn theorem_check(body: &ConvexBody, xplus: &Point, x: &Point, v: &Point, precision: Precision) -> Result<TheoremCheck> {
    let eta = parallel_exponent(body, xplus, x, v, precision)?;
    let (germ, frame) = crate::regularity::boundary_germ(body, xplus, precision)?;
    let xi = (xplus - x).normalize();
    let nu = body.normal(xplus);
    let pv = v - &xi * (nu.dot(v) / nu.dot(&xi));
    let coords = (frame.transpose() * &frame)
        .try_inverse()
        .ok_or(Error::DegenerateConfiguration("tangent frame"))?
        * frame.transpose()
        * pv;
    let alpha = crate::regularity::alpha_estimate(&germ, Some(coords.as_slice()))?;
    let predicted = if alpha.capped { -1.0 } else { 2.0 / alpha.value - 1.0 };
    Ok(TheoremCheck {
        defect: (eta.value - predicted).abs(),
        eta,
        alpha,
        predicted,
    })
}

/// `(χˢ, χᵘ) = (η − 1, η + 1)`.
pub fn flow_exponents_from_parallel(eta: f64) -> Result<(f64, f64)> {
    if !(eta.abs() <= 1.0 + 1e-12) {
        return Err(Error::OutOfRange(eta));
    }
    Ok((eta - 1.0, eta + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationLevel {
    /// Parallel exponent `η` of the level (`α = 2/(η + 1)`).
    pub eta: f64,
    pub alpha: f64,
    pub stderr: f64,
    /// Probe directions that first appear at this level.
    pub basis: Vec<Point>,
    /// Dimension of the cumulative subspace `H_i`.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationCheck {
    pub direction: Point,
    pub measured: f64,
    pub predicted: f64,
}

/// `{0} ⊊ H₁ ⊊ … ⊊ H_p`, ordered by increasing `η` (decreasing `α`).
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    pub levels: Vec<FiltrationLevel>,
    pub ambient_dim: usize,
    pub checks: Vec<CombinationCheck>,
}

impl Filtration {
    pub fn multiplicities(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.basis.len()).collect()
    }

    /// Exponent class a direction belongs to under the dominance rule: the
    /// largest `η` among probe components with nonzero coefficient.
    pub fn predicted_eta(&self, coeffs: &[f64]) -> f64 {
        let mut k = 0;
        let mut best = f64::MIN;
        for l in &self.levels {
            for _ in &l.basis {
                if coeffs[k].abs() > 1e-12 {
                    best = best.max(l.eta);
                }
                k += 1;
            }
        }
        best
    }
}

pub(crate) fn alpha_of_eta(eta: f64) -> f64 {
    if eta <= -1.0 + 1e-12 {
        f64::INFINITY
    } else {
        2.0 / (eta + 1.0)
    }
}

/// Groups exponents `(η, stderr)` by gaps larger than `gap`; levels are
/// ordered by increasing `η`.
pub(crate) fn build_filtration(probes: &[Point], est: &[(f64, f64)], gap: f64) -> Result<Filtration> {
    let mut order: Vec<usize> = (0..est.len()).collect();
    order.sort_by(|a, b| est[*a].0.partial_cmp(&est[*b].0).unwrap());
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if est[i].0 - est[*g.last().unwrap()].0 <= gap => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let stats: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| {
            let m = g.iter().map(|i| est[*i].0).sum::<f64>() / g.len() as f64;
            let s = g.iter().map(|i| est[*i].1).fold(0.0, f64::max);
            (m, s)
        })
        .collect();
    for w in stats.windows(2) {
        let pooled = (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt();
        if w[1].0 - w[0].0 < 2.0 * pooled {
            return Err(Error::AmbiguousClustering(w[0].0, w[1].0));
        }
    }
    let mut dim = 0;
    let levels = groups
        .iter()
        .zip(&stats)
        .map(|(g, (m, s))| {
            dim += g.len();
            FiltrationLevel {
                eta: *m,
                alpha: alpha_of_eta(*m),
                stderr: *s,
                basis: g.iter().map(|i| probes[*i].clone()).collect(),
                dim,
            }
        })
        .collect();
    Ok(Filtration {
        levels,
        ambient_dim: probes.len(),
        checks: Vec::new(),
    })
}

/// Parallel exponents of the probe directions and of `combos` random
/// combinations, clustered into the Lyapunov filtration.
pub fn detect_filtration(
    body: &ConvexBody,
    xplus: &Point,
    x: &Point,
    probes: &[Point],
    combos: usize,
    seed: u64,
    precision: Precision,
) -> Result<Filtration> {
    let est: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|v| parallel_exponent(body, xplus, x, v, precision).map(|e| (e.value, e.stderr)))
        .collect::<Result<Vec<_>>>()?;
    let mut filt = build_filtration(probes, &est, 0.1)?;
    // probes in level order, so coefficient k refers to the k-th basis vector
    let ordered: Vec<Point> = filt.levels.iter().flat_map(|l| l.basis.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Vec<f64>> = (0..combos)
        .map(|_| (0..ordered.len()).map(|_| rng.gen_range(0.2..1.0) * if rng.gen() { 1.0 } else { -1.0 }).collect())
        .collect();
    let checks = coeffs
        .par_iter()
        .map(|c| {
            let dir = ordered.iter().zip(c).fold(Point::zeros(x.len()), |acc, (b, k)| acc + b * *k);
            let m = parallel_exponent(body, xplus, x, &dir, precision)?;
            Ok(CombinationCheck {
                predicted: filt.predicted_eta(c),
                measured: m.value,
                direction: dir,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    filt.checks = checks;
    Ok(filt)
}

/// Slope of `log det T^t` computed two ways: the sum of per-direction log
/// norms over the probes, and the Euclidean good-chart determinant corrected
/// by the Busemann density of the transverse Finsler unit ball.
///
/// The second route needs the ambient chart to be adapted already, i.e. the
/// tangent hyperplanes at both chord ends orthogonal to the chord.
pub fn log_det_slopes(
    body: &ConvexBody,
    xplus: &Point,
    x: &Point,
    probes: &[Point],
    precision: Precision,
) -> Result<(ExponentEstimate, ExponentEstimate)> {
    let w = HPoint::new(body, x, &(xplus - x))?;
    let n = body.dim();
    for e in [&w.plus, &w.minus] {
        let nn = body.normal(e);
        if 1.0 - nn.dot(&w.xi).abs() > 1e-10 {
            return Err(Error::InvalidArgument("chart is not adapted at the chord ends".into()));
        }
    }
    let secs: Vec<AdaptedSection> = probes
        .iter()
        .map(|v| adapt_section(body, &w, v).map(|s| s.with_precision(precision)))
        .collect::<Result<Vec<_>>>()?;
    let hi = secs[0].t_max() - LAST_DECADE;
    let ts: Vec<f64> = (0..).map(|k| 2.0 + 0.25 * k as f64).take_while(|t| *t <= hi).collect();
    if ts.len() < 8 {
        return Err(Error::PrecisionExhausted { t_max: secs[0].t_max() });
    }
    // transverse orthonormal frame
    let mut frame: Vec<Point> = Vec::new();
    for k in 0..n {
        let mut e = Point::zeros(n);
        e[k] = 1.0;
        let mut r = &e - &w.xi * w.xi.dot(&e);
        for f in &frame {
            r -= f * f.dot(&r);
        }
        if r.norm() > 1e-6 {
            frame.push(r.normalize());
        }
    }
    let rows: Vec<(f64, f64)> = ts
        .par_iter()
        .map(|t| {
            let sum = secs
                .iter()
                .map(|s| s.transport_norm(*t).map(f64::ln))
                .sum::<Result<f64>>()?;
            let wt = flow(&w, *t, precision)?;
            let (anchor, off) = wt.anchored();
            let vol = transverse_ball_volume(body, anchor, &off, &frame)?;
            let det = 0.5 * (n - 1) as f64 * wt.m_value().ln() - vol.ln();
            Ok((sum, det))
        })
        .collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok((fit::estimate(&ts, &a, 3.0, precision), fit::estimate(&ts, &b, 3.0, precision)))
}

/// Euclidean volume of the Finsler unit ball in the transverse subspace at
/// `anchor + off` (transverse dimension 1 or 2).
fn transverse_ball_volume(body: &ConvexBody, anchor: &Point, off: &Point, frame: &[Point]) -> Result<f64> {
    let m = |d: &Point| -> Result<f64> {
        let a = body.exit_offset(anchor, off, d)?;
        let b = body.exit_offset(anchor, off, &(-d))?;
        Ok(2.0 * a * b / (a + b))
    };
    match frame.len() {
        1 => Ok(2.0 * m(&frame[0])?),
        2 => crate::entropy::star_volume(2, 256, |d| m(&(&frame[0] * d[0] + &frame[1] * d[1]))),
        _ => Err(Error::InvalidArgument("transverse dimension must be 1 or 2".into())),
    }
}
