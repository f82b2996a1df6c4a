//! Approximate α-regularity of convex germs.
//!
//! A germ is approximately α-regular in the direction `v` when
//! `log((f(tv) + f(−tv))/2) / log t → α`. The estimators here fit that slope,
//! its harmonic-mean and skewed-inverse reformulations, power brackets,
//! directional filtrations and sublevel-volume exponents.

use crate::body::{ConvexBody, GraphFn};
use crate::error::{Error, Result};
use crate::fit::{self, increasing_root, log_add_exp, ExponentEstimate};
use crate::projective::Point;
use crate::transport::{build_filtration, Filtration};
use crate::Precision;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cell::Cell;
use std::f64::consts::{LN_2, LN_10, PI};

/// Exponents above this are reported as infinite.
pub const ALPHA_CAP: f64 = 50.0;

/// Grid density of the log-log fits, in points per decade.
const PER_DECADE: f64 = 10.0;

/// A convex germ `f` with `f(0) = 0`, `∇f(0) = 0`, sampled on
/// `[t_min, t_max]` along rays.
#[derive(Debug, Clone)]
pub struct CvxGerm {
    pub f: GraphFn,
    pub precision: Precision,
    pub t_min: f64,
    pub t_max: f64,
}

impl CvxGerm {
    pub fn new(f: GraphFn, precision: Precision) -> Result<Self> {
        let z = vec![0.0; f.dim];
        let f0 = f.eval(&z);
        if !(f0.abs() <= 1e-14) {
            return Err(Error::InvalidArgument(format!("germ has f(0) = {f0:e}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        f.check_convex(500, &mut rng)?;
        Ok(CvxGerm {
            t_max: 0.1f64.min(f.radius),
            f,
            precision,
            t_min: precision.germ_floor(),
        })
    }

    pub fn with_range(mut self, t_min: f64, t_max: f64) -> Self {
        self.t_min = t_min;
        self.t_max = t_max;
        self
    }

    pub fn dim(&self) -> usize {
        self.f.dim
    }

    /// The one-dimensional restriction `t ↦ f(tv)`.
    pub fn along(&self, v: &[f64]) -> CvxGerm {
        let v: Vec<f64> = {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / n).collect()
        };
        let (g1, g2) = (self.f.clone(), self.f.clone());
        let (v1, v2) = (v.clone(), v);
        let line = move |v: &[f64], t: f64| -> Vec<f64> { v.iter().map(|x| x * t).collect() };
        let f = GraphFn::custom(format!("{}|line", self.f.name), 1, self.f.radius, move |u| {
            g1.eval(&line(&v1, u[0]))
        });
        let f = if self.f.has_ln() {
            f.with_ln(move |u| g2.ln_eval(&line(&v2, u[0])))
        } else {
            f
        };
        CvxGerm {
            f,
            precision: self.precision,
            t_min: self.t_min,
            t_max: self.t_max,
        }
    }

    /// `ln f(tv)`, through the log hook when the germ has one.
    pub fn ln_at(&self, v: &[f64], t: f64) -> f64 {
        let u: Vec<f64> = v.iter().map(|x| x * t).collect();
        self.f.ln_eval(&u)
    }

    fn grid(&self) -> Vec<f64> {
        let decades = (self.t_max / self.t_min).log10();
        let n = (decades * PER_DECADE).round() as usize + 1;
        fit::geomspace(self.t_min, self.t_max, n.max(5))
    }

    /// `ln((f(tv) + f(−tv))/2)`.
    fn ln_sym(&self, v: &[f64], t: f64) -> Result<f64> {
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        if self.f.has_ln() {
            let y = log_add_exp(self.ln_at(v, t), self.ln_at(&neg, t)) - LN_2;
            if y.is_nan() || y == f64::INFINITY {
                return Err(Error::NonPositiveValue(t));
            }
            return Ok(y);
        }
        let up: Vec<f64> = v.iter().map(|x| x * t).collect();
        let un: Vec<f64> = neg.iter().map(|x| x * t).collect();
        let s = self.f.eval(&up) + self.f.eval(&un);
        if !(s > 0.0) {
            return Err(Error::NonPositiveValue(t));
        }
        Ok((0.5 * s).ln())
    }

    fn unit(&self, v: Option<&[f64]>) -> Vec<f64> {
        match v {
            Some(v) => {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n).collect()
            }
            None => {
                let mut e = vec![0.0; self.dim()];
                e[0] = 1.0;
                e
            }
        }
    }
}

fn cap(mut e: ExponentEstimate) -> ExponentEstimate {
    if !(e.value <= ALPHA_CAP) {
        e.value = f64::INFINITY;
        e.capped = true;
    }
    e
}

/// Log-log slope of the symmetrized germ along `v` (the first axis when
/// `v` is `None`).
pub fn alpha_estimate(g: &CvxGerm, v: Option<&[f64]>) -> Result<ExponentEstimate> {
    let v = g.unit(v);
    let ts = g.grid();
    let ys = ts.iter().map(|t| g.ln_sym(&v, *t)).collect::<Result<Vec<_>>>()?;
    let ls: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    Ok(cap(fit::estimate(&ls, &ys, 2.0 * LN_10, g.precision)))
}

/// `H(a, b) = 2ab/(a + b)`.
pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// `ln` of the positive root `u ∈ [lo, hi]` of `ln f(±u) = target(u)`, solved
/// in `ln u`.
fn branch_root(g: &CvxGerm, sign: f64, lo: f64, hi: f64, target: impl Fn(f64) -> f64) -> Option<f64> {
    let e = [sign];
    increasing_root(
        |lu| {
            let u = lu.exp();
            g.ln_at(&e, u) - target(u)
        },
        lo.ln(),
        hi.ln(),
        1e-14,
    )
}

/// Range of `ln s` covered by both inverse branches on the sampling window.
fn level_window(g: &CvxGerm) -> (f64, f64) {
    let lo = g.ln_at(&[1.0], g.t_min).max(g.ln_at(&[-1.0], g.t_min));
    let hi = g.ln_at(&[1.0], g.t_max).min(g.ln_at(&[-1.0], g.t_max));
    (lo, hi)
}

fn level_grid(g: &CvxGerm) -> Result<Vec<f64>> {
    let (lo, hi) = level_window(g);
    if !(hi > lo) {
        return Err(Error::NoRoot(hi.exp()));
    }
    // in ln s the grid is uniform; keep at least 20 samples
    let n = (((hi - lo) / LN_10) * PER_DECADE).round().max(20.0) as usize;
    Ok(fit::linspace(lo, hi, n.min(400)))
}

fn alpha_from_inverse_slope(mut e: ExponentEstimate) -> ExponentEstimate {
    let k = e.value;
    e.stderr /= k * k;
    let (u, l) = (1.0 / e.lower, 1.0 / e.upper);
    e.value = 1.0 / k;
    e.upper = if e.lower > 0.0 { u } else { f64::INFINITY };
    e.lower = l;
    cap(e)
}

/// α from the slope `1/α` of `log H(f⁺, f⁻)(s)` against `log s`, where `f±`
/// are the inverses of the two germ branches.
pub fn alpha_via_harmonic(g: &CvxGerm) -> Result<ExponentEstimate> {
    if g.dim() != 1 {
        return Err(Error::InvalidArgument("harmonic estimator needs a 1D germ".into()));
    }
    let ls = level_grid(g)?;
    let ys = ls
        .iter()
        .map(|l| {
            let (lo, hi) = (0.5 * g.t_min, (2.0 * g.t_max).min(g.f.radius));
            let p = branch_root(g, 1.0, lo, hi, |_| *l).ok_or(Error::NoRoot(l.exp()))?;
            let m = branch_root(g, -1.0, lo, hi, |_| *l).ok_or(Error::NoRoot(l.exp()))?;
            Ok(LN_2 - log_add_exp(-p, -m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(alpha_from_inverse_slope(fit::estimate(&ls, &ys, 2.0 * LN_10, g.precision)))
}

/// Roots of `f(u) = s − (s/a)u` and `f(−u) = s + (s/a)u`, as logarithms.
fn skewed_roots(g: &CvxGerm, a: f64, s: f64) -> Result<(f64, f64)> {
    let ls = s.ln();
    let hi = g.f.radius.min(0.5 * a);
    let p = branch_root(g, 1.0, 1e-3 * g.t_min, hi, |u| ls + (-u / a).ln_1p()).ok_or(Error::NoRoot(s))?;
    let m = branch_root(g, -1.0, 1e-3 * g.t_min, g.f.radius, |u| ls + (u / a).ln_1p()).ok_or(Error::NoRoot(s))?;
    Ok((p, m))
}

/// `(f_a⁺(s)/f⁺(s), f_a⁻(s)/f⁻(s))`, the skewed inverses relative to the
/// plain ones.
pub fn skewed_inverse_ratio(g: &CvxGerm, a: f64, s: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && s > 0.0) {
        return Err(Error::InvalidArgument("a and s must be positive".into()));
    }
    let (sp, sm) = skewed_roots(g, a, s)?;
    let ls = s.ln();
    let p = branch_root(g, 1.0, 1e-3 * g.t_min, g.f.radius, |_| ls).ok_or(Error::NoRoot(s))?;
    let m = branch_root(g, -1.0, 1e-3 * g.t_min, g.f.radius, |_| ls).ok_or(Error::NoRoot(s))?;
    Ok(((sp - p).exp(), (sm - m).exp()))
}

/// α from `log H(f_a⁺, f_a⁻)`.
pub fn alpha_via_skewed(g: &CvxGerm, a: f64) -> Result<ExponentEstimate> {
    if g.dim() != 1 {
        return Err(Error::InvalidArgument("skewed estimator needs a 1D germ".into()));
    }
    let ls = level_grid(g)?;
    let ys = ls
        .iter()
        .map(|l| {
            let (p, m) = skewed_roots(g, a, l.exp())?;
            Ok(LN_2 - log_add_exp(-p, -m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(alpha_from_inverse_slope(fit::estimate(&ls, &ys, 2.0 * LN_10, g.precision)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketVerdict {
    pub pass: bool,
    /// `(f(t)+f(−t))/2 ≤ t^{α−ε}` holds below some `t₀` over at least three
    /// decades of the grid.
    pub upper_ok: bool,
    pub lower_ok: bool,
    /// Largest grid point below which both bounds hold.
    pub t0: Option<f64>,
    /// Smallest grid point where a bound fails.
    pub failing_t: Option<f64>,
}

/// Largest grid point `t₀` such that `ok` holds at every grid point `≤ t₀`.
fn holds_below(ts: &[f64], ok: &[bool]) -> Option<f64> {
    let k = ok.iter().take_while(|b| **b).count();
    (k > 0).then(|| ts[k - 1])
}

/// Checks `t^{α+ε} ≤ (f(t)+f(−t))/2 ≤ t^{α−ε}` on the sampling grid.
pub fn calpha_bracket(g: &CvxGerm, alpha: f64, eps: f64) -> BracketVerdict {
    let v = g.unit(None);
    let ts = g.grid();
    let mut up = Vec::with_capacity(ts.len());
    let mut lo = Vec::with_capacity(ts.len());
    for t in &ts {
        let y = g.ln_sym(&v, *t).unwrap_or(f64::NEG_INFINITY);
        let l = t.ln();
        up.push(y <= (alpha - eps) * l);
        lo.push(y >= (alpha + eps) * l);
    }
    let span_ok = |t0: Option<f64>| t0.map_or(false, |t| t / ts[0] >= 1e3 * (1.0 - 1e-9));
    let tu = holds_below(&ts, &up);
    let tl = holds_below(&ts, &lo);
    let both: Vec<bool> = up.iter().zip(&lo).map(|(a, b)| *a && *b).collect();
    let t0 = holds_below(&ts, &both);
    let failing_t = ts.iter().zip(&both).find(|(_, b)| !**b).map(|(t, _)| *t);
    let (upper_ok, lower_ok) = (span_ok(tu), span_ok(tl));
    BracketVerdict {
        pass: upper_ok && lower_ok && span_ok(t0),
        upper_ok,
        lower_ok,
        t0,
        failing_t: if upper_ok && lower_ok && span_ok(t0) { None } else { failing_t },
    }
}

fn eta_of(e: &ExponentEstimate) -> (f64, f64) {
    if e.capped {
        (-1.0, 0.0)
    } else {
        (2.0 / e.value - 1.0, 2.0 * e.stderr / (e.value * e.value))
    }
}

/// Directional exponents on the coordinate axes clustered into a filtration,
/// with `combos` random mixed directions checked against the dominance rule
/// (the smallest α among active components wins).
pub fn boundary_filtration(g: &CvxGerm, combos: usize, seed: u64) -> Result<Filtration> {
    let n = g.dim();
    if n < 2 {
        return Err(Error::InvalidArgument("filtration needs dimension ≥ 2".into()));
    }
    let probes: Vec<Point> = (0..n)
        .map(|i| {
            let mut e = Point::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    let est = probes
        .par_iter()
        .map(|v| alpha_estimate(g, Some(v.as_slice())).map(|e| eta_of(&e)))
        .collect::<Result<Vec<_>>>()?;
    let mut filt = build_filtration(&probes, &est, 0.1)?;
    let ordered: Vec<Point> = filt.levels.iter().flat_map(|l| l.basis.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..combos {
        let c: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.2..1.0) * if rng.gen() { 1.0 } else { -1.0 })
            .collect();
        let dir = ordered.iter().zip(&c).fold(Point::zeros(n), |acc, (b, k)| acc + b * *k);
        let e = alpha_estimate(g, Some(dir.as_slice()))?;
        filt.checks.push(crate::transport::CombinationCheck {
            predicted: filt.predicted_eta(&c),
            measured: eta_of(&e).0,
            direction: dir,
        });
    }
    Ok(filt)
}

/// Slopes of the sublevel volume `∫_{f≤t} du` and of the weighted integral
/// `∫_{f≤t} |u| du` against `log t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeExponent {
    pub volume: ExponentEstimate,
    pub literal: ExponentEstimate,
}

const QUAD_BUDGET: usize = 10_000_000;

struct Quad<'a> {
    g: &'a CvxGerm,
    evals: Cell<usize>,
}

impl Quad<'_> {
    /// Radius where the ray in direction `d` meets the level set `f = t`.
    fn radial(&self, d: &[f64], lt: f64) -> Result<f64> {
        let evals = &self.evals;
        let g = self.g;
        let r = increasing_root(
            |lr| {
                evals.set(evals.get() + 1);
                g.ln_at(d, lr.exp()) - lt
            },
            (1e-12 * g.t_min).ln(),
            g.f.radius.ln(),
            1e-12,
        )
        .ok_or(Error::NoRoot(lt.exp()))?;
        if self.evals.get() > QUAD_BUDGET {
            return Err(Error::QuadratureBudgetExceeded(self.evals.get()));
        }
        Ok(r.exp())
    }

    fn simpson<F: Fn(f64) -> Result<[f64; 2]>>(&self, h: &F, a: f64, b: f64, tol: f64) -> Result<[f64; 2]> {
        // start from a uniform split so narrow features are seen
        let k = 16;
        let mut out = [0.0; 2];
        let step = (b - a) / k as f64;
        for i in 0..k {
            let (x0, x1) = (a + step * i as f64, a + step * (i + 1) as f64);
            let (f0, f1, f2) = (h(x0)?, h(0.5 * (x0 + x1))?, h(x1)?);
            let s = simpson_rule(x0, x1, &f0, &f1, &f2);
            let r = self.adapt(h, x0, x1, f0, f1, f2, s, tol / k as f64, 40)?;
            out[0] += r[0];
            out[1] += r[1];
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn adapt<F: Fn(f64) -> Result<[f64; 2]>>(
        &self,
        h: &F,
        a: f64,
        b: f64,
        fa: [f64; 2],
        fm: [f64; 2],
        fb: [f64; 2],
        whole: [f64; 2],
        tol: f64,
        depth: usize,
    ) -> Result<[f64; 2]> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (h(lm)?, h(rm)?);
        let left = simpson_rule(a, m, &fa, &flm, &fm);
        let right = simpson_rule(m, b, &fm, &frm, &fb);
        let err = (0..2)
            .map(|i| ((left[i] + right[i] - whole[i]) / whole[i].abs().max(1e-300)).abs())
            .fold(0.0, f64::max);
        if depth == 0 || err <= 15.0 * tol {
            return Ok([
                left[0] + right[0] + (left[0] + right[0] - whole[0]) / 15.0,
                left[1] + right[1] + (left[1] + right[1] - whole[1]) / 15.0,
            ]);
        }
        let l = self.adapt(h, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = self.adapt(h, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok([l[0] + r[0], l[1] + r[1]])
    }
}

fn simpson_rule(a: f64, b: f64, fa: &[f64; 2], fm: &[f64; 2], fb: &[f64; 2]) -> [f64; 2] {
    let w = (b - a) / 6.0;
    [w * (fa[0] + 4.0 * fm[0] + fb[0]), w * (fa[1] + 4.0 * fm[1] + fb[1])]
}

/// `(∫_{f≤t} du, ∫_{f≤t} |u| du)` in polar coordinates.
fn sublevel_integrals(g: &CvxGerm, lt: f64) -> Result<[f64; 2]> {
    let q = Quad { g, evals: Cell::new(0) };
    match g.dim() {
        1 => {
            let p = q.radial(&[1.0], lt)?;
            let m = q.radial(&[-1.0], lt)?;
            Ok([p + m, 0.5 * (p * p + m * m)])
        }
        2 => {
            let h = |th: f64| -> Result<[f64; 2]> {
                let r = q.radial(&[th.cos(), th.sin()], lt)?;
                Ok([r * r / 2.0, r * r * r / 3.0])
            };
            q.simpson(&h, 0.0, 2.0 * PI, 1e-7)
        }
        3 => {
            let outer = |th: f64| -> Result<[f64; 2]> {
                let inner = |ph: f64| -> Result<[f64; 2]> {
                    let d = [ph.sin() * th.cos(), ph.sin() * th.sin(), ph.cos()];
                    let r = q.radial(&d, lt)?;
                    Ok([ph.sin() * r.powi(3) / 3.0, ph.sin() * r.powi(4) / 4.0])
                };
                q.simpson(&inner, 0.0, PI, 1e-6)
            };
            q.simpson(&outer, 0.0, 2.0 * PI, 1e-6)
        }
        _ => Err(Error::InvalidArgument("volume exponent needs dimension ≤ 3".into())),
    }
}

/// Sublevel-volume and weighted-integral exponents on a geometric grid of
/// levels `t`.
pub fn lyapunov_volume_exponent(g: &CvxGerm) -> Result<VolumeExponent> {
    // levels reached inside the domain along every axis
    let n = g.dim();
    let mut top = f64::INFINITY;
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = s;
            top = top.min(g.ln_at(&e, 0.5 * g.f.radius));
        }
    }
    let hi = top.min(0.01f64.ln());
    let lo = hi - 6.0 * LN_10;
    let lts = fit::linspace(lo, hi, 25);
    let vals = lts
        .par_iter()
        .map(|lt| sublevel_integrals(g, *lt))
        .collect::<Result<Vec<_>>>()?;
    let v: Vec<f64> = vals.iter().map(|x| x[0].ln()).collect();
    let w: Vec<f64> = vals.iter().map(|x| x[1].ln()).collect();
    Ok(VolumeExponent {
        volume: fit::estimate(&lts, &v, 2.0 * LN_10, g.precision),
        literal: fit::estimate(&lts, &w, 2.0 * LN_10, g.precision),
    })
}

/// The boundary of a body near `x` as a graph over the tangent space, solved
/// numerically from the level function. The tangent frame is the orthonormal
/// complement of the inward normal.
pub fn numeric_germ(body: &ConvexBody, x: &Point, precision: Precision) -> Result<CvxGerm> {
    if !body.is_c1_at(x) {
        return Err(Error::NotC1);
    }
    let nu = -body.normal(x);
    let frame = tangent_frame(&nu);
    let n = body.dim();
    let mut depth = 0.1 * body.radius();
    while body.shape().level_at_offset(x.as_slice(), (&nu * depth).as_slice()) >= 0.0 {
        depth *= 0.5;
        if depth < 1e-9 {
            return Err(Error::ExteriorPoint);
        }
    }
    let (b, x0, nu0) = (body.clone(), x.clone(), nu.clone());
    let f = GraphFn::custom(format!("{}@boundary", body.id), n - 1, 0.25 * depth, move |u| {
        let mut w = &nu0 * depth;
        for (f, ui) in frame.iter().zip(u) {
            w += f * *ui;
        }
        match b.exit_offset(&x0, &w, &(-&nu0)) {
            Ok(l) => (depth - l).max(0.0),
            Err(_) => f64::NAN,
        }
    });
    Ok(CvxGerm {
        t_max: 0.1f64.min(0.25 * depth),
        t_min: 1e-4f64.max(precision.germ_floor()),
        f,
        precision,
    })
}

fn tangent_frame(nu: &Point) -> Vec<Point> {
    let n = nu.len();
    let mut frame: Vec<Point> = Vec::new();
    for k in 0..n {
        let mut e = Point::zeros(n);
        e[k] = 1.0;
        let mut r = &e - nu * nu.dot(&e);
        for f in &frame {
            r -= f * f.dot(&r);
        }
        if r.norm() > 1e-6 && frame.len() < n - 1 {
            frame.push(r.normalize());
        }
    }
    frame
}

/// The germ at `x` together with its tangent basis (as columns): the marked
/// graph when `x` is the marked point, otherwise [`numeric_germ`].
pub fn boundary_germ(body: &ConvexBody, x: &Point, precision: Precision) -> Result<(CvxGerm, DMatrix<f64>)> {
    if let Some(m) = &body.marked {
        if (&m.point - x).norm() < 1e-12 * (1.0 + x.norm()) {
            return Ok((CvxGerm::new(m.f.clone(), precision)?, m.tangents.clone()));
        }
    }
    let g = numeric_germ(body, x, precision)?;
    let frame = tangent_frame(&-body.normal(x));
    Ok((g, DMatrix::from_columns(&frame)))
}
