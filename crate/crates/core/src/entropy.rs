//! Busemann volume, ball growth and the volume entropy.

use crate::body::ConvexBody;
use crate::error::{Error, Result};
use crate::fit::{self, neumaier_sum, ExponentEstimate};
use crate::flow::flow;
use crate::metric::HPoint;
use crate::projective::Point;
use crate::regularity::{alpha_estimate, numeric_germ};
use crate::Precision;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// `m(x, d) = 2ab/(a + b)` for the exits `a`, `b` along `±d`: the Euclidean
/// length of the Finsler unit vector in direction `d`.
fn m_along(body: &ConvexBody, anchor: &Point, off: &Point, d: &Point) -> Result<f64> {
    let a = body.exit_offset(anchor, off, d)?;
    let b = body.exit_offset(anchor, off, &(-d))?;
    Ok(2.0 * a * b / (a + b))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Directions on the unit circle, or a Gauss–Legendre × uniform grid on the
/// sphere, with weights summing to the sphere's measure.
fn sphere_grid(n: usize, k: usize) -> Vec<(Point, f64)> {
    match n {
        2 => (0..k)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.5) / k as f64;
                (Point::from_vec(vec![t.cos(), t.sin()]), 2.0 * PI / k as f64)
            })
            .collect(),
        _ => {
            let (zs, ws) = gauss_legendre(k);
            let nt = 2 * k;
            let mut out = Vec::with_capacity(k * nt);
            for (z, wz) in zs.iter().zip(&ws) {
                let s = (1.0 - z * z).sqrt();
                for j in 0..nt {
                    let t = 2.0 * PI * (j as f64 + 0.5) / nt as f64;
                    out.push((Point::from_vec(vec![s * t.cos(), s * t.sin(), *z]), wz * 2.0 * PI / nt as f64));
                }
            }
            out
        }
    }
}

/// Euclidean volume of the star-shaped body with radial function `radius`
/// on the unit sphere of Rⁿ (n = 2, 3).
///
/// Near the boundary Finsler unit balls are very eccentric, so the angular
/// quadrature runs in a frame that makes the body roughly round; the frame
/// comes from the second moments of a coarse pass.
pub(crate) fn star_volume(n: usize, fine: usize, radius: impl Fn(&Point) -> Result<f64>) -> Result<f64> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidArgument("unit ball volume needs dimension 2 or 3".into()));
    }
    let mut a = DMatrix::<f64>::identity(n, n);
    let coarse = if n == 2 { 32 } else { 6 };
    for _ in 0..12 {
        let ainv = a.clone().try_inverse().ok_or(Error::DegenerateConfiguration("frame"))?;
        let dirs = sphere_grid(n, coarse);
        let mut mom = DMatrix::<f64>::zeros(n, n);
        let total: f64 = dirs.iter().map(|d| d.1).sum();
        for (e, wt) in &dirs {
            let d = (&ainv * e).normalize();
            let q = &a * &d * radius(&d)?;
            mom += &q * q.transpose() * *wt;
        }
        mom *= n as f64 / total;
        let eig = SymmetricEigen::new(mom);
        let (lo, hi) = eig.eigenvalues.iter().fold((f64::MAX, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        if hi < 1.0 + 1e-3 && lo > 1.0 - 1e-3 {
            break;
        }
        let isqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
        a = &eig.eigenvectors * isqrt * eig.eigenvectors.transpose() * &a;
    }
    let ainv = a.clone().try_inverse().ok_or(Error::DegenerateConfiguration("frame"))?;
    let dirs = sphere_grid(n, fine);
    let rs = dirs
        .iter()
        .map(|(e, wt)| {
            let u = &ainv * e;
            let un = u.norm();
            Ok((radius(&(u / un))? / un).powi(n as i32) * wt)
        })
        .collect::<Result<Vec<_>>>()?;
    let v = neumaier_sum(rs) / n as f64;
    Ok(v / a.determinant().abs())
}

/// Euclidean volume of the Finsler unit ball at `anchor + off`.
fn unit_ball_volume(body: &ConvexBody, anchor: &Point, off: &Point, fine: usize) -> Result<f64> {
    star_volume(off.len(), fine, |d| m_along(body, anchor, off, d))
}

fn unit_ball_euclid(n: usize) -> f64 {
    if n == 2 {
        PI
    } else {
        4.0 * PI / 3.0
    }
}

/// Busemann density at an interior point: the Euclidean unit-ball volume
/// over the Finsler unit-ball volume.
pub fn busemann_density(body: &ConvexBody, x: &Point) -> Result<f64> {
    if !body.contains(x) {
        return Err(Error::ExteriorPoint);
    }
    let fine = if body.dim() == 2 { 1024 } else { 32 };
    density_at(body, &Point::zeros(x.len()), x, fine)
}

fn density_at(body: &ConvexBody, anchor: &Point, off: &Point, fine: usize) -> Result<f64> {
    Ok(unit_ball_euclid(off.len()) / unit_ball_volume(body, anchor, off, fine)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeEntropy {
    /// Growth rate `h` from `log vol = hR + k log R + c`.
    pub estimate: ExponentEstimate,
    /// Coefficient `k` of `log R`.
    pub log_coefficient: f64,
    /// Plain slope of `log vol` against `R`.
    pub pure_slope: f64,
    /// `(R, log vol(B(o, R)))`.
    pub log_volumes: Vec<(f64, f64)>,
    /// `(log S(R+0.2) − log S(R−0.2))/0.4` at `R = 8`, with `S` the sphere
    /// volume.
    pub sphere_rate: f64,
    /// `S(8)/vol(B(o, 8))`.
    pub sphere_ratio: f64,
    /// `h ≤ n − 1 + 2·stderr`; reported, never enforced.
    pub below_n_minus_one: bool,
}

/// Settings of the ball-volume quadrature.
#[derive(Debug, Clone, Copy)]
pub struct VolumeGrid {
    pub angles: usize,
    /// Radial step; ball radii are rounded to multiples of twice this.
    pub step: f64,
    pub density_angles: usize,
    /// Step in the logistic angle variable between corners.
    pub log_step: f64,
    pub budget: usize,
}

impl Default for VolumeGrid {
    fn default() -> Self {
        VolumeGrid {
            angles: 256,
            step: 0.1,
            density_angles: 128,
            log_step: 0.25,
            budget: 500_000_000,
        }
    }
}

/// `ρ · m · σ` at Hilbert distance `r` from `o` along `d`: the radial
/// integrand of the ball volume in polar coordinates.
fn radial_integrand(body: &ConvexBody, w: &HPoint, o: &Point, r: f64, fine: usize) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let wt = flow(w, r, Precision::Double)?;
    let (anchor, off) = wt.anchored();
    let rho = ((anchor - o) + &off).norm();
    Ok(rho * wt.m_value() * density_at(body, anchor, &off, fine)?)
}

/// Volume growth of Hilbert balls about `o` in a planar body.
pub fn volume_entropy(body: &ConvexBody, o: &Point, radii: &[f64], grid: VolumeGrid) -> Result<VolumeEntropy> {
    if body.dim() != 2 {
        return Err(Error::InvalidArgument("volume entropy is computed for planar bodies".into()));
    }
    if !body.contains(o) || radii.len() < 3 {
        return Err(Error::InvalidArgument("need an interior centre and at least 3 radii".into()));
    }
    let h = grid.step;
    let r_max = radii.iter().cloned().fold(0.0, f64::max).max(8.2);
    let pairs = (r_max / (2.0 * h)).ceil() as usize;
    let nodes = 2 * pairs + 1;
    let corners = body.corners();
    let span = 2.0 * r_max + 10.0;
    let k = (span / grid.log_step).ceil() as i64;
    let columns = if corners.is_empty() {
        grid.angles
    } else {
        corners.len() * (2 * k as usize + 1)
    };
    let cost = columns * nodes * (grid.density_angles + 3 * 32) * 2;
    if cost > grid.budget {
        return Err(Error::QuadratureBudgetExceeded(cost));
    }
    let column = |t: f64| -> Result<Vec<f64>> {
        let d = Point::from_vec(vec![t.cos(), t.sin()]);
        let w = HPoint::new(body, o, &d)?;
        (0..nodes)
            .map(|i| radial_integrand(body, &w, o, i as f64 * h, grid.density_angles))
            .collect()
    };
    let shell = if corners.is_empty() {
        let dtheta = 2.0 * PI / grid.angles as f64;
        let cols = (0..grid.angles)
            .into_par_iter()
            .map(|j| column(dtheta * j as f64))
            .collect::<Result<Vec<_>>>()?;
        (0..nodes)
            .map(|i| neumaier_sum(cols.iter().map(|c| c[i])) * dtheta)
            .collect::<Vec<f64>>()
    } else {
        // Between consecutive corner directions the angle is θ = θa + Λs with
        // s logistic in v, so nodes are log-uniform in the distance to either
        // corner, where the profile has peaks of width e^{−2R}.
        let mut th: Vec<f64> = corners.iter().map(|c| (c[1] - o[1]).atan2(c[0] - o[0])).collect();
        th.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut nodes_w = Vec::new();
        for (j, a) in th.iter().enumerate() {
            let b = if j + 1 < th.len() { th[j + 1] } else { th[0] + 2.0 * PI };
            let lam = b - a;
            for i in -k..=k {
                let v = i as f64 * grid.log_step;
                let s = 1.0 / (1.0 + (-v).exp());
                nodes_w.push((a + lam * s, grid.log_step * lam * s * (1.0 - s)));
            }
        }
        let cols = nodes_w
            .par_iter()
            .map(|(t, w)| Ok(column(*t)?.into_iter().map(|c| c * w).collect::<Vec<f64>>()))
            .collect::<Result<Vec<_>>>()?;
        (0..nodes).map(|i| neumaier_sum(cols.iter().map(|c| c[i]))).collect()
    };
    let mut cum = vec![0.0; pairs + 1];
    for k in 0..pairs {
        let (a, b, c) = (shell[2 * k], shell[2 * k + 1], shell[2 * k + 2]);
        cum[k + 1] = cum[k] + h / 3.0 * (a + 4.0 * b + c);
    }
    let vol_at = |r: f64| cum[((r / (2.0 * h)).round() as usize).min(pairs)];
    let log_volumes: Vec<(f64, f64)> = radii.iter().map(|r| (*r, vol_at(*r).ln())).collect();
    let rs: Vec<f64> = log_volumes.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = log_volumes.iter().map(|p| p.1).collect();
    let (beta, se) = fit::multi_fit(&[rs.clone(), rs.iter().map(|r| r.ln()).collect(), vec![1.0; rs.len()]], &ys);
    let mut estimate = fit::estimate(&rs, &ys, 3.0, Precision::Double);
    let pure_slope = estimate.value;
    estimate.value = beta[0];
    estimate.stderr = se[0];
    let node = |r: f64| ((r / h).round() as usize).min(nodes - 1);
    let s = |r: f64| shell[node(r)];
    let n1 = (body.dim() - 1) as f64;
    Ok(VolumeEntropy {
        below_n_minus_one: beta[0] <= n1 + 2.0 * se[0],
        estimate,
        log_coefficient: beta[1],
        pure_slope,
        log_volumes,
        sphere_rate: (s(8.2).ln() - s(7.8).ln()) / 0.4,
        sphere_ratio: s(8.0) / vol_at(8.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyBound {
    /// Sample mean of `2/α̲` over arclength-uniform boundary points.
    pub mean: f64,
    /// Two standard errors.
    pub half_width: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `∫ 2/α̲ dL` over the boundary of a planar body,
/// with `L` the normalized arclength measure.
pub fn entropy_lower_bound(body: &ConvexBody, samples: usize, seed: u64) -> Result<EntropyBound> {
    if body.dim() != 2 {
        return Err(Error::InvalidArgument("the boundary bound is computed for planar bodies".into()));
    }
    if !body.strictly_convex {
        return Err(Error::NotStrictlyConvex);
    }
    if !body.c1 {
        return Err(Error::NotC1);
    }
    let c = body.interior_point();
    let k = 4096;
    let poly = (0..k)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / k as f64;
            let d = Point::from_vec(vec![t.cos(), t.sin()]);
            Ok(&c + &d * body.exit_from(&c, &d)?)
        })
        .collect::<Result<Vec<Point>>>()?;
    let mut arc = vec![0.0; k + 1];
    for i in 0..k {
        arc[i + 1] = arc[i] + (&poly[(i + 1) % k] - &poly[i]).norm();
    }
    let total = arc[k];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us: Vec<f64> = (0..samples).map(|_| rng.gen::<f64>() * total).collect();
    let vals = us
        .par_iter()
        .map(|u| {
            let i = arc.partition_point(|a| a <= u).clamp(1, k) - 1;
            let s = (u - arc[i]) / (arc[i + 1] - arc[i]);
            let q = &poly[i] * (1.0 - s) + &poly[(i + 1) % k] * s;
            let d = &q - &c;
            let x = &c + &d.normalize() * body.exit_from(&c, &d)?;
            let g = numeric_germ(body, &x, Precision::Double)?;
            let a = alpha_estimate(&g, None)?;
            let lower = if a.capped { f64::INFINITY } else { a.lower };
            Ok(2.0 / lower)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = vals.len() as f64;
    let mean = neumaier_sum(vals.iter().copied()) / n;
    let var = neumaier_sum(vals.iter().map(|v| (v - mean).powi(2))) / (n - 1.0).max(1.0);
    Ok(EntropyBound {
        mean,
        half_width: 2.0 * (var / n).sqrt(),
        samples: vals.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{make_ellipsoid, make_pball};

    fn p(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    #[test]
    fn disc_centre_density_is_one() {
        let d = make_ellipsoid(&[1.0, 1.0]).unwrap();
        assert!((busemann_density(&d, &p(&[0.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        let b = make_ellipsoid(&[1.0, 1.0, 1.0]).unwrap();
        assert!((busemann_density(&b, &p(&[0.0, 0.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disc_density_matches_klein_area_form() {
        // hyperbolic area density (1 − r²)^{−3/2} in the Klein model
        let d = make_ellipsoid(&[1.0, 1.0]).unwrap();
        for r in [0.3, 0.9, 0.999, 1.0 - 1e-8] {
            let got = busemann_density(&d, &p(&[r, 0.0])).unwrap();
            let want = (1.0 - r * r).powf(-1.5);
            assert!((got / want - 1.0).abs() < 1e-6, "{r}: {got} {want}");
        }
    }

    #[test]
    fn ellipse_centre_density() {
        // the unit ball at the centre is the ellipse itself
        let e = make_ellipsoid(&[2.0, 0.5]).unwrap();
        assert!((busemann_density(&e, &p(&[0.0, 0.0])).unwrap() - 1.0).abs() < 1e-10);
        let e = make_ellipsoid(&[3.0, 1.0]).unwrap();
        assert!((busemann_density(&e, &p(&[0.0, 0.0])).unwrap() - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn density_grows_toward_the_boundary() {
        let b = make_pball(4.0, 2).unwrap();
        let mut last = 0.0;
        for r in [0.0, 0.5, 0.9, 0.99, 0.999] {
            let s = busemann_density(&b, &p(&[r * 0.84, r * 0.84])).unwrap();
            assert!(s > last);
            last = s;
        }
    }
}
