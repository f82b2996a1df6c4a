//! Legendre transforms of one-dimensional germs and graphs of dual bodies.

use crate::body::{ConvexBody, GraphFn};
use crate::error::{Error, Result};
use crate::fit::increasing_root;
use crate::projective::Point;
use crate::regularity::{alpha_estimate, numeric_germ, CvxGerm};

/// Stationary point `x` with `f′(x) = s`.
fn stationary(f: &GraphFn, s: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    let r = f.radius;
    let (lo, hi) = (f.deriv(-r), f.deriv(r));
    if !(s > lo && s < hi) {
        return Err(Error::SlopeOutOfRange(s));
    }
    let (a, b) = if s > 0.0 { (0.0, r) } else { (-r, 0.0) };
    // plain bisection: f′ may underflow to 0 over long stretches, which
    // stalls secant steps
    let (mut a, mut b) = (a, b);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f.deriv(m) < s {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// `f*(s) = sup_x (sx − f(x))`, attained where `f′(x) = s`.
pub fn legendre(g: &CvxGerm, s: f64) -> Result<f64> {
    if g.dim() != 1 {
        return Err(Error::InvalidArgument("Legendre transform of a 1D germ".into()));
    }
    let x = stationary(&g.f, s)?;
    Ok(s * x - g.f.eval(&[x]))
}

/// The germ `f*`, with derivative given by the stationary point so that
/// applying the transform twice returns `f`.
pub fn legendre_germ(g: &CvxGerm) -> Result<CvxGerm> {
    if g.dim() != 1 {
        return Err(Error::InvalidArgument("Legendre transform of a 1D germ".into()));
    }
    let r = g.f.radius;
    let reach = g.f.deriv(r).min(-g.f.deriv(-r));
    if !(reach > 0.0) {
        return Err(Error::SlopeOutOfRange(0.0));
    }
    let radius = 0.999 * reach;
    let (f1, f2) = (g.f.clone(), g.f.clone());
    let f = GraphFn::custom(format!("legendre({})", g.f.name), 1, radius, move |s| {
        match stationary(&f1, s[0]) {
            Ok(x) => s[0] * x - f1.eval(&[x]),
            Err(_) => f64::NAN,
        }
    })
    .with_derivative(move |s| stationary(&f2, s).unwrap_or(f64::NAN));
    Ok(CvxGerm {
        f,
        precision: g.precision,
        t_min: g.precision.germ_floor(),
        t_max: 0.1f64.min(0.5 * radius),
    })
}

/// `(α, α*, |1/α + 1/α* − 1|)`.
pub fn dual_alpha_check(g: &CvxGerm) -> Result<(f64, f64, f64)> {
    let a = alpha_estimate(g, None)?.value;
    let b = alpha_estimate(&legendre_germ(g)?, None)?.value;
    let inv = |v: f64| if v.is_infinite() { 0.0 } else { 1.0 / v };
    Ok((a, b, (inv(a) + inv(b) - 1.0).abs()))
}

/// Local graph of the polar body at the dual point of `x`.
#[derive(Debug, Clone)]
pub struct DualGraph {
    /// Centre of polarity: the point of the normal line at `x` nearest the
    /// body's interior point.
    pub centre: Point,
    /// Support distance of the tangent line at `x` from the centre.
    pub support: f64,
    /// Dual point `x* = ν/h` relative to the centre (`ν` the outward normal).
    pub point: Point,
    pub germ: CvxGerm,
}

/// Polar of a planar body about a centre on the normal line at `x`: with
/// `λ = f′(u)`, the dual boundary is `x* + aτ − G(a)ν` where
/// `a = λ/(h + f*(λ))` and `G = f*(λ)/(h(h + f*(λ)))`.
pub fn dual_body_graph(body: &ConvexBody, x: &Point) -> Result<DualGraph> {
    if body.dim() != 2 {
        return Err(Error::InvalidArgument("dual graphs are computed for planar bodies".into()));
    }
    if !body.c1 && !body.is_c1_at(x) {
        return Err(Error::NotC1);
    }
    let (f, nu_out) = match &body.marked {
        Some(m) if (&m.point - x).norm() < 1e-12 => (m.f.clone(), -&m.normal),
        _ => (numeric_germ(body, x, crate::Precision::Double)?.f, body.normal(x)),
    };
    let c = body.interior_point();
    let h = (x - &c).dot(&nu_out);
    let centre = x - &nu_out * h;
    if !(h > 0.0) || !body.contains(&centre) {
        return Err(Error::ExteriorPoint);
    }
    let germ = CvxGerm {
        f: f.clone(),
        precision: crate::Precision::Double,
        t_min: 1e-6,
        t_max: 0.1,
    };
    let star = legendre_germ(&germ)?;
    let lam_max = star.f.radius;
    let a_of = {
        let s = star.f.clone();
        move |l: f64| l / (h + s.eval(&[l]))
    };
    let a_max = a_of(lam_max).min(-a_of(-lam_max));
    let (s1, s2, f1) = (star.f.clone(), star.f.clone(), f);
    let solve = move |a: f64| -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        increasing_root(|l| l / (h + s1.eval(&[l])) - a, -lam_max, lam_max, 1e-15 * lam_max).unwrap_or(f64::NAN)
    };
    let solve2 = solve.clone();
    let g = GraphFn::custom(format!("dual({})", body.id), 1, 0.999 * a_max, move |a| {
        let l = solve(a[0]);
        let fs = s2.eval(&[l]);
        fs / (h * (h + fs))
    })
    .with_derivative(move |a| {
        let l = solve2(a);
        let x = stationary(&f1, l).unwrap_or(f64::NAN);
        x / (h - f1.eval(&[x]))
    });
    Ok(DualGraph {
        point: &nu_out / h,
        support: h,
        centre,
        germ: CvxGerm {
            f: g,
            precision: crate::Precision::Double,
            t_min: 1e-6,
            t_max: 0.1f64.min(0.5 * a_max),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Precision;

    #[test]
    fn half_square_is_self_dual() {
        let g = CvxGerm::new(GraphFn::power(2.0, 1, 0.5), Precision::Double).unwrap();
        for s in [-0.7, -0.1, 1e-3, 0.2, 0.9] {
            assert!((legendre(&g, s).unwrap() - 0.5 * s * s).abs() < 1e-9);
        }
    }

    #[test]
    fn slope_out_of_range() {
        let g = CvxGerm::new(GraphFn::power(2.0, 1, 0.5), Precision::Double).unwrap();
        assert!(matches!(legendre(&g, 5.0), Err(Error::SlopeOutOfRange(_))));
    }
}
