//! Projective isometries: classification by eigenvalue moduli and the
//! Lyapunov exponents of periodic orbits.

use crate::body::{make_arc_body, ConvexBody};
use crate::error::{Error, Result};
use crate::projective::{Point, ProjectiveMap};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Hyperbolic,
    Parabolic,
    Elliptic,
    /// Neither extreme modulus is simple, or only one of them is.
    Irregular,
}

/// A projective transformation normalized to `|det| = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjIsometry {
    pub matrix: DMatrix<f64>,
    /// Distinct eigenvalue moduli in decreasing order.
    pub moduli: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub kind: Kind,
}

impl ProjIsometry {
    /// Dimension of the projective space acted on.
    pub fn dim(&self) -> usize {
        self.matrix.nrows() - 1
    }

    /// Log-moduli `ℓ₀ > … > ℓ_{p+1}`.
    pub fn log_moduli(&self) -> Vec<f64> {
        self.moduli.iter().map(|m| m.ln()).collect()
    }
}

fn normalize(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !g.is_square() || g.nrows() < 2 {
        return Err(Error::InvalidArgument("isometry matrix must be square".into()));
    }
    let det = g.determinant();
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return Err(Error::DegenerateConfiguration("singular matrix"));
    }
    let k = g.nrows() as f64;
    Ok(g * det.abs().powf(-1.0 / k))
}

fn grouped_moduli(m: &DMatrix<f64>) -> (Vec<f64>, Vec<usize>) {
    let mut mods: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mods.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut vals: Vec<f64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<f64>> = Vec::new();
    for v in mods {
        match vals.last() {
            Some(&last) if (last - v).abs() <= 1e-9 * last => {
                members.last_mut().unwrap().push(v);
                *mult.last_mut().unwrap() += 1;
            }
            _ => {
                vals.push(v);
                mult.push(1);
                members.push(vec![v]);
            }
        }
    }
    // geometric mean within each group
    let vals = members
        .iter()
        .map(|g| (g.iter().map(|v| v.ln()).sum::<f64>() / g.len() as f64).exp())
        .collect();
    (vals, mult)
}

/// Normalizes `g`, computes its eigenvalue moduli and type, and checks
/// `g(Ω) = Ω` on sampled boundary points when a body is given.
pub fn classify(g: &DMatrix<f64>, body: Option<&ConvexBody>) -> Result<ProjIsometry> {
    let m = normalize(g)?;
    let (moduli, multiplicities) = grouped_moduli(&m);
    let p = moduli.len();
    let kind = if p >= 2
        && multiplicities[0] == 1
        && multiplicities[p - 1] == 1
        && moduli[0] / moduli[p - 1] > 1.0 + 1e-8
    {
        Kind::Hyperbolic
    } else if p == 1 {
        let mut pow = m.clone();
        for _ in 0..8 {
            pow = &pow * &pow;
        }
        if pow.norm() > 10.0 * m.norm() * (m.nrows() as f64) {
            Kind::Parabolic
        } else {
            Kind::Elliptic
        }
    } else {
        Kind::Irregular
    };
    if let Some(b) = body {
        let d = invariance_defect(&m, b)?;
        if d > 1e-8 {
            return Err(Error::NotInvariant(d));
        }
    }
    Ok(ProjIsometry {
        matrix: m,
        moduli,
        multiplicities,
        kind,
    })
}

/// Largest relative distance from `g·x` to the boundary over sampled
/// boundary points `x`.
pub fn invariance_defect(g: &DMatrix<f64>, body: &ConvexBody) -> Result<f64> {
    let map = ProjectiveMap::new(g.clone())?;
    let n = body.dim();
    if map.dim() != n {
        return Err(Error::InvalidArgument("matrix size does not match the body".into()));
    }
    let c = body.interior_point();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..256 {
        let d = loop {
            let d = Point::from_fn(n, |_, _| rand::Rng::gen::<f64>(&mut rng) * 2.0 - 1.0);
            if d.norm() > 1e-3 && d.norm() <= 1.0 {
                break d.normalize();
            }
        };
        let x = &c + &d * body.exit_from(&c, &d)?;
        let y = match map.apply(&x) {
            Some(y) => y,
            None => return Ok(f64::INFINITY),
        };
        let r = &y - &c;
        let scale = r.norm();
        let defect = match body.exit_from(&c, &r) {
            Ok(l) => (l - scale).abs() / scale.max(1e-300),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(defect);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicExponents {
    /// `η_i = −1 + 2(ℓ₀ − ℓ_i)/(ℓ₀ − ℓ_{p+1})` for the intermediate moduli.
    pub eta: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// `α_i = (ℓ₀ − ℓ_{p+1})/(ℓ₀ − ℓ_i)`.
    pub alpha: Vec<f64>,
    /// `α*_i = (ℓ₀ − ℓ_{p+1})/(ℓ_i − ℓ_{p+1})`, the exponents of `(gᵀ)⁻¹`.
    pub alpha_dual: Vec<f64>,
    /// `Σ m_i η_i`.
    pub eta_sum: f64,
    /// `(n+1)(ℓ₀ + ℓ_{p+1})/(ℓ₀ − ℓ_{p+1})`.
    pub eta_sum_closed: f64,
    /// `log(λ₀/λ_{p+1})`.
    pub translation_log: f64,
    /// `½ log(λ₀/λ_{p+1})`, the displacement in the Hilbert distance.
    pub translation_half_log: f64,
}

pub fn periodic_exponents(g: &ProjIsometry) -> Result<PeriodicExponents> {
    if g.kind != Kind::Hyperbolic {
        return Err(Error::NotHyperbolic);
    }
    let l = g.log_moduli();
    let p = l.len();
    let (l0, lq) = (l[0], l[p - 1]);
    let d = l0 - lq;
    let mid = 1..p - 1;
    let eta: Vec<f64> = l[mid.clone()].iter().map(|li| -1.0 + 2.0 * (l0 - li) / d).collect();
    let alpha = l[mid.clone()].iter().map(|li| d / (l0 - li)).collect();
    let alpha_dual = l[mid.clone()].iter().map(|li| d / (li - lq)).collect();
    let multiplicities = g.multiplicities[mid].to_vec();
    let eta_sum = eta.iter().zip(&multiplicities).map(|(e, m)| e * *m as f64).sum();
    let n = g.dim() as f64;
    Ok(PeriodicExponents {
        eta,
        multiplicities,
        alpha,
        alpha_dual,
        eta_sum,
        eta_sum_closed: (n + 1.0) * (l0 + lq) / d,
        translation_log: d,
        translation_half_log: 0.5 * d,
    })
}

/// `(gᵀ)⁻¹`, which preserves the dual body.
pub fn dual(g: &ProjIsometry) -> Result<ProjIsometry> {
    let inv = g
        .matrix
        .transpose()
        .try_inverse()
        .ok_or(Error::DegenerateConfiguration("singular matrix"))?;
    classify(&inv, None)
}

/// A planar body preserved by a conjugate of `diag(λ₀, λ₁, λ₂)`: the region
/// `X(1−X)^{α−1} > |Y|^α` with `α = log(λ₀/λ₂)/log(λ₁/λ₂)`. Its boundary at
/// the origin (the fixed point of the smallest modulus) is the germ
/// `X ≈ |Y|^α`; at `(1, 0)` it has exponent `α/(α−1)`.
///
/// Returns the body together with the conjugated matrix acting on it.
pub fn invariant_arc_body(g: &ProjIsometry) -> Result<(ConvexBody, DMatrix<f64>)> {
    if g.matrix.nrows() != 3 || g.moduli.len() != 3 {
        return Err(Error::BadSpectrum(f64::NAN));
    }
    let l = g.log_moduli();
    let alpha = (l[0] - l[2]) / (l[1] - l[2]);
    if !(alpha > 1.0 + 1e-9) || !alpha.is_finite() {
        return Err(Error::BadSpectrum(alpha));
    }
    let body = make_arc_body(alpha)?;
    let p = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    let pinv = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&g.moduli));
    Ok((body, p * diag * pinv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::make_ellipsoid;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
    }

    #[test]
    fn diagonal_is_hyperbolic_after_normalization() {
        let g = classify(&diag(&[4.0, 2.0, 1.0]), None).unwrap();
        assert_eq!(g.kind, Kind::Hyperbolic);
        for (m, want) in g.moduli.iter().zip([2.0, 1.0, 0.5]) {
            assert!((m - want).abs() < 1e-12);
        }
        let e = periodic_exponents(&g).unwrap();
        assert!(e.eta[0].abs() < 1e-12 && (e.alpha[0] - 2.0).abs() < 1e-12);
        assert!(e.eta_sum.abs() < 1e-12 && e.eta_sum_closed.abs() < 1e-12);
    }

    #[test]
    fn rotation_and_boost_on_the_disc() {
        let disc = make_ellipsoid(&[1.0, 1.0]).unwrap();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let r = classify(&rot, Some(&disc)).unwrap();
        assert_eq!(r.kind, Kind::Elliptic);
        assert!(matches!(periodic_exponents(&r), Err(Error::NotHyperbolic)));
        let (ch, sh) = (0.7f64.cosh(), 0.7f64.sinh());
        let boost = DMatrix::from_row_slice(3, 3, &[ch, 0.0, sh, 0.0, 1.0, 0.0, sh, 0.0, ch]);
        let b = classify(&boost, Some(&disc)).unwrap();
        let e = periodic_exponents(&b).unwrap();
        assert!(e.eta[0].abs() < 1e-12 && (e.alpha[0] - 2.0).abs() < 1e-12);
        let sq = diag(&[2.0, 1.0, 1.0]);
        assert!(matches!(classify(&sq, Some(&disc)), Err(Error::NotInvariant(_))));
    }

    #[test]
    fn unipotent_is_parabolic() {
        let u = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.5, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(classify(&u, None).unwrap().kind, Kind::Parabolic);
    }
}
