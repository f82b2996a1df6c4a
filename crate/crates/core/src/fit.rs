//! Least-squares slopes, windowed extremes and compensated sums.

use crate::Precision;
use nalgebra::{DMatrix, DVector};

/// A fitted log-log (or log-linear) slope with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub residual_max: f64,
    pub samples: usize,
    pub precision: Precision,
    /// Largest and smallest slope over sliding sub-windows.
    pub upper: f64,
    pub lower: f64,
    /// Set when the value hit the cap that encodes an infinite exponent.
    pub capped: bool,
    /// Residuals oscillate around the fit instead of being noise-sized.
    pub oscillating: bool,
}

impl ExponentEstimate {
    pub fn is_infinite(&self) -> bool {
        self.capped
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub residual_max: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = neumaier_sum(x.iter().copied()) / n;
    let my = neumaier_sum(y.iter().copied()) / n;
    let sxx = neumaier_sum(x.iter().map(|v| (v - mx) * (v - mx)));
    let sxy = neumaier_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - (intercept + slope * a))
        .collect();
    let ssr = neumaier_sum(res.iter().map(|r| r * r));
    let stderr = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let residual_max = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    LineFit {
        slope,
        intercept,
        stderr,
        residual_max,
    }
}

/// Slopes over all sub-windows of `x`-width `width` (consecutive samples).
pub fn window_slopes(x: &[f64], y: &[f64], width: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = 0;
    for i in 0..x.len() {
        while j < x.len() && (x[j] - x[i]).abs() < width - 1e-12 {
            j += 1;
        }
        if j >= x.len() {
            break;
        }
        if j - i + 1 >= 3 {
            out.push(line_fit(&x[i..=j], &y[i..=j]).slope);
        }
    }
    out
}

/// Residuals that change sign in long runs and are far above rounding level.
pub fn residuals_oscillate(x: &[f64], y: &[f64], fit: &LineFit) -> bool {
    let res: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| b - (fit.intercept + fit.slope * a))
        .collect();
    let changes = res.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    fit.residual_max > 1e-3 && changes >= 2 && changes * 4 < res.len()
}

/// Builds an estimate from samples, including windowed extremes.
pub fn estimate(x: &[f64], y: &[f64], width: f64, precision: Precision) -> ExponentEstimate {
    let fit = line_fit(x, y);
    let ws = window_slopes(x, y, width);
    let (upper, lower) = if ws.is_empty() {
        (fit.slope, fit.slope)
    } else {
        (
            ws.iter().cloned().fold(f64::MIN, f64::max),
            ws.iter().cloned().fold(f64::MAX, f64::min),
        )
    };
    ExponentEstimate {
        value: fit.slope,
        stderr: fit.stderr,
        window: (
            x.iter().cloned().fold(f64::MAX, f64::min),
            x.iter().cloned().fold(f64::MIN, f64::max),
        ),
        residual_max: fit.residual_max,
        samples: x.len(),
        precision,
        upper,
        lower,
        capped: false,
        oscillating: residuals_oscillate(x, y, &fit),
    }
}

/// Ordinary least squares `y ≈ X β`, returning β and the standard errors.
pub fn multi_fit(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let k = cols.len();
    let x = DMatrix::from_fn(n, k, |i, j| cols[j][i]);
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let beta = svd.solve(&yv, 1e-14).expect("svd solve");
    let res = &yv - &x * &beta;
    let s2 = res.norm_squared() / (n.saturating_sub(k).max(1)) as f64;
    let cov = (x.transpose() * &x)
        .try_inverse()
        .unwrap_or_else(|| DMatrix::zeros(k, k));
    let se = (0..k).map(|j| (s2 * cov[(j, j)]).max(0.0).sqrt()).collect();
    (beta.iter().copied().collect(), se)
}

/// Compensated (Neumaier) summation; order-independent to rounding level.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// `n` points from `a` to `b` evenly spaced in log scale.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Root of an increasing function on `[a, b]` with `g(a) < 0 < g(b)`,
/// by Illinois steps with a bisection every third iteration.
pub fn increasing_root(mut g: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let mut fa = g(a);
    let mut fb = g(b);
    if !(fa <= 0.0 && fb >= 0.0) {
        return None;
    }
    let mut side = 0i8;
    for it in 0..300 {
        if (b - a).abs() <= tol {
            break;
        }
        let mut c = b - fb * (b - a) / (fb - fa);
        if it % 3 == 2 || !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = g(c);
        if fc == 0.0 {
            return Some(c);
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
    Some(0.5 * (a + b))
}
