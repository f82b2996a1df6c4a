//! One function per subcommand, plus the named suites.

use crate::config::{parse_matrix, Config};
use crate::output::{Cell, Report, Table};
use crate::CliError;
use hilbert_core::body::make_halfdisc;
use hilbert_core::duality::{dual_alpha_check, legendre};
use hilbert_core::entropy::{entropy_lower_bound, volume_entropy, VolumeGrid};
use hilbert_core::flow::{flow, stable_norm, unstable_norm};
use hilbert_core::halfdisc::{asymptotic_ray_distance, corner_constant, flat_limit, limit_distance};
use hilbert_core::isometry::{classify, dual, invariant_arc_body, periodic_exponents, Kind};
use hilbert_core::metric::hilbert_distance;
use hilbert_core::regularity::{
    alpha_estimate, alpha_via_harmonic, alpha_via_skewed, boundary_germ, lyapunov_volume_exponent, CvxGerm,
};
use hilbert_core::transport::theorem_check;
use hilbert_core::{body, ConvexBody, GraphFn, HPoint, Point, Precision};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coord_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn coords(p: &Point) -> Vec<Cell> {
    p.iter().map(|v| Cell::Num(*v)).collect()
}

/// Germ ids: `power:p[,dim]`, `asymmetric`, `flat-product`, `pball-pole:p`,
/// `arc:alpha`, and the `graph:` presets by name.
pub fn parse_germ(id: &str) -> Result<GraphFn, CliError> {
    let bad = || CliError::Config(format!("bad germ '{id}'"));
    let (kind, args) = id.split_once(':').unwrap_or((id, ""));
    let nums = || -> Result<Vec<f64>, CliError> {
        args.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect()
    };
    match kind {
        "power" => {
            let v = nums()?;
            let dim = v.get(1).copied().unwrap_or(1.0);
            if v.is_empty() || !(v[0] > 1.0) || dim.fract() != 0.0 || !(1.0..=3.0).contains(&dim) {
                return Err(bad());
            }
            Ok(GraphFn::power(v[0], dim as usize, 1.0))
        }
        "asymmetric" => Ok(GraphFn::asymmetric()),
        "flat-product" => Ok(GraphFn::flat_product()),
        "pball-pole" => {
            let v = nums()?;
            if v.len() != 1 || !(v[0] > 1.0) {
                return Err(bad());
            }
            Ok(GraphFn::pball_pole(v[0], 1))
        }
        "arc" => {
            let v = nums()?;
            if v.len() != 1 || !(v[0] > 1.0) {
                return Err(bad());
            }
            Ok(GraphFn::arc(v[0]))
        }
        _ => body::graph_preset(id).map_err(|_| bad()),
    }
}

fn germ(cfg: &Config, default: &str, precision: Precision) -> Result<(String, CvxGerm), CliError> {
    let id = cfg.get("germ").unwrap_or(default).to_string();
    let g = CvxGerm::new(parse_germ(&id)?, precision)?;
    Ok((id, g))
}

pub fn dist(cfg: &Config, seed: u64) -> Result<Report, CliError> {
    let b = cfg.body("disc")?;
    let n = b.dim();
    let pairs: Vec<(Point, Point)> = match (cfg.point("x")?, cfg.point("y")?) {
        (Some(x), Some(y)) => vec![(x, y)],
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k: usize = cfg.parsed("pairs", 100)?;
            (0..k)
                .map(|_| (b.random_interior(&mut rng, 1e-3), b.random_interior(&mut rng, 1e-3)))
                .collect()
        }
    };
    let mut header = vec!["i".to_string()];
    header.extend(coord_header("x", n));
    header.extend(coord_header("y", n));
    header.push("distance".into());
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new("dist", &h);
    for (i, (x, y)) in pairs.iter().enumerate() {
        let mut row = vec![Cell::from(i)];
        row.extend(coords(x));
        row.extend(coords(y));
        row.push(hilbert_distance(&b, x, y)?.into());
        t.push(row);
    }
    Ok(Report {
        tables: vec![t],
        checks: Vec::new(),
    })
}

pub fn flow_cmd(cfg: &Config, precision: Precision) -> Result<Report, CliError> {
    let b = cfg.body("disc")?;
    let n = b.dim();
    let x = cfg.point("x")?.unwrap_or_else(|| b.interior_point());
    let mut e1 = Point::zeros(n);
    e1[0] = 1.0;
    let xi = cfg.point("v")?.unwrap_or(e1);
    let w = HPoint::new(&b, &x, &xi)?;
    let z = match cfg.point("y")? {
        Some(z) => z,
        None => {
            let mut e = Point::zeros(n);
            e[n - 1] = 1.0;
            e - &w.xi * w.xi[n - 1]
        }
    };
    let mut header = vec!["t".to_string(), "logit".into(), "gap_plus".into()];
    header.extend(coord_header("x", n));
    header.extend(["stable_norm".to_string(), "unstable_norm".to_string()]);
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new("flow", &h);
    for s in cfg.range("times", (-3.0, 3.0, 0.25))? {
        let wt = flow(&w, s, precision)?;
        let mut row: Vec<Cell> = vec![s.into(), wt.logit.into(), wt.gap_plus().into()];
        row.extend(coords(&wt.point()));
        row.push(stable_norm(&w, &z, s).unwrap_or(f64::NAN).into());
        row.push(unstable_norm(&w, &z, s).unwrap_or(f64::NAN).into());
        t.push(row);
    }
    Ok(Report {
        tables: vec![t],
        checks: Vec::new(),
    })
}

/// Default `(x⁺, x)`: the marked point and a point at depth 0.3 along its
/// inward normal.
fn marked_chord(b: &ConvexBody, cfg: &Config) -> Result<(Point, Point), CliError> {
    let xplus = match (cfg.point("xplus")?, &b.marked) {
        (Some(p), _) => p,
        (None, Some(m)) => m.point.clone(),
        (None, None) => return Err(CliError::Config("body has no marked point; set xplus".into())),
    };
    let x = match (cfg.point("x")?, &b.marked) {
        (Some(p), _) => p,
        (None, Some(m)) if cfg.get("xplus").is_none() => &m.point + &m.normal * 0.3,
        _ => b.interior_point(),
    };
    Ok((xplus, x))
}

fn exponent_rows(name: &str, b: &ConvexBody, cfg: &Config, precision: Precision, report: &mut Report) -> Result<Table, CliError> {
    let (xplus, x) = marked_chord(b, cfg)?;
    let dirs: Vec<Point> = match cfg.point("v")? {
        Some(v) => vec![v],
        None => {
            let (_, frame) = boundary_germ(b, &xplus, precision)?;
            (0..frame.ncols()).map(|k| frame.column(k).into_owned()).collect()
        }
    };
    let mut t = Table::new(
        name,
        &["body", "direction", "eta_flow", "stderr", "upper", "lower", "alpha", "predicted", "defect"],
    );
    for (k, v) in dirs.iter().enumerate() {
        let c = theorem_check(b, &xplus, &x, v, precision)?;
        t.push(vec![
            b.id.clone().into(),
            k.into(),
            c.eta.value.into(),
            c.eta.stderr.into(),
            c.eta.upper.into(),
            c.eta.lower.into(),
            c.alpha.value.into(),
            c.predicted.into(),
            c.defect.into(),
        ]);
        report.check(
            format!("{}:{k}", b.id),
            c.defect < 0.05,
            format!("eta {:.6} vs 2/alpha - 1 = {:.6}", c.eta.value, c.predicted),
        );
    }
    Ok(t)
}

pub fn exponents(cfg: &Config, precision: Precision) -> Result<Report, CliError> {
    let b = cfg.body("graph:product")?;
    let mut r = Report::default();
    let t = exponent_rows("exponents", &b, cfg, precision, &mut r)?;
    r.tables.push(t);
    Ok(r)
}

fn regularity_row(id: &str, g: &CvxGerm, t: &mut Table, r: &mut Report) -> Result<(), CliError> {
    let a = alpha_estimate(g, None)?;
    let h = alpha_via_harmonic(g)?;
    let s = alpha_via_skewed(g, 1.0)?;
    let vol = if g.dim() <= 3 {
        lyapunov_volume_exponent(g).ok()
    } else {
        None
    };
    let spread = if a.capped {
        0.0
    } else {
        (a.value - h.value).abs().max((a.value - s.value).abs())
    };
    t.push(vec![
        id.into(),
        a.value.into(),
        a.stderr.into(),
        a.upper.into(),
        a.lower.into(),
        h.value.into(),
        s.value.into(),
        a.capped.into(),
        a.oscillating.into(),
        vol.as_ref().map_or(f64::NAN, |v| v.volume.value).into(),
        vol.as_ref().map_or(f64::NAN, |v| v.literal.value).into(),
    ]);
    r.check(format!("{id}:agreement"), spread < 0.03, format!("max spread {spread:.3e}"));
    Ok(())
}

const REGULARITY_HEADER: &[&str] = &[
    "germ", "alpha", "stderr", "upper", "lower", "harmonic", "skewed", "capped", "oscillating", "volume_exponent",
    "literal_exponent",
];

pub fn regularity(cfg: &Config, precision: Precision) -> Result<Report, CliError> {
    let (id, g) = germ(cfg, "power:3", precision)?;
    let mut r = Report::default();
    let mut t = Table::new("regularity", REGULARITY_HEADER);
    if g.dim() == 1 {
        regularity_row(&id, &g, &mut t, &mut r)?;
    } else {
        let a = alpha_estimate(&g, None)?;
        let vol = lyapunov_volume_exponent(&g)?;
        t.push(vec![
            id.into(),
            a.value.into(),
            a.stderr.into(),
            a.upper.into(),
            a.lower.into(),
            f64::NAN.into(),
            f64::NAN.into(),
            a.capped.into(),
            a.oscillating.into(),
            vol.volume.value.into(),
            vol.literal.value.into(),
        ]);
    }
    r.tables.push(t);
    Ok(r)
}

pub fn duality(cfg: &Config, precision: Precision) -> Result<Report, CliError> {
    let (id, g) = germ(cfg, "power:4", precision)?;
    let (a, astar, defect) = dual_alpha_check(&g)?;
    let mut r = Report::default();
    let mut t = Table::new("duality", &["germ", "alpha", "alpha_dual", "defect"]);
    t.push(vec![id.clone().into(), a.into(), astar.into(), defect.into()]);
    r.check(format!("{id}:conjugate"), defect < 0.03, format!("|1/a + 1/a* - 1| = {defect:.3e}"));
    let mut l = Table::new("legendre", &["s", "f_star"]);
    let top = 0.9 * g.f.deriv(g.f.radius).min(-g.f.deriv(-g.f.radius));
    for k in -10..=10 {
        let s = top * k as f64 / 10.0;
        l.push(vec![s.into(), legendre(&g, s).unwrap_or(f64::NAN).into()]);
    }
    r.tables.extend([t, l]);
    Ok(r)
}

pub fn isometry(cfg: &Config) -> Result<Report, CliError> {
    let m = parse_matrix(cfg.get("matrix").unwrap_or("8,0,0;0,2,0;0,0,1"))?;
    let body = match cfg.get("body") {
        Some(_) => Some(cfg.body("disc")?),
        None => None,
    };
    let g = classify(&m, body.as_ref())?;
    let mut r = Report::default();
    let mut s = Table::new("isometry", &["kind", "eta_sum", "eta_sum_closed", "translation_half_log"]);
    let mut t = Table::new("periodic", &["level", "modulus", "multiplicity", "eta", "alpha", "alpha_dual"]);
    if g.kind == Kind::Hyperbolic {
        let e = periodic_exponents(&g)?;
        let d = periodic_exponents(&dual(&g)?)?;
        s.push(vec![
            format!("{:?}", g.kind).into(),
            e.eta_sum.into(),
            e.eta_sum_closed.into(),
            e.translation_half_log.into(),
        ]);
        for (i, eta) in e.eta.iter().enumerate() {
            t.push(vec![
                (i + 1).into(),
                g.moduli[i + 1].into(),
                e.multiplicities[i].into(),
                (*eta).into(),
                e.alpha[i].into(),
                e.alpha_dual[i].into(),
            ]);
        }
        r.check("eta_sum", (e.eta_sum - e.eta_sum_closed).abs() < 1e-12, format!("{:.3e}", e.eta_sum - e.eta_sum_closed));
        let pairing = e
            .alpha
            .iter()
            .zip(d.alpha.iter().rev())
            .map(|(a, b)| (1.0 / a + 1.0 / b - 1.0).abs())
            .fold(0.0, f64::max);
        r.check("dual_pairing", pairing < 1e-12, format!("{pairing:.3e}"));
        if m.nrows() == 3 {
            let (arc, _) = invariant_arc_body(&g)?;
            let measured = hilbert_core::transport::parallel_exponent(
                &arc,
                &Point::zeros(2),
                &Point::from_vec(vec![0.5, 0.0]),
                &Point::from_vec(vec![0.0, 1.0]),
                Precision::Double,
            )?;
            let toward_origin = periodic_exponents(&classify(
                &g.matrix.clone().try_inverse().ok_or(CliError::Config("singular matrix".into()))?,
                None,
            )?)?;
            let mut a = Table::new("arc_body", &["eta_measured", "eta_formula", "stderr"]);
            a.push(vec![measured.value.into(), toward_origin.eta[0].into(), measured.stderr.into()]);
            r.check(
                "arc_eta",
                (measured.value - toward_origin.eta[0]).abs() < 0.05,
                format!("{:.6} vs {:.6}", measured.value, toward_origin.eta[0]),
            );
            r.tables.push(a);
        }
    } else {
        s.push(vec![format!("{:?}", g.kind).into(), f64::NAN.into(), f64::NAN.into(), f64::NAN.into()]);
    }
    r.tables.insert(0, s);
    r.tables.insert(1, t);
    Ok(r)
}

pub fn entropy(cfg: &Config, seed: u64) -> Result<Report, CliError> {
    let b = cfg.body("disc")?;
    let o = cfg.point("x")?.unwrap_or_else(|| b.interior_point());
    let radii = cfg.range("radii", (4.0, 12.0, 0.4))?;
    let grid = VolumeGrid {
        angles: cfg.parsed("angles", VolumeGrid::default().angles)?,
        ..VolumeGrid::default()
    };
    let v = volume_entropy(&b, &o, &radii, grid)?;
    let mut r = Report::default();
    let mut t = Table::new("ball_volumes", &["R", "log_volume"]);
    for (rr, lv) in &v.log_volumes {
        t.push(vec![(*rr).into(), (*lv).into()]);
    }
    let samples: usize = cfg.parsed("samples", 0)?;
    let bound = if samples > 0 {
        Some(entropy_lower_bound(&b, samples, seed)?)
    } else {
        None
    };
    let mut s = Table::new(
        "entropy",
        &["body", "h", "stderr", "log_coefficient", "pure_slope", "bound", "bound_half_width", "below_n_minus_one"],
    );
    s.push(vec![
        b.id.clone().into(),
        v.estimate.value.into(),
        v.estimate.stderr.into(),
        v.log_coefficient.into(),
        v.pure_slope.into(),
        bound.as_ref().map_or(f64::NAN, |b| b.mean).into(),
        bound.as_ref().map_or(f64::NAN, |b| b.half_width).into(),
        v.below_n_minus_one.into(),
    ]);
    if let Some(bd) = &bound {
        r.check(
            format!("{}:lower_bound", b.id),
            v.estimate.value >= bd.mean - 0.07,
            format!("h {:.4} vs bound {:.4}", v.estimate.value, bd.mean),
        );
    }
    r.tables.extend([t, s]);
    Ok(r)
}

fn p2(x: f64, y: f64) -> Point {
    Point::from_vec(vec![x, y])
}

pub fn halfdisc(cfg: &Config) -> Result<Report, CliError> {
    let h = make_halfdisc();
    let scenario = cfg.get("scenario").unwrap_or("arc");
    let mut r = Report::default();
    match scenario {
        "arc" | "flat" => {
            let (dx, want) = if scenario == "arc" {
                (p2(1.2f64.cos(), 1.2f64.sin()), -1.0)
            } else {
                (p2(0.2, 0.0), -2.0)
            };
            let x = cfg.point("xplus")?.unwrap_or(dx);
            let p1 = cfg.point("x")?.unwrap_or(p2(0.0, 0.3));
            let q = cfg.point("y")?.unwrap_or(p2(0.4, 0.2));
            let d = asymptotic_ray_distance(&h, &x, &p1, &q)?;
            let mut t = Table::new(format!("halfdisc_{scenario}"), &["t", "distance"]);
            for (s, v) in &d.distances {
                t.push(vec![(*s).into(), (*v).into()]);
            }
            let mut s = Table::new(format!("halfdisc_{scenario}_slope"), &["slope", "stderr", "offset"]);
            s.push(vec![d.slope.value.into(), d.slope.stderr.into(), d.offset.into()]);
            if cfg.get("xplus").is_none() {
                r.check(
                    format!("halfdisc:{scenario}"),
                    (d.slope.value - want).abs() < 0.05,
                    format!("slope {:.4} vs {want}", d.slope.value),
                );
            }
            r.tables.extend([t, s]);
        }
        "corner" => {
            let a = p2(-1.0, 0.0);
            let p1 = cfg.point("x")?.unwrap_or(p2(0.0, 0.3));
            let q = cfg.point("y")?.unwrap_or(p2(0.0, 0.6));
            let d = limit_distance(&h, &a, &a, &p1, &q)?;
            let c = corner_constant(&p1, &q)?;
            let mut t = Table::new("halfdisc_corner", &["limit", "cross_ratio_formula", "difference"]);
            t.push(vec![d.into(), c.into(), (d - c).into()]);
            r.check("halfdisc:corner", (d - c).abs() < 1e-6, format!("{:.3e}", d - c));
            r.tables.push(t);
        }
        "flat-pair" => {
            let (x1, x2) = (p2(-0.3, 0.0), p2(0.4, 0.0));
            let p1 = cfg.point("x")?.unwrap_or(p2(0.0, 0.5));
            let q = cfg.point("y")?.unwrap_or(p2(0.2, 0.4));
            let d = limit_distance(&h, &x1, &x2, &p1, &q)?;
            let c = flat_limit(&p2(-1.0, 0.0), &p2(1.0, 0.0), &x1, &x2)?;
            let mut t = Table::new("halfdisc_flat_pair", &["limit", "cross_ratio_formula", "difference"]);
            t.push(vec![d.into(), c.into(), (d - c).into()]);
            r.check("halfdisc:flat-pair", (d - c).abs() < 1e-6, format!("{:.3e}", d - c));
            r.tables.push(t);
        }
        other => return Err(CliError::Config(format!("unknown halfdisc scenario '{other}'"))),
    }
    Ok(r)
}

fn klein_suite(seed: u64) -> Result<Report, CliError> {
    let d = hilbert_core::body::make_ellipsoid(&[1.0, 1.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let x = d.random_interior(&mut rng, 1e-3);
        let y = d.random_interior(&mut rng, 1e-3);
        let c = (1.0 - x.dot(&y)) / ((1.0 - x.norm_squared()) * (1.0 - y.norm_squared())).sqrt();
        let cross = x[0] * y[1] - x[1] * y[0];
        let sh = ((&x - &y).norm_squared() - cross * cross).max(0.0).sqrt()
            / ((1.0 - x.norm_squared()) * (1.0 - y.norm_squared())).sqrt();
        let want = if c < 2.0 { sh.asinh() } else { c.acosh() };
        worst = worst.max((hilbert_distance(&d, &x, &y)? - want).abs());
    }
    let mut r = Report::default();
    let mut t = Table::new("klein", &["pairs", "max_error"]);
    t.push(vec![10_000usize.into(), worst.into()]);
    r.check("klein", worst < 1e-9, format!("{worst:.3e}"));
    r.tables.push(t);
    Ok(r)
}

fn main_theorem_suite(precision: Precision) -> Result<Report, CliError> {
    let cases = ["ellipsoid:2,1", "pball:1.5,2", "pball:3,2", "pball:4,2", "graph:product", "graph:oscillatory"];
    let mut r = Report::default();
    let mut all = Table::new(
        "main_theorem",
        &["body", "direction", "eta_flow", "stderr", "upper", "lower", "alpha", "predicted", "defect"],
    );
    let empty = Config::default();
    for id in cases {
        let b = hilbert_core::parse_body_id(id)?;
        let t = exponent_rows("main_theorem", &b, &empty, precision, &mut r)?;
        all.rows.extend(t.rows);
    }
    let g = classify(&parse_matrix("8,0,0;0,2,0;0,0,1")?, None)?;
    let (arc, _) = invariant_arc_body(&g)?;
    let t = exponent_rows("main_theorem", &arc, &empty, precision, &mut r)?;
    all.rows.extend(t.rows);
    r.tables.push(all);
    Ok(r)
}

fn regularity_suite(precision: Precision) -> Result<Report, CliError> {
    let mut r = Report::default();
    let mut t = Table::new("regularity", REGULARITY_HEADER);
    for id in ["power:1.5", "power:2", "power:3", "power:4", "asymmetric", "oscillatory", "arc:3", "pball-pole:4"] {
        let g = CvxGerm::new(parse_germ(id)?, precision)?;
        regularity_row(id, &g, &mut t, &mut r)?;
    }
    r.tables.push(t);
    Ok(r)
}

fn duality_suite(precision: Precision) -> Result<Report, CliError> {
    let mut r = Report::default();
    let mut t = Table::new("duality", &["germ", "alpha", "alpha_dual", "defect"]);
    for p in [1.5, 2.0, 3.0, 4.0] {
        let id = format!("power:{p}");
        let g = CvxGerm::new(parse_germ(&id)?, precision)?;
        let (a, astar, defect) = dual_alpha_check(&g)?;
        t.push(vec![id.clone().into(), a.into(), astar.into(), defect.into()]);
        r.check(format!("{id}:conjugate"), defect < 0.03, format!("{defect:.3e}"));
    }
    r.tables.push(t);
    Ok(r)
}

fn volume_suite(precision: Precision) -> Result<Report, CliError> {
    let mut r = Report::default();
    let mut t = Table::new("volume_exponent", &["germ", "volume", "literal", "expected"]);
    for (id, want) in [("power:2,1", 0.5), ("power:2,2", 1.0), ("product", 0.75)] {
        let g = CvxGerm::new(parse_germ(id)?, precision)?;
        let v = lyapunov_volume_exponent(&g)?;
        t.push(vec![id.into(), v.volume.value.into(), v.literal.value.into(), want.into()]);
        r.check(format!("{id}:volume"), (v.volume.value - want).abs() < 0.03, format!("{:.4}", v.volume.value));
    }
    r.tables.push(t);
    Ok(r)
}

pub const SUITES: &[&str] = &[
    "main-theorem",
    "halfdisc",
    "klein",
    "regularity",
    "duality",
    "periodic",
    "volume-exponent",
    "entropy",
];

pub fn suite(cfg: &Config, seed: u64, precision: Precision) -> Result<Report, CliError> {
    let mut out = Report::default();
    for name in cfg.list("suite") {
        let r = match name.as_str() {
            "main-theorem" => main_theorem_suite(precision)?,
            "halfdisc" => {
                let mut r = Report::default();
                for s in ["arc", "flat", "corner", "flat-pair"] {
                    let mut c = Config::default();
                    c.set("scenario", s)?;
                    let x = halfdisc(&c)?;
                    r.tables.extend(x.tables);
                    r.checks.extend(x.checks);
                }
                r
            }
            "klein" => klein_suite(seed)?,
            "regularity" => regularity_suite(precision)?,
            "duality" => duality_suite(precision)?,
            "periodic" => isometry(&Config::default())?,
            "volume-exponent" => volume_suite(precision)?,
            "entropy" => {
                let mut c = Config::default();
                c.set("samples", "64")?;
                entropy(&c, seed)?
            }
            other => {
                return Err(CliError::Config(format!("unknown suite '{other}', expected one of {}", SUITES.join(", "))))
            }
        };
        out.tables.extend(r.tables);
        out.checks.extend(r.checks);
    }
    Ok(out)
}
