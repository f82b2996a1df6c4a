//! The ten acceptance criteria. Each prints one PASS/FAIL line; the test
//! fails if any criterion does.

use hilbert_core::body::{make_arc_body, make_ellipsoid, make_graph_body, make_halfdisc, make_pball, make_simplex};
use hilbert_core::duality::{dual_alpha_check, dual_body_graph, legendre, legendre_germ};
use hilbert_core::entropy::{entropy_lower_bound, volume_entropy, VolumeGrid};
use hilbert_core::fit::linspace;
use hilbert_core::flow::{flip, flow, radial_flow, stable_norm, unstable_norm};
use hilbert_core::halfdisc::{asymptotic_ray_distance, corner_constant, limit_distance};
use hilbert_core::isometry::{classify, dual, invariant_arc_body, periodic_exponents};
use hilbert_core::metric::{busemann, hilbert_distance};
use hilbert_core::regularity::{alpha_estimate, alpha_via_harmonic, alpha_via_skewed, lyapunov_volume_exponent, CvxGerm};
use hilbert_core::transport::{adapt_section, parallel_exponent, theorem_check};
use hilbert_core::{ConvexBody, GraphFn, HPoint, Point, Precision, ProjectiveMap};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

fn p(v: &[f64]) -> Point {
    Point::from_column_slice(v)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn germ(f: GraphFn) -> CvxGerm {
    CvxGerm::new(f, Precision::Double).unwrap()
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

fn main_theorem() -> Outcome {
    let mut cases: Vec<(ConvexBody, Point, Point, Point)> = Vec::new();
    cases.push((make_ellipsoid(&[2.0, 1.0]).unwrap(), p(&[2.0, 0.0]), p(&[0.0, 0.0]), p(&[0.0, 1.0])));
    for q in [1.5, 3.0, 4.0] {
        cases.push((make_pball(q, 2).unwrap(), p(&[0.0, 1.0]), p(&[0.0, 0.0]), p(&[1.0, 0.0])));
    }
    for (b, depth) in [
        (make_graph_body(GraphFn::product()).unwrap(), 0.3),
        (make_graph_body(GraphFn::oscillatory(1)).unwrap(), 0.3),
        (make_arc_body(3.0).unwrap(), 0.5),
    ] {
        let m = b.marked.clone().unwrap();
        let x = &m.point + &m.normal * depth;
        for k in 0..m.tangents.ncols() {
            cases.push((b.clone(), m.point.clone(), x.clone(), m.tangents.column(k).into_owned()));
        }
    }
    let mut worst = 0.0f64;
    for (b, xp, x, v) in &cases {
        let t = Instant::now();
        let c = theorem_check(b, xp, x, v, Precision::Double).map_err(|e| format!("{}: {e}", b.id))?;
        ensure(c.defect < 0.05, format!("{}: eta {} vs {}", b.id, c.eta.value, c.predicted))?;
        ensure(t.elapsed() < Duration::from_secs(120), format!("{} took {:?}", b.id, t.elapsed()))?;
        worst = worst.max(c.defect);
    }
    Ok(format!("{} body/direction cases, max |eta - (2/alpha - 1)| = {worst:.4}", cases.len()))
}

fn halfdisc_rates() -> Outcome {
    let h = make_halfdisc();
    let arc = asymptotic_ray_distance(&h, &p(&[1.2f64.cos(), 1.2f64.sin()]), &p(&[0.0, 0.3]), &p(&[0.4, 0.2]))
        .map_err(|e| e.to_string())?;
    let flat = asymptotic_ray_distance(&h, &p(&[0.2, 0.0]), &p(&[0.0, 0.5]), &p(&[0.5, 0.3])).map_err(|e| e.to_string())?;
    ensure((arc.slope.value + 1.0).abs() < 0.05, format!("arc slope {}", arc.slope.value))?;
    ensure((flat.slope.value + 2.0).abs() < 0.05, format!("flat slope {}", flat.slope.value))?;
    let a = p(&[-1.0, 0.0]);
    let mut worst = 0.0f64;
    for (p1, p2) in [(p(&[0.0, 0.3]), p(&[0.0, 0.6])), (p(&[0.3, 0.2]), p(&[-0.2, 0.5]))] {
        let d = limit_distance(&h, &a, &a, &p1, &p2).map_err(|e| e.to_string())?;
        let c = corner_constant(&p1, &p2).map_err(|e| e.to_string())?;
        worst = worst.max((d - c).abs());
    }
    ensure(worst < 1e-6, format!("corner mismatch {worst:e}"))?;
    Ok(format!(
        "arc slope {:.4}, flat slope {:.4}, corner error {worst:.1e}",
        arc.slope.value, flat.slope.value
    ))
}

fn klein_model() -> Outcome {
    let d = make_ellipsoid(&[1.0, 1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let x = d.random_interior(&mut rng, 1e-3);
        let y = d.random_interior(&mut rng, 1e-3);
        // artanh of the Klein chord ratio, via the Möbius form for the disc
        let den = ((1.0 - x.norm_squared()) * (1.0 - y.norm_squared())).sqrt();
        let cross = x[0] * y[1] - x[1] * y[0];
        let s = ((&x - &y).norm_squared() - cross * cross).max(0.0).sqrt();
        let want = (s / den).asinh();
        worst = worst.max((hilbert_distance(&d, &x, &y).unwrap() - want).abs());
    }
    let b = |x: &Point, xi: &Point| ((1.0 - x.dot(xi)) / (1.0 - x.norm_squared()).sqrt()).ln();
    let mut bw = 0.0f64;
    for _ in 0..500 {
        let t: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let xi = p(&[t.cos(), t.sin()]);
        let x = d.random_interior(&mut rng, 0.05);
        let y = d.random_interior(&mut rng, 0.05);
        let got = busemann(&d, &xi, &x, &y).unwrap();
        bw = bw.max((got - (b(&x, &xi) - b(&y, &xi))).abs());
    }
    ensure(worst < 1e-9 && bw < 1e-6, format!("distance {worst:e}, busemann {bw:e}"))?;
    Ok(format!("10^4 pairs max error {worst:.1e}, Busemann max error {bw:.1e}"))
}

fn flow_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for b in [make_ellipsoid(&[2.0, 0.7]).unwrap(), make_pball(3.0, 2).unwrap()] {
        for _ in 0..500 {
            let x = b.random_interior(&mut rng, 0.05);
            let xi = p(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            let t: f64 = rng.gen_range(-5.0..5.0);
            let w = HPoint::new(&b, &x, &xi).unwrap();
            let wt = flow(&w, t, Precision::Double).unwrap();
            worst = worst.max((wt.ratio().ln() - w.ratio().ln() - 2.0 * t).abs());
        }
    }
    ensure(worst < 1e-12, format!("ratio identity error {worst:e}"))?;
    let b = make_ellipsoid(&[2.0, 1.0]).unwrap();
    let w = HPoint::new(&b, &p(&[0.3, 0.2]), &p(&[1.0, 0.4])).unwrap();
    let lead = 2.0 * w.gap_plus().powi(2) / w.m_value();
    let resid = |t: f64| (flow(&w, t, Precision::Double).unwrap().gap_plus() - lead * (-2.0 * t).exp()).abs();
    let rate = (resid(9.0) / resid(5.0)).ln() / 4.0;
    ensure((rate + 4.0).abs() < 0.4, format!("residual rate {rate}"))?;
    Ok(format!("ratio identity error {worst:.1e}, residual rate {rate:.4}"))
}

fn estimators() -> Outcome {
    let mut worst = 0.0f64;
    for f in [
        GraphFn::power(2.0, 1, 1.0),
        GraphFn::power(3.0, 1, 1.0),
        GraphFn::power(4.0, 1, 1.0),
        GraphFn::power(1.5, 1, 1.0),
        GraphFn::asymmetric(),
        GraphFn::oscillatory(1),
        GraphFn::arc(3.0),
        GraphFn::pball_pole(4.0, 1),
    ] {
        let name = f.name.clone();
        let g = germ(f);
        let a = alpha_estimate(&g, None).unwrap().value;
        let h = alpha_via_harmonic(&g).unwrap().value;
        let s = alpha_via_skewed(&g, 1.0).unwrap().value;
        let spread = (a - h).abs().max((a - s).abs()).max((h - s).abs());
        ensure(spread < 0.03, format!("{name}: {a} {h} {s}"))?;
        worst = worst.max(spread);
    }
    Ok(format!("8 germs, max estimator spread {worst:.4}"))
}

fn duality() -> Outcome {
    let mut worst = 0.0f64;
    for q in [1.5, 2.0, 3.0, 4.0] {
        let (_, _, d) = dual_alpha_check(&germ(GraphFn::power(q, 1, 1.0))).map_err(|e| e.to_string())?;
        worst = worst.max(d);
    }
    ensure(worst < 0.03, format!("conjugacy defect {worst}"))?;
    let b = make_pball(4.0, 2).unwrap();
    let d = dual_body_graph(&b, &p(&[0.0, 1.0])).map_err(|e| e.to_string())?;
    let qf = GraphFn::pball_pole(4.0 / 3.0, 1);
    let mut pb = 0.0f64;
    for a in linspace(-0.1, 0.1, 41) {
        pb = pb.max((d.germ.f.eval(&[a]) - qf.eval(&[a])).abs());
    }
    ensure(pb < 1e-6, format!("dual p-ball germ error {pb:e}"))?;
    let mut inv = 0.0f64;
    for f in [GraphFn::power(3.0, 1, 1.0), GraphFn::asymmetric(), GraphFn::oscillatory(1)] {
        let g = germ(f);
        let star = legendre_germ(&g).unwrap();
        for x in [-0.08, -0.01, -1e-3, 2e-3, 0.05, 0.09] {
            let want = g.f.eval(&[x]);
            inv = inv.max((legendre(&star, x).unwrap() - want).abs() / (1.0 + want.abs()));
        }
    }
    ensure(inv < 1e-7, format!("involution error {inv:e}"))?;
    let flat = CvxGerm::new(GraphFn::flat_exp(1), Precision::Extended).unwrap();
    let (a, astar, _) = dual_alpha_check(&flat).map_err(|e| e.to_string())?;
    ensure(a.is_infinite() && astar > 1.0 && astar < 1.1, format!("flat pair ({a}, {astar})"))?;
    Ok(format!(
        "conjugacy defect {worst:.1e}, dual p-ball {pb:.1e}, involution {inv:.1e}, flat pair ({a}, {astar:.4})"
    ))
}

fn periodic() -> Outcome {
    let g = classify(&diag(&[8.0, 2.0, 1.0]), None).unwrap();
    let (body, _) = invariant_arc_body(&g).unwrap();
    let ginv = classify(&g.matrix.clone().try_inverse().unwrap(), None).unwrap();
    let want = periodic_exponents(&ginv).unwrap().eta[0];
    let e = parallel_exponent(&body, &p(&[0.0, 0.0]), &p(&[0.5, 0.0]), &p(&[0.0, 1.0]), Precision::Double)
        .map_err(|e| e.to_string())?;
    ensure((e.value - want).abs() < 0.05, format!("eta_1 {} vs {want}", e.value))?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut pair, mut sum) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.gen_range(3..6);
        let mut l: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mean = l.iter().sum::<f64>() / n as f64;
        l.iter_mut().for_each(|v| *v -= mean);
        let g = classify(&diag(&l.iter().map(|v| v.exp()).collect::<Vec<_>>()), None).unwrap();
        let e = periodic_exponents(&g).unwrap();
        let d = periodic_exponents(&dual(&g).unwrap()).unwrap();
        sum = sum.max((e.eta_sum - e.eta_sum_closed).abs());
        for (a, b) in e.alpha.iter().zip(d.alpha.iter().rev()) {
            pair = pair.max((1.0 / a + 1.0 / b - 1.0).abs());
        }
    }
    ensure(pair < 1e-12 && sum < 1e-12, format!("pairing {pair:e}, eta sum {sum:e}"))?;
    Ok(format!("eta_1 {:.4} vs {want:.4}, pairing {pair:.1e}, eta sum {sum:.1e}", e.value))
}

fn entropy() -> Outcome {
    let radii = linspace(4.0, 12.0, 21);
    let limit = Duration::from_secs(300);
    let disc = make_ellipsoid(&[1.0, 1.0]).unwrap();
    let t = Instant::now();
    let hd = volume_entropy(&disc, &Point::zeros(2), &radii, VolumeGrid::default()).map_err(|e| e.to_string())?;
    ensure(t.elapsed() < limit, "disc too slow")?;
    ensure((hd.estimate.value - 1.0).abs() < 0.05, format!("disc h {}", hd.estimate.value))?;
    let bd = entropy_lower_bound(&disc, 64, 5).map_err(|e| e.to_string())?;
    ensure(hd.estimate.value >= bd.mean - 0.07, format!("disc bound {} > h", bd.mean))?;
    let ell = make_ellipsoid(&[2.0, 1.0]).unwrap();
    let be = entropy_lower_bound(&ell, 64, 6).map_err(|e| e.to_string())?;
    // the ellipse is projectively the disc, so its entropy is the disc's
    ensure(hd.estimate.value >= be.mean - 0.07, format!("ellipse bound {}", be.mean))?;
    let s = make_simplex(2).unwrap();
    let t = Instant::now();
    let hs = volume_entropy(&s, &s.interior_point(), &radii, VolumeGrid::default()).map_err(|e| e.to_string())?;
    ensure(t.elapsed() < limit, "simplex too slow")?;
    ensure(hs.estimate.value.abs() < 0.05, format!("simplex h {}", hs.estimate.value))?;
    let b = make_pball(4.0, 2).unwrap();
    let grid = VolumeGrid {
        angles: 64,
        density_angles: 64,
        ..VolumeGrid::default()
    };
    let t = Instant::now();
    let hp = volume_entropy(&b, &Point::zeros(2), &radii, grid).map_err(|e| e.to_string())?;
    ensure(t.elapsed() < limit, "p-ball too slow")?;
    ensure(hp.estimate.value - 2.0 * hp.estimate.stderr > 0.0, format!("p-ball h {:?}", hp.estimate))?;
    Ok(format!(
        "disc {:.4}, simplex {:.4}, 4-ball {:.4} ± {:.4}, bounds disc {:.4} ellipse {:.4}",
        hd.estimate.value, hs.estimate.value, hp.estimate.value, hp.estimate.stderr, bd.mean, be.mean
    ))
}

fn unit(a: f64) -> Point {
    p(&[a.cos(), a.sin()])
}

fn invariants() -> Outcome {
    const CASES: usize = 1000;
    let bodies = [
        make_ellipsoid(&[1.0, 1.0]).unwrap(),
        make_ellipsoid(&[2.0, 0.7]).unwrap(),
        make_pball(3.0, 2).unwrap(),
        make_pball(4.0, 2).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut violations = Vec::new();
    for i in 0..CASES {
        let b = &bodies[i % bodies.len()];
        let [x, y, z] = [0; 3].map(|_| b.random_interior(&mut rng, 1e-3));
        let dir = rng.gen_range(0.0..6.3);
        let w = HPoint::new(b, &x, &unit(dir)).unwrap();
        let v = unit(dir + rng.gen_range(0.3..2.8));
        let t: f64 = rng.gen_range(-3.0..3.0);

        let (dxy, dyz, dxz) = (
            hilbert_distance(b, &x, &y).unwrap(),
            hilbert_distance(b, &y, &z).unwrap(),
            hilbert_distance(b, &x, &z).unwrap(),
        );
        if dxy + dyz - dxz < -1e-9 {
            violations.push("triangle");
        }

        let g = ProjectiveMap::random_near_identity(2, 0.3, &mut rng);
        let gb = b.transformed(&g);
        let dg = hilbert_distance(&gb, &g.apply(&x).unwrap(), &g.apply(&y).unwrap()).unwrap();
        if (dg - dxy).abs() > 1e-9 * (1.0 + dxy) {
            violations.push("projective invariance");
        }

        let s = rng.gen_range(-10.0..10.0);
        let lhs = flow(&flip(&w), s, Precision::Double).unwrap();
        let rhs = flip(&flow(&w, -s, Precision::Double).unwrap());
        if lhs.logit != rhs.logit || lhs.xi != rhs.xi {
            violations.push("flip");
        }

        {
            let sec = adapt_section(b, &w, &v).unwrap();
            let h = 1e-4;
            let n = |s: f64| sec.transport_norm(s).unwrap();
            let (lo, mid, hi) = (n(t - h), n(t), n(t + h));
            let rate = (hi.ln() - lo.ln()) / (2.0 * h);
            if !(-2.0 - 1e-3..=2.0 + 1e-3).contains(&(rate - 1.0)) || !(-2.0 - 1e-3..=2.0 + 1e-3).contains(&(rate + 1.0)) {
                violations.push("rate bound");
            }
            if (-(t + h)).exp() * hi >= (-t).exp() * mid {
                violations.push("stable monotonicity");
            }
            let (sn, un) = (stable_norm(&w, &v, t).unwrap(), unstable_norm(&w, &v, t).unwrap());
            if (un / sn / (2.0 * t).exp() - 1.0).abs() > 1e-12 {
                violations.push("e^2t pairing");
            }
        }

        let d = unit(rng.gen_range(0.0..6.3));
        let xp = &d * b.exit_from(&Point::zeros(2), &d).unwrap();
        let r = rng.gen_range(0.0..6.0);
        let fx = radial_flow(b, &xp, &x, r, Precision::Double).unwrap();
        let fy = radial_flow(b, &xp, &y, r, Precision::Double).unwrap();
        if hilbert_distance(b, &fx, &fy).unwrap() > dxy + 1e-9 {
            violations.push("radial contraction");
        }
    }
    ensure(violations.is_empty(), format!("violations: {violations:?}"))?;
    Ok(format!("{CASES} randomized cases per invariant, 0 violations"))
}

fn volume_exponent() -> Outcome {
    let mut out = Vec::new();
    for (f, want) in [
        (GraphFn::power(2.0, 1, 1.0), 0.5),
        (GraphFn::power(2.0, 2, 1.0), 1.0),
        (GraphFn::product(), 0.75),
    ] {
        let name = f.name.clone();
        let v = lyapunov_volume_exponent(&germ(f)).map_err(|e| e.to_string())?;
        ensure((v.volume.value - want).abs() < 0.03, format!("{name}: {}", v.volume.value))?;
        out.push(format!("{name} {:.4} (literal {:.4})", v.volume.value, v.literal.value));
    }
    Ok(out.join(", "))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("main theorem", main_theorem),
        ("half-disc rates", halfdisc_rates),
        ("Klein model", klein_model),
        ("flow law", flow_law),
        ("estimator equivalence", estimators),
        ("duality", duality),
        ("periodic orbits", periodic),
        ("volume entropy", entropy),
        ("invariant suite", invariants),
        ("volume exponent", volume_exponent),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match r {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{:.1?}]", k + 1, t.elapsed()),
            Err(detail) => {
                println!("FAIL criterion {} ({name}): {detail} [{:.1?}]", k + 1, t.elapsed());
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
