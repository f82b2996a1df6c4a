use hilbert_core::body::{make_ellipsoid, make_halfdisc};
use hilbert_core::halfdisc::*;
use hilbert_core::{Error, Point};

fn p(x: f64, y: f64) -> Point {
    Point::from_vec(vec![x, y])
}

#[test]
fn arc_rays_decay_like_exp_minus_t() {
    let h = make_halfdisc();
    let th = 1.2f64;
    let x = p(th.cos(), th.sin());
    let r = asymptotic_ray_distance(&h, &x, &p(0.0, 0.3), &p(0.4, 0.2)).unwrap();
    println!("arc {:?} tau {} busemann {:?}", r.slope.value, r.offset, r.busemann_offset);
    assert!((r.slope.value + 1.0).abs() < 0.05);
    let b = r.busemann_offset.unwrap();
    assert!((b - r.offset).abs() < 1e-3, "{b} {}", r.offset);
}

#[test]
fn flat_rays_decay_like_exp_minus_2t() {
    let h = make_halfdisc();
    for (x, p1, p2) in [(0.2, p(0.0, 0.5), p(0.5, 0.3)), (-0.6, p(-0.2, 0.4), p(0.1, 0.3))] {
        let r = asymptotic_ray_distance(&h, &p(x, 0.0), &p1, &p2).unwrap();
        println!("flat {:?}", r.slope.value);
        assert!((r.slope.value + 2.0).abs() < 0.05);
    }
}

#[test]
fn disc_rays_match_hyperbolic_rate() {
    let d = make_ellipsoid(&[1.0, 1.0]).unwrap();
    let r = asymptotic_ray_distance(&d, &p(0.0, 1.0), &p(0.0, 0.0), &p(0.5, 0.0)).unwrap();
    assert!((r.slope.value + 1.0).abs() < 0.02);
}

#[test]
fn corner_limit_is_the_line_cross_ratio() {
    let h = make_halfdisc();
    let a = p(-1.0, 0.0);
    for (p1, p2) in [(p(0.0, 0.3), p(0.0, 0.6)), (p(-0.5, 0.2), p(0.3, 0.7))] {
        let d = limit_distance(&h, &a, &a, &p1, &p2).unwrap();
        let want = corner_constant(&p1, &p2).unwrap();
        println!("corner {d} {want}");
        assert!((d - want).abs() < 1e-6);
    }
}

#[test]
fn distinct_flat_endpoints_converge_to_cross_ratio() {
    let h = make_halfdisc();
    let (x1, x2) = (p(-0.3, 0.0), p(0.4, 0.0));
    let d = limit_distance(&h, &x1, &x2, &p(0.0, 0.5), &p(0.2, 0.4)).unwrap();
    let want = flat_limit(&p(-1.0, 0.0), &p(1.0, 0.0), &x1, &x2).unwrap();
    println!("flat pair {d} {want}");
    assert!((d - want).abs() < 1e-6);
}

#[test]
fn distinct_arc_endpoints_diverge() {
    let h = make_halfdisc();
    let (x1, x2) = (p(0.6, 0.8), p(0.0, 1.0));
    assert!(matches!(
        limit_distance(&h, &x1, &x2, &p(0.0, 0.3), &p(0.2, 0.4)),
        Err(Error::DivergentRays)
    ));
}

