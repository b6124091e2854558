use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use hyperbarrier::boundary::*;
use hyperbarrier::hypgeo::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plane() -> Space {
    Space::model(2, 1.0).unwrap()
}

fn eps() -> Vec<f64> {
    geometric_scales(0.05, 2e-4, 8)
}

fn shifted_origin(sp: &Space, d: f64) -> SpacePoint {
    let v = TangentVec::from_spatial(sp.origin(), &[0.3, 0.8]).unwrap().normalized().unwrap();
    sp.exp(&v, d)
}

#[test]
fn gromov_product_trivia() {
    let sp = plane();
    let o = sp.origin();
    let p = SpacePoint::from_spatial(&[0.7, -0.2]);
    assert_abs_diff_eq!(gromov_product(&sp, &o, &p, &p), sp.dist(&o, &p), epsilon = 1e-12);
    let v = TangentVec::from_spatial(o.clone(), &[1.0, 0.0]).unwrap();
    let a = sp.exp(&v, 1.3);
    let b = sp.exp(&v, -0.4);
    assert_abs_diff_eq!(gromov_product(&sp, &o, &a, &b), 0.0, epsilon = 1e-12);
}

#[test]
fn ideal_gromov_product_model_values() {
    let sp = plane();
    let o = sp.origin();
    let xi = IdealPoint::at_angle(0.4);
    assert_eq!(gromov_product_ideal(&sp, &o, &xi, &xi, 30.0).unwrap(), f64::INFINITY);
    let g = gromov_product_ideal(&sp, &o, &IdealPoint::at_angle(0.0), &IdealPoint::at_angle(PI), 30.0).unwrap();
    assert_abs_diff_eq!(g, 0.0, epsilon = 1e-6);
    let g = gromov_product_ideal(&sp, &o, &IdealPoint::at_angle(0.0), &IdealPoint::at_angle(PI / 2.0), 30.0).unwrap();
    assert_abs_diff_eq!(g, 0.5f64.sqrt().ln().abs(), epsilon = 1e-6);
    assert_abs_diff_eq!(g, 0.34657, epsilon = 1e-5);
    assert!(gromov_product_ideal(&sp, &o, &xi, &IdealPoint::at_angle(1.0), 5.0).is_err());
}

#[test]
fn visual_distance_values() {
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let a = IdealPoint::at_angle(0.0);
    assert_eq!(visual_dist(&m, &a, &a), 0.0);
    assert_abs_diff_eq!(visual_dist(&m, &a, &IdealPoint::at_angle(PI)), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(visual_dist(&m, &a, &IdealPoint::at_angle(PI / 2.0)), 0.70711, epsilon = 1e-5);
    // κ only rescales the Gromov product, not the visual metric
    let sp4 = Space::model(2, 4.0).unwrap();
    let m4 = VisualMetric::at_origin(2, 4.0).unwrap();
    let b = IdealPoint::at_angle(1.1);
    let r = visual_dist_ray_limit(&sp4, &m4, &a, &b, 30.0).unwrap();
    assert_abs_diff_eq!(r, (0.55f64).sin(), epsilon = 1e-6);
}

#[test]
fn horizon_is_injective() {
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let v = TangentVec::from_spatial(sp.origin(), &[0.6, 0.8]).unwrap();
    let a = sp.horizon(&v).unwrap();
    let b = sp.horizon(&v.neg()).unwrap();
    assert_abs_diff_eq!(visual_dist(&m, &a, &b), 1.0, epsilon = 1e-12);
    assert_eq!(visual_dist(&m, &a, &a), 0.0);
}

#[test]
fn ideal_point_equality_across_base_points() {
    // a ray from another base point converging to the same ideal point
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let xi = IdealPoint::at_angle(0.7);
    let q = SpacePoint::from_spatial(&[-0.4, 1.1]);
    let other = IdealPoint::from_ray(&xi.direction_at(&q)).unwrap();
    assert!(visual_dist(&m, &xi, &other) < 1e-7);
    // rays to the same ideal point approach each other along horospheres
    let gap = |t: f64| sp.dist(&sp.exp(xi.ray(), t), &sp.exp(other.ray(), t + sp.busemann(&xi, &q)));
    assert!(gap(12.0) < 1e-4);
    assert!(gap(12.0) < gap(6.0) * 0.01);
}

#[test]
fn basepoint_certificates() {
    let sp = plane();
    let o = sp.origin();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pairs: Vec<(IdealPoint, IdealPoint)> = (0..100)
        .map(|_| {
            let a = IdealPoint::from_ray(&sp.random_unit_tangent(&o, &mut rng)).unwrap();
            let b = IdealPoint::from_ray(&sp.random_unit_tangent(&o, &mut rng)).unwrap();
            (a, b)
        })
        .collect();
    let same = basepoint_certificate(&sp, &o, &o, &pairs).unwrap();
    assert!(same.passed);
    assert_abs_diff_eq!(same.min_ratio, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(same.max_ratio, 1.0, epsilon = 1e-12);
    let o2 = shifted_origin(&sp, 1.0);
    let rep = basepoint_certificate(&sp, &o, &o2, &pairs).unwrap();
    assert!(rep.passed);
    assert!(rep.min_ratio >= (-1.0f64).exp() - 1e-12 && rep.max_ratio <= 1.0f64.exp() + 1e-12);
    // corrupt one distance so its ratio leaves the band
    let m1 = VisualMetric::new(o.clone(), 1.0).unwrap();
    let m2 = VisualMetric::new(o2.clone(), 1.0).unwrap();
    let mut dists: Vec<(f64, f64)> =
        pairs.iter().map(|(a, b)| (visual_dist(&m1, a, b), visual_dist(&m2, a, b))).collect();
    dists[3].0 = dists[3].1 * (1.0f64.exp() + 1e-6);
    let bad = certify_ratios(1.0, 1.0, &dists);
    assert!(!bad.passed);
    assert!(basepoint_certificate(&sp, &o, &o2, &[]).is_err());
}

#[test]
fn angle_bound_values() {
    let sp = plane();
    let o = sp.origin();
    let r = angle_bound_check(&sp, &o, &IdealPoint::at_angle(0.0), &IdealPoint::at_angle(PI)).unwrap();
    assert!(r.passed);
    assert_abs_diff_eq!(r.visual, 1.0, epsilon = 1e-6);
    let r = angle_bound_check(&sp, &o, &IdealPoint::at_angle(0.3), &IdealPoint::at_angle(0.5)).unwrap();
    assert!(r.passed);
    assert_abs_diff_eq!(r.sin_half, 0.099833, epsilon = 1e-6);
    assert_abs_diff_eq!(r.visual, 0.099833, epsilon = 1e-6);
    let mut worst: f64 = 0.0;
    for i in 1..=100 {
        let th = PI * i as f64 / 100.0;
        let r = angle_bound_check(&sp, &o, &IdealPoint::at_angle(0.2), &IdealPoint::at_angle(0.2 + th)).unwrap();
        worst = worst.max(r.deviation);
    }
    assert!(worst < 1e-6, "{worst}");
    assert!(angle_bound_check(&sp, &o, &IdealPoint::at_angle(0.2), &IdealPoint::at_angle(0.2)).is_err());
}

#[test]
fn dimension_of_model_sets() {
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let finite = BoundarySet::FinitePoints {
        points: vec![IdealPoint::at_angle(0.1), IdealPoint::at_angle(1.0), IdealPoint::at_angle(4.0)],
    };
    assert!(box_dimension(&sp, &finite, &m, &eps()).unwrap().estimate <= 0.05);
    let circle = box_dimension(&sp, &BoundarySet::circle(), &m, &eps()).unwrap();
    assert_abs_diff_eq!(circle.estimate, 1.0, epsilon = 0.05);
    let cantor = box_dimension(&sp, &BoundarySet::middle_thirds(9), &m, &eps()).unwrap();
    assert_abs_diff_eq!(cantor.estimate, 2f64.ln() / 3f64.ln(), epsilon = 0.05);
    assert_eq!(cantor.csv_rows("cantor").len(), 8);
}

#[test]
fn dimension_preconditions() {
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let set = BoundarySet::circle();
    assert!(box_dimension(&sp, &set, &m, &[0.1, 0.05, 0.02]).is_err());
    assert!(box_dimension(&sp, &set, &m, &[0.1, 0.05, 0.02, 0.01]).is_err());
    assert!(box_dimension(&sp, &set, &m, &[0.1, 0.1, 0.01, 0.001]).is_err());
    assert!(box_dimension(&sp, &set, &m, &[1.5, 0.1, 0.01, 0.001]).is_err());
}

#[test]
fn dimension_monotone_under_inclusion() {
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let small = BoundarySet::middle_thirds(9);
    let big = BoundarySet::CapUnion { caps: vec![(IdealPoint::at_angle(PI / 4.0), PI / 4.0 + 0.01)] };
    let a = box_dimension(&sp, &small, &m, &eps()).unwrap();
    let b = box_dimension(&sp, &big, &m, &eps()).unwrap();
    assert!(a.estimate <= b.estimate);
    for (x, y) in a.counts.iter().zip(&b.counts) {
        assert!(x.1 <= y.1);
    }
}

#[test]
fn premeasure_examples() {
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let three = BoundarySet::FinitePoints {
        points: vec![IdealPoint::at_angle(0.1), IdealPoint::at_angle(1.0), IdealPoint::at_angle(4.0)],
    };
    assert_abs_diff_eq!(premeasure(&sp, &three, 0.0, 1e-3, &m).unwrap(), 3.0);
    // about π/δ caps of diameter δ: π·δ for s = 2
    let circle = premeasure(&sp, &BoundarySet::circle(), 2.0, 0.01, &m).unwrap();
    assert!(circle <= 0.1 && circle >= PI * 0.01 * 0.9, "{circle}");
    let cantor = BoundarySet::middle_thirds(9);
    let coarse = premeasure(&sp, &cantor, 0.9, 0.05, &m).unwrap();
    let fine = premeasure(&sp, &cantor, 0.9, 0.005, &m).unwrap();
    assert!(fine < coarse);
    let mut last = f64::INFINITY;
    for s in [0.0, 0.3, 0.6, 0.9, 1.2] {
        let v = premeasure(&sp, &cantor, s, 0.01, &m).unwrap();
        assert!(v <= last);
        last = v;
    }
}

#[test]
fn cover_inflation_and_validity() {
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0).unwrap();
    let set = BoundarySet::middle_thirds(6);
    let cover = greedy_cover(&sp, &set, &m, 0.01, 0.7).unwrap();
    assert!(cover.covers(&m, &set.sample(1e-4).unwrap()));
    let l: f64 = 1.7;
    assert!(cover.inflated(l).diameter_sum() <= l.powf(0.7) * cover.diameter_sum() * (1.0 + 1e-12));
    assert!(Cover::new(vec![(IdealPoint::at_angle(0.0), 1.5)], 1.0).is_err());
}

#[test]
fn dimension_independent_of_base_point() {
    let sp = plane();
    let o = sp.origin();
    let o2 = shifted_origin(&sp, 1.0);
    let same = basepoint_dim_invariance(&sp, &BoundarySet::middle_thirds(9), &o, &o, &eps()).unwrap();
    assert!(same.passed);
    assert_eq!(same.first, same.second);
    let cantor = basepoint_dim_invariance(&sp, &BoundarySet::middle_thirds(9), &o, &o2, &eps()).unwrap();
    assert!(cantor.passed, "{cantor:?}");
    let caps = BoundarySet::CapUnion { caps: vec![(IdealPoint::at_angle(0.3), 0.2), (IdealPoint::at_angle(2.0), 0.5)] };
    let rep = basepoint_dim_invariance(&sp, &caps, &o, &o2, &eps()).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(basepoint_dim_invariance(&sp, &caps, &o, &shifted_origin(&sp, 2.5), &eps()).is_err());
}

#[test]
fn sphere_caps_sample_densely() {
    let sp = Space::model(3, 1.0).unwrap();
    let m = VisualMetric::at_origin(3, 1.0).unwrap();
    let c = IdealPoint::from_direction(&[0.0, 0.6, 0.8]).unwrap();
    let set = BoundarySet::CapUnion { caps: vec![(c.clone(), 0.3)] };
    let pts = set.sample(0.01).unwrap();
    let r = (0.15f64).sin();
    assert!(pts.iter().all(|p| visual_dist(&m, &c, p) <= r + 1e-12));
    // every probe in the cap has a sample within the resolution
    let probe = BoundarySet::CapUnion { caps: vec![(c, 0.29)] }.sample(0.037).unwrap();
    for x in &probe {
        let near = pts.iter().map(|p| visual_dist(&m, p, x)).fold(f64::INFINITY, f64::min);
        assert!(near <= 0.01);
    }
    let _ = sp;
}

#[test]
fn generator_json_roundtrip() {
    let set = BoundarySet::middle_thirds(4);
    let js = serde_json::to_string(&set).unwrap();
    assert!(js.contains("\"kind\":\"cantor_circle\""));
    let back: BoundarySet = serde_json::from_str(&js).unwrap();
    assert_eq!(back, set);
}

fn angle() -> impl Strategy<Value = f64> {
    0.0..(2.0 * PI)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ray_limit_matches_exact(a in angle(), b in angle(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let sp = plane();
        let m = VisualMetric::new(SpacePoint::from_spatial(&[x, y]), 1.0).unwrap();
        let (xi, eta) = (IdealPoint::at_angle(a), IdealPoint::at_angle(b));
        prop_assume!(visual_dist(&m, &xi, &eta) > 1e-6);
        let r = visual_dist_ray_limit(&sp, &m, &xi, &eta, RAY_T).unwrap();
        prop_assert!((r - visual_dist(&m, &xi, &eta)).abs() <= 1e-6);
    }

    #[test]
    fn visual_triangle_inequality(a in angle(), b in angle(), c in angle(), x in -1.0f64..1.0) {
        let m = VisualMetric::new(SpacePoint::from_spatial(&[x, 0.5]), 1.0).unwrap();
        let (p, q, r) = (IdealPoint::at_angle(a), IdealPoint::at_angle(b), IdealPoint::at_angle(c));
        let d = |u: &IdealPoint, v: &IdealPoint| visual_dist(&m, u, v);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-9);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() <= 1e-15);
        prop_assert!(d(&p, &q) <= 1.0);
    }

    #[test]
    fn gromov_basepoint_shift(a in angle(), b in angle(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let sp = plane();
        let o1 = sp.origin();
        let o2 = SpacePoint::from_spatial(&[x, y]);
        let (xi, eta) = (IdealPoint::at_angle(a), IdealPoint::at_angle(b));
        prop_assume!(visual_dist(&VisualMetric::at_origin(2, 1.0).unwrap(), &xi, &eta) > 1e-6);
        let g1 = gromov_product_ideal(&sp, &o1, &xi, &eta, RAY_T).unwrap();
        let g2 = gromov_product_ideal(&sp, &o2, &xi, &eta, RAY_T).unwrap();
        prop_assert!((g1 - g2).abs() <= sp.dist(&o1, &o2) + 1e-6);
    }

    #[test]
    fn finite_gromov_bounds(x1 in -2.0f64..2.0, y1 in -2.0f64..2.0, x2 in -2.0f64..2.0, y2 in -2.0f64..2.0) {
        let sp = plane();
        let o = sp.origin();
        let p = SpacePoint::from_spatial(&[x1, y1]);
        let q = SpacePoint::from_spatial(&[x2, y2]);
        let g = gromov_product(&sp, &o, &p, &q);
        prop_assert!(g >= -1e-12 && g <= sp.dist(&o, &p).min(sp.dist(&o, &q)) + 1e-12);
        prop_assert!((g - gromov_product(&sp, &o, &q, &p)).abs() < 1e-12);
    }
}
