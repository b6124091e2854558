use approx::assert_abs_diff_eq;
use hyperbarrier::barrier_ode::*;
use hyperbarrier::barriers::*;
use hyperbarrier::boundary::Cover;
use hyperbarrier::hypgeo::*;
use hyperbarrier::nonexistence::*;
use hyperbarrier::pde_lab::DiskGrid;
use proptest::prelude::*;

fn plane() -> Space {
    Space::model(2, 1.0).unwrap()
}

fn profile(lambda: f64) -> BarrierProfile {
    decaying_branch_with(&OdeParams::new(2, 1.0, lambda).unwrap(), &ShootOptions::default()).unwrap()
}

fn cover(caps: &[(f64, f64)]) -> Cover {
    Cover::new(caps.iter().map(|&(a, r)| (IdealPoint::at_angle(a), r)).collect(), 0.5).unwrap()
}

/// Decaying profile for n = 2, κ = 1, λ = 1/4 through `h = u/√cosh t` with
/// `u'' = sech²(t) u/4`, integrated by RK4 from `u(40) = 1, u'(40) = 0`.
fn liouville_ratio(d: f64) -> f64 {
    let f = |t: f64, y: [f64; 2]| [y[1], y[0] / (4.0 * t.cosh().powi(2))];
    let steps = 400_000;
    let dt = 40.0 / steps as f64;
    let mut t = 40.0;
    let mut y = [1.0, 0.0];
    let mut at_d = 0.0;
    // step down to d, then down to 0, landing exactly on both
    for target in [d, 0.0] {
        while t > target {
            let h = (t - target).min(dt);
            y = rk4(&f, t, y, -h);
            t -= h;
        }
        if target == d {
            at_d = y[0];
        }
    }
    let u0 = y[0];
    at_d / (u0 * d.cosh().sqrt())
}

fn rk4<F: Fn(f64, [f64; 2]) -> [f64; 2]>(f: &F, t: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = f(t, y);
    let k2 = f(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
    let k3 = f(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
    let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]), y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])]
}

#[test]
fn caps_to_cones() {
    let o = plane().origin();
    let fam = cover_to_cones(&cover(&[(0.3, 0.05f64.sin())]), &o, 0.5).unwrap();
    assert_abs_diff_eq!(fam.cones[0].theta, 0.1, epsilon = 1e-12);
    assert!(fam.relation_holds());
    let tiny = cover_to_cones(&cover(&[(0.0, 1e-7)]), &o, 0.5).unwrap();
    assert_abs_diff_eq!(tiny.cones[0].theta / 2e-7, 1.0, epsilon = 1e-12);
    assert!(cover_to_cones(&cover(&[(0.0, 1.0)]), &o, 1.0).is_err());
    // the knob rejects caps that are admissible for a looser bound
    assert!(cover_to_cones(&cover(&[(0.0, 0.3)]), &o, 0.2).is_err());
    let ax = BarrierAxioms::model(1.0, 1.0).unwrap();
    assert_abs_diff_eq!(max_cap_radius(&ax), (-1f64).exp() / (1.0 + (-2f64).exp()).sqrt(), epsilon = 1e-15);
}

#[test]
fn three_cap_family_and_containment() {
    let sp = plane();
    let c = cover(&[(0.0, 0.02), (2.0, 0.02), (4.0, 0.02)]);
    let fam = cover_to_cones(&c, &sp.origin(), 0.3).unwrap();
    for k in &fam.cones {
        assert_abs_diff_eq!(k.theta, 2.0 * 0.02f64.asin(), epsilon = 1e-12);
    }
    let samples: Vec<IdealPoint> = (0..2000).map(|i| IdealPoint::at_angle(-0.1 + 4.3 * i as f64 / 2000.0)).collect();
    assert!(fam.containment(&sp, &c, &samples).unwrap());
    // a wider cap is not contained in the narrower cone
    let wide = cover(&[(0.0, 0.03), (2.0, 0.02), (4.0, 0.02)]);
    assert!(!fam.containment(&sp, &wide, &samples).unwrap());
}

#[test]
fn single_cap_budget_chain() {
    let sp = plane();
    let pr = profile(0.25);
    let ax = BarrierAxioms::model(1.0, 1.0).unwrap();
    let fam = cover_to_cones(&cover(&[(0.0, 0.05f64.sin())]), &sp.origin(), max_cap_radius(&ax)).unwrap();
    let b = budget(&sp, &fam, &pr, 1.0, &ax, 1.0, Some(1.0)).unwrap();
    let d = (1.0 / 0.05f64.tan()).ln() - 1.0;
    assert_abs_diff_eq!(d / 2.0, 0.9975, epsilon = 1e-4);
    let k = &b.contributions[0];
    assert_abs_diff_eq!(k.distance, d, epsilon = 1e-12);
    assert_abs_diff_eq!(k.value, liouville_ratio(d), epsilon = 1e-6);
    assert_abs_diff_eq!(k.bound, pr.decay_c * (-d / 2.0).exp() / pr.h_t0(), epsilon = 1e-12);
    assert!(k.value <= k.bound);
    assert!(b.passed);
    assert_eq!(b.below_threshold, Some(true));
    assert_abs_diff_eq!(b.exponent, 0.5);
    assert_abs_diff_eq!(b.dim_threshold, 0.5);
    // the distance agrees with the barrier geometry
    let bar = build_cone_barrier(&sp, &fam.cones[0].direction, 0.1, 1.0).unwrap();
    assert_abs_diff_eq!(bar.apex_distance(&sp), d, epsilon = 1e-9);
}

#[test]
fn budget_additivity_and_errors() {
    let sp = plane();
    let pr = profile(0.2);
    let ax = BarrierAxioms::model(1.0, 1.0).unwrap();
    let o = sp.origin();
    let empty = cover_to_cones(&Cover::new(vec![], 0.5).unwrap(), &o, 0.3).unwrap();
    assert_eq!(budget(&sp, &empty, &pr, 1.0, &ax, 1.0, None).unwrap().total, 0.0);
    let one = cover_to_cones(&cover(&[(1.0, 0.05)]), &o, 0.3).unwrap();
    let two = cover_to_cones(&cover(&[(1.0, 0.05), (1.0, 0.05)]), &o, 0.3).unwrap();
    let b1 = budget(&sp, &one, &pr, 2.0, &ax, 1.0, None).unwrap();
    let b2 = budget(&sp, &two, &pr, 2.0, &ax, 1.0, None).unwrap();
    assert_abs_diff_eq!(b2.total, 2.0 * b1.total, epsilon = 1e-15);
    let mut raw = pr.clone();
    raw.certified = false;
    assert!(budget(&sp, &one, &raw, 1.0, &ax, 1.0, None).is_err());
    // a cone wider than θ₀ is refused
    let wide = cover_to_cones(&cover(&[(0.0, 0.4)]), &o, 0.9).unwrap();
    assert!(budget(&sp, &wide, &pr, 1.0, &ax, 1.0, None).is_err());
}

#[test]
fn superposed_supersolution_on_omega0() {
    let sp = plane();
    let pr = profile(0.25);
    let fam = cover_to_cones(&cover(&[(0.0, 0.05), (2.5, 0.05)]), &sp.origin(), 0.3).unwrap();
    let v = superposed_supersolution(&sp, &fam, &pr, 1.0, 1.0).unwrap();
    assert!(v.in_omega0(&sp, &sp.origin()));
    let samples = v.sample_omega0(&sp, 1000, 4.0, 0.01, 17).unwrap();
    let rep = verify_supersolution(&sp, &v, &samples, 1e-4, 1e-3).unwrap();
    assert!(rep.passed, "{rep:?}");
    // one cap reduces to the single barrier
    let single = cover_to_cones(&cover(&[(0.0, 0.05)]), &sp.origin(), 0.3).unwrap();
    let vs = superposed_supersolution(&sp, &single, &pr, 1.0, 1.0).unwrap();
    let bar = build_cone_barrier(&sp, &single.cones[0].direction, single.cones[0].theta, 1.0).unwrap();
    let direct = make_supersolution(&sp, bar.surface, pr.clone(), 1.0).unwrap();
    for x in &samples[..20] {
        if vs.in_omega0(&sp, x) {
            assert_eq!(vs.value(&sp, x).unwrap(), direct.eval(&sp, x).unwrap());
        }
    }
    let far = superposed_supersolution(&sp, &fam, &pr, 1.0, 1.0).unwrap();
    assert!(far.sample_omega0(&sp, 10, 0.0, 50.0, 1).is_err());
}

#[test]
fn omega0_masks() {
    let grid = DiskGrid::new(1.0 / 50.0, 1.0).unwrap();
    let sp = plane();
    let full = omega0_mask(&grid, &[], 0.0).unwrap();
    let inside_clip = (0..grid.size()).flat_map(|i| (0..grid.size()).map(move |j| (i, j))).filter(|&(i, j)| {
        let x = grid.node(i, j);
        x[0].hypot(x[1]) < grid.clip
    });
    assert_eq!(full.count(), inside_clip.count());
    let z = TangentVec::from_spatial(sp.origin(), &[1.0, 0.0]).unwrap();
    let bar = build_cone_barrier(&sp, &z, 0.3, 0.5).unwrap();
    let m0 = omega0_mask(&grid, std::slice::from_ref(&bar), 0.0).unwrap();
    let m1 = omega0_mask(&grid, std::slice::from_ref(&bar), 1.0).unwrap();
    assert!(m1.subset_of(&m0));
    assert!(m1.count() < m0.count());
    // on the axis the surface sits at t(θ) − c
    let edge = t_theta(1.0, 0.3).unwrap() - 0.5;
    let mut checked = 0;
    for i in 0..grid.size() {
        let x = grid.node(i, grid.half());
        let rho = grid.geodesic_radius(x);
        if x[0].hypot(x[1]) >= grid.clip || (rho - edge).abs() < 0.05 || (rho - edge + 1.0).abs() < 0.05 {
            continue;
        }
        let ahead = x[0] > 0.0;
        assert_eq!(m0.get(i, grid.half()), !ahead || rho < edge, "x = {x:?}");
        assert_eq!(m1.get(i, grid.half()), !ahead || rho < edge - 1.0, "x = {x:?}");
        checked += 1;
    }
    assert!(checked > 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exponent_law(lambda in 0.0f64..=0.25, lo in 0.02f64..0.06) {
        let sp = plane();
        let pr = profile(lambda);
        let thetas = [lo, 2.0 * lo, 4.0 * lo];
        let slope = exponent_slope(&sp, &pr, &thetas, 1.0).unwrap();
        prop_assert!(slope >= 0.5 - 0.05, "slope {}", slope);
    }
}
