use approx::assert_abs_diff_eq;
use hyperbarrier::error::Error;
use hyperbarrier::pde_lab::*;
use proptest::prelude::*;

fn grid(n: u32) -> DiskGrid {
    DiskGrid::new(1.0 / n as f64, 1.0).unwrap()
}

/// First Dirichlet eigenvalue of the geodesic disk `B_R` (κ = 1) by shooting
/// `u'' + coth(r) u' + λu = 0` from the regular series at the center.
fn radial_lambda1(radius: f64) -> f64 {
    let end = |lambda: f64| {
        let f = |r: f64, y: [f64; 2]| [y[1], -y[1] / r.tanh() - lambda * y[0]];
        let r0 = 1e-4;
        let mut y = [1.0 - lambda * r0 * r0 / 4.0, -lambda * r0 / 2.0];
        let steps = 20_000;
        let h = (radius - r0) / steps as f64;
        let mut r = r0;
        for _ in 0..steps {
            let k1 = f(r, y);
            let k2 = f(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = f(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for c in 0..2 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            r += h;
        }
        y[0]
    };
    // below λ₁ the solution stays positive up to R, just above it crosses once
    let (mut lo, mut hi) = (0.0, 0.25 + 1.5 * (2.405 / radius).powi(2));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if end(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn small_disk_is_nearly_euclidean() {
    let e = lambda1(&DomainSpec::disk(0.5), &grid(200)).unwrap();
    let bessel = 2.404825557695773f64.powi(2) / 0.25;
    assert!((e.lambda / bessel - 1.0).abs() < 0.05, "{}", e.lambda);
    let exact = radial_lambda1(0.5);
    assert_abs_diff_eq!(exact, 23.4652, epsilon = 1e-3);
    assert!((e.lambda / exact - 1.0).abs() < 2e-4, "{} vs {exact}", e.lambda);
    assert!(e.residual <= EIGEN_TOL);
}

#[test]
fn disk_of_radius_two_against_radial_shooting() {
    let exact = radial_lambda1(2.0);
    assert_abs_diff_eq!(exact, 1.767253, epsilon = 2e-6);
    let e = lambda1(&DomainSpec::disk(2.0), &grid(200)).unwrap();
    assert!((e.lambda / exact - 1.0).abs() < 2e-5, "{} vs {exact}", e.lambda);
    assert!(e.field.values.iter().all(|v| v.signum() == e.field.values[0].signum()));
}

#[test]
fn second_order_in_the_spacing() {
    let l: Vec<f64> = [50, 100, 200].iter().map(|&n| lambda1(&DomainSpec::disk(2.0), &grid(n)).unwrap().lambda).collect();
    let ratio = (l[0] - l[1]) / (l[1] - l[2]);
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}, {l:?}");
}

#[test]
fn nested_domains_order_eigenvalues() {
    let g = grid(100);
    let p2 = assemble(&DomainSpec::disk(2.0), &g).unwrap();
    let p3 = assemble(&DomainSpec::disk(3.0), &g).unwrap();
    assert!(p2.mask().subset_of(&p3.mask()));
    assert!(p3.lambda1().unwrap().lambda < p2.lambda1().unwrap().lambda);
    let cone = DomainSpec { kind: DomainKind::TruncatedCone { direction: 0.4, theta: 0.6, radius: 3.0 }, truncate: None };
    let pc = assemble(&cone, &g).unwrap();
    assert!(pc.mask().subset_of(&p3.mask()));
    assert!(pc.lambda1().unwrap().lambda > p3.lambda1().unwrap().lambda);
    assert_eq!(p3.a.max_asymmetry(), 0.0);
    assert!(matches!(assemble(&DomainSpec::disk(0.01), &g), Err(Error::InvalidParameter(_)) | Err(Error::Precondition(_)) | Err(Error::Domain(_))));
}

#[test]
fn trends_decrease_with_radius() {
    let t = threshold_trend(DomainSpec::disk, &[1.5, 2.5, 3.5], &grid(100)).unwrap();
    assert!(t.monotone, "{:?}", t.rows);
    assert!(t.rows.iter().all(|r| r.1 > 0.25));
    let half = |r: f64| DomainSpec::truncated(DomainKind::HalfPlane { t: -0.5, direction: 0.0 }, r);
    let th = threshold_trend(half, &[2.0, 3.0, 4.0], &grid(100)).unwrap();
    assert!(th.monotone, "{:?}", th.rows);
    assert!(threshold_trend(DomainSpec::disk, &[1.0, 2.0], &grid(50)).is_err());
}

#[test]
fn nonlinearity_hypotheses() {
    for f in [NonlinearitySpec::AllenCahn, NonlinearitySpec::Tanh, NonlinearitySpec::Arctan, NonlinearitySpec::Rational, NonlinearitySpec::Linear { lambda: 0.3 }] {
        f.check_hypotheses().unwrap();
    }
    assert_eq!(NonlinearitySpec::AllenCahn.lambda_eff(), 1.0);
    assert_eq!(NonlinearitySpec::AllenCahn.hypothesis_range(), 1.0);
    // just past √2 Allen–Cahn would break the bound
    let ac = NonlinearitySpec::AllenCahn;
    assert!(ac.f(1.5).abs() > 1.5);
    assert!(ac.f(1.4).abs() <= 1.4);
    let toml_like: NonlinearitySpec = serde_json::from_str(r#"{"kind":"linear","lambda":0.2}"#).unwrap();
    assert_eq!(toml_like, NonlinearitySpec::Linear { lambda: 0.2 });
}

#[test]
fn linear_problem_below_lambda1_has_only_zero() {
    let p = assemble(&DomainSpec::disk(2.0), &grid(80)).unwrap();
    let f = NonlinearitySpec::Linear { lambda: 1.0 };
    let init = p.sample(|x| 1.0 + x.coords()[1]);
    let u = solve_semilinear(&p, &f, &init, &NewtonOptions::default()).unwrap();
    assert!(u.max_abs().0 < 1e-8, "{}", u.max_abs().0);
}

#[test]
fn allen_cahn_on_a_large_disk() {
    let p = assemble(&DomainSpec::disk(5.0), &grid(100)).unwrap();
    assert!(p.lambda1().unwrap().lambda < 1.0);
    let ac = NonlinearitySpec::AllenCahn;
    let opts = NewtonOptions::default();
    let u = solve_semilinear(&p, &ac, &vec![0.5; p.len()], &opts).unwrap();
    assert!(u.residual <= opts.tol);
    let (peak, _) = u.max_abs();
    assert!(peak > 0.5 && peak < 1.0, "peak {peak}");
    assert!(u.values.iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(allen_cahn_bound_check(&u).passed);
    // odd nonlinearity: the negated start gives the negated solution
    let w = solve_semilinear(&p, &ac, &vec![-0.5; p.len()], &opts).unwrap();
    for (a, b) in u.values.iter().zip(&w.values) {
        assert_abs_diff_eq!(*a, -*b, epsilon = 1e-8);
    }
    let mut scaled = u.clone();
    scaled.values.iter_mut().for_each(|v| *v *= 1.5);
    let rep = allen_cahn_bound_check(&scaled);
    assert!(!rep.passed && rep.max_abs > 1.0);
    // comparison with the constant supersolution 1, and a failed precondition below u
    let ones = vec![1.0; p.len()];
    assert!(comparison_check(&p, &u, &ones).unwrap().passed);
    let below = vec![-1.0; p.len()];
    assert!(matches!(comparison_check(&p, &u, &below), Err(Error::Precondition(_))));
}

#[test]
fn delta_r2_closed_form_and_fd() {
    assert_abs_diff_eq!(delta_r2_closed(1.0, 1.0), 2.0 + 2.0 / 1f64.tanh(), epsilon = 1e-15);
    assert_abs_diff_eq!(delta_r2_closed(1.0, 1.0), 4.6261, epsilon = 1e-4);
    assert_abs_diff_eq!(delta_r2_closed(1.0, 1e-6), 4.0, epsilon = 1e-9);
    let g = grid(100);
    let pts: Vec<[f64; 2]> = [0.5, 1.0, 2.0, 3.0].iter().map(|&r| [g.disk_radius(r) * 0.6, g.disk_radius(r) * 0.8]).collect();
    let rep = delta_r2_check(&g, &pts).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(rep.envelope_excess <= 0.0);
    assert_abs_diff_eq!(rep.rows[1][3], 4.6261, epsilon = 1e-4);
    assert!(delta_r2_check(&g, &[[0.0, 0.0]]).is_err());
}

#[test]
fn eigenfunction_as_subsolution() {
    let p = assemble(&DomainSpec::disk(1.5), &grid(100)).unwrap();
    let e = p.lambda1().unwrap();
    let s = e.field.values.iter().sum::<f64>().signum();
    let v: Vec<f64> = e.field.values.iter().map(|x| x * s).collect();
    let rep = prop_lambda_check(&p, &v, e.lambda, 1e-4).unwrap();
    assert!(rep.passed);
    let up = prop_lambda_check(&p, &v, e.lambda + 0.1, 1e-4).unwrap();
    assert!(up.passed && up.min_residual > 0.0);
    assert!(matches!(prop_lambda_check(&p, &v, e.lambda - 0.1, 1e-4), Err(Error::Precondition(_))));
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    assert!(prop_lambda_check(&p, &neg, e.lambda, 1e-4).is_err());
}

#[test]
fn barrier_complement_and_mask_domains() {
    let g = grid(60);
    let caps = vec![CapSpec { angle: 0.0, radius: 0.2 }, CapSpec { angle: 3.0, radius: 0.2 }];
    let spec = DomainSpec::truncated(DomainKind::BarrierComplement { caps, offset: 0.5 }, 3.0);
    let p = assemble(&spec, &g).unwrap();
    let full = assemble(&DomainSpec::disk(3.0), &g).unwrap();
    assert!(p.mask().subset_of(&full.mask()));
    assert!(p.len() < full.len());
    let from_mask = assemble(&DomainSpec { kind: DomainKind::Omega0 { mask: p.mask() }, truncate: None }, &g).unwrap();
    assert_eq!(from_mask.nodes, p.nodes);
}

#[test]
fn mask_serialization_roundtrip() {
    let g = grid(40);
    let m = assemble(&DomainSpec::disk(2.0), &g).unwrap().mask();
    let text = serde_json::to_string(&DomainKind::Omega0 { mask: m.clone() }).unwrap();
    assert!(text.contains("\"kind\":\"omega0\""));
    let back: DomainKind = serde_json::from_str(&text).unwrap();
    assert_eq!(back, DomainKind::Omega0 { mask: m });
    assert!(serde_json::from_str::<DomainSpec>(r#"{"kind":{"kind":"geodesic_disk","radius":1.0},"extra":1}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn odd_nonlinearities_stay_below_linear(u in -1.0f64..1.0) {
        for f in [NonlinearitySpec::AllenCahn, NonlinearitySpec::Tanh, NonlinearitySpec::Arctan, NonlinearitySpec::Rational] {
            prop_assert!((f.f(u) + f.f(-u)).abs() < 1e-15);
            prop_assert!(f.f(u).abs() <= f.lambda_eff() * u.abs() + 1e-15);
        }
    }

    #[test]
    fn geodesic_radius_inverts_disk_radius(r in 0.0f64..8.0) {
        let g = grid(100);
        prop_assert!((g.geodesic_radius([g.disk_radius(r), 0.0]) - r).abs() < 1e-9 * (1.0 + r));
    }
}
