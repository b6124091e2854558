use approx::assert_abs_diff_eq;
use hyperbarrier::barrier_ode::*;
use proptest::prelude::*;

fn fast(n: usize, kappa: f64, lambda: f64) -> BarrierProfile {
    decaying_branch_with(&OdeParams::new(n, kappa, lambda).unwrap(), &ShootOptions::default()).unwrap()
}

fn gd(t: f64) -> f64 {
    2.0 * (t / 2.0).tanh().atan()
}

/// Classical RK4 for `y' = f(t, y)`, fixed step, run backward from `t_end` to 0.
/// Returns `(t, y0)` at every step, ascending in `t`.
fn rk4_backward(f: impl Fn(f64, [f64; 2]) -> [f64; 2], y_end: [f64; 2], t_end: f64, dt: f64) -> Vec<(f64, f64)> {
    let steps = (t_end / dt).round() as usize;
    let mut y = y_end;
    let mut out = vec![(t_end, y[0])];
    for i in (0..steps).rev() {
        let t = (i + 1) as f64 * dt;
        let h = -dt;
        let k1 = f(t, y);
        let k2 = f(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = f(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for d in 0..2 {
            y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }
        out.push((i as f64 * dt, y[0]));
    }
    out.reverse();
    out
}

#[test]
fn lambda_zero_matches_gudermannian() {
    let pr = fast(2, 1.0, 0.0);
    let exact = |t: f64| std::f64::consts::FRAC_PI_2 - gd(t);
    let scale = pr.eval(1.0).unwrap().0 / exact(1.0);
    let mut worst: f64 = 0.0;
    let mut t = 0.0;
    while t <= 10.0 {
        worst = worst.max((pr.eval(t).unwrap().0 - scale * exact(t)).abs());
        t += 0.0137;
    }
    assert!(worst <= 1e-6, "{worst}");
    assert_eq!(pr.t0, 0.0);
    // h(1)/h(0) = (π/2 - gd 1)/(π/2)
    assert_abs_diff_eq!(pr.eval(1.0).unwrap().0 * std::f64::consts::FRAC_PI_2, 0.70502684, epsilon = 1e-6);
    assert_abs_diff_eq!(pr.decay_c, 1.0, epsilon = 1e-12);
}

#[test]
fn tail_slopes() {
    assert_abs_diff_eq!(tail_log_slope(&fast(2, 1.0, 0.25), 10.0, 20.0).unwrap(), -0.5, epsilon = 1e-3);
    assert_abs_diff_eq!(tail_log_slope(&fast(3, 1.0, 1.0), 10.0, 20.0).unwrap(), -1.0, epsilon = 1e-3);
    assert_abs_diff_eq!(tail_log_slope(&fast(2, 4.0, 1.0), 10.0, 20.0).unwrap(), -1.0, epsilon = 1e-3);
    assert_abs_diff_eq!(tail_log_slope(&fast(2, 1.0, 0.21), 10.0, 20.0).unwrap(), -0.7, epsilon = 1e-3);
}

#[test]
fn critical_three_dim_is_sech() {
    let pr = fast(3, 1.0, 1.0);
    for i in (0..pr.t.len()).step_by(37) {
        let t = pr.t[i];
        assert_abs_diff_eq!(pr.h[i], 1.0 / t.cosh(), epsilon = 1e-10);
        assert_abs_diff_eq!(pr.hp[i], -t.tanh() / t.cosh(), epsilon = 1e-10);
    }
    // h e^t = 2/(1 + e^{-2t}) increases to 2
    assert_abs_diff_eq!(pr.decay_c, 2.0, epsilon = 1e-9);
}

#[test]
fn critical_planar_constant_from_liouville_oracle() {
    // h = u / sqrt(cosh t) turns the equation into u'' = sech²(t)/4 · u with u(∞) = 1
    let u = rk4_backward(|t, y| [y[1], 0.25 / t.cosh().powi(2) * y[0]], [1.0, 0.0], 60.0, 1e-3);
    let u0 = u[0].1;
    let oracle = u
        .iter()
        .step_by(10)
        .map(|(t, v)| v / u0 / t.cosh().sqrt() * (t / 2.0).exp())
        .fold(0.0, f64::max);
    assert_abs_diff_eq!(oracle, 1.19814023, epsilon = 1e-8);
    assert_abs_diff_eq!(fast(2, 1.0, 0.25).decay_c, 1.19814023, epsilon = 1e-8);
    // κ = 4 is the same profile with time halved
    assert_abs_diff_eq!(fast(2, 4.0, 1.0).decay_c, 1.19814023, epsilon = 1e-8);
    assert_eq!(fast(2, 1.0, 0.25).t0, 0.0);
}

#[test]
fn subcritical_constant_from_rk4_oracle() {
    let p = OdeParams::new(2, 1.0, 0.21).unwrap();
    let g = rk4_backward(|t, y| [y[1], p.accel(t, y[0], y[1])], [1e-8, -0.7e-8], 80.0, 1e-3);
    let h0 = g[0].1;
    let oracle = g.iter().step_by(10).map(|(t, v)| v / h0 * (t / 2.0).exp()).fold(0.0, f64::max);
    assert_abs_diff_eq!(oracle, 1.02091147, epsilon = 1e-8);
    assert_abs_diff_eq!(fast(2, 1.0, 0.21).decay_c, 1.02091147, epsilon = 1e-8);
}

#[test]
fn slow_branch_fails_certificate() {
    let p = OdeParams::new(2, 1.0, 0.21).unwrap();
    let slow = shoot(&p, Branch::Slow, &ShootOptions::default()).unwrap();
    let (_, report) = decay_certificate(&slow).unwrap();
    assert!(!report.passed);
    assert!(report.growth_ratio > 10.0);
    assert_abs_diff_eq!(tail_log_slope(&slow, 10.0, 20.0).unwrap(), -0.3, epsilon = 1e-3);
}

#[test]
fn flipped_slope_is_rejected() {
    let pr = fast(2, 1.0, 0.25).with_flipped_slope();
    assert!(find_t0(&pr).is_err());
    assert!(decay_certificate(&pr).is_err());
}

#[test]
fn grid_refinement_is_stable() {
    let p = OdeParams::new(2, 1.0, 0.25).unwrap();
    let a = decaying_branch(&p, 60.0, 0.01).unwrap();
    let b = decaying_branch(&p, 60.0, 0.005).unwrap();
    for i in 0..a.t.len() {
        assert_abs_diff_eq!(a.t[i], b.t[2 * i], epsilon = 1e-12);
        assert!((a.h[i] - b.h[2 * i]).abs() <= 1e-8);
    }
}

#[test]
fn dense_output_between_nodes() {
    let pr = fast(3, 1.0, 1.0);
    for t in [0.005, 1.2345, 7.77, 33.3333] {
        let (h, hp) = pr.eval(t).unwrap();
        assert_abs_diff_eq!(h, 1.0 / f64::cosh(t), epsilon = 1e-10);
        assert_abs_diff_eq!(hp, -t.tanh() / t.cosh(), epsilon = 1e-10);
    }
    assert!(pr.eval(-0.1).is_err());
    assert!(pr.eval(pr.horizon + 1.0).is_err());
}

#[test]
fn preconditions() {
    let p = OdeParams::new(2, 1.0, 0.25).unwrap();
    assert!(decaying_branch(&p, 10.0, 0.01).is_err());
    assert!(OdeParams::new(1, 1.0, 0.0).is_err());
    assert!(OdeParams::new(2, 0.0, 0.0).is_err());
}

#[test]
fn normalization_parameter() {
    let p = OdeParams::new(2, 1.0, 0.1).unwrap();
    let opts = ShootOptions { normalization: 3.0, ..Default::default() };
    let a = decaying_branch_with(&p, &opts).unwrap();
    let b = decaying_branch_with(&p, &ShootOptions::default()).unwrap();
    assert_abs_diff_eq!(a.h_t0(), 3.0, epsilon = 1e-14);
    assert_abs_diff_eq!(a.decay_c, 3.0 * b.decay_c, epsilon = 1e-12);
}

#[test]
fn header_roundtrip() {
    let pr = fast(2, 1.0, 0.25);
    let js = serde_json::to_string(&pr.header()).unwrap();
    let back: ProfileHeader = serde_json::from_str(&js).unwrap();
    assert_eq!(back, pr.header());
    assert_eq!(pr.csv_rows().len(), pr.t.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certified_profiles_satisfy_invariants(n in 2usize..=4, kappa in 0.25f64..4.0, frac in 0.0f64..=1.0) {
        let b = (n - 1) as f64 * kappa.sqrt();
        let lambda = frac * b * b / 4.0;
        let pr = fast(n, kappa, lambda);
        let (slow, fst) = (pr.mu_slow, pr.mu_fast);
        prop_assert!(fst <= -b / 2.0 + 1e-9 && -b / 2.0 <= slow + 1e-9 && slow <= 0.0);
        prop_assert!(pr.max_residual <= RESIDUAL_TOL);
        prop_assert!(pr.t0 <= 5.0);
        for i in 0..pr.t.len() {
            if pr.t[i] >= pr.t0 {
                prop_assert!(pr.h[i] > 0.0 && pr.hp[i] <= 0.0);
                prop_assert!(pr.h[i] <= pr.decay_c * (-b * pr.t[i] / 2.0).exp() * (1.0 + 1e-12));
            }
        }
    }
}
