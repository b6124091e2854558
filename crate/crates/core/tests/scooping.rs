use std::f64::consts::PI;

use approx::assert_relative_eq;
use hyperbarrier::hypgeo::Space;
use hyperbarrier::scooping::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coth(x: f64) -> f64 {
    let e = (2.0 * x).exp();
    (e + 1.0) / (e - 1.0)
}

/// Angle at p subtended by x ∈ S_q(1), q = (R, 0), via two applications of the
/// hyperbolic law of cosines; maximized over the position of x.
fn theta_oracle(r: f64) -> f64 {
    let angle = |phi: f64| {
        let rx = (r.cosh() * 1f64.cosh() - r.sinh() * 1f64.sinh() * phi.cos()).acosh();
        let c = (r.cosh() * rx.cosh() - 1f64.cosh()) / (r.sinh() * rx.sinh());
        c.clamp(-1.0, 1.0).acos()
    };
    let mut best: f64 = 0.0;
    let n = 200_000;
    for i in 0..n {
        best = best.max(angle(PI * i as f64 / n as f64));
    }
    best
}

#[test]
fn bump_bounds_match_critical_points() {
    let b = make_bump(24.0).unwrap();
    // φ' = 2S'(2ρ−1) peaks at the midpoint with S'(½) = 15/8
    assert_relative_eq!(b.l1, 3.75, max_relative = 1e-12);
    // |S''| peaks at x = (3 − √3)/6 with value 10/√3
    assert_relative_eq!(b.l2, 4.0 * 10.0 / 3f64.sqrt(), max_relative = 1e-12);
    assert_eq!(b.phi(0.3), 0.0);
    assert_eq!(b.phi(1.2), 1.0);
    assert_relative_eq!(b.phi(0.75), 0.5, epsilon = 1e-15);
    assert!(make_bump(20.0).is_err());
}

#[test]
fn epsilon0_closed_form() {
    let c2 = 24.0 * (1.0 + coth(0.5));
    let expect = 1.0 / (2.0 * c2);
    assert_relative_eq!(epsilon0(1.0, 1.0, 24.0).unwrap(), expect, max_relative = 1e-14);
    assert_relative_eq!(expect, 0.0065846, epsilon = 5e-8);
    // the second term is active for all admissible L
    let c2 = 3.0 * (1.0 + 2.0 * coth(1.0));
    assert_relative_eq!(epsilon0(4.0, 1.0, 3.0).unwrap(), 1.0 / (2.0 * c2), max_relative = 1e-14);
    assert!(epsilon0(0.5, 1.0, 24.0).is_err());
}

#[test]
fn visual_angle_against_law_of_cosines() {
    for r in [1.5, 3.0, 5.0, 7.0] {
        let v = visual_angle(1.0, r).unwrap();
        assert_relative_eq!(v, theta_oracle(r), max_relative = 1e-6);
        assert_relative_eq!(theta_brute(1.0, r).unwrap(), v, max_relative = 1e-9);
    }
    assert_relative_eq!(visual_angle(1.0, 5.0).unwrap(), 0.0158383, epsilon = 1e-7);
    assert!(visual_angle(1.0, 1.0).is_err());
}

#[test]
fn visual_angle_envelope_defect_is_tiny() {
    // the envelope is exceeded, but only by O(e^{-3R})
    for r in [3.0, 5.0, 7.0, 9.0] {
        let v = visual_angle(1.0, r).unwrap();
        let e = visual_envelope(1.0, r);
        assert!(v > e);
        assert!(v - e < 5.0 * (-3.0 * r).exp());
        if r >= 5.0 {
            assert!(v <= e + 1e-4);
        }
    }
}

#[test]
fn rstar_matches_envelope_sum() {
    let eps = 0.006585;
    let rs = find_rstar(1.0, eps).unwrap();
    let env = (2.0 * 1f64.sinh() / ((PI / 4.0) * (1.0 - (-eps).exp()))).ln();
    assert!((rs - env).abs() < 2e-3, "{rs} vs {env}");
    assert!((rs - 6.1).abs() < 0.2);
    let rs2 = find_rstar(1.0, 2.0 * eps).unwrap();
    assert!(((rs - rs2) - 2f64.ln()).abs() < 0.01, "{}", rs - rs2);
    let pinched = rstar_pinched(1.0, 1.0, 24.0).unwrap();
    assert_relative_eq!(pinched.rstar, find_rstar(1.0, pinched.eps0).unwrap());
}

fn small_run(generations: usize) -> Scoop {
    let p = ScoopParams::model(1.0, 7.0, 0.0065, generations).unwrap();
    scoop_run(&p).unwrap()
}

#[test]
fn validation() {
    let mut p = ScoopParams::model(1.0, 7.0, 0.0065, 2).unwrap();
    p.epsilon = 0.0066;
    assert!(scoop_run(&p).is_err());
    p.epsilon = 0.0065;
    p.r0 = 5.0;
    p.check_alpha_infinity = true;
    assert!(scoop_run(&p).is_err());
    p.check_alpha_infinity = false;
    assert!(scoop_run(&p).is_ok());
    p.kappa1 = 2.0;
    assert!(scoop_run(&p).is_err());
}

#[test]
fn first_seam_rule() {
    let s = small_run(1);
    let r1 = s.radius(1);
    let t0 = &s.states[0];
    for i in 0..4000 {
        let psi = -1.2 + 2.4 * i as f64 / 4000.0;
        let d = t0.seam.iter().map(|&a| polar_dist(1.0, (r1, psi), (7.0, a))).fold(f64::INFINITY, f64::min);
        if (d - 1.0).abs() < 1e-9 {
            continue;
        }
        assert_eq!(s.contains_polar(1, r1, psi), d >= 1.0, "psi {psi} d {d}");
    }
    let st = &s.states[1];
    let gap = st.seam_hi - PI / 4.0;
    assert!(gap > 0.0 && gap <= s.states[0].theta + s.params.seam_resolution);
}

/// Literal recursion: intersection over the whole seam arc, minus the earlier removals,
/// with seams recomputed by a full scan and bisection.
struct Brute {
    r: Vec<f64>,
    seams: Vec<Vec<f64>>,
    eps: f64,
    bump: Bump,
    res: f64,
}

impl Brute {
    fn member(&self, k: usize, rho: f64, psi: f64) -> bool {
        if k == 0 {
            return rho <= self.r[0];
        }
        let inter = rho - self.eps * self.bump.phi(self.seam_distance(k - 1, rho, psi)) <= self.r[k - 1] + MEMBERSHIP_SLACK;
        let removed = rho <= self.r[k - 1] + MEMBERSHIP_SLACK && !self.member(k - 1, rho, psi);
        inter && !removed
    }

    /// Distance from `(rho, psi)` to the arc `T_j`: scan of the samples, then golden-section
    /// refinement between the neighbours of the best one.
    fn seam_distance(&self, j: usize, rho: f64, psi: f64) -> f64 {
        let seam = &self.seams[j];
        let f = |a: f64| polar_dist(1.0, (rho, psi), (self.r[j], a));
        let (i, _) = seam.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &a)| if f(a) < acc.1 { (i, f(a)) } else { acc });
        let (mut a, mut b) = (seam[i.saturating_sub(1)], seam[(i + 1).min(seam.len() - 1)]);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let (x1, x2) = (b - g * (b - a), a + g * (b - a));
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        f(0.5 * (a + b)).min(f(seam[i]))
    }

    fn build(params: &ScoopParams, k_max: usize) -> Self {
        let mut b = Brute {
            r: vec![params.r0],
            seams: vec![],
            eps: params.epsilon,
            bump: params.bump,
            res: params.seam_resolution,
        };
        let arc = |lo: f64, hi: f64, res: f64| {
            let m = ((hi - lo) / res).ceil().max(1.0) as usize;
            (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect::<Vec<_>>()
        };
        b.seams.push(arc(-PI / 4.0, PI / 4.0, b.res));
        for k in 1..=k_max {
            let r = params.r0 + k as f64 * params.epsilon;
            b.r.push(r);
            let mut edges = [0.0; 2];
            for (e, sign) in edges.iter_mut().zip([-1.0, 1.0]) {
                let (mut inside, mut outside) = (0.0, 0.0);
                loop {
                    outside += sign * b.res;
                    if b.member(k, r, outside) {
                        break;
                    }
                    inside = outside;
                }
                for _ in 0..60 {
                    let mid = 0.5 * (inside + outside);
                    if b.member(k, r, mid) {
                        outside = mid;
                    } else {
                        inside = mid;
                    }
                }
                *e = inside;
            }
            b.seams.push(arc(edges[0], edges[1], b.res));
        }
        b
    }
}

#[test]
fn brute_force_membership_agrees() {
    let s = small_run(3);
    let brute = Brute::build(&s.params, 3);
    for k in 0..=3 {
        assert_eq!(brute.seams[k].len(), s.states[k].seam.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let total = 1000;
    for _ in 0..total {
        let rho = rng.gen_range(6.99..7.03);
        let psi = rng.gen_range(-1.2..1.2);
        let k = rng.gen_range(0..=3);
        if brute.member(k, rho, psi) == s.contains_polar(k, rho, psi) {
            agree += 1;
        }
    }
    assert_eq!(agree, total);
    let lit = LiteralScoop::build(&s.params, 3).unwrap();
    for k in 0..=3 {
        assert_eq!(lit.seam(k), &brute.seams[k][..]);
    }
    let rep = literal_agreement(&s, 500, 9).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(LiteralScoop::build(&s.params, 7).is_err());
}

#[test]
fn nesting_and_angular_control() {
    let s = small_run(40);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rk = s.radius(40);
    for _ in 0..1000 {
        let rho = rng.gen_range(6.9..rk + 0.05);
        let psi = rng.gen_range(-PI..PI);
        for k in 1..=40 {
            let now = s.contains_polar(k, rho, psi);
            if s.contains_polar(k - 1, rho, psi) {
                assert!(now, "nesting fails at k={k}");
            }
            if now {
                assert!(rho <= s.radius(k));
            }
            if !now && rho <= s.radius(k) {
                assert!(psi.abs() <= s.states[k].alpha + s.params.seam_resolution);
            }
        }
    }
    for st in &s.states {
        assert!(st.seam_hi <= st.alpha + s.params.seam_resolution);
        assert!(-st.seam_lo <= st.alpha + s.params.seam_resolution);
        assert_relative_eq!(st.theta, visual_angle(1.0, st.r).unwrap());
        assert!((st.theta - st.theta_brute).abs() <= s.params.seam_resolution);
        assert!(st.theta <= visual_envelope(1.0, st.r) + 1e-4);
    }
}

#[test]
fn membership_through_points() {
    let space = Space::model(2, 1.0).unwrap();
    let s = small_run(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let rho = rng.gen_range(6.5..7.1);
        let psi = rng.gen_range(-PI..PI);
        let x = from_polar(&space, rho, psi);
        let (r2, p2) = to_polar(&space, &x);
        assert_relative_eq!(r2, rho, epsilon = 1e-9);
        assert_relative_eq!(p2, psi, epsilon = 1e-9);
        assert_eq!(s.contains(&space, 2, &x), s.contains_polar(2, r2, p2));
    }
}

#[test]
fn lemma_a2_small() {
    let s = small_run(30);
    let dirs = [-PI / 4.0, -0.3, 0.0, 0.5, PI / 4.0];
    let ts = [7.0, 7.1, 7.5, 8.0, 9.0, 10.0];
    let rep = check_lemma_a2(&s, &dirs, &ts, 40).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert!(check_lemma_a2(&s, &[1.0], &ts, 4).is_err());
}

/// Points on and just past the shell radii, where rounding used to let thin slivers in.
#[test]
fn shell_edges_do_not_leak() {
    let s = small_run(16);
    for psi in [-0.7, -0.5, 0.0, 0.3, PI / 4.0] {
        for j in 1..=16 {
            let r = s.radius(j);
            for rho in [r, 0.5 * (s.radius(0) + r), r * (1.0 + 1e-16), r + 1e-13] {
                assert!(!s.contains_polar(16, rho, psi), "({rho}, {psi}) leaks at shell {j}");
            }
        }
        assert!((s.radial_function(psi) - s.params.r0).abs() <= 2.0 * MEMBERSHIP_SLACK);
    }
    for k in [5, 10, 16] {
        let s = small_run(k);
        let ts: Vec<f64> = (0..=6).map(|i| 7.0 + 0.5 * i as f64).collect();
        let rep = check_lemma_a2(&s, &[-0.5, 0.0, 0.5], &ts, 20).unwrap();
        assert!(rep.passed, "K = {k}: {rep:?}");
    }
}

#[test]
fn convexity_first_generation() {
    let space = Space::model(2, 1.0).unwrap();
    let bump = make_bump(24.0).unwrap();
    let q = from_polar(&space, 7.0, 0.0);
    let rep = convexity_margin(&space, &bump, &q, 0.0065, 7.0, 180).unwrap();
    assert!(rep.passed, "{rep:?}");
    // without the bump the level set is a circle
    let rep0 = convexity_margin(&space, &bump, &q, 0.0, 7.0, 36).unwrap();
    assert_relative_eq!(rep0.margin, coth(7.0), max_relative = 1e-4);
}

#[test]
fn json_roundtrip() {
    let s = small_run(2);
    let js = serde_json::to_string(&s).unwrap();
    let back: Scoop = serde_json::from_str(&js).unwrap();
    assert_eq!(back.states.len(), 3);
    assert_eq!(back.states[2].seam_hi, s.states[2].seam_hi);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polar_dist_matches_model(r1 in 0.0f64..9.0, a1 in -PI..PI, r2 in 0.0f64..9.0, a2 in -PI..PI) {
        let space = Space::model(2, 1.0).unwrap();
        let d = space.dist(&from_polar(&space, r1, a1), &from_polar(&space, r2, a2));
        prop_assert!((polar_dist(1.0, (r1, a1), (r2, a2)) - d).abs() < 1e-7 * (1.0 + d));
    }

    #[test]
    fn alpha_infinity_decreases_in_r0(r0 in 5.0f64..10.0, eps in 0.005f64..0.05) {
        let a = alpha_infinity(1.0, r0, eps).unwrap();
        let b = alpha_infinity(1.0, r0 + 0.1, eps).unwrap();
        prop_assert!(b < a);
    }
}
