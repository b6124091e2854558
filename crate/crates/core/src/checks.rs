//! The acceptance battery: ten criteria, each a list of named sub-checks with the
//! measured value and the bound it was held to.
//!
//! Timings are reported next to the results but never enter the serialized reports,
//! so that a fixed configuration always serializes to the same bytes.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier_ode::{decay_certificate, decaying_branch_with, shoot, tail_log_slope, BarrierProfile, Branch, OdeParams, ShootOptions};
use crate::barriers::{build_cone_barrier, check_b_axioms, index_form_sum, make_supersolution, sample_region, verify_supersolution, BarrierAxioms};
use crate::boundary::{basepoint_certificate, basepoint_dim_invariance, box_dimension, geometric_scales, visual_dist_ray_limit, BoundarySet, Cover, VisualMetric};
use crate::error::{invalid, Error, Result};
use crate::hypgeo::{IdealPoint, ShapeClass, Space, SpacePoint, SurfaceSpec, TangentVec};
use crate::nonexistence::{budget, cover_to_cones, exponent_slope, max_cap_radius, superposed_supersolution};
use crate::pde_lab::{allen_cahn_bound_check, assemble, delta_r2_check, prop_lambda_check, threshold_trend, CapSpec, DiskGrid, DomainKind, DomainSpec, NewtonOptions, NonlinearitySpec};
use crate::scooping::{check_lemma_a2, convexity_margin, epsilon0, find_rstar, from_polar, literal_agreement, make_bump, scoop_run, visual_envelope, ScoopParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub bound: String,
    /// `false` for sub-checks whose target is known to be out of reach; they still count.
    pub attainable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<SubCheck>,
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionReport {
    /// All sub-checks except the ones marked unattainable.
    pub fn attainable_passed(&self) -> bool {
        self.checks.iter().filter(|c| c.attainable).all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&SubCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!("criterion {:>2} {status}  {} ({:.1} s)", self.id, self.title, self.seconds);
        let failed: Vec<&str> = self.failures().iter().map(|c| c.name.as_str()).collect();
        if !failed.is_empty() {
            line.push_str(&format!(" [failed: {}]", failed.join(", ")));
        }
        line
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Finest spacing of the PDE battery; eigenvalue extrapolation also uses twice it.
    pub pde_spacing: f64,
    pub scoop_generations: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { pde_spacing: 1.0 / 400.0, scoop_generations: 160, seed: 1 }
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "ODE closed-form oracle"),
    (2, "decay certification"),
    (3, "index-form equality"),
    (4, "supersolution verification"),
    (5, "visual-metric model identity"),
    (6, "dimension estimator"),
    (7, "barrier axioms"),
    (8, "scooping"),
    (9, "PDE lab"),
    (10, "covering pipeline"),
];

struct Builder {
    checks: Vec<SubCheck>,
}

impl Builder {
    fn new() -> Self {
        Builder { checks: Vec::new() }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, value: Option<f64>, bound: impl Into<String>) {
        self.checks.push(SubCheck { name: name.into(), passed, value, bound: bound.into(), attainable: true });
    }

    fn value(&mut self, name: impl Into<String>, value: f64, passed: bool, bound: impl Into<String>) {
        self.check(name, passed, Some(value), bound);
    }

    fn unattainable(&mut self, name: impl Into<String>, value: f64, passed: bool, bound: impl Into<String>) {
        self.checks.push(SubCheck { name: name.into(), passed, value: Some(value), bound: bound.into(), attainable: false });
    }
}

/// Runs one criterion. Errors from the library become failed sub-checks; only an unknown
/// id is an error.
pub fn run_criterion(id: u8, cfg: &CheckConfig) -> Result<CriterionReport> {
    let title = CRITERIA.iter().find(|c| c.0 == id).ok_or_else(|| invalid(format!("no criterion {id}")))?.1;
    let start = Instant::now();
    let mut b = Builder::new();
    let outcome = match id {
        1 => ode_oracle(&mut b),
        2 => decay(&mut b),
        3 => index_form(&mut b),
        4 => supersolutions(&mut b),
        5 => visual(&mut b, cfg),
        6 => dimension(&mut b),
        7 => axioms(&mut b),
        8 => scooping(&mut b, cfg),
        9 => pde(&mut b, cfg),
        _ => covering(&mut b, cfg),
    };
    if let Err(e) = outcome {
        b.check(format!("error: {e}"), false, None, "no error");
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(CriterionReport { id, title: title.to_string(), passed: b.checks.iter().all(|c| c.passed), checks: b.checks, seconds })
}

pub fn run_all(cfg: &CheckConfig) -> Vec<CriterionReport> {
    CRITERIA.iter().map(|c| run_criterion(c.0, cfg).expect("known id")).collect()
}

fn profile(n: usize, kappa: f64, lambda: f64) -> Result<BarrierProfile> {
    decaying_branch_with(&OdeParams::new(n, kappa, lambda)?, &ShootOptions::default())
}

fn plane() -> Space {
    Space::model(2, 1.0).expect("model plane")
}

fn axis(space: &Space, angle: f64) -> Result<TangentVec> {
    TangentVec::from_spatial(space.origin(), &[angle.cos(), angle.sin()])
}

fn ode_oracle(b: &mut Builder) -> Result<()> {
    let start = Instant::now();
    let pr = profile(2, 1.0, 0.0)?;
    let exact = |t: f64| FRAC_PI_2 - 2.0 * (t / 2.0).tanh().atan();
    let scale = pr.eval(1.0)?.0 / exact(1.0);
    let mut worst: f64 = 0.0;
    for i in 0..=2000 {
        let t = 10.0 * i as f64 / 2000.0;
        worst = worst.max((pr.eval(t)?.0 - scale * exact(t)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    b.value("max |h - c(pi/2 - gd)| on [0,10]", worst, worst <= 1e-6, "<= 1e-6");
    b.check("runtime", secs < 1.0, None, "< 1 s");
    Ok(())
}

fn decay(b: &mut Builder) -> Result<()> {
    for (n, kappa, lambda) in [(2, 1.0, 0.25), (3, 1.0, 1.0), (2, 4.0, 1.0)] {
        let pr = profile(n, kappa, lambda)?;
        let target = -((n - 1) as f64) * f64::sqrt(kappa) / 2.0;
        let slope = tail_log_slope(&pr, 10.0, 20.0)?;
        b.value(format!("tail slope ({n},{kappa},{lambda})"), slope, (slope - target).abs() <= 1e-3, format!("{target} +- 1e-3"));
        let (_, rep) = decay_certificate(&pr)?;
        b.check(format!("certificate ({n},{kappa},{lambda})"), rep.passed, Some(rep.growth_ratio), "passes");
    }
    let slow = shoot(&OdeParams::new(2, 1.0, 0.21)?, Branch::Slow, &ShootOptions::default())?;
    let (_, rep) = decay_certificate(&slow)?;
    b.check("slow branch rejected", !rep.passed, Some(rep.growth_ratio), "certificate fails");
    Ok(())
}

fn index_form(b: &mut Builder) -> Result<()> {
    for l in [0.5, 1.0, 2.0, 5.0] {
        let v = index_form_sum(1.0, 2, l, ShapeClass::TotallyGeodesic)?;
        let err = (v - l.tanh()).abs();
        b.value(format!("|I - tanh L| at L = {l}"), err, err <= 1e-6, "<= 1e-6");
    }
    Ok(())
}

fn supersolutions(b: &mut Builder) -> Result<()> {
    let sp = plane();
    let pr = profile(2, 1.0, 0.25)?;
    let z = axis(&sp, 0.0)?;
    let cases = [
        ("totally geodesic", SurfaceSpec::hyperplane(&z)?, true),
        ("sphere", SurfaceSpec::sphere(sp.origin(), 1.0)?, false),
        ("horosphere", SurfaceSpec::horosphere(IdealPoint::at_angle(0.5), 0.0)?, false),
        ("equidistant", SurfaceSpec::equidistant(&z, 0.8)?, false),
    ];
    for (seed, (name, surf, two_sided)) in cases.into_iter().enumerate() {
        let v = make_supersolution(&sp, surf.clone(), pr.clone(), 1.0)?;
        let samples = sample_region(&sp, &surf, pr.t0 + 0.01, 6.0, 1000, seed as u64 + 1)?;
        let rep = verify_supersolution(&sp, &v, &samples, 1e-4, 1e-3)?;
        if two_sided {
            let worst = rep.max_abs_rel;
            b.value(format!("{name}: max |residual|"), worst, rep.passed_two_sided, "<= 1e-4");
        } else {
            b.value(format!("{name}: max residual"), rep.max_rel, rep.passed, "<= +1e-4");
        }
    }
    Ok(())
}

fn visual(b: &mut Builder, cfg: &CheckConfig) -> Result<()> {
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0)?;
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let a = 2.0 * PI * i as f64 / 10.0;
        for j in 1..=10 {
            let theta = PI * j as f64 / 10.0;
            let d = visual_dist_ray_limit(&sp, &m, &IdealPoint::at_angle(a), &IdealPoint::at_angle(a + theta), 30.0)?;
            worst = worst.max((d - (theta / 2.0).sin()).abs());
        }
    }
    b.value("max |d_o - sin(theta/2)| over 100 pairs, T = 30", worst, worst <= 1e-6, "<= 1e-6");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let o = sp.origin();
    let mut failures = 0;
    for _ in 0..100 {
        let dir = sp.random_unit_tangent(&o, &mut rng);
        let o2 = sp.exp(&dir, rng.gen_range(0.0..2.0));
        let pairs: Vec<(IdealPoint, IdealPoint)> = (0..10)
            .map(|_| {
                let x = IdealPoint::from_ray(&sp.random_unit_tangent(&o, &mut rng))?;
                let y = IdealPoint::from_ray(&sp.random_unit_tangent(&o, &mut rng))?;
                Ok((x, y))
            })
            .collect::<Result<_>>()?;
        if !basepoint_certificate(&sp, &o, &o2, &pairs)?.passed {
            failures += 1;
        }
    }
    b.value("base-point band failures in 100 configurations", failures as f64, failures == 0, "0");
    Ok(())
}

fn dimension(b: &mut Builder) -> Result<()> {
    let start = Instant::now();
    let sp = plane();
    let m = VisualMetric::at_origin(2, 1.0)?;
    let eps = geometric_scales(0.05, 2e-4, 8);
    let finite = BoundarySet::FinitePoints { points: vec![IdealPoint::at_angle(0.1), IdealPoint::at_angle(1.0), IdealPoint::at_angle(4.0)] };
    let f = box_dimension(&sp, &finite, &m, &eps)?.estimate;
    b.value("finite set", f, f <= 0.05, "<= 0.05");
    let c = box_dimension(&sp, &BoundarySet::circle(), &m, &eps)?.estimate;
    b.value("boundary circle", c, (c - 1.0).abs() <= 0.05, "1 +- 0.05");
    let target = 2f64.ln() / 3f64.ln();
    let k = box_dimension(&sp, &BoundarySet::middle_thirds(9), &m, &eps)?.estimate;
    b.value("middle-thirds Cantor set", k, (k - target).abs() <= 0.05, "0.6309 +- 0.05");
    let dir = axis(&sp, 1.2)?;
    let inv = basepoint_dim_invariance(&sp, &BoundarySet::middle_thirds(9), &sp.origin(), &sp.exp(&dir, 1.0), &eps)?;
    b.value("two base points, Cantor set", (inv.first.estimate - inv.second.estimate).abs(), inv.passed, "within joint tolerance");
    b.check("runtime", start.elapsed().as_secs_f64() < 60.0, None, "< 60 s");
    Ok(())
}

fn axioms(b: &mut Builder) -> Result<()> {
    let sp = plane();
    let z = axis(&sp, 0.0)?;
    let ax = BarrierAxioms::model(1.0, 1.0)?;
    for theta in [0.05, 0.1, 0.2] {
        let r = check_b_axioms(&sp, &ax, &z, theta, 1.0)?;
        b.check(format!("B1 at {theta}"), r.b1.passed, Some(r.b1.margin), "passes");
        b.check(format!("B2 at {theta}"), r.b2.passed, Some(r.b2.margin), "passes");
        b.check(format!("B3 at {theta}"), r.b3.passed, Some(r.b3.margin), "passes");
        let bar = build_cone_barrier(&sp, &z, theta, 1.0)?;
        let closed = (1.0 / (theta / 2.0).tan()).ln() - 1.0;
        let err = (bar.apex_distance(&sp) - closed).abs();
        b.value(format!("|d(o, C) - (t(theta) - 1)| at {theta}"), err, err <= 1e-9, "<= 1e-9");
    }
    let slope = exponent_slope(&sp, &profile(2, 1.0, 0.25)?, &[0.05, 0.1, 0.2], 1.0)?;
    b.value("log-log slope of v(o) against theta", slope, slope >= 0.45, ">= 0.45");
    Ok(())
}

fn scooping(b: &mut Builder, cfg: &CheckConfig) -> Result<()> {
    let coth = |x: f64| 1.0 / f64::tanh(x);
    let hand = 1.0 / (2.0 * 24.0 * (1.0 + coth(0.5)));
    let e0 = epsilon0(1.0, 1.0, 24.0)?;
    b.value("epsilon0(1,1,24) against the hand formula", (e0 - hand).abs(), (e0 - hand).abs() <= 1e-6, "<= 1e-6");
    b.value("epsilon0(1,1,24) against 0.006585", e0, (e0 - 0.006585).abs() <= 1e-6, "0.006585 +- 1e-6");
    let space = plane();
    let bump = make_bump(24.0)?;
    let eps = 0.0065;
    let r0 = 7.0;
    let mut worst = f64::INFINITY;
    for psi in [-PI / 4.0, 0.0, PI / 4.0] {
        let rep = convexity_margin(&space, &bump, &from_polar(&space, r0, psi), eps, r0, 180)?;
        worst = worst.min(rep.margin - rep.bound);
    }
    b.value("convexity margin minus sqrt(kappa)/4, generation 1", worst, worst >= -1e-3, ">= -1e-3");
    let rstar = find_rstar(1.0, eps)?;
    b.value("R* for epsilon = 0.0065", rstar, r0 >= rstar, "<= r0 = 7");
    let scoop = scoop_run(&ScoopParams::model(1.0, r0, eps, cfg.scoop_generations)?)?;
    // the envelope is an O(e^{-R}) statement; the exact angle exceeds it by O(e^{-3R})
    let excess = scoop.states.iter().map(|s| s.theta - visual_envelope(1.0, s.r)).fold(f64::NEG_INFINITY, f64::max);
    b.value("max theta_j - 2 sinh(1) e^{-r_j}", excess, excess <= 1e-8, "<= 1e-8");
    let k = scoop.final_generation();
    b.value("alpha_K", scoop.states[k].alpha, scoop.states[k].alpha < FRAC_PI_2, "< pi/2");
    let dirs = [-PI / 4.0, -0.5, -0.2, 0.0, 0.2, 0.5, PI / 4.0];
    let ts: Vec<f64> = (0..=12).map(|i| r0 + 3.0 * i as f64 / 12.0).collect();
    let a2 = check_lemma_a2(&scoop, &dirs, &ts, 40)?;
    b.value("distance identity, max error", a2.max_distance_error, a2.distance_failures.is_empty(), format!("<= {:.3e}", a2.tolerance));
    b.value("half-space containment failures", a2.halfspace_failures as f64, a2.halfspace_failures == 0, "0");
    let small = scoop_run(&ScoopParams::model(1.0, r0, eps, 3)?)?;
    let agree = literal_agreement(&small, 1000, cfg.seed)?;
    b.value("K = 3 literal membership agreement", agree.agree as f64 / agree.samples as f64, agree.passed, "1.0");
    Ok(())
}

fn pde(b: &mut Builder, cfg: &CheckConfig) -> Result<()> {
    let start = Instant::now();
    let h = cfg.pde_spacing;
    let fine = DiskGrid::new(h, 1.0)?;
    let coarse = DiskGrid::new(2.0 * h, 1.0)?;
    let b8 = DomainSpec::disk(8.0);
    let lc = assemble(&b8, &coarse)?.lambda1()?.lambda;
    let lf = assemble(&b8, &fine)?.lambda1()?.lambda;
    let extrapolated = (4.0 * lf - lc) / 3.0;
    b.value("lambda1(B_8), fine grid", lf, lf > 0.25, "> 1/4");
    b.value("Richardson correction / lambda1", (extrapolated - lf).abs() / lf, (extrapolated - lf).abs() <= 0.01 * lf && lf >= lc, "<= 1%, increasing under refinement");
    b.unattainable("lambda1(B_8) extrapolated in (0.25, 0.30)", extrapolated, extrapolated > 0.25 && extrapolated < 0.30, "(0.25, 0.30)");

    let p2 = assemble(&DomainSpec::disk(2.0), &fine)?;
    let p3 = assemble(&DomainSpec::disk(3.0), &fine)?;
    let e2 = p2.lambda1()?;
    let l3 = p3.lambda1()?.lambda;
    b.check("nested masks B_2 in B_3", p2.mask().subset_of(&p3.mask()) && e2.lambda > l3, Some(e2.lambda - l3), "subset and lambda1 strictly larger");

    let p5 = assemble(&DomainSpec::disk(5.0), &fine)?;
    let ac = NonlinearitySpec::AllenCahn;
    let u = crate::pde_lab::solve_semilinear(&p5, &ac, &vec![0.5; p5.len()], &NewtonOptions::default())?;
    let bound = allen_cahn_bound_check(&u);
    b.value("Allen-Cahn max |u| on B_5", bound.max_abs, bound.passed && bound.max_abs > 0.1, "<= 1 + 1e-8, nontrivial");

    let pts: Vec<[f64; 2]> = [0.5, 1.0, 2.0, 3.0, 4.0].iter().map(|&r| [fine.disk_radius(r) * 0.6, fine.disk_radius(r) * 0.8]).collect();
    let d = delta_r2_check(&fine, &pts)?;
    b.value("Delta(r^2) FD error at h/2", d.max_err_half, d.max_err_half <= d.max_err / 3.0 || d.max_err < 1e-8, "second order");
    b.value("linear envelope excess on [1, 6]", d.envelope_excess, d.envelope_excess <= 0.0, "<= 0");

    let sign = e2.field.values.iter().sum::<f64>().signum();
    let v: Vec<f64> = e2.field.values.iter().map(|x| x * sign).collect();
    let ok = prop_lambda_check(&p2, &v, e2.lambda, 1e-4)?.passed;
    b.check("prop_lambda on the eigenpair of B_2", ok, Some(e2.lambda), "passes");
    let rejected = matches!(prop_lambda_check(&p2, &v, e2.lambda - 0.1, 1e-4), Err(Error::Precondition(_)));
    b.check("prop_lambda rejects lambda1 - 0.1", rejected, None, "precondition error");
    b.check("runtime", start.elapsed().as_secs_f64() < 300.0, None, "< 5 min");
    Ok(())
}

/// Cap centers of the three-cap cover used by the covering criterion.
pub const THREE_CAPS: [f64; 3] = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];

fn covering(b: &mut Builder, cfg: &CheckConfig) -> Result<()> {
    let sp = plane();
    let r = 0.02;
    let caps: Vec<(IdealPoint, f64)> = THREE_CAPS.iter().map(|&a| (IdealPoint::at_angle(a), r)).collect();
    let cover = Cover::new(caps, 0.5)?;
    let ax = BarrierAxioms::model(1.0, 1.0)?;
    let fam = cover_to_cones(&cover, &sp.origin(), max_cap_radius(&ax))?;
    let dtheta = fam.cones.iter().map(|k| (k.theta - 2.0 * r.asin()).abs()).fold(0.0, f64::max);
    b.value("max |theta_i - 2 asin(0.02)|", dtheta, dtheta <= 1e-12, "<= 1e-12");
    let pr = profile(2, 1.0, 0.25)?;
    let bud = budget(&sp, &fam, &pr, 1.0, &ax, 1.0, None)?;
    let mut chain = 0.0;
    for k in &fam.cones {
        let d = (1.0 / (k.theta / 2.0).tan()).ln() - 1.0;
        chain += pr.eval(d)?.0 / pr.h_t0();
    }
    b.value("|budget total - closed-form chain|", (bud.total - chain).abs(), (bud.total - chain).abs() <= 1e-9, "<= 1e-9");
    b.check("budget below its certified bound", bud.passed, Some(bud.total), "total <= bound total");
    let v = superposed_supersolution(&sp, &fam, &pr, 1.0, 1.0)?;
    let samples: Vec<SpacePoint> = v.sample_omega0(&sp, 1000, 4.0, 0.01, cfg.seed)?;
    let rep = verify_supersolution(&sp, &v, &samples, 1e-4, 1e-3)?;
    b.value("superposed residual on Omega0", rep.max_rel, rep.passed, "<= +1e-4");
    let grid = DiskGrid::new(2.0 * cfg.pde_spacing, 1.0)?;
    let spec_caps: Vec<CapSpec> = THREE_CAPS.iter().map(|&a| CapSpec { angle: a, radius: r }).collect();
    let family = |radius: f64| DomainSpec::truncated(DomainKind::BarrierComplement { caps: spec_caps.clone(), offset: 1.0 }, radius);
    let trend = threshold_trend(family, &[4.0, 6.0, 8.0], &grid)?;
    let min = trend.rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    b.check("BarrierComplement trend monotone", trend.monotone, Some(min), "nonincreasing in R");
    b.value("min lambda1 over R <= 8 (margin over 1/4 recorded)", min, min >= 0.27, ">= 0.27");
    Ok(())
}
