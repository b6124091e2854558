use std::f64::consts::{FRAC_PI_2, PI};

use serde_json::{json, Value};

use hyperbarrier::barrier_ode::{decay_certificate, decaying_branch_with, BarrierProfile, OdeParams, ShootOptions};
use hyperbarrier::barriers::{check_b_axioms, make_supersolution, sample_region, verify_supersolution, BarrierAxioms};
use hyperbarrier::boundary::{
    basepoint_certificate, basepoint_dim_invariance, box_dimension, geometric_scales, visual_dist_ray_limit, BoundarySet, Cover, VisualMetric,
};
use hyperbarrier::checks::{run_criterion, CheckConfig, THREE_CAPS};
use hyperbarrier::hypgeo::{IdealPoint, Space, SurfaceSpec, TangentVec};
use hyperbarrier::io::{csv_bytes, csv_floats, fmt_f64, svg_heatmap, svg_polylines};
use hyperbarrier::nonexistence::{budget, cover_to_cones, max_cap_radius, superposed_supersolution};
use hyperbarrier::pde_lab::{
    allen_cahn_bound_check, assemble, delta_r2_check, prop_lambda_check, solve_semilinear, threshold_trend, DiskGrid, DomainKind, DomainSpec,
    NewtonOptions,
};
use hyperbarrier::scooping::{check_lemma_a2, scoop_run, ScoopParams};

use crate::{
    acceptance, nonlinearity, AllChecksOpts, BarrierOpts, CoverOpts, DimOpts, Experiment, Failure, NonlinearityKind, OdeOpts, Outcome,
    Output, PdeOpts, Report, ScoopOpts, SetKind, SurfaceKind, VisualOpts,
};

fn to_value<T: serde::Serialize>(v: &T) -> Outcome<Value> {
    serde_json::to_value(v).map_err(|e| Failure::Runtime(format!("json: {e}")))
}

fn profile(n: usize, kappa: f64, lambda: f64, opts: &ShootOptions) -> Outcome<BarrierProfile> {
    Ok(decaying_branch_with(&OdeParams::new(n, kappa, lambda)?, opts)?)
}

fn e1(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    e
}

fn unit_axis(space: &Space) -> Outcome<TangentVec> {
    Ok(TangentVec::from_spatial(space.origin(), &e1(space.n()))?)
}

/// Runs the mapped criteria when asked and folds them into the report.
fn finish(out: &mut Output, name: &str, mut doc: Value, passed: bool, ids: &[u8], run: bool, summary: String) -> Outcome<Report> {
    let mut all = passed;
    if run {
        let (reports, ok) = acceptance(ids, &CheckConfig::default())?;
        doc["acceptance"] = to_value(&reports)?;
        all &= ok;
    }
    doc["passed"] = Value::Bool(all);
    out.json(name, &doc)?;
    Ok(Report { passed: all, summary })
}

pub fn ode(o: OdeOpts, out: &mut Output) -> Outcome<Report> {
    let (n, kappa, lambda) = (o.n.unwrap_or(2), o.kappa.unwrap_or(1.0), o.lambda.unwrap_or(0.25));
    let shoot = ShootOptions { horizon: o.horizon, grid_step: o.grid_step.unwrap_or(0.01), ..ShootOptions::default() };
    let config = json!({ "n": n, "kappa": kappa, "lambda": lambda, "horizon": o.horizon, "grid-step": shoot.grid_step });
    let pr = profile(n, kappa, lambda, &shoot)?;
    let (c, rep) = decay_certificate(&pr)?;
    out.csv("profile.csv", csv_floats(&["t", "h", "hp"], &pr.csv_rows()))?;
    let passed = rep.passed && pr.certified;
    let doc = json!({ "config": config, "profile": to_value(&pr.header())?, "decay-constant": c, "certificate": to_value(&rep)? });
    let summary = format!("ode: t0 = {:.6}, decay constant {:.6}, growth ratio {:.3e}", pr.t0, c, rep.growth_ratio);
    finish(out, "certificate.json", doc, passed, &[1, 2], o.acceptance.unwrap_or(false), summary)
}

pub fn barrier(o: BarrierOpts, out: &mut Output) -> Outcome<Report> {
    let (n, kappa, lambda) = (o.n.unwrap_or(2), o.kappa.unwrap_or(1.0), o.lambda.unwrap_or(0.25));
    let kind = o.surface.unwrap_or(SurfaceKind::Hyperplane);
    let param = o.surface_param.unwrap_or(match kind {
        SurfaceKind::Hyperplane | SurfaceKind::Horosphere => 0.0,
        SurfaceKind::Sphere => 1.0,
        SurfaceKind::Equidistant => 0.8,
    });
    let (samples, seed, tol, step) = (o.samples.unwrap_or(1000), o.seed.unwrap_or(1), o.tol.unwrap_or(1e-4), o.step.unwrap_or(1e-3));
    let (d_max, theta, offset) = (o.d_max.unwrap_or(6.0), o.theta.unwrap_or(0.1), o.offset.unwrap_or(1.0));
    let config = json!({
        "n": n, "kappa": kappa, "lambda": lambda, "surface": kind, "surface-param": param, "samples": samples,
        "seed": seed, "tol": tol, "step": step, "d-max": d_max, "theta": theta, "offset": offset,
    });
    let space = Space::model(n, kappa)?;
    let z = unit_axis(&space)?;
    let surface = match kind {
        SurfaceKind::Hyperplane => SurfaceSpec::hyperplane(&z)?,
        SurfaceKind::Sphere => SurfaceSpec::sphere(space.origin(), param)?,
        SurfaceKind::Horosphere => SurfaceSpec::horosphere(IdealPoint::from_direction(&e1(n))?, param)?,
        SurfaceKind::Equidistant => SurfaceSpec::equidistant(&z, param)?,
    };
    let pr = profile(n, kappa, lambda, &ShootOptions::default())?;
    let v = make_supersolution(&space, surface.clone(), pr.clone(), 1.0)?;
    let pts = sample_region(&space, &surface, pr.t0 + 0.01, d_max, samples, seed)?;
    let rep = verify_supersolution(&space, &v, &pts, tol, step)?;
    let mut rows = Vec::with_capacity(pts.len());
    for x in &pts {
        let value = v.eval(&space, x)?;
        rows.push([space.signed_dist(&surface, x), value, v.residual(&space, x)? / value]);
    }
    out.csv("residuals.csv", csv_floats(&["distance", "value", "relative_residual"], &rows))?;
    let two_sided = kind == SurfaceKind::Hyperplane;
    let verified = if two_sided { rep.passed_two_sided } else { rep.passed };
    let axioms = check_b_axioms(&space, &BarrierAxioms::model(kappa, offset)?, &z, theta, offset)?;
    let doc = json!({
        "config": config, "t0": pr.t0, "two-sided": two_sided, "verification": to_value(&rep)?, "axioms": to_value(&axioms)?,
    });
    let summary = format!("barrier: max residual {:.3e}, axioms {}", if two_sided { rep.max_abs_rel } else { rep.max_rel }, axioms.passed);
    finish(out, "barrier.json", doc, verified && axioms.passed, &[3, 4, 7], o.acceptance.unwrap_or(false), summary)
}

pub fn visual(o: VisualOpts, out: &mut Output) -> Outcome<Report> {
    let (kappa, m, ray_t) = (o.kappa.unwrap_or(1.0), o.grid.unwrap_or(10), o.ray_t.unwrap_or(30.0));
    let (tol, shift) = (o.tol.unwrap_or(1e-6), o.basepoint_shift.unwrap_or(1.0));
    if m == 0 {
        return Err(Failure::Usage("grid must be positive".into()));
    }
    let config = json!({ "kappa": kappa, "grid": m, "ray-t": ray_t, "tol": tol, "basepoint-shift": shift });
    let space = Space::model(2, kappa)?;
    let metric = VisualMetric::at_origin(2, kappa)?;
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let a = 2.0 * PI * i as f64 / m as f64;
        for j in 1..=m {
            let theta = PI * j as f64 / m as f64;
            let (x, y) = (IdealPoint::at_angle(a), IdealPoint::at_angle(a + theta));
            let d = visual_dist_ray_limit(&space, &metric, &x, &y, ray_t)?;
            let model = (theta / 2.0).sin();
            worst = worst.max((d - model).abs());
            rows.push([a, theta, d, model]);
            pairs.push((x, y));
        }
    }
    out.csv("pairs.csv", csv_floats(&["angle", "separation", "visual_distance", "sin_half"], &rows))?;
    let dir = TangentVec::from_spatial(space.origin(), &[1.2f64.cos(), 1.2f64.sin()])?;
    let band = basepoint_certificate(&space, &space.origin(), &space.exp(&dir, shift), &pairs)?;
    let passed = worst <= tol && band.passed;
    let doc = json!({ "config": config, "max-deviation": worst, "basepoint": to_value(&band)? });
    let summary = format!("visual: max |d - sin(theta/2)| = {worst:.3e} over {} pairs", rows.len());
    finish(out, "visual.json", doc, passed, &[5], o.acceptance.unwrap_or(false), summary)
}

pub fn dim(o: DimOpts, out: &mut Output) -> Outcome<Report> {
    let kind = o.set.unwrap_or(SetKind::Cantor);
    let depth = o.depth.unwrap_or(9);
    let (hi, lo, k) = (o.eps_hi.unwrap_or(0.05), o.eps_lo.unwrap_or(2e-4), o.scales.unwrap_or(8));
    let shift = o.basepoint_shift.unwrap_or(0.0);
    let (set, id, expected) = match kind {
        SetKind::Finite => (
            BoundarySet::FinitePoints { points: vec![IdealPoint::at_angle(0.1), IdealPoint::at_angle(1.0), IdealPoint::at_angle(4.0)] },
            "finite",
            0.0,
        ),
        SetKind::Circle => (BoundarySet::circle(), "circle", 1.0),
        SetKind::Cantor => (BoundarySet::middle_thirds(depth), "cantor", 2f64.ln() / 3f64.ln()),
    };
    let expect = o.expect.unwrap_or(expected);
    let expect_tol = o.expect_tol.unwrap_or(0.05);
    if !(hi > lo && lo > 0.0) || k < 2 {
        return Err(Failure::Usage("scales need eps-hi > eps-lo > 0 and at least two scales".into()));
    }
    let config = json!({
        "set": kind, "depth": depth, "eps-hi": hi, "eps-lo": lo, "scales": k, "basepoint-shift": shift,
        "expect": expect, "expect-tol": expect_tol,
    });
    let space = Space::model(2, 1.0)?;
    let eps = geometric_scales(hi, lo, k);
    let est = box_dimension(&space, &set, &VisualMetric::at_origin(2, 1.0)?, &eps)?;
    let rows = est.csv_rows(id).into_iter().map(|(s, e, c, d, se)| vec![s, fmt_f64(e), c.to_string(), fmt_f64(d), fmt_f64(se)]);
    out.csv("scales.csv", csv_bytes(&["set", "eps", "count", "estimate", "stderr"], rows))?;
    let mut passed = (est.estimate - expect).abs() <= expect_tol;
    let mut doc = json!({ "config": config, "estimate": est.estimate, "stderr": est.stderr, "counts": to_value(&est.counts)? });
    if shift > 0.0 {
        let dir = TangentVec::from_spatial(space.origin(), &[1.2f64.cos(), 1.2f64.sin()])?;
        let inv = basepoint_dim_invariance(&space, &set, &space.origin(), &space.exp(&dir, shift), &eps)?;
        passed &= inv.passed;
        doc["basepoint"] = to_value(&inv)?;
    }
    let summary = format!("dim: {id} estimate {:.4} +- {:.4} (expected {expect:.4})", est.estimate, est.stderr);
    finish(out, "dim.json", doc, passed, &[6], o.acceptance.unwrap_or(false), summary)
}

pub fn scoop(o: ScoopOpts, out: &mut Output) -> Outcome<Report> {
    let (kappa, r0, eps) = (o.kappa.unwrap_or(1.0), o.r0.unwrap_or(7.0), o.epsilon.unwrap_or(0.0065));
    let generations = o.generations.unwrap_or(160);
    let t_span = o.t_span.unwrap_or(3.0);
    let mut params = ScoopParams::model(kappa, r0, eps, generations)?;
    params.seam_resolution = o.seam_resolution.unwrap_or(params.seam_resolution);
    let config = json!({
        "kappa": kappa, "r0": r0, "epsilon": eps, "generations": generations, "seam-resolution": params.seam_resolution, "t-span": t_span,
    });
    let scoop = scoop_run(&params)?;
    let k = scoop.final_generation();
    let dirs = [-PI / 4.0, -0.5, -0.2, 0.0, 0.2, 0.5, PI / 4.0];
    let ts: Vec<f64> = (0..=12).map(|i| r0 + t_span * i as f64 / 12.0).collect();
    let a2 = check_lemma_a2(&scoop, &dirs, &ts, 40)?;
    let rows: Vec<[f64; 7]> = scoop.states.iter().map(|s| [s.k as f64, s.r, s.seam_lo, s.seam_hi, s.theta, s.theta_brute, s.alpha]).collect();
    out.csv("states.csv", csv_floats(&["k", "r", "seam_lo", "seam_hi", "theta", "theta_brute", "alpha"], &rows))?;
    let space = Space::model(2, kappa)?;
    let mut gens = vec![0, k / 4, k / 2, k];
    gens.dedup();
    let lines: Vec<(Vec<[f64; 2]>, &str)> =
        gens.iter().enumerate().map(|(i, &g)| (scoop.boundary_polyline(&space, g, 720), ["#999999", "#6666cc", "#3333aa", "#cc0000"][i])).collect();
    out.svg("scoop.svg", svg_polylines(&lines))?;
    let alpha = scoop.states[k].alpha;
    let passed = a2.passed && alpha < FRAC_PI_2;
    let doc = json!({ "config": config, "final-radius": scoop.radius(k), "alpha-final": alpha, "distance-identity": to_value(&a2)? });
    let summary = format!("scoop: K = {k}, r_K = {:.4}, alpha_K = {alpha:.4}, distance error {:.3e}", scoop.radius(k), a2.max_distance_error);
    finish(out, "scoop.json", doc, passed, &[8], o.acceptance.unwrap_or(false), summary)
}

pub fn cover(o: CoverOpts, out: &mut Output) -> Outcome<Report> {
    let angles = o.angles.unwrap_or_else(|| THREE_CAPS.to_vec());
    let (r, lambda, offset) = (o.cap_radius.unwrap_or(0.02), o.lambda.unwrap_or(0.25), o.offset.unwrap_or(1.0));
    let (amplitude, samples, seed) = (o.amplitude.unwrap_or(1.0), o.samples.unwrap_or(1000), o.seed.unwrap_or(1));
    let axioms = BarrierAxioms::model(1.0, offset)?;
    let max_r = o.max_cap_radius.unwrap_or(max_cap_radius(&axioms));
    let config = json!({
        "angles": angles, "cap-radius": r, "lambda": lambda, "offset": offset, "amplitude": amplitude,
        "threshold": o.threshold, "max-cap-radius": max_r, "samples": samples, "seed": seed,
    });
    let space = Space::model(2, 1.0)?;
    let caps: Vec<(IdealPoint, f64)> = angles.iter().map(|&a| (IdealPoint::at_angle(a), r)).collect();
    let family = cover_to_cones(&Cover::new(caps, 0.5)?, &space.origin(), max_r)?;
    let pr = profile(2, 1.0, lambda, &ShootOptions::default())?;
    let bud = budget(&space, &family, &pr, amplitude, &axioms, offset, o.threshold)?;
    let rows: Vec<[f64; 4]> = bud.contributions.iter().map(|c| [c.theta, c.distance, c.value, c.bound]).collect();
    out.csv("contributions.csv", csv_floats(&["theta", "distance", "value", "bound"], &rows))?;
    let v = superposed_supersolution(&space, &family, &pr, amplitude, offset)?;
    let pts = v.sample_omega0(&space, samples, 4.0, 0.01, seed)?;
    let rep = verify_supersolution(&space, &v, &pts, 1e-4, 1e-3)?;
    let mut lines = Vec::new();
    for b in family.barriers(&space, offset)? {
        lines.push((b.disk_polyline(&space, 6.0, 200)?, "#cc0000"));
    }
    out.svg("cover.svg", svg_polylines(&lines))?;
    let passed = bud.passed && rep.passed && bud.below_threshold.unwrap_or(true);
    let doc = json!({ "config": config, "budget": to_value(&bud)?, "superposed": to_value(&rep)? });
    let summary = format!("cover: {} caps, budget {:.6e} (bound {:.6e}), superposed residual {:.3e}", angles.len(), bud.total, bud.bound_total, rep.max_rel);
    finish(out, "budget.json", doc, passed, &[10], o.acceptance.unwrap_or(false), summary)
}

pub fn pde(o: PdeOpts, out: &mut Output) -> Outcome<Report> {
    let experiment = o.experiment.unwrap_or(Experiment::Eigen);
    let (spacing, kappa, clip) = (o.spacing.unwrap_or(0.01), o.kappa.unwrap_or(1.0), o.clip.unwrap_or(DiskGrid::DEFAULT_CLIP));
    let grid = DiskGrid::with_clip(spacing, kappa, clip)?;
    let domain = match (o.disk, o.domain) {
        (Some(r), _) => DomainSpec::disk(r),
        (None, Some(d)) => d,
        (None, None) => DomainSpec::disk(2.0),
    };
    let kind = o.nonlinearity.unwrap_or(NonlinearityKind::AllenCahn);
    let lambda = o.lambda.unwrap_or(0.25);
    let f = nonlinearity(kind, lambda);
    let (init, tol) = (o.init.unwrap_or(0.5), o.tol.unwrap_or(NewtonOptions::default().tol));
    let radii = o.radii.unwrap_or_else(|| match experiment {
        Experiment::DeltaR2 => vec![0.5, 1.0, 2.0, 3.0, 4.0],
        _ => vec![4.0, 6.0, 8.0],
    });
    let config = json!({
        "experiment": experiment, "spacing": spacing, "kappa": kappa, "clip": clip, "domain": to_value(&domain)?,
        "nonlinearity": to_value(&f)?, "init": init, "tol": tol, "radii": radii,
    });
    let mut doc = json!({ "config": config });
    let (passed, summary) = match experiment {
        Experiment::Eigen => {
            let problem = assemble(&domain, &grid)?;
            let e = problem.lambda1()?;
            let sign = e.field.values.iter().sum::<f64>().signum();
            let v: Vec<f64> = e.field.values.iter().map(|x| x * sign).collect();
            let check = prop_lambda_check(&problem, &v, e.lambda, 1e-4)?;
            let field = problem.field(v, e.residual, e.iterations);
            out.csv("field.csv", csv_floats(&["x", "y", "u"], &field.rows()))?;
            out.svg("field.svg", svg_heatmap(&field))?;
            doc["eigen"] = to_value(&e)?;
            doc["unknowns"] = json!(problem.len());
            doc["prop-lambda"] = to_value(&check)?;
            (check.passed, format!("pde eigen: lambda1 = {:.6} on {} unknowns", e.lambda, problem.len()))
        }
        Experiment::Solve => {
            f.check_hypotheses()?;
            let problem = assemble(&domain, &grid)?;
            let opts = NewtonOptions { tol, ..NewtonOptions::default() };
            let u = solve_semilinear(&problem, &f, &vec![init; problem.len()], &opts)?;
            out.csv("field.csv", csv_floats(&["x", "y", "u"], &u.rows()))?;
            out.svg("field.svg", svg_heatmap(&u))?;
            let (max_abs, _) = u.max_abs();
            let mut ok = u.residual <= tol;
            if kind == NonlinearityKind::AllenCahn {
                let b = allen_cahn_bound_check(&u);
                ok &= b.passed;
                doc["allen-cahn-bound"] = to_value(&b)?;
            }
            doc["residual"] = json!(u.residual);
            doc["iterations"] = json!(u.iterations);
            doc["max-abs"] = json!(max_abs);
            (ok, format!("pde solve: max |u| = {max_abs:.6}, residual {:.3e} after {} Newton steps", u.residual, u.iterations))
        }
        Experiment::Trend => {
            let kind = domain.kind.clone();
            let family = |r: f64| match &kind {
                DomainKind::GeodesicDisk { .. } => DomainSpec::disk(r),
                k => DomainSpec::truncated(k.clone(), r),
            };
            let trend = threshold_trend(family, &radii, &grid)?;
            let rows: Vec<[f64; 2]> = trend.rows.iter().map(|&(r, l)| [r, l]).collect();
            out.csv("trend.csv", csv_floats(&["radius", "lambda1"], &rows))?;
            doc["trend"] = to_value(&trend)?;
            let last = rows.last().map(|r| r[1]).unwrap_or(f64::NAN);
            (trend.monotone, format!("pde trend: lambda1 at R = {} is {last:.6}", radii.last().unwrap_or(&f64::NAN)))
        }
        Experiment::DeltaR2 => {
            let pts: Vec<[f64; 2]> = radii.iter().map(|&r| [grid.disk_radius(r) * 0.6, grid.disk_radius(r) * 0.8]).collect();
            let rep = delta_r2_check(&grid, &pts)?;
            out.csv("delta_r2.csv", csv_floats(&["r", "fd_h", "fd_half", "closed"], &rep.rows))?;
            doc["delta-r2"] = to_value(&rep)?;
            (rep.passed, format!("pde delta-r2: max error {:.3e} at h, {:.3e} at h/2", rep.max_err, rep.max_err_half))
        }
    };
    finish(out, "pde.json", doc, passed, &[9], o.acceptance.unwrap_or(false), summary)
}

pub fn all_checks(o: AllChecksOpts, out: &mut Output) -> Outcome<Report> {
    let defaults = CheckConfig::default();
    let cfg = CheckConfig {
        pde_spacing: o.pde_spacing.unwrap_or(defaults.pde_spacing),
        scoop_generations: o.generations.unwrap_or(defaults.scoop_generations),
        seed: o.seed.unwrap_or(defaults.seed),
    };
    let ids = o.only.unwrap_or_else(|| (1..=10).collect());
    let mut reports = Vec::with_capacity(ids.len());
    for &id in &ids {
        let r = run_criterion(id, &cfg)?;
        eprintln!("{}", r.summary_line());
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    let rows = reports.iter().map(|r| {
        let failed: Vec<&str> = r.failures().iter().map(|c| c.name.as_str()).collect();
        vec![r.id.to_string(), r.title.clone(), r.passed.to_string(), failed.join("; ")]
    });
    out.csv("summary.csv", csv_bytes(&["id", "title", "passed", "failed_checks"], rows))?;
    let doc = json!({ "config": to_value(&cfg)?, "criteria": to_value(&reports)?, "passed": passed });
    out.json("summary.json", &doc)?;
    let n_pass = reports.iter().filter(|r| r.passed).count();
    Ok(Report { passed, summary: format!("all-checks: {n_pass}/{} criteria passed", reports.len()) })
}
