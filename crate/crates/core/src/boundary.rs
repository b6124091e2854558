//! Gromov products, visual metrics on the ideal boundary and a box-counting
//! dimension estimator.
//!
//! In `H^n(-κ)` the visual metric based at `o` is `sin(θ/2)`, `θ` the angle at
//! `o` between the rays. Writing `u` for the unit direction at `o`, the map
//! `ξ ↦ u/2` is therefore an isometry onto a sphere of radius ½ with its
//! chordal metric, which is where covers and box grids live.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::hypgeo::{minkowski, IdealPoint, Space, SpacePoint};
use crate::stats::linear_fit;

/// Ray truncation used wherever a boundary quantity is approximated by far points.
pub const RAY_T: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisualMetric {
    pub base: SpacePoint,
    pub kappa: f64,
}

impl VisualMetric {
    pub fn new(base: SpacePoint, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid(format!("kappa must be positive, got {kappa}")));
        }
        Ok(VisualMetric { base, kappa })
    }

    pub fn at_origin(n: usize, kappa: f64) -> Result<Self> {
        Self::new(SpacePoint::origin(n), kappa)
    }

    /// Chordal coordinates `u/2` of the direction at the base point, in the frame
    /// returned by `Space::tangent_basis`.
    pub fn chordal(&self, space: &Space, xi: &IdealPoint) -> Vec<f64> {
        let u = xi.direction_at(&self.base);
        space.tangent_basis(&self.base).iter().map(|e| 0.5 * minkowski(&u.dir, &e.dir)).collect()
    }
}

/// `(p|q)_o = ½(d(o,p) + d(o,q) − d(p,q))`.
pub fn gromov_product(space: &Space, o: &SpacePoint, p: &SpacePoint, q: &SpacePoint) -> f64 {
    0.5 * (space.dist(o, p) + space.dist(o, q) - space.dist(p, q))
}

/// Gromov product of two ideal points, approximated by truncating each defining
/// ray at parameter `t`. Returns `+∞` when the rays define the same point.
pub fn gromov_product_ideal(space: &Space, o: &SpacePoint, xi: &IdealPoint, eta: &IdealPoint, t: f64) -> Result<f64> {
    if !(t >= 10.0) {
        return Err(precondition(format!("ray truncation {t} must be >= 10")));
    }
    if same_ideal(xi, eta) {
        return Ok(f64::INFINITY);
    }
    let p = space.exp(xi.ray(), t);
    let q = space.exp(eta.ray(), t);
    Ok(gromov_product(space, o, &p, &q))
}

fn same_ideal(xi: &IdealPoint, eta: &IdealPoint) -> bool {
    let a = xi.null_vector();
    let b = eta.null_vector();
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-14)
}

/// Exact visual distance from the null vectors:
/// `d_o(ξ,η)² = −⟨ℓ,ℓ'⟩ / (2⟨ℓ,o⟩⟨ℓ',o⟩)`.
pub fn visual_dist(m: &VisualMetric, xi: &IdealPoint, eta: &IdealPoint) -> f64 {
    let l1 = xi.null_vector();
    let l2 = eta.null_vector();
    let o = m.base.coords();
    let num = -minkowski(l1, l2);
    let den = 2.0 * minkowski(l1, o) * minkowski(l2, o);
    (num / den).max(0.0).sqrt().min(1.0)
}

/// Visual distance through the ray-limit route `e^{−√κ (ξ|η)_o}` at truncation `t`.
pub fn visual_dist_ray_limit(space: &Space, m: &VisualMetric, xi: &IdealPoint, eta: &IdealPoint, t: f64) -> Result<f64> {
    let g = gromov_product_ideal(space, &m.base, xi, eta, t)?;
    Ok((-space.sqrt_kappa() * g).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasepointReport {
    pub d12: f64,
    pub lower: f64,
    pub upper: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Smallest slack of either inequality over all pairs.
    pub worst_slack: f64,
    pub passed: bool,
}

/// Checks `e^{−√κ d} d_{o₂} ≤ d_{o₁} ≤ e^{√κ d} d_{o₂}` with `d = d(o₁,o₂)`.
pub fn basepoint_certificate(
    space: &Space,
    o1: &SpacePoint,
    o2: &SpacePoint,
    pairs: &[(IdealPoint, IdealPoint)],
) -> Result<BasepointReport> {
    if pairs.is_empty() {
        return Err(precondition("at least one pair is required"));
    }
    let m1 = VisualMetric::new(o1.clone(), space.kappa())?;
    let m2 = VisualMetric::new(o2.clone(), space.kappa())?;
    let dists: Vec<(f64, f64)> = pairs.iter().map(|(a, b)| (visual_dist(&m1, a, b), visual_dist(&m2, a, b))).collect();
    let d12 = space.dist(o1, o2);
    Ok(certify_ratios(space.sqrt_kappa() * d12, d12, &dists))
}

/// Band test on precomputed distance pairs `(d_{o₁}, d_{o₂})`.
pub fn certify_ratios(exponent: f64, d12: f64, dists: &[(f64, f64)]) -> BasepointReport {
    let lower = (-exponent).exp();
    let upper = exponent.exp();
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut worst_slack = f64::INFINITY;
    for &(a, b) in dists {
        if b > 0.0 {
            min_ratio = min_ratio.min(a / b);
            max_ratio = max_ratio.max(a / b);
        }
        worst_slack = worst_slack.min(a - lower * b).min(upper * b - a);
    }
    BasepointReport { d12, lower, upper, min_ratio, max_ratio, worst_slack, passed: worst_slack >= -1e-9 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleBoundReport {
    pub theta: f64,
    pub sin_half: f64,
    pub visual: f64,
    pub deviation: f64,
    pub passed: bool,
}

/// Compares the ray-limit visual distance at `T = 30` with `sin(θ/2)`.
pub fn angle_bound_check(space: &Space, o: &SpacePoint, xi: &IdealPoint, eta: &IdealPoint) -> Result<AngleBoundReport> {
    if same_ideal(xi, eta) {
        return Err(precondition("angle bound needs distinct ideal points"));
    }
    let theta = space.angle(&xi.direction_at(o), &eta.direction_at(o))?;
    let m = VisualMetric::new(o.clone(), space.kappa())?;
    let visual = visual_dist_ray_limit(space, &m, xi, eta, RAY_T)?;
    let sin_half = (theta / 2.0).sin();
    let deviation = (visual - sin_half).abs();
    Ok(AngleBoundReport { theta, sin_half, visual, deviation, passed: deviation <= 1e-6 })
}

/// Great circle through the unit directions `u` and `v` at the standard origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreatCircle {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl GreatCircle {
    pub fn planar(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("a great circle needs n >= 2"));
        }
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        u[0] = 1.0;
        v[1] = 1.0;
        Ok(GreatCircle { u, v })
    }

    fn validate(&self) -> Result<()> {
        let dot: f64 = self.u.iter().zip(&self.v).map(|(a, b)| a * b).sum();
        let nu: f64 = self.u.iter().map(|a| a * a).sum();
        let nv: f64 = self.v.iter().map(|a| a * a).sum();
        if self.u.len() != self.v.len() || dot.abs() > 1e-10 || (nu - 1.0).abs() > 1e-10 || (nv - 1.0).abs() > 1e-10 {
            return Err(invalid("great-circle frame must be orthonormal"));
        }
        Ok(())
    }

    pub fn point(&self, phi: f64) -> Result<IdealPoint> {
        let d: Vec<f64> = self.u.iter().zip(&self.v).map(|(a, b)| phi.cos() * a + phi.sin() * b).collect();
        IdealPoint::from_direction(&d)
    }
}

/// Subsets of the ideal boundary, described by directions at the standard origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundarySet {
    /// Union of angular caps `(center, radius)`; radius π is the whole sphere.
    CapUnion { caps: Vec<(IdealPoint, f64)> },
    /// Cantor set on the arc `[start, start + span]` of a great circle, keeping two
    /// pieces scaled by `ratio` at each of `depth` stages.
    CantorCircle { ratio: f64, depth: u32, frame: GreatCircle, start: f64, span: f64 },
    FinitePoints { points: Vec<IdealPoint> },
}

impl BoundarySet {
    pub fn circle() -> Self {
        BoundarySet::CapUnion { caps: vec![(IdealPoint::at_angle(0.0), PI)] }
    }

    pub fn middle_thirds(depth: u32) -> Self {
        BoundarySet::CantorCircle {
            ratio: 1.0 / 3.0,
            depth,
            frame: GreatCircle::planar(2).expect("n = 2"),
            start: 0.0,
            span: PI / 2.0,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            BoundarySet::CapUnion { caps } => caps.first().map(|c| c.0.dim()),
            BoundarySet::CantorCircle { frame, .. } => Some(frame.u.len()),
            BoundarySet::FinitePoints { points } => points.first().map(|p| p.dim()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BoundarySet::CapUnion { caps } => {
                if caps.iter().any(|(_, r)| !(*r > 0.0 && *r <= PI)) {
                    return Err(invalid("cap radii must lie in (0, pi]"));
                }
                if caps.iter().any(|(c, _)| c.dim() > 3) {
                    return Err(invalid("cap sampling supports n <= 3"));
                }
            }
            BoundarySet::CantorCircle { ratio, depth, frame, span, .. } => {
                if !(*ratio > 0.0 && *ratio < 0.5) {
                    return Err(invalid(format!("Cantor ratio {ratio} must lie in (0, 1/2)")));
                }
                if *depth < 1 {
                    return Err(invalid("Cantor depth must be >= 1"));
                }
                if !(*span > 0.0 && *span < 2.0 * PI) {
                    return Err(invalid("Cantor span must lie in (0, 2 pi)"));
                }
                frame.validate()?;
            }
            BoundarySet::FinitePoints { .. } => {}
        }
        let dims: HashSet<usize> = self.points_dims();
        if dims.len() > 1 {
            return Err(invalid("all points of a boundary set must share a dimension"));
        }
        Ok(())
    }

    fn points_dims(&self) -> HashSet<usize> {
        match self {
            BoundarySet::CapUnion { caps } => caps.iter().map(|c| c.0.dim()).collect(),
            BoundarySet::CantorCircle { frame, .. } => [frame.u.len()].into_iter().collect(),
            BoundarySet::FinitePoints { points } => points.iter().map(|p| p.dim()).collect(),
        }
    }

    /// Point cloud whose angular spacing at the standard origin is at most `delta`.
    pub fn sample(&self, delta: f64) -> Result<Vec<IdealPoint>> {
        if !(delta > 0.0) {
            return Err(invalid("sampling resolution must be positive"));
        }
        self.validate()?;
        match self {
            BoundarySet::FinitePoints { points } => Ok(points.clone()),
            BoundarySet::CantorCircle { ratio, depth, frame, start, span } => {
                let mut intervals = vec![(*start, *span)];
                for _ in 0..*depth {
                    let mut next = Vec::with_capacity(intervals.len() * 2);
                    for (a, len) in intervals {
                        let piece = len * ratio;
                        next.push((a, piece));
                        next.push((a + len - piece, piece));
                    }
                    intervals = next;
                }
                let mut pts = Vec::new();
                for (a, len) in intervals {
                    let k = (len / delta).ceil().max(1.0) as usize;
                    for i in 0..=k {
                        pts.push(frame.point(a + len * i as f64 / k as f64)?);
                    }
                }
                Ok(pts)
            }
            BoundarySet::CapUnion { caps } => {
                let mut pts = Vec::new();
                for (c, r) in caps {
                    sample_cap(c, *r, delta, &mut pts)?;
                }
                Ok(pts)
            }
        }
    }
}

fn sample_cap(center: &IdealPoint, r: f64, delta: f64, out: &mut Vec<IdealPoint>) -> Result<()> {
    let o = SpacePoint::origin(center.dim());
    let c: Vec<f64> = center.direction_at(&o).dir[1..].to_vec();
    match c.len() {
        2 => {
            let phi0 = c[1].atan2(c[0]);
            let k = (2.0 * r / delta).ceil().max(1.0) as usize;
            // the full circle would repeat its seam point
            let k_end = if r >= PI { k - 1 } else { k };
            for i in 0..=k_end {
                out.push(IdealPoint::at_angle(phi0 - r + 2.0 * r * i as f64 / k as f64));
            }
        }
        3 => {
            let (e1, e2) = orthonormal_complement(&c);
            let rings = (r / delta).ceil().max(1.0) as usize;
            out.push(IdealPoint::from_direction(&c)?);
            for j in 1..=rings {
                let a = r * j as f64 / rings as f64;
                let per = ((2.0 * PI * a.sin() / delta).ceil() as usize).max(1);
                for i in 0..per {
                    let b = 2.0 * PI * i as f64 / per as f64;
                    let d: Vec<f64> =
                        (0..3).map(|t| a.cos() * c[t] + a.sin() * (b.cos() * e1[t] + b.sin() * e2[t])).collect();
                    out.push(IdealPoint::from_direction(&d)?);
                }
            }
        }
        n => return Err(invalid(format!("cap sampling is not supported for n = {n}"))),
    }
    Ok(())
}

fn orthonormal_complement(c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pick = if c[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot: f64 = pick.iter().zip(c).map(|(a, b)| a * b).sum();
    let mut e1: Vec<f64> = (0..3).map(|i| pick[i] - dot * c[i]).collect();
    let n1 = e1.iter().map(|v| v * v).sum::<f64>().sqrt();
    e1.iter_mut().for_each(|v| *v /= n1);
    let e2 = vec![c[1] * e1[2] - c[2] * e1[1], c[2] * e1[0] - c[0] * e1[2], c[0] * e1[1] - c[1] * e1[0]];
    (e1, e2)
}

/// Finite family of visual caps `(ξᵢ, rᵢ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub caps: Vec<(IdealPoint, f64)>,
    pub exponent: f64,
}

impl Cover {
    pub fn new(caps: Vec<(IdealPoint, f64)>, exponent: f64) -> Result<Self> {
        if caps.iter().any(|(_, r)| !(*r > 0.0 && *r <= 1.0)) {
            return Err(invalid("cover radii must lie in (0, 1]"));
        }
        if !(exponent >= 0.0) {
            return Err(invalid("cover exponent must be >= 0"));
        }
        Ok(Cover { caps, exponent })
    }

    /// `Σ rᵢ^s`.
    pub fn radius_sum(&self) -> f64 {
        self.caps.iter().map(|(_, r)| r.powf(self.exponent)).sum()
    }

    /// `Σ (2rᵢ)^s`, the Hausdorff sum of the cap diameters.
    pub fn diameter_sum(&self) -> f64 {
        self.caps.iter().map(|(_, r)| (2.0 * r).powf(self.exponent)).sum()
    }

    pub fn inflated(&self, factor: f64) -> Self {
        Cover {
            caps: self.caps.iter().map(|(c, r)| (c.clone(), (r * factor).min(1.0))).collect(),
            exponent: self.exponent,
        }
    }

    /// Whether every sample lies within `rᵢ` of some center.
    pub fn covers(&self, m: &VisualMetric, samples: &[IdealPoint]) -> bool {
        samples.iter().all(|x| self.caps.iter().any(|(c, r)| visual_dist(m, c, x) <= *r + 1e-12))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// `(ε, N(ε))` per scale.
    pub counts: Vec<(f64, usize)>,
}

impl DimEstimate {
    pub fn csv_rows(&self, set_id: &str) -> Vec<(String, f64, usize, f64, f64)> {
        self.counts.iter().map(|&(e, n)| (set_id.to_string(), e, n, self.estimate, self.stderr)).collect()
    }
}

/// Angular sampling step that keeps the visual spacing at `m.base` below `visual_step`.
fn angular_step(space: &Space, m: &VisualMetric, visual_step: f64) -> f64 {
    let d = space.dist(&SpacePoint::origin(space.n()), &m.base);
    2.0 * visual_step * (-space.sqrt_kappa() * d).exp()
}

/// Box-counting dimension: slope of `ln N(ε)` against `ln(1/ε)`, where `N(ε)` counts the
/// cubes of side `ε` of a fixed grid in chordal coordinates that meet the sample.
pub fn box_dimension(space: &Space, set: &BoundarySet, m: &VisualMetric, eps: &[f64]) -> Result<DimEstimate> {
    if eps.len() < 4 {
        return Err(Error::InvalidParameter("box counting needs at least 4 scales".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::InvalidParameter("scales must lie in (0, 1)".into()));
    }
    let lo = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eps.iter().cloned().fold(0.0, f64::max);
    let distinct: HashSet<u64> = eps.iter().map(|e| e.to_bits()).collect();
    if distinct.len() != eps.len() || hi / lo < 100.0 {
        return Err(Error::InvalidParameter("scales must be distinct and span at least 2 decades".into()));
    }
    let samples = set.sample(angular_step(space, m, lo / 4.0))?;
    let coords: Vec<Vec<f64>> = samples.iter().map(|x| m.chordal(space, x)).collect();
    let mut counts = Vec::with_capacity(eps.len());
    for &e in eps {
        let boxes: HashSet<Vec<i64>> =
            coords.iter().map(|y| y.iter().map(|v| (v / e).floor() as i64).collect()).collect();
        counts.push((e, boxes.len()));
    }
    let pts: Vec<(f64, f64)> = counts.iter().map(|&(e, n)| ((1.0 / e).ln(), (n as f64).ln())).collect();
    let fit = linear_fit(&pts);
    Ok(DimEstimate { estimate: fit.slope, stderr: fit.slope_stderr, counts })
}

/// Greedy cover by caps of diameter `delta`; every sample is within `delta/2` of a center.
pub fn greedy_cover(space: &Space, set: &BoundarySet, m: &VisualMetric, delta: f64, s: f64) -> Result<Cover> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta must lie in (0, 1]"));
    }
    let r = delta / 2.0;
    let samples = set.sample(angular_step(space, m, r / 4.0))?;
    let coords: Vec<Vec<f64>> = samples.iter().map(|x| m.chordal(space, x)).collect();
    // buckets of side r: candidates within r lie in adjacent buckets
    let key = |y: &[f64]| -> Vec<i64> { y.iter().map(|v| (v / r).floor() as i64).collect() };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, y) in coords.iter().enumerate() {
        buckets.entry(key(y)).or_default().push(i);
    }
    let mut covered = vec![false; samples.len()];
    let mut caps = Vec::new();
    for i in 0..samples.len() {
        if covered[i] {
            continue;
        }
        caps.push((samples[i].clone(), r));
        let k = key(&coords[i]);
        for off in neighbor_offsets(k.len()) {
            let kk: Vec<i64> = k.iter().zip(&off).map(|(a, b)| a + b).collect();
            if let Some(list) = buckets.get(&kk) {
                for &j in list {
                    if !covered[j] {
                        let d2: f64 = coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                        if d2.sqrt() <= r {
                            covered[j] = true;
                        }
                    }
                }
            }
        }
    }
    Cover::new(caps, s)
}

fn neighbor_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|v| (-1..=1).map(move |d| [v.clone(), vec![d]].concat())).collect();
    }
    out
}

/// Upper estimate of `H^s_δ` from the greedy cover: `Σ diam^s`.
pub fn premeasure(space: &Space, set: &BoundarySet, s: f64, delta: f64, m: &VisualMetric) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(invalid("exponent must be >= 0"));
    }
    Ok(greedy_cover(space, set, m, delta, s)?.diameter_sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub d12: f64,
    pub first: DimEstimate,
    pub second: DimEstimate,
    pub tolerance: f64,
    pub passed: bool,
}

/// Box estimates from two base points; passes iff `|est₁ − est₂| ≤ 2(σ₁ + σ₂)`.
pub fn basepoint_dim_invariance(
    space: &Space,
    set: &BoundarySet,
    o1: &SpacePoint,
    o2: &SpacePoint,
    eps: &[f64],
) -> Result<InvarianceReport> {
    let d12 = space.dist(o1, o2);
    if d12 > 2.0 {
        return Err(precondition(format!("base points {d12} apart; at most 2 allowed")));
    }
    let first = box_dimension(space, set, &VisualMetric::new(o1.clone(), space.kappa())?, eps)?;
    let second = box_dimension(space, set, &VisualMetric::new(o2.clone(), space.kappa())?, eps)?;
    let tolerance = 2.0 * (first.stderr + second.stderr);
    let passed = (first.estimate - second.estimate).abs() <= tolerance;
    Ok(InvarianceReport { d12, first, second, tolerance, passed })
}

/// Geometric sequence of `k` scales from `hi` down to `lo`.
pub fn geometric_scales(hi: f64, lo: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| hi * (lo / hi).powf(i as f64 / (k - 1) as f64)).collect()
}
