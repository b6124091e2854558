//! Planar scooping: the increasing family of convex sets `C_k` grown from the ball
//! `B_p(r₀)` by bump-perturbed distance constraints along the seams `T_k`.
//!
//! Points are handled in geodesic polar coordinates `(ρ, ψ)` about `p`, with `w` at
//! `ψ = 0`. Seams are arcs `T_k ⊂ S_p(r_k)` stored as angular intervals; constraints
//! use the exact nearest point of the arc. Samples at `seam_resolution` are kept for
//! output, and the same step drives the scan for seam edges.
//!
//! For `r_{j−1} < ρ ≤ r_j` the recursive definition reduces to the single constraint
//! of generation `j`: `x ∈ C_K` iff `ρ − ε φ(ρ_q(x)) ≤ r_{j−1}` for all `q ∈ T_{j−1}`.
//! Points with `ρ ≤ r₀` always belong, points with `ρ > r_K` never do.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::hypgeo::{Space, SpacePoint, TangentVec};

/// Quintic smoothstep `S(x) = 6x⁵ − 15x⁴ + 10x³` rescaled to `[½, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    /// Certified `sup |φ'|`.
    pub l1: f64,
    /// Certified `sup |φ''|`.
    pub l2: f64,
    /// Declared bound `L ≥ max(L1, L2)` used in the constants.
    pub l: f64,
}

fn smooth(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let x2 = x * x;
    let x3 = x2 * x;
    (
        x3 * (10.0 - 15.0 * x + 6.0 * x2),
        30.0 * x2 * (1.0 - x) * (1.0 - x),
        60.0 * x * (1.0 - x) * (1.0 - 2.0 * x),
    )
}

impl Bump {
    /// `(φ, φ', φ'')` at `ρ`.
    pub fn eval(&self, rho: f64) -> (f64, f64, f64) {
        let (s, d, dd) = smooth(2.0 * rho - 1.0);
        (s, 2.0 * d, 4.0 * dd)
    }

    pub fn phi(&self, rho: f64) -> f64 {
        self.eval(rho).0
    }
}

/// Certifies the derivative bounds on a `10⁴`-point grid, at the interval ends and at
/// the interior critical points (`x = ½` for `S'`, `x = (3 ± √3)/6` for `S''`).
pub fn make_bump(l_target: f64) -> Result<Bump> {
    let probe = Bump { l1: 0.0, l2: 0.0, l: 0.0 };
    let mut l1: f64 = 0.0;
    let mut l2: f64 = 0.0;
    let n = 10_000;
    let s3 = 3f64.sqrt();
    let critical = [0.5, (3.0 - s3) / 6.0, (3.0 + s3) / 6.0];
    let grid = (0..=n).map(|i| 0.5 + 0.5 * i as f64 / n as f64);
    for rho in grid.chain(critical.iter().map(|x| (x + 1.0) / 2.0)) {
        let (_, d, dd) = probe.eval(rho);
        l1 = l1.max(d.abs());
        l2 = l2.max(dd.abs());
    }
    let certified = l1.max(l2);
    if !(l_target >= certified) {
        return Err(precondition(format!("L = {l_target} is below the certified bound {certified}")));
    }
    Ok(Bump { l1, l2, l: l_target })
}

/// `ε₀ = min(1/(2L), √κ₂/(2C₂))` with `C₂ = L(1 + √κ₁ coth(√κ₁/2))`.
pub fn epsilon0(kappa1: f64, kappa2: f64, l: f64) -> Result<f64> {
    if !(kappa1 >= kappa2 && kappa2 > 0.0 && l > 0.0) {
        return Err(invalid("epsilon0 needs kappa1 >= kappa2 > 0 and L > 0"));
    }
    let s1 = kappa1.sqrt();
    let c = s1 / (s1 / 2.0).tanh();
    let c2 = l * (1.0 + c);
    Ok((1.0 / (2.0 * l)).min(kappa2.sqrt() / (2.0 * c2)))
}

/// `arcsin(sinh(√κ)/sinh(√κ R))`: the largest angle at `p` between `q ∈ S_p(R)` and
/// points of `S_q(1)`.
pub fn visual_angle(kappa: f64, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(precondition(format!("visual angle needs R > 1, got {r}")));
    }
    let s = kappa.sqrt();
    Ok((s.sinh() / (s * r).sinh()).asin())
}

/// Envelope `2 sinh(√κ) e^{−√κ R}`.
pub fn visual_envelope(kappa: f64, r: f64) -> f64 {
    let s = kappa.sqrt();
    2.0 * s.sinh() * (-s * r).exp()
}

/// `π/4 + Σ_{j ≥ 0} visual_angle(κ, r₀ + jε)`, truncated once it passes 10.
pub fn alpha_infinity(kappa: f64, r0: f64, eps: f64) -> Result<f64> {
    let mut total = PI / 4.0;
    let s = kappa.sqrt();
    let mut j = 0usize;
    loop {
        let r = r0 + j as f64 * eps;
        let a = visual_angle(kappa, r)?;
        total += a;
        // the terms decay at least geometrically with ratio e^{−√κ ε} once R ≥ 2
        let ratio = (-s * eps).exp();
        if r > 2.0 && a * ratio / (1.0 - ratio) < 1e-14 {
            break;
        }
        // far past π/2 the exact value is irrelevant
        if total > 10.0 {
            break;
        }
        j += 1;
    }
    Ok(total)
}

/// Smallest `r₀` with `α_∞ < π/2`, by bisection to `1e−3`.
pub fn find_rstar(kappa: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && kappa > 0.0) {
        return Err(invalid("find_rstar needs eps > 0 and kappa > 0"));
    }
    let below = |r0: f64| alpha_infinity(kappa, r0, eps).map(|a| a < PI / 2.0);
    let mut lo = 1.0 + 1e-9;
    let mut hi = 2.0;
    while !below(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::NoConvergence("R* exceeds 1e4".into()));
        }
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RstarReport {
    pub kappa1: f64,
    pub kappa2: f64,
    pub l: f64,
    pub eps0: f64,
    pub rstar: f64,
}

/// `R*` as a function of the pinching pair and the bump bound, taking `ε = ε₀` and
/// the model visual angle at `κ₂`.
pub fn rstar_pinched(kappa1: f64, kappa2: f64, l: f64) -> Result<RstarReport> {
    let eps0 = epsilon0(kappa1, kappa2, l)?;
    Ok(RstarReport { kappa1, kappa2, l, eps0, rstar: find_rstar(kappa2, eps0)? })
}

/// Distance between polar points, via `cosh d = cosh(ρ₁ − ρ₂) + 2 sinh ρ₁ sinh ρ₂ sin²(Δψ/2)`.
pub fn polar_dist(kappa: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let s = kappa.sqrt();
    let half = 0.5 * angle_diff(a.1, b.1);
    let c = (s * (a.0 - b.0)).cosh() + 2.0 * (s * a.0).sinh() * (s * b.0).sinh() * half.sin().powi(2);
    c.max(1.0).acosh() / s
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d < -PI {
        d += 2.0 * PI;
    }
    d
}

/// Polar coordinates about the origin, angle measured from the first axis.
pub fn to_polar(space: &Space, x: &SpacePoint) -> (f64, f64) {
    let c = x.coords();
    (space.dist(&space.origin(), x), c[2].atan2(c[1]))
}

pub fn from_polar(space: &Space, rho: f64, psi: f64) -> SpacePoint {
    let v = TangentVec::from_spatial(space.origin(), &[psi.cos(), psi.sin()]).expect("planar direction");
    space.exp(&v, rho)
}

/// `D²G(W,W)/|W|²` for `G = ρ_p − εφ(ρ_q)` and `W` tangent to the level set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub margin: f64,
    pub bound: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Minimum over `samples` points of the level set `{G = R}` (one per direction from `p`)
/// of the tangential second difference of `G` at step `1e−3`.
pub fn convexity_margin(
    space: &Space,
    bump: &Bump,
    q: &SpacePoint,
    eps: f64,
    r: f64,
    samples: usize,
) -> Result<ConvexityReport> {
    if space.n() != 2 {
        return Err(invalid("convexity margin is planar"));
    }
    if !(r > 0.0) || samples == 0 {
        return Err(invalid("need R > 0 and at least one sample"));
    }
    if eps * bump.l >= 1.0 {
        return Err(precondition("eps·L >= 1: the level set may be singular"));
    }
    let p = space.origin();
    let g = |x: &SpacePoint| space.dist(&p, x) - eps * bump.phi(space.dist(q, x));
    let step = 1e-3;
    let mut margin = f64::INFINITY;
    for i in 0..samples {
        let psi = 2.0 * PI * i as f64 / samples as f64;
        // G increases along rays from p since |∇(εφ∘ρ_q)| ≤ εL < 1
        let (mut lo, mut hi) = (0.0, r + eps + 1.0);
        if g(&from_polar(space, hi, psi)) < r {
            return Err(Error::Numerical("level set not bracketed".into()));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if g(&from_polar(space, mid, psi)) < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = from_polar(space, 0.5 * (lo + hi), psi);
        let grad = grad_fd(space, &g, &x, 1e-6);
        // rotate the gradient by π/2 in the tangent plane
        let basis = space.tangent_basis(&x);
        let (a, b) = (grad[0], grad[1]);
        let dir: Vec<f64> = basis[0].dir.iter().zip(&basis[1].dir).map(|(e0, e1)| -b * e0 + a * e1).collect();
        let w = TangentVec::unit(x.clone(), dir)?;
        let d2 = (g(&space.exp(&w, step)) - 2.0 * g(&x) + g(&space.exp(&w, -step))) / (step * step);
        margin = margin.min(d2);
    }
    let bound = space.sqrt_kappa() / 4.0;
    Ok(ConvexityReport { margin, bound, samples, passed: margin >= bound - 1e-3 })
}

fn grad_fd<F: Fn(&SpacePoint) -> f64>(space: &Space, g: &F, x: &SpacePoint, h: f64) -> Vec<f64> {
    space
        .tangent_basis(x)
        .iter()
        .map(|e| (g(&space.exp(e, h)) - g(&space.exp(e, -h))) / (2.0 * h))
        .collect()
}

/// Points whose constraint value exceeds `r_{j−1}` by at most this are members, so that
/// `r_j − ε ≤ r_{j−1}` survives rounding.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoopParams {
    pub kappa1: f64,
    pub kappa2: f64,
    pub r0: f64,
    pub epsilon: f64,
    pub bump: Bump,
    pub seam_resolution: f64,
    pub generations: usize,
    /// Require `r₀ ≥ R*`.
    pub check_alpha_infinity: bool,
}

impl ScoopParams {
    pub fn model(kappa: f64, r0: f64, epsilon: f64, generations: usize) -> Result<Self> {
        Ok(ScoopParams {
            kappa1: kappa,
            kappa2: kappa,
            r0,
            epsilon,
            bump: make_bump(24.0)?,
            seam_resolution: 1e-3,
            generations,
            check_alpha_infinity: false,
        })
    }

    pub fn eps0(&self) -> Result<f64> {
        epsilon0(self.kappa1, self.kappa2, self.bump.l)
    }

    pub fn validate(&self) -> Result<()> {
        if (self.kappa1 - self.kappa2).abs() > 1e-15 {
            return Err(invalid("scooping runs in the model space: kappa1 must equal kappa2"));
        }
        if !(self.r0 > 1.0) {
            return Err(invalid("r0 must exceed 1 so visual angles are defined"));
        }
        if !(self.seam_resolution > 0.0 && self.seam_resolution < 0.1) {
            return Err(invalid("seam resolution must lie in (0, 0.1)"));
        }
        let e0 = self.eps0()?;
        if !(self.epsilon > 0.0 && self.epsilon < e0) {
            return Err(invalid(format!("epsilon {} outside (0, eps0 = {e0})", self.epsilon)));
        }
        if self.check_alpha_infinity {
            let rs = find_rstar(self.kappa2, self.epsilon)?;
            if self.r0 < rs {
                return Err(precondition(format!("r0 = {} below R* = {rs}", self.r0)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoopState {
    pub k: usize,
    pub r: f64,
    /// `T_k = {(r_k, ψ) : ψ ∈ [seam_lo, seam_hi]}`.
    pub seam_lo: f64,
    pub seam_hi: f64,
    /// Seam sample angles, ascending, endpoints included.
    #[serde(skip)]
    pub seam: Vec<f64>,
    pub theta: f64,
    /// `θ_k` by direct maximization of the angle over `S_q(1)`.
    pub theta_brute: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scoop {
    pub params: ScoopParams,
    pub states: Vec<ScoopState>,
}

/// Runs `K = params.generations` generations; `states[k]` describes `C_k` and `T_k`.
pub fn scoop_run(params: &ScoopParams) -> Result<Scoop> {
    params.validate()?;
    let kappa = params.kappa2;
    let res = params.seam_resolution;
    let b0 = PI / 4.0;
    let mut scoop = Scoop { params: *params, states: Vec::with_capacity(params.generations + 1) };
    let theta0 = visual_angle(kappa, params.r0)?;
    let brute0 = theta_brute(kappa, params.r0)?;
    scoop.states.push(ScoopState {
        k: 0,
        r: params.r0,
        seam_lo: -b0,
        seam_hi: b0,
        seam: sample_arc(-b0, b0, res),
        theta: theta0,
        theta_brute: brute0,
        alpha: PI / 4.0,
    });
    check_theta(theta0, brute0, res)?;
    for k in 1..=params.generations {
        let r = params.r0 + k as f64 * params.epsilon;
        let prev = scoop.states.last().expect("generation 0 exists");
        let alpha = prev.alpha + prev.theta;
        // the previous seam directions stay scooped: they are within ε of T_{k−1}
        let hi = scoop.seam_edge(k, r, prev.seam_hi, 1.0)?;
        let lo = scoop.seam_edge(k, r, prev.seam_lo, -1.0)?;
        let theta = visual_angle(kappa, r)?;
        let brute = theta_brute(kappa, r)?;
        check_theta(theta, brute, res)?;
        scoop.states.push(ScoopState {
            k,
            r,
            seam_lo: lo,
            seam_hi: hi,
            seam: sample_arc(lo, hi, res),
            theta,
            theta_brute: brute,
            alpha,
        });
    }
    Ok(scoop)
}

fn check_theta(theta: f64, brute: f64, res: f64) -> Result<()> {
    if (theta - brute).abs() > 0.1 * theta {
        return Err(Error::Numerical(format!(
            "theta estimate unstable: closed form {theta}, maximization {brute}; refine seam resolution {res}"
        )));
    }
    Ok(())
}

fn sample_arc(lo: f64, hi: f64, res: f64) -> Vec<f64> {
    let m = ((hi - lo) / res).ceil().max(1.0) as usize;
    (0..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
}

/// Largest angle at the origin between `q = (r, 0)` and points of `S_q(1)`, by scanning
/// the circle and refining with golden-section search.
pub fn theta_brute(kappa: f64, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(precondition("visual angle needs R > 1"));
    }
    let space = Space::model(2, kappa)?;
    let q = from_polar(&space, r, 0.0);
    let ang = |phi: f64| -> f64 {
        let basis = space.tangent_basis(&q);
        let dir: Vec<f64> = basis[0].dir.iter().zip(&basis[1].dir).map(|(a, b)| phi.cos() * a + phi.sin() * b).collect();
        let u = TangentVec::unit(q.clone(), dir).expect("unit");
        let x = space.exp(&u, 1.0);
        to_polar(&space, &x).1.abs()
    };
    let n = 10_000;
    let mut best = (0.0, 0.0);
    for i in 0..n {
        let phi = 2.0 * PI * i as f64 / n as f64;
        let a = ang(phi);
        if a > best.1 {
            best = (phi, a);
        }
    }
    let h = 2.0 * PI / n as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if ang(x1) > ang(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(ang(0.5 * (a + b)).max(best.1))
}

impl Scoop {
    pub fn kappa(&self) -> f64 {
        self.params.kappa2
    }

    pub fn final_generation(&self) -> usize {
        self.states.len() - 1
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.params.r0 + k as f64 * self.params.epsilon
    }

    /// Membership of `(ρ, ψ)` in `C_k`.
    pub fn contains_polar(&self, k: usize, rho: f64, psi: f64) -> bool {
        let k = k.min(self.final_generation());
        if rho <= self.params.r0 {
            return true;
        }
        if rho > self.radius(k) + MEMBERSHIP_SLACK {
            return false;
        }
        let mut j = ((rho - self.params.r0) / self.params.epsilon).ceil() as usize;
        j = j.clamp(1, k);
        // shell edges carry the same slack as the constraint, so no sliver survives above r_{j−1}
        while j > 1 && rho <= self.radius(j - 1) + MEMBERSHIP_SLACK {
            j -= 1;
        }
        while j < k && rho > self.radius(j) + MEMBERSHIP_SLACK {
            j += 1;
        }
        self.shell_constraint(j, rho, psi)
    }

    /// `ρ − ε φ(min_q ρ_q) ≤ r_{j−1}` over `q ∈ T_{j−1}`. `φ` is nondecreasing, so the
    /// binding `q` is the point of the arc nearest in angle.
    fn shell_constraint(&self, j: usize, rho: f64, psi: f64) -> bool {
        let seam = &self.states[j - 1];
        let a = arc_nearest(seam.seam_lo, seam.seam_hi, psi);
        let d = polar_dist(self.kappa(), (rho, psi), (seam.r, a));
        rho - self.params.epsilon * self.params.bump.phi(d) <= self.radius(j - 1) + MEMBERSHIP_SLACK
    }

    pub fn contains(&self, space: &Space, k: usize, x: &SpacePoint) -> bool {
        let (rho, psi) = to_polar(space, x);
        self.contains_polar(k, rho, psi)
    }

    /// Edge of the non-member arc of `S_p(r_k)` on the side `sign`, starting from a
    /// known non-member angle.
    fn seam_edge(&self, k: usize, r: f64, start: f64, sign: f64) -> Result<f64> {
        let res = self.params.seam_resolution;
        // membership at generation k of points on S_p(r_k) only involves T_{k−1}
        let member = |psi: f64| self.shell_constraint(k, r, psi);
        if member(start) {
            return Err(Error::Numerical(format!("seam of generation {k} does not cover the previous seam")));
        }
        let mut inside = start;
        let mut outside = start;
        let mut steps = 0;
        loop {
            outside += sign * res;
            steps += 1;
            if member(outside) {
                break;
            }
            inside = outside;
            if steps as f64 * res > PI {
                return Err(Error::Numerical("seam wraps around the circle".into()));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if member(mid) {
                outside = mid;
            } else {
                inside = mid;
            }
        }
        Ok(inside)
    }

    /// Largest `ρ ≤ r_K` with `(ρ, ψ) ∈ C_K`, by bisection along the ray.
    pub fn radial_function(&self, psi: f64) -> f64 {
        let k = self.final_generation();
        let (mut lo, mut hi) = (self.params.r0, self.radius(k));
        if self.contains_polar(k, hi, psi) {
            return hi;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.contains_polar(k, mid, psi) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Distance from `(ρ, ψ)` to `C_K` through the radial function: a scan of boundary
    /// points at `seam_resolution/4` within `window` of `ψ`, then golden-section refinement.
    pub fn distance_polar(&self, rho: f64, psi: f64, window: f64) -> f64 {
        let k = self.final_generation();
        if self.contains_polar(k, rho, psi) {
            return 0.0;
        }
        let kappa = self.kappa();
        let f = |a: f64| polar_dist(kappa, (rho, psi), (self.radial_function(a), a));
        let h = self.params.seam_resolution / 4.0;
        let n = (window / h).ceil() as i64;
        let mut best = (psi, f(psi));
        for i in -n..=n {
            let a = psi + i as f64 * h;
            let v = f(a);
            if v < best.1 {
                best = (a, v);
            }
        }
        let (mut a, mut b) = (best.0 - h, best.0 + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..40 {
            let x1 = b - g * (b - a);
            let x2 = a + g * (b - a);
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        best.1.min(f(0.5 * (a + b)))
    }

    /// Boundary of `C_k` in disk coordinates, one vertex per `2π/m`.
    pub fn boundary_polyline(&self, space: &Space, k: usize, m: usize) -> Vec<[f64; 2]> {
        (0..=m)
            .map(|i| {
                let psi = -PI + 2.0 * PI * i as f64 / m as f64;
                let (mut lo, mut hi) = (self.params.r0, self.radius(k));
                if self.contains_polar(k, hi, psi) {
                    lo = hi;
                } else {
                    for _ in 0..50 {
                        let mid = 0.5 * (lo + hi);
                        if self.contains_polar(k, mid, psi) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                }
                let x = from_polar(space, lo, psi).to_disk();
                [x[0], x[1]]
            })
            .collect()
    }
}

/// Angle in `[lo, hi] ⊂ [−π, π]` closest to `psi ∈ (−π, π]` on the circle.
fn arc_nearest(lo: f64, hi: f64, psi: f64) -> f64 {
    if (lo..=hi).contains(&psi) {
        psi
    } else if angle_diff(psi, lo).abs() <= angle_diff(psi, hi).abs() {
        lo
    } else {
        hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaA2Report {
    pub r0: f64,
    pub r_final: f64,
    pub alpha_final: f64,
    pub tolerance: f64,
    pub max_distance_error: f64,
    /// `(angle of u, t, d_num, t − r₀)` rows that broke the tolerance.
    pub distance_failures: Vec<(f64, f64, f64, f64)>,
    pub halfspace_samples: usize,
    pub halfspace_failures: usize,
    pub passed: bool,
}

/// Distance identity `d(γ_{p,u}(t), C_K) = t − r₀` for the given directions (angles from
/// `w`, at most π/4 in magnitude) and times, and `H_p(−w) ∩ B_p(r_K) ⊂ C_K` on a polar grid.
pub fn check_lemma_a2(scoop: &Scoop, directions: &[f64], t_grid: &[f64], halfspace_grid: usize) -> Result<LemmaA2Report> {
    if directions.iter().any(|u| u.abs() > PI / 4.0 + 1e-12) {
        return Err(precondition("directions must make angle <= pi/4 with w"));
    }
    let k = scoop.final_generation();
    let r0 = scoop.params.r0;
    let r_final = scoop.radius(k);
    let tolerance = 2.0 * scoop.params.seam_resolution * r_final;
    let mut max_err: f64 = 0.0;
    let mut distance_failures = Vec::new();
    for &u in directions {
        for &t in t_grid {
            if t < r0 {
                continue;
            }
            let d = scoop.distance_polar(t, u, 0.5);
            let err = (d - (t - r0)).abs();
            max_err = max_err.max(err);
            if err > tolerance {
                distance_failures.push((u, t, d, t - r0));
            }
        }
    }
    let mut halfspace_failures = 0;
    let mut halfspace_samples = 0;
    let m = halfspace_grid.max(2);
    for i in 0..=m {
        let rho = r_final * i as f64 / m as f64;
        for j in 0..=m {
            // angles with |ψ| ≥ π/2 from w
            let psi = PI / 2.0 + PI * j as f64 / m as f64;
            halfspace_samples += 1;
            if !scoop.contains_polar(k, rho, psi) {
                halfspace_failures += 1;
            }
        }
    }
    let alpha_final = scoop.states[k].alpha;
    Ok(LemmaA2Report {
        r0,
        r_final,
        alpha_final,
        tolerance,
        max_distance_error: max_err,
        passed: distance_failures.is_empty() && halfspace_failures == 0 && alpha_final < PI / 2.0,
        distance_failures,
        halfspace_samples,
        halfspace_failures,
    })
}

/// Reference membership by the literal recursion: `C_k` is the intersection of all
/// sample constraints of `T_{k−1}` minus the points of `B_p(r_{k−1})` outside `C_{k−1}`,
/// with every seam recomputed by a full outward scan and bisection. Exponential in `k`;
/// only meant for a handful of generations.
#[derive(Clone, Debug)]
pub struct LiteralScoop {
    kappa: f64,
    radii: Vec<f64>,
    seams: Vec<Vec<f64>>,
    epsilon: f64,
    bump: Bump,
}

impl LiteralScoop {
    pub fn build(params: &ScoopParams, generations: usize) -> Result<Self> {
        params.validate()?;
        if generations > 6 {
            return Err(invalid("the literal recursion is limited to 6 generations"));
        }
        let res = params.seam_resolution;
        let mut b = LiteralScoop {
            kappa: params.kappa2,
            radii: vec![params.r0],
            seams: vec![sample_arc(-PI / 4.0, PI / 4.0, res)],
            epsilon: params.epsilon,
            bump: params.bump,
        };
        for k in 1..=generations {
            let r = params.r0 + k as f64 * params.epsilon;
            b.radii.push(r);
            let mut edges = [0.0; 2];
            for (e, sign) in edges.iter_mut().zip([-1.0, 1.0]) {
                let (mut inside, mut outside) = (0.0, 0.0);
                loop {
                    outside += sign * res;
                    if b.member(k, r, outside) {
                        break;
                    }
                    if outside.abs() > PI {
                        return Err(Error::Numerical(format!("literal seam {k} wraps around")));
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
            b.seams.push(sample_arc(edges[0], edges[1], res));
        }
        Ok(b)
    }

    pub fn generations(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn seam(&self, k: usize) -> &[f64] {
        &self.seams[k]
    }

    pub fn member(&self, k: usize, rho: f64, psi: f64) -> bool {
        if k == 0 {
            return rho <= self.radii[0];
        }
        let r = self.radii[k - 1];
        let seam = &self.seams[k - 1];
        let a = arc_nearest(seam[0], seam[seam.len() - 1], psi);
        let inter = rho - self.epsilon * self.bump.phi(polar_dist(self.kappa, (rho, psi), (r, a))) <= r + MEMBERSHIP_SLACK;
        let removed = rho <= r + MEMBERSHIP_SLACK && !self.member(k - 1, rho, psi);
        inter && !removed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub generations: usize,
    pub samples: usize,
    pub agree: usize,
    pub seam_sizes_match: bool,
    pub passed: bool,
}

/// Compares [`Scoop::contains_polar`] with [`LiteralScoop`] on random points of the
/// shell `ρ ∈ [r₀ − 0.01, r_K + 0.01]`, `|ψ| ≤ 1.2`, generations `0..=K`.
pub fn literal_agreement(scoop: &Scoop, samples: usize, seed: u64) -> Result<AgreementReport> {
    let k_max = scoop.final_generation();
    let lit = LiteralScoop::build(&scoop.params, k_max)?;
    let seam_sizes_match = (0..=k_max).all(|k| lit.seam(k).len() == scoop.states[k].seam.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (scoop.params.r0 - 0.01, scoop.radius(k_max) + 0.01);
    let mut agree = 0;
    for _ in 0..samples {
        let rho = rng.gen_range(lo..hi);
        let psi = rng.gen_range(-1.2..1.2);
        let k = rng.gen_range(0..=k_max);
        if lit.member(k, rho, psi) == scoop.contains_polar(k, rho, psi) {
            agree += 1;
        }
    }
    Ok(AgreementReport { generations: k_max, samples, agree, seam_sizes_match, passed: agree == samples && seam_sizes_match })
}
