//! Supersolutions `v = Λ h(d_Σ)/h(t₀)` built on convex hypersurfaces, the index-form
//! comparison, the cone barrier bounded by an equidistant hypersurface and the
//! barrier axioms (B1)–(B3).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier_ode::BarrierProfile;
use crate::error::{invalid, precondition, Error, Result};
use crate::hypgeo::{minkowski, t_theta, ShapeClass, Side, Space, SpacePoint, SurfaceKind, SurfaceSpec, TangentVec};

/// Sum over the `n − 1` normal Jacobi fields of the index form along a normal
/// geodesic of length `L` leaving `Σ`.
///
/// Each field is `a(t) E(t)` with `a'' = κa`, `a'(0) = k a(0)` and `a(L) = 1`, where `k`
/// is the principal curvature of `Σ`. The index form then collapses to `a'(L)`.
pub fn index_form_sum(kappa: f64, n: usize, length: f64, shape: ShapeClass) -> Result<f64> {
    if !(kappa > 0.0) || n < 2 {
        return Err(invalid("index form needs kappa > 0 and n >= 2"));
    }
    if !(length >= 0.0) {
        return Err(invalid(format!("geodesic length {length} must be >= 0")));
    }
    let s = kappa.sqrt();
    let k = shape.principal_curvature(kappa);
    let x = s * length;
    // a(t) ∝ cosh(st) + (k/s) sinh(st)
    let a_l = x.cosh() + k / s * x.sinh();
    let ap_l = s * x.sinh() + k * x.cosh();
    Ok((n - 1) as f64 * ap_l / a_l)
}

/// `Δv + λv ≤ 0` candidate on `{d_Σ ≥ t₀}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Supersolution {
    pub surface: SurfaceSpec,
    pub profile: BarrierProfile,
    pub amplitude: f64,
    pub scale: f64,
}

pub fn make_supersolution(space: &Space, surface: SurfaceSpec, profile: BarrierProfile, amplitude: f64) -> Result<Supersolution> {
    if !(amplitude > 0.0) {
        return Err(invalid("amplitude must be positive"));
    }
    let p = profile.params;
    if p.n != space.n() || (p.kappa - space.kappa()).abs() > 1e-12 {
        return Err(invalid("profile parameters do not match the space"));
    }
    let scale = amplitude / profile.h_t0();
    Ok(Supersolution { surface, profile, amplitude, scale })
}

impl Supersolution {
    pub fn lambda(&self) -> f64 {
        self.profile.params.lambda
    }

    pub fn t0(&self) -> f64 {
        self.profile.t0
    }

    fn distance(&self, space: &Space, x: &SpacePoint) -> Result<f64> {
        let d = space.signed_dist(&self.surface, x);
        if d < self.t0() - 1e-12 {
            return Err(Error::Domain(format!("d_Sigma = {d} below t0 = {}", self.t0())));
        }
        Ok(d.max(self.t0()))
    }

    pub fn eval(&self, space: &Space, x: &SpacePoint) -> Result<f64> {
        let d = self.distance(space, x)?;
        Ok(self.scale * self.profile.eval(d)?.0)
    }

    /// `scale·(h''(d) + h'(d) Δd_Σ)` with the closed-form `Δd_Σ`.
    pub fn laplacian(&self, space: &Space, x: &SpacePoint) -> Result<f64> {
        let d = self.distance(space, x)?;
        let (h, hp) = self.profile.eval(d)?;
        let hpp = self.profile.params.accel(d, h, hp);
        Ok(self.scale * (hpp + hp * space.laplacian_dist(&self.surface, x)?))
    }

    /// `Δv + λv` from the closed form.
    pub fn residual(&self, space: &Space, x: &SpacePoint) -> Result<f64> {
        Ok(self.laplacian(space, x)? + self.lambda() * self.eval(space, x)?)
    }
}

/// Value of `v` on which `verify_supersolution` operates; `∑ vᵢ` for several barriers.
pub trait ScalarField {
    fn value(&self, space: &Space, x: &SpacePoint) -> Result<f64>;
    fn lambda(&self) -> f64;
}

impl ScalarField for Supersolution {
    fn value(&self, space: &Space, x: &SpacePoint) -> Result<f64> {
        self.eval(space, x)
    }
    fn lambda(&self) -> f64 {
        self.lambda()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub step: f64,
    pub tol: f64,
    /// Largest `(Δ_fd v + λv)/v`.
    pub max_rel: f64,
    pub min_rel: f64,
    pub max_abs_rel: f64,
    /// One-sided test `max_rel ≤ tol`.
    pub passed: bool,
    /// Two-sided test `max_abs_rel ≤ tol`, the equality case.
    pub passed_two_sided: bool,
}

/// Finite-difference check of `Δv + λv ≤ 0` on the given samples, with the geodesic
/// normal-coordinate Laplacian at `step` Richardson-extrapolated once.
pub fn verify_supersolution<F: ScalarField>(space: &Space, v: &F, samples: &[SpacePoint], tol: f64, step: f64) -> Result<VerifyReport> {
    if samples.is_empty() {
        return Err(precondition("sampler produced no points"));
    }
    let mut max_rel = f64::NEG_INFINITY;
    let mut min_rel = f64::INFINITY;
    let mut err = None;
    let f = |y: &SpacePoint| match v.value(space, y) {
        Ok(val) => val,
        Err(_) => f64::NAN,
    };
    for x in samples {
        let vx = match v.value(space, x) {
            Ok(val) => val,
            Err(e) => {
                err = Some(e);
                break;
            }
        };
        let lap = space.fd_laplacian_richardson(&f, x, step);
        if !lap.is_finite() {
            return Err(Error::Domain("finite-difference stencil left the supersolution domain".into()));
        }
        let r = (lap + v.lambda() * vx) / vx;
        max_rel = max_rel.max(r);
        min_rel = min_rel.min(r);
    }
    if let Some(e) = err {
        return Err(e);
    }
    let max_abs_rel = max_rel.abs().max(min_rel.abs());
    Ok(VerifyReport {
        samples: samples.len(),
        step,
        tol,
        max_rel,
        min_rel,
        max_abs_rel,
        passed: max_rel <= tol,
        passed_two_sided: max_abs_rel <= tol,
    })
}

/// Points with `d_Σ` uniform in `[d_min, d_max]`: random points near the origin slid
/// along the normal lines of `Σ` to the drawn distance.
pub fn sample_region(space: &Space, surface: &SurfaceSpec, d_min: f64, d_max: f64, count: usize, seed: u64) -> Result<Vec<SpacePoint>> {
    if !(d_max >= d_min) {
        return Err(invalid("empty distance range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let o = space.origin();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let y = space.random_point(&o, 2.0, &mut rng);
        let g = match space.grad_signed_dist(surface, &y) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let d = if d_max > d_min { rng.gen_range(d_min..=d_max) } else { d_min };
        let x = space.exp(&g, d - space.signed_dist(surface, &y));
        out.push(x);
    }
    Ok(out)
}

/// Convex set `𝒞 = {s ≤ c}` bounded by the equidistant hypersurface at distance `c`
/// from the hyperplane `ℐ` orthogonal to `γ_{o,z}` at `t_κ(θ)`; `s` is the signed
/// distance to `ℐ`, positive toward `o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBarrier {
    pub core: SurfaceSpec,
    pub surface: SurfaceSpec,
    pub apex: TangentVec,
    pub theta: f64,
    pub t: f64,
    pub offset: f64,
}

pub fn build_cone_barrier(space: &Space, z: &TangentVec, theta: f64, c: f64) -> Result<ConvexBarrier> {
    let z = z.normalized()?;
    if !(c >= 0.0) {
        return Err(invalid(format!("offset {c} must be >= 0")));
    }
    let t = t_theta(space.kappa(), theta)?;
    if c >= t {
        return Err(precondition(format!("offset {c} >= t_kappa(theta) = {t}: the apex would lie in the convex set")));
    }
    let m = space.geodesic_tangent(&z, t).neg();
    let core = SurfaceSpec::new(SurfaceKind::TotallyGeodesic { normal: m.dir.clone() }, Side::Positive)?;
    let surface = if c == 0.0 {
        core.clone()
    } else {
        SurfaceSpec::new(SurfaceKind::Equidistant { normal: m.dir.clone(), offset: c, side: Side::Positive }, Side::Positive)?
    };
    Ok(ConvexBarrier { core, surface, apex: z, theta, t, offset: c })
}

impl ConvexBarrier {
    pub fn apex_point(&self) -> &SpacePoint {
        &self.apex.base
    }

    /// Signed distance to the core hyperplane, positive toward the apex.
    pub fn core_dist(&self, space: &Space, x: &SpacePoint) -> f64 {
        space.signed_dist(&self.core, x)
    }

    pub fn contains(&self, space: &Space, x: &SpacePoint) -> bool {
        self.core_dist(space, x) <= self.offset
    }

    pub fn dist_to_convex(&self, space: &Space, x: &SpacePoint) -> f64 {
        (self.core_dist(space, x) - self.offset).max(0.0)
    }

    /// `d(o, 𝒞)`, from the signed distance of the apex.
    pub fn apex_distance(&self, space: &Space) -> f64 {
        space.signed_dist(&self.surface, self.apex_point())
    }

    /// Point of `Σ` over the footpoint at arclength `u` along `ℐ` (planar case).
    pub fn surface_point(&self, space: &Space, u: f64) -> Result<SpacePoint> {
        if space.n() != 2 {
            return Err(invalid("surface parametrization is planar only"));
        }
        let axis = space.geodesic_tangent(&self.apex, self.t);
        let q = axis.base.clone();
        // the tangent line of ℐ at q is orthogonal to the axis
        let e = space.tangent_basis(&q).into_iter().map(|e| {
            let c = minkowski(&e.dir, &axis.dir);
            e.dir.iter().zip(&axis.dir).map(|(a, b)| a - c * b).collect::<Vec<f64>>()
        }).max_by(|a, b| minkowski(a, a).total_cmp(&minkowski(b, b))).expect("n >= 2");
        let along = TangentVec::unit(q, e)?;
        let foot = space.exp(&along, u);
        let g = space.grad_signed_dist(&self.core, &foot)?;
        Ok(space.exp(&g, self.offset))
    }

    /// `Σ` in disk coordinates for `|u| ≤ extent`, `k + 1` vertices.
    pub fn disk_polyline(&self, space: &Space, extent: f64, k: usize) -> Result<Vec<[f64; 2]>> {
        (0..=k)
            .map(|i| {
                let u = -extent + 2.0 * extent * i as f64 / k as f64;
                let x = self.surface_point(space, u)?.to_disk();
                Ok([x[0], x[1]])
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceReport {
    pub theta: f64,
    pub t: f64,
    pub samples: usize,
    /// Largest signed distance to `ℐ` (positive toward `o`) of the far points `γ_u(T)`.
    /// Cancellation limits it to about `1e-3` at `T = 30`.
    pub max_far_dist: f64,
    /// Largest `⟨x, m⟩/x₀` over the far points, the scale-free form of the same test.
    pub max_far_offset: f64,
    /// `|α − θ|`, `α` the angular radius of `∂_∞ℐ` seen from `o`.
    pub boundary_angle_gap: f64,
    /// Every cap direction ends on the half-space side.
    pub contained: bool,
    /// The boundary circle of the cap lies on `∂_∞ℐ`.
    pub boundary_on_ideal: bool,
    pub passed: bool,
}

/// Checks that the cap `∂_∞C_o(z, θ)` lies in `∂_∞H_t(z)` by pushing cap directions to
/// `T = 30`. `t` defaults to `t_κ(θ)`; other values serve as controls.
pub fn halfspace_asymptotics_check(space: &Space, z: &TangentVec, theta: f64, samples: usize, t: Option<f64>) -> Result<HalfspaceReport> {
    if !(theta > 0.0 && theta < PI / 2.0) {
        return Err(precondition(format!("theta = {theta} outside (0, pi/2)")));
    }
    let z = z.normalized()?;
    let o = z.base.clone();
    let t = match t {
        Some(t) => t,
        None => t_theta(space.kappa(), theta)?,
    };
    let m = space.geodesic_tangent(&z, t).neg();
    let core = SurfaceSpec::new(SurfaceKind::TotallyGeodesic { normal: m.dir.clone() }, Side::Positive)?;
    let far = 30.0 / space.sqrt_kappa();
    let dirs = cap_directions(space, &z, theta, samples);
    let mut max_far_dist = f64::NEG_INFINITY;
    let mut max_far_offset = f64::NEG_INFINITY;
    for u in &dirs {
        let x = space.exp(u, far);
        max_far_dist = max_far_dist.max(space.signed_dist(&core, &x));
        max_far_offset = max_far_offset.max(minkowski(x.coords(), &m.dir) / x.coords()[0]);
    }
    // ideal points ℓ = o + u on ℐ solve ⟨u, m⟩ = −⟨o, m⟩
    // with m_tan the projection of m to T_o, cos α = ⟨o, m⟩/|m_tan|
    let om = minkowski(o.coords(), &m.dir);
    let m_tan: Vec<f64> = m.dir.iter().zip(o.coords()).map(|(a, b)| a + om * b).collect();
    let cos_alpha = om / minkowski(&m_tan, &m_tan).sqrt();
    let alpha = cos_alpha.clamp(-1.0, 1.0).acos();
    let boundary_angle_gap = (alpha - theta).abs();
    let contained = max_far_offset <= 1e-9;
    let boundary_on_ideal = boundary_angle_gap <= 1e-6;
    Ok(HalfspaceReport {
        theta,
        t,
        samples: dirs.len(),
        max_far_dist,
        max_far_offset,
        boundary_angle_gap,
        contained,
        boundary_on_ideal,
        passed: contained && boundary_on_ideal,
    })
}

/// Unit directions at the apex making angle `≤ θ` with `z`, including the boundary ones.
fn cap_directions(space: &Space, z: &TangentVec, theta: f64, samples: usize) -> Vec<TangentVec> {
    let o = z.base.clone();
    let basis: Vec<TangentVec> = space
        .tangent_basis(&o)
        .into_iter()
        .map(|e| {
            let c = minkowski(&e.dir, &z.dir);
            let d: Vec<f64> = e.dir.iter().zip(&z.dir).map(|(a, b)| a - c * b).collect();
            TangentVec { base: o.clone(), dir: d }
        })
        .collect();
    // orthonormal complement of z
    let mut perp: Vec<Vec<f64>> = Vec::new();
    for e in basis {
        let mut d = e.dir.clone();
        for p in &perp {
            let c = minkowski(&d, p);
            d.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
        }
        let nd = minkowski(&d, &d);
        if nd > 1e-12 {
            let s = nd.sqrt();
            perp.push(d.iter().map(|a| a / s).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = Vec::with_capacity(samples.max(2));
    let k = samples.max(2);
    for i in 0..k {
        // half the samples sit on the boundary circle
        let phi = if i % 2 == 0 { theta } else { theta * (i as f64 / k as f64) };
        let w: Vec<f64> = if perp.len() == 1 {
            let sgn = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            perp[0].iter().map(|a| sgn * a).collect()
        } else {
            let g: Vec<f64> = perp.iter().map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
            let ng = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            let mut w = vec![0.0; o.coords().len()];
            for (gi, p) in g.iter().zip(&perp) {
                w.iter_mut().zip(p).for_each(|(a, b)| *a += gi / ng * b);
            }
            w
        };
        let d: Vec<f64> = z.dir.iter().zip(&w).map(|(a, b)| phi.cos() * a + phi.sin() * b).collect();
        out.push(TangentVec::unit(o.clone(), d).expect("unit direction"));
    }
    out
}

/// Constants of the barrier axioms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierAxioms {
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
    pub theta0: f64,
}

impl BarrierAxioms {
    /// Model values `a = κ`, `C₁ = 1`, `C₂ = c`, and `θ₀` solving `t_κ(θ₀) = c`.
    pub fn model(kappa: f64, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(invalid("model axioms need an offset c > 0"));
        }
        let theta0 = 2.0 * (-kappa.sqrt() * c).exp().atan();
        Ok(BarrierAxioms { a: kappa, c1: 1.0, c2: c, theta0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomItem {
    pub passed: bool,
    /// Positive when the inequality holds strictly.
    pub margin: f64,
    pub marginal: bool,
}

impl AxiomItem {
    fn new(margin: f64, strict: bool) -> Self {
        let passed = if strict { margin > 1e-12 } else { margin >= -1e-12 };
        AxiomItem { passed, margin, marginal: margin.abs() <= 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub theta: f64,
    pub offset: f64,
    pub apex_distance: f64,
    pub theta_below_theta0: bool,
    pub b1: AxiomItem,
    pub b2: AxiomItem,
    pub b3: AxiomItem,
    pub passed: bool,
}

/// (B1) `o ∉ 𝒞`, (B2) `∂_∞C_o(z,θ) ⊂ ∂_∞𝒞`, (B3) `d(o,𝒞) ≥ (1/√a) ln(C₁/θ) − C₂`
/// for the cone barrier with offset `c`. Failures are itemized rather than raised.
pub fn check_b_axioms(space: &Space, axioms: &BarrierAxioms, z: &TangentVec, theta: f64, c: f64) -> Result<AxiomReport> {
    let t = t_theta(space.kappa(), theta)?;
    // signed, so it stays meaningful when c ≥ t and no barrier can be built
    let apex_distance = t - c;
    let b1 = AxiomItem::new(apex_distance, true);
    let b2 = if theta < PI / 2.0 {
        let r = halfspace_asymptotics_check(space, z, theta, 64, None)?;
        AxiomItem { passed: r.passed, margin: -r.max_far_offset.max(r.boundary_angle_gap), marginal: false }
    } else {
        AxiomItem { passed: false, margin: f64::NEG_INFINITY, marginal: false }
    };
    if let Ok(barrier) = build_cone_barrier(space, z, theta, c) {
        let measured = barrier.apex_distance(space);
        if (measured - apex_distance).abs() > 1e-9 {
            return Err(Error::Numerical(format!("apex distance {measured} disagrees with t - c = {apex_distance}")));
        }
    }
    let rhs = (axioms.c1 / theta).ln() / axioms.a.sqrt() - axioms.c2;
    let b3 = AxiomItem::new(apex_distance - rhs, false);
    let theta_below_theta0 = theta < axioms.theta0;
    let passed = b1.passed && b2.passed && b3.passed && theta_below_theta0;
    Ok(AxiomReport { theta, offset: c, apex_distance, theta_below_theta0, b1, b2, b3, passed })
}
