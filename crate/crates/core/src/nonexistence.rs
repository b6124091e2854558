//! Covering bookkeeping: a finite cover of a boundary set by visual caps becomes a family
//! of cones, each cone a barrier, and the barriers a summed supersolution whose value at
//! the base point is budgeted term by term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier_ode::BarrierProfile;
use crate::barriers::{build_cone_barrier, make_supersolution, BarrierAxioms, ConvexBarrier, ScalarField, Supersolution};
use crate::boundary::{visual_dist, Cover, VisualMetric};
use crate::error::{invalid, precondition, Error, Result};
use crate::hypgeo::{t_theta, IdealPoint, Space, SpacePoint, TangentVec};
use crate::pde_lab::{disk_point, DiskGrid, Mask};
use crate::stats::linear_fit;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub direction: TangentVec,
    pub theta: f64,
    pub radius: f64,
}

/// Cones `C_o(zᵢ, θᵢ)` with `θᵢ = 2 arcsin rᵢ`, so `C₃ θᵢ ≤ rᵢ` with `C₃ = 1/π`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeFamily {
    pub base: SpacePoint,
    pub cones: Vec<Cone>,
    pub c3: f64,
}

/// Largest admissible cap radius for the model axioms: `sin(θ₀/2)`.
pub fn max_cap_radius(axioms: &BarrierAxioms) -> f64 {
    (axioms.theta0 / 2.0).sin()
}

/// Every radius must stay below `max_radius` (typically [`max_cap_radius`]).
pub fn cover_to_cones(cover: &Cover, o: &SpacePoint, max_radius: f64) -> Result<ConeFamily> {
    if !(max_radius > 0.0 && max_radius <= 1.0) {
        return Err(invalid("max cap radius must lie in (0, 1]"));
    }
    let mut cones = Vec::with_capacity(cover.caps.len());
    for (center, r) in &cover.caps {
        if !(*r < max_radius) {
            return Err(precondition(format!("cap radius {r} is not below the admissible {max_radius}")));
        }
        if center.dim() != o.dim() {
            return Err(invalid("cap dimension does not match the base point"));
        }
        cones.push(Cone { direction: center.direction_at(o).normalized()?, theta: 2.0 * r.asin(), radius: *r });
    }
    Ok(ConeFamily { base: o.clone(), cones, c3: 1.0 / std::f64::consts::PI })
}

impl ConeFamily {
    pub fn barriers(&self, space: &Space, c: f64) -> Result<Vec<ConvexBarrier>> {
        self.cones.iter().map(|k| build_cone_barrier(space, &k.direction, k.theta, c)).collect()
    }

    /// Whether every sample within visual distance `rᵢ` of cap `i` lies in the closed
    /// asymptotic cap of cone `i` (angle at the base at most `θᵢ`).
    pub fn containment(&self, space: &Space, caps: &Cover, samples: &[IdealPoint]) -> Result<bool> {
        let m = VisualMetric::new(self.base.clone(), space.kappa())?;
        for ((center, r), cone) in caps.caps.iter().zip(&self.cones) {
            for xi in samples {
                if visual_dist(&m, center, xi) <= *r {
                    let u = xi.direction_at(&self.base);
                    if space.angle(&u, &cone.direction)? > cone.theta + 1e-9 {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    pub fn relation_holds(&self) -> bool {
        self.cones.iter().all(|k| self.c3 * k.theta <= k.radius + 1e-15)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub theta: f64,
    /// `d(o, Σᵢ) = t_κ(θᵢ) − c`.
    pub distance: f64,
    /// `vᵢ(o) = Λ h(d)/h(t₀)`.
    pub value: f64,
    /// `decay_C Λ/h(t₀) · e^{−(n−1)√κ d/2}`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub lambda: f64,
    pub amplitude: f64,
    pub contributions: Vec<Contribution>,
    pub total: f64,
    pub bound_total: f64,
    /// `(n−1)√κ/(2√a)`.
    pub exponent: f64,
    /// Dimension threshold `(n−1)/2 · √κ₂/√κ₁`; `(n−1)/2` in the model.
    pub dim_threshold: f64,
    pub threshold: Option<f64>,
    pub below_threshold: Option<bool>,
    pub passed: bool,
}

/// Sums `vᵢ(o)` over the family; `threshold` is a value `u(o)` supplied by the caller.
pub fn budget(
    space: &Space,
    family: &ConeFamily,
    profile: &BarrierProfile,
    amplitude: f64,
    axioms: &BarrierAxioms,
    c: f64,
    threshold: Option<f64>,
) -> Result<Budget> {
    if !profile.certified {
        return Err(precondition("barrier profile is not certified"));
    }
    let p = profile.params;
    if p.n != space.n() || (p.kappa - space.kappa()).abs() > 1e-12 {
        return Err(invalid("profile parameters do not match the space"));
    }
    if !(amplitude > 0.0) {
        return Err(invalid("amplitude must be positive"));
    }
    let rate = p.damping() / 2.0;
    let ht0 = profile.h_t0();
    let mut contributions = Vec::with_capacity(family.cones.len());
    for cone in &family.cones {
        if !(cone.theta < axioms.theta0) {
            return Err(precondition(format!("cone angle {} is not below theta0 = {}", cone.theta, axioms.theta0)));
        }
        let distance = t_theta(space.kappa(), cone.theta)? - c;
        if distance < profile.t0 {
            return Err(precondition(format!("base point at distance {distance} from the barrier, below t0")));
        }
        let value = amplitude * profile.eval(distance)?.0 / ht0;
        let bound = profile.decay_c * amplitude / ht0 * (-rate * distance).exp();
        contributions.push(Contribution { theta: cone.theta, distance, value, bound });
    }
    let total: f64 = contributions.iter().map(|k| k.value).sum();
    let bound_total: f64 = contributions.iter().map(|k| k.bound).sum();
    Ok(Budget {
        lambda: p.lambda,
        amplitude,
        total,
        bound_total,
        exponent: p.damping() / (2.0 * axioms.a.sqrt()),
        dim_threshold: (p.n - 1) as f64 / 2.0,
        threshold,
        below_threshold: threshold.map(|u| total < u),
        passed: total <= bound_total + 1e-9,
        contributions,
    })
}

/// Least-squares slope of `ln vᵢ(o)` against `ln θᵢ` for single-cone budgets.
pub fn exponent_slope(space: &Space, profile: &BarrierProfile, thetas: &[f64], c: f64) -> Result<f64> {
    if thetas.len() < 2 {
        return Err(invalid("need at least two angles"));
    }
    let ht0 = profile.h_t0();
    let pts = thetas
        .iter()
        .map(|&th| {
            let d = t_theta(space.kappa(), th)? - c;
            Ok((th.ln(), (profile.eval(d)?.0 / ht0).ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(linear_fit(&pts).slope)
}

/// `v = Σ vᵢ`, each term the supersolution of one barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Superposed {
    pub terms: Vec<Supersolution>,
}

pub fn superposed_supersolution(space: &Space, family: &ConeFamily, profile: &BarrierProfile, amplitude: f64, c: f64) -> Result<Superposed> {
    if family.cones.is_empty() {
        return Err(invalid("empty cone family"));
    }
    let terms = family
        .barriers(space, c)?
        .into_iter()
        .map(|b| make_supersolution(space, b.surface, profile.clone(), amplitude))
        .collect::<Result<Vec<_>>>()?;
    Ok(Superposed { terms })
}

impl Superposed {
    /// `min_i d_{Σᵢ}(x)`.
    pub fn min_distance(&self, space: &Space, x: &SpacePoint) -> f64 {
        self.terms.iter().map(|t| space.signed_dist(&t.surface, x)).fold(f64::INFINITY, f64::min)
    }

    pub fn t0(&self) -> f64 {
        self.terms[0].t0()
    }

    pub fn in_omega0(&self, space: &Space, x: &SpacePoint) -> bool {
        self.min_distance(space, x) >= self.t0()
    }

    /// Points of `Ω₀` at distance at most `radius` from the origin with all `d_{Σᵢ} ≥ t₀ + margin`.
    pub fn sample_omega0(&self, space: &Space, count: usize, radius: f64, margin: f64, seed: u64) -> Result<Vec<SpacePoint>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count {
            tries += 1;
            if tries > 200 * count.max(1) {
                return Err(Error::Domain(format!("Omega0 too thin: {} of {count} samples found", out.len())));
            }
            let v = space.random_unit_tangent(&space.origin(), &mut rng);
            let x = space.exp(&v, radius * rng.gen::<f64>());
            if self.min_distance(space, &x) >= self.t0() + margin {
                out.push(x);
            }
        }
        Ok(out)
    }
}

impl ScalarField for Superposed {
    fn value(&self, space: &Space, x: &SpacePoint) -> Result<f64> {
        self.terms.iter().map(|t| t.eval(space, x)).sum()
    }

    fn lambda(&self) -> f64 {
        self.terms[0].lambda()
    }
}

/// `{d_{Σᵢ} ≥ t₀ ∀i}` on the lattice of `grid`, where `d_{Σᵢ}` is the signed distance to the
/// barrier surface, positive toward the base point.
pub fn omega0_mask(grid: &DiskGrid, barriers: &[ConvexBarrier], t0: f64) -> Result<Mask> {
    let space = grid.space();
    if barriers.iter().any(|b| b.apex.base.dim() != 2) {
        return Err(invalid("masks are planar"));
    }
    Ok(Mask::from_predicate(grid, |x| {
        let p = disk_point(x);
        barriers.iter().all(|b| space.signed_dist(&b.surface, &p) >= t0)
    }))
}
