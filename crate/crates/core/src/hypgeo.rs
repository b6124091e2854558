//! Geometry kernel for the model space `H^n(-κ)` in the hyperboloid model.
//!
//! Points are stored on the unit hyperboloid `⟨x,x⟩ = -1`, `x₀ > 0`, with the
//! Minkowski product `⟨x,y⟩ = -x₀y₀ + Σ xᵢyᵢ`. Curvature only enters through
//! length scaling: a unit-hyperboloid distance `s` is reported as `s/√κ`.
//! Tangent vectors are stored so that Minkowski norm equals metric length.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, precondition, Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 4;

/// Tolerance on `|⟨x,x⟩ + 1|` after renormalization.
pub const DRIFT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub kappa: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl ModelParams {
    /// Constant curvature `-κ`; the pinching pair collapses to `κ`.
    pub fn new(n: usize, kappa: f64) -> Result<Self> {
        Self::pinched(n, kappa, kappa, kappa)
    }

    pub fn pinched(n: usize, kappa: f64, kappa1: f64, kappa2: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(invalid(format!("dimension n={n} outside 2..={MAX_DIM}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa must be positive, got {kappa}")));
        }
        if !(kappa2 > 0.0 && kappa1 >= kappa2 && kappa1.is_finite()) {
            return Err(invalid(format!(
                "pinching pair must satisfy kappa1 >= kappa2 > 0, got ({kappa1}, {kappa2})"
            )));
        }
        Ok(ModelParams { n, kappa, kappa1, kappa2 })
    }

    pub fn sqrt_kappa(&self) -> f64 {
        self.kappa.sqrt()
    }

    /// Bottom of the spectrum of the model space, `(n-1)²κ/4`.
    pub fn mckean(&self) -> f64 {
        let m = (self.n - 1) as f64;
        m * m * self.kappa / 4.0
    }

    pub fn space(&self) -> Space {
        Space::new(*self)
    }
}

pub fn minkowski(a: &[f64], b: &[f64]) -> f64 {
    let mut s = -a[0] * b[0];
    for i in 1..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(alpha: f64, x: &[f64], beta: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| alpha * a + beta * b).collect()
}

/// Point of the unit hyperboloid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacePoint {
    coords: Vec<f64>,
}

impl SpacePoint {
    pub fn origin(n: usize) -> Self {
        let mut coords = vec![0.0; n + 1];
        coords[0] = 1.0;
        SpacePoint { coords }
    }

    /// Lift from spatial coordinates; always lands on the hyperboloid.
    pub fn from_spatial(xs: &[f64]) -> Self {
        let mut coords = Vec::with_capacity(xs.len() + 1);
        coords.push(0.0);
        coords.extend_from_slice(xs);
        Self::renormalized(coords)
    }

    /// Accepts full Minkowski coordinates that are close to the hyperboloid.
    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        let n = coords.len().saturating_sub(1);
        if !(2..=MAX_DIM).contains(&n) {
            return Err(invalid(format!("expected 3..=5 coordinates, got {}", coords.len())));
        }
        if !(coords[0] > 0.0) || coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("point must be finite with x0 > 0"));
        }
        let defect = (minkowski(&coords, &coords) + 1.0).abs();
        if defect > 1e-6 * coords[0] * coords[0] {
            return Err(invalid(format!("point is off the hyperboloid (defect {defect:e})")));
        }
        Ok(Self::renormalized(coords))
    }

    /// Poincaré ball coordinates to hyperboloid.
    pub fn from_disk(x: &[f64]) -> Result<Self> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            return Err(Error::Domain(format!("|x|^2 = {r2} is not inside the unit ball")));
        }
        let f = 2.0 / (1.0 - r2);
        let xs: Vec<f64> = x.iter().map(|v| f * v).collect();
        Ok(Self::from_spatial(&xs))
    }

    /// Hyperboloid to Poincaré ball coordinates.
    pub fn to_disk(&self) -> Vec<f64> {
        let d = 1.0 + self.coords[0];
        self.coords[1..].iter().map(|v| v / d).collect()
    }

    fn renormalized(mut coords: Vec<f64>) -> Self {
        let s: f64 = coords[1..].iter().map(|v| v * v).sum();
        coords[0] = (1.0 + s).sqrt();
        SpacePoint { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// `|⟨x,x⟩ + 1|`.
    pub fn constraint_defect(&self) -> f64 {
        (minkowski(&self.coords, &self.coords) + 1.0).abs()
    }
}

/// Tangent vector; `⟨base, dir⟩ = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentVec {
    pub base: SpacePoint,
    pub dir: Vec<f64>,
}

impl TangentVec {
    /// Projects `dir` onto the tangent space at `base`.
    pub fn new(base: SpacePoint, dir: Vec<f64>) -> Result<Self> {
        if dir.len() != base.coords.len() {
            return Err(invalid("tangent and base dimensions differ"));
        }
        let c = minkowski(&dir, &base.coords);
        let dir = axpy(1.0, &dir, c, &base.coords);
        Ok(TangentVec { base, dir })
    }

    /// Projected and normalized; zero vectors are rejected.
    pub fn unit(base: SpacePoint, dir: Vec<f64>) -> Result<Self> {
        let v = Self::new(base, dir)?;
        let nv = v.norm();
        if !(nv > 1e-300) {
            return Err(invalid("zero tangent vector cannot be normalized"));
        }
        Ok(v.scaled(1.0 / nv))
    }

    /// Unit tangent at `base` built from spatial components (`dir[0]` is solved for).
    pub fn from_spatial(base: SpacePoint, spatial: &[f64]) -> Result<Self> {
        let mut dir = vec![0.0];
        dir.extend_from_slice(spatial);
        Self::unit(base, dir)
    }

    pub fn zero(base: SpacePoint) -> Self {
        let dir = vec![0.0; base.coords.len()];
        TangentVec { base, dir }
    }

    pub fn norm(&self) -> f64 {
        minkowski(&self.dir, &self.dir).max(0.0).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.norm() == 0.0
    }

    pub fn scaled(&self, a: f64) -> Self {
        TangentVec { base: self.base.clone(), dir: self.dir.iter().map(|v| a * v).collect() }
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn normalized(&self) -> Result<Self> {
        Self::unit(self.base.clone(), self.dir.clone())
    }
}

/// Boundary point, stored as its defining ray plus the null vector `base + dir`
/// scaled to first coordinate 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TangentVec", try_from = "TangentVec")]
pub struct IdealPoint {
    ray: TangentVec,
    null: Vec<f64>,
}

impl From<IdealPoint> for TangentVec {
    fn from(p: IdealPoint) -> Self {
        p.ray
    }
}

impl TryFrom<TangentVec> for IdealPoint {
    type Error = Error;
    fn try_from(v: TangentVec) -> Result<Self> {
        IdealPoint::from_ray(&v)
    }
}

impl IdealPoint {
    pub fn from_ray(ray: &TangentVec) -> Result<Self> {
        let ray = ray.normalized()?;
        let mut null = axpy(1.0, &ray.base.coords, 1.0, &ray.dir);
        let s = null[0];
        null.iter_mut().for_each(|v| *v /= s);
        Ok(IdealPoint { ray, null })
    }

    /// Ideal point seen from the standard origin in direction `u ∈ Rⁿ`.
    pub fn from_direction(u: &[f64]) -> Result<Self> {
        let o = SpacePoint::origin(u.len());
        let v = TangentVec::from_spatial(o, u)?;
        Self::from_ray(&v)
    }

    /// Planar ideal point at polar angle `phi` from the origin.
    pub fn at_angle(phi: f64) -> Self {
        Self::from_direction(&[phi.cos(), phi.sin()]).expect("unit direction")
    }

    pub fn ray(&self) -> &TangentVec {
        &self.ray
    }

    pub fn null_vector(&self) -> &[f64] {
        &self.null
    }

    pub fn dim(&self) -> usize {
        self.null.len() - 1
    }

    /// Unit tangent at `o` whose ray converges to this point.
    pub fn direction_at(&self, o: &SpacePoint) -> TangentVec {
        let c = -minkowski(&self.null, &o.coords);
        let dir = axpy(1.0 / c, &self.null, -1.0, &o.coords);
        TangentVec::unit(o.clone(), dir).expect("null vector is never parallel to a point")
    }
}

/// Geodesic cone `C_o(z, θ)`, optionally truncated by the closed ball of radius `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub axis: TangentVec,
    pub theta: f64,
    pub trunc_radius: Option<f64>,
}

impl Cone {
    pub fn new(axis: TangentVec, theta: f64, trunc_radius: Option<f64>) -> Result<Self> {
        if !(theta > 0.0 && theta < PI) {
            return Err(invalid(format!("cone aperture {theta} outside (0, pi)")));
        }
        if let Some(r) = trunc_radius {
            if !(r >= 0.0) {
                return Err(invalid(format!("truncation radius {r} must be >= 0")));
            }
        }
        let axis = axis.normalized()?;
        Ok(Cone { axis, theta, trunc_radius })
    }

    pub fn apex(&self) -> &SpacePoint {
        &self.axis.base
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Positive,
    Negative,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SurfaceKind {
    /// `{⟨x, m⟩ = 0}` for a spacelike unit `m`.
    TotallyGeodesic { normal: Vec<f64> },
    /// Level `s = c` of the signed distance `s` to `{⟨x, m⟩ = 0}`, on the `side` of the core.
    Equidistant { normal: Vec<f64>, offset: f64, side: Side },
    Sphere { center: SpacePoint, radius: f64 },
    /// Level set of the Busemann function `b(x) = ln(-⟨x, ℓ⟩)/√κ`.
    Horosphere { ideal: IdealPoint, level: f64 },
}

/// Shape data that fixes the principal curvatures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShapeClass {
    TotallyGeodesic,
    Equidistant { offset: f64 },
    Sphere { radius: f64 },
    Horosphere,
}

impl ShapeClass {
    /// Principal curvature of the surface with respect to the normal into `M⁺`
    /// (so `II = -k ≤ 0`).
    pub fn principal_curvature(&self, kappa: f64) -> f64 {
        let s = kappa.sqrt();
        match *self {
            ShapeClass::TotallyGeodesic => 0.0,
            ShapeClass::Equidistant { offset } => s * (s * offset).tanh(),
            ShapeClass::Sphere { radius } => s / (s * radius).tanh(),
            ShapeClass::Horosphere => s,
        }
    }
}

/// Two-sided hypersurface together with the component `M⁺` its normal points into.
///
/// For the curved kinds `M⁺` is the non-convex side, which is the only choice
/// compatible with `II ≤ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub orientation: Side,
}

fn normalize_spacelike(m: &[f64]) -> Result<Vec<f64>> {
    let q = minkowski(m, m);
    if !(q > 0.0) {
        return Err(invalid("hyperplane normal must be spacelike"));
    }
    let s = q.sqrt();
    Ok(m.iter().map(|v| v / s).collect())
}

impl SurfaceSpec {
    pub fn new(kind: SurfaceKind, orientation: Side) -> Result<Self> {
        let kind = match kind {
            SurfaceKind::TotallyGeodesic { normal } => {
                SurfaceKind::TotallyGeodesic { normal: normalize_spacelike(&normal)? }
            }
            SurfaceKind::Equidistant { normal, offset, side } => {
                if !(offset > 0.0 && offset.is_finite()) {
                    return Err(invalid(format!("equidistant offset {offset} must be > 0")));
                }
                SurfaceKind::Equidistant { normal: normalize_spacelike(&normal)?, offset, side }
            }
            SurfaceKind::Sphere { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(invalid(format!("sphere radius {radius} must be > 0")));
                }
                SurfaceKind::Sphere { center, radius }
            }
            k @ SurfaceKind::Horosphere { .. } => k,
        };
        if orientation == Side::Negative && !matches!(kind, SurfaceKind::TotallyGeodesic { .. }) {
            return Err(invalid("II would be positive toward the declared side; only hyperplanes may flip"));
        }
        Ok(SurfaceSpec { kind, orientation })
    }

    /// Hyperplane through `v.base` orthogonal to `v`, with `M⁺` on the side `v` points to.
    pub fn hyperplane(v: &TangentVec) -> Result<Self> {
        let v = v.normalized()?;
        Self::new(SurfaceKind::TotallyGeodesic { normal: v.dir }, Side::Positive)
    }

    pub fn sphere(center: SpacePoint, radius: f64) -> Result<Self> {
        Self::new(SurfaceKind::Sphere { center, radius }, Side::Positive)
    }

    pub fn horosphere(ideal: IdealPoint, level: f64) -> Result<Self> {
        Self::new(SurfaceKind::Horosphere { ideal, level }, Side::Positive)
    }

    /// Equidistant sheet at distance `offset` beyond the hyperplane orthogonal to `v`,
    /// on the side `v` points to.
    pub fn equidistant(v: &TangentVec, offset: f64) -> Result<Self> {
        let v = v.normalized()?;
        Self::new(
            SurfaceKind::Equidistant { normal: v.dir, offset, side: Side::Positive },
            Side::Positive,
        )
    }

    pub fn shape_class(&self) -> ShapeClass {
        match &self.kind {
            SurfaceKind::TotallyGeodesic { .. } => ShapeClass::TotallyGeodesic,
            SurfaceKind::Equidistant { offset, .. } => ShapeClass::Equidistant { offset: *offset },
            SurfaceKind::Sphere { radius, .. } => ShapeClass::Sphere { radius: *radius },
            SurfaceKind::Horosphere { .. } => ShapeClass::Horosphere,
        }
    }

    pub fn principal_curvature(&self, kappa: f64) -> f64 {
        self.shape_class().principal_curvature(kappa)
    }
}

/// Operations of `H^n(-κ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Space {
    params: ModelParams,
    sk: f64,
}

impl Space {
    pub fn new(params: ModelParams) -> Self {
        Space { params, sk: params.kappa.sqrt() }
    }

    /// Shorthand for the constant curvature model.
    pub fn model(n: usize, kappa: f64) -> Result<Self> {
        Ok(Self::new(ModelParams::new(n, kappa)?))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn kappa(&self) -> f64 {
        self.params.kappa
    }

    pub fn sqrt_kappa(&self) -> f64 {
        self.sk
    }

    pub fn origin(&self) -> SpacePoint {
        SpacePoint::origin(self.params.n)
    }

    /// Distance on the unit hyperboloid, `2 asinh(|p - q|_M / 2)`; accurate for
    /// nearby points and free of overflow for separations up to several hundred.
    pub fn unit_dist(p: &SpacePoint, q: &SpacePoint) -> f64 {
        let c = -minkowski(&p.coords, &q.coords);
        if c > 2.0 {
            // far apart: the chord form cancels catastrophically once coordinates reach e^{15}
            return if c > 1e8 { c.ln() + std::f64::consts::LN_2 - 0.25 / (c * c) } else { c.acosh() };
        }
        let d = sub(&p.coords, &q.coords);
        let m = minkowski(&d, &d).max(0.0);
        2.0 * (m.sqrt() / 2.0).asinh()
    }

    pub fn dist(&self, p: &SpacePoint, q: &SpacePoint) -> f64 {
        Self::unit_dist(p, q) / self.sk
    }

    /// Point at distance `t` along the geodesic with initial direction `v`.
    pub fn exp(&self, v: &TangentVec, t: f64) -> SpacePoint {
        let nv = v.norm();
        if nv == 0.0 || t == 0.0 {
            return v.base.clone();
        }
        let u = self.sk * t;
        let coords = axpy(u.cosh(), &v.base.coords, u.sinh() / nv, &v.dir);
        SpacePoint::renormalized(coords)
    }

    /// Point reached by following `v` for its own length.
    pub fn exp_vec(&self, v: &TangentVec) -> SpacePoint {
        self.exp(v, v.norm())
    }

    /// Unit velocity of the geodesic `t ↦ exp(v, t)` at time `t`.
    pub fn geodesic_tangent(&self, v: &TangentVec, t: f64) -> TangentVec {
        let v = v.normalized().expect("nonzero direction");
        let u = self.sk * t;
        let base = self.exp(&v, t);
        let dir = axpy(u.sinh(), &v.base.coords, u.cosh(), &v.dir);
        TangentVec::unit(base, dir).expect("geodesic velocity is nonzero")
    }

    /// Initial velocity of the geodesic from `p` to `q` with length `dist(p, q)`;
    /// the zero vector when `p = q`.
    pub fn log(&self, p: &SpacePoint, q: &SpacePoint) -> TangentVec {
        let d = self.dist(p, q);
        let c = minkowski(&p.coords, &q.coords);
        let u = axpy(1.0, &q.coords, c, &p.coords);
        let v = TangentVec::new(p.clone(), u).expect("same dimension");
        let nv = v.norm();
        if d == 0.0 || nv == 0.0 {
            return TangentVec::zero(p.clone());
        }
        v.scaled(d / nv)
    }

    /// Angle between two tangent vectors at the same base point.
    pub fn angle(&self, u: &TangentVec, w: &TangentVec) -> Result<f64> {
        if u.base != w.base {
            return Err(invalid("angle requires tangents at the same base point"));
        }
        let nu = u.norm();
        let nw = w.norm();
        if nu == 0.0 || nw == 0.0 {
            return Err(invalid("angle with a zero tangent vector is undefined"));
        }
        Ok(unit_angle(&u.dir, nu, &w.dir, nw))
    }

    pub fn horizon(&self, v: &TangentVec) -> Result<IdealPoint> {
        IdealPoint::from_ray(v)
    }

    pub fn cone_contains(&self, cone: &Cone, x: &SpacePoint) -> Result<bool> {
        let a = cone.apex();
        let d = self.dist(a, x);
        if d == 0.0 {
            return Err(Error::Domain("membership is undefined at the cone apex".into()));
        }
        if let Some(r) = cone.trunc_radius {
            if d <= r {
                return Ok(false);
            }
        }
        let c = minkowski(&x.coords, &a.coords);
        let u = axpy(1.0, &x.coords, c, &a.coords);
        let nu = minkowski(&u, &u).max(0.0).sqrt();
        if nu == 0.0 {
            return Err(Error::Domain("direction to the point underflowed".into()));
        }
        let ang = unit_angle(&u, nu, &cone.axis.dir, 1.0);
        Ok(ang < cone.theta)
    }

    /// Half-space `H_t(z)`: the cone of aperture π/2 at `γ_{o,z}(t)` pointing along `γ'`.
    pub fn half_space(&self, z: &TangentVec, t: f64) -> Cone {
        let axis = self.geodesic_tangent(z, t);
        Cone::new(axis, PI / 2.0, None).expect("valid half-space")
    }

    pub fn signed_dist(&self, s: &SurfaceSpec, x: &SpacePoint) -> f64 {
        let sk = self.sk;
        let o = s.orientation.sign();
        match &s.kind {
            SurfaceKind::TotallyGeodesic { normal } => o * minkowski(&x.coords, normal).asinh() / sk,
            SurfaceKind::Equidistant { normal, offset, side } => {
                side.sign() * minkowski(&x.coords, normal).asinh() / sk - offset
            }
            SurfaceKind::Sphere { center, radius } => self.dist(center, x) - radius,
            SurfaceKind::Horosphere { ideal, level } => self.busemann(ideal, x) - level,
        }
    }

    /// Busemann function normalized by `ℓ₀ = 1`; tends to `-∞` toward the ideal point.
    pub fn busemann(&self, ideal: &IdealPoint, x: &SpacePoint) -> f64 {
        (-minkowski(&x.coords, ideal.null_vector())).ln() / self.sk
    }

    /// Unit gradient of the signed distance; its geodesics are the normal lines of `Σ`.
    pub fn grad_signed_dist(&self, s: &SurfaceSpec, x: &SpacePoint) -> Result<TangentVec> {
        let o = s.orientation.sign();
        let toward = |m: &[f64], sign: f64| -> Result<TangentVec> {
            let c = minkowski(&x.coords, m);
            let g = axpy(sign, m, sign * c, &x.coords);
            TangentVec::unit(x.clone(), g)
        };
        match &s.kind {
            SurfaceKind::TotallyGeodesic { normal } => toward(normal, o),
            SurfaceKind::Equidistant { normal, side, .. } => toward(normal, side.sign()),
            SurfaceKind::Sphere { center, .. } => {
                let v = self.log(x, center);
                if v.is_zero() {
                    return Err(Error::Domain("gradient of the distance is undefined at the center".into()));
                }
                v.normalized().map(|u| u.neg())
            }
            SurfaceKind::Horosphere { ideal, .. } => Ok(ideal.direction_at(x).neg()),
        }
    }

    /// Closed-form Laplacian of the signed distance.
    pub fn laplacian_dist(&self, s: &SurfaceSpec, x: &SpacePoint) -> Result<f64> {
        let sk = self.sk;
        let m = (self.params.n - 1) as f64;
        Ok(match &s.kind {
            SurfaceKind::TotallyGeodesic { .. } => {
                m * sk * (sk * self.signed_dist(s, x)).tanh()
            }
            SurfaceKind::Equidistant { normal, side, .. } => {
                let core = side.sign() * minkowski(&x.coords, normal).asinh();
                m * sk * core.tanh()
            }
            SurfaceKind::Sphere { center, .. } => {
                let rho = self.dist(center, x);
                if rho == 0.0 {
                    return Err(Error::Domain("distance to the center is singular there".into()));
                }
                m * sk / (sk * rho).tanh()
            }
            SurfaceKind::Horosphere { .. } => m * sk,
        })
    }

    /// Orthonormal basis of `T_x`.
    pub fn tangent_basis(&self, x: &SpacePoint) -> Vec<TangentVec> {
        let dim = x.coords.len();
        let mut basis: Vec<TangentVec> = Vec::with_capacity(dim - 1);
        for i in 1..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            let mut v = TangentVec::new(x.clone(), e).expect("same dimension");
            for b in &basis {
                let c = minkowski(&v.dir, &b.dir);
                v.dir = axpy(1.0, &v.dir, -c, &b.dir);
            }
            let nv = v.norm();
            basis.push(v.scaled(1.0 / nv));
        }
        basis
    }

    /// Second differences along geodesics through `x` in an orthonormal frame.
    pub fn fd_laplacian<F: Fn(&SpacePoint) -> f64>(&self, f: &F, x: &SpacePoint, h: f64) -> f64 {
        let f0 = f(x);
        self.tangent_basis(x)
            .iter()
            .map(|e| (f(&self.exp(e, h)) - 2.0 * f0 + f(&self.exp(e, -h))) / (h * h))
            .sum()
    }

    /// `fd_laplacian` at steps `h` and `h/2`, Richardson-extrapolated once.
    pub fn fd_laplacian_richardson<F: Fn(&SpacePoint) -> f64>(
        &self,
        f: &F,
        x: &SpacePoint,
        h: f64,
    ) -> f64 {
        let coarse = self.fd_laplacian(f, x, h);
        let fine = self.fd_laplacian(f, x, h / 2.0);
        (4.0 * fine - coarse) / 3.0
    }

    pub fn random_unit_tangent<R: Rng + ?Sized>(&self, p: &SpacePoint, rng: &mut R) -> TangentVec {
        loop {
            let g: Vec<f64> = (0..self.params.n).map(|_| rng.sample(StandardNormal)).collect();
            if g.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
                let basis = self.tangent_basis(p);
                let mut dir = vec![0.0; p.coords.len()];
                for (gi, e) in g.iter().zip(&basis) {
                    for (d, ei) in dir.iter_mut().zip(&e.dir) {
                        *d += gi * ei;
                    }
                }
                return TangentVec::unit(p.clone(), dir).expect("nonzero");
            }
        }
    }

    /// Point at uniformly random distance in `[0, radius]` from `center` in a random direction.
    pub fn random_point<R: Rng + ?Sized>(&self, center: &SpacePoint, radius: f64, rng: &mut R) -> SpacePoint {
        let v = self.random_unit_tangent(center, rng);
        self.exp(&v, rng.gen_range(0.0..=radius))
    }
}

/// Angle between tangent vectors with known Minkowski norms, via
/// `2 atan2(|û - ŵ|, |û + ŵ|)` which stays accurate near 0 and π.
fn unit_angle(u: &[f64], nu: f64, w: &[f64], nw: f64) -> f64 {
    let mut dm = vec![0.0; u.len()];
    let mut dp = vec![0.0; u.len()];
    for i in 0..u.len() {
        dm[i] = u[i] / nu - w[i] / nw;
        dp[i] = u[i] / nu + w[i] / nw;
    }
    let a = minkowski(&dm, &dm).max(0.0).sqrt();
    let b = minkowski(&dp, &dp).max(0.0).sqrt();
    2.0 * a.atan2(b)
}

/// `t_κ(θ) = (1/√κ) ln((1 + cos θ)/sin θ)`, distance from the apex to the
/// hyperplane asymptotic to the boundary of `C_o(z, θ)`.
pub fn t_theta(kappa: f64, theta: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(invalid(format!("kappa must be positive, got {kappa}")));
    }
    if !(theta > 0.0 && theta <= PI / 2.0) {
        return Err(precondition(format!("theta = {theta} outside (0, pi/2]")));
    }
    // (1 + cos θ)/sin θ = cot(θ/2)
    Ok((1.0 / (theta / 2.0).tan()).ln() / kappa.sqrt())
}
