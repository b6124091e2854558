//! Finite differences for `Δu + f(u) = 0` on planar domains of curvature `−κ`, drawn in the
//! Poincaré disk where `Δ_g = κ(1 − |x|²)²/4 · Δ_euc`.
//!
//! The discrete operator is the symmetric Shortley–Weller scheme: neighbours inside the
//! domain couple with weight `1/h²`; a missing neighbour at fraction `θ` of the edge
//! (the boundary crossing found by bisection on a level function) adds `1/(θh²)` to the
//! diagonal. The matrix is a symmetric M-matrix, so the eigenvalue problem
//! `A u = λ W u` (with `W` the conformal weight) and the Newton systems stay symmetric.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::barriers::{build_cone_barrier, ConvexBarrier};
use crate::error::{invalid, precondition, Error, Result};
use crate::hypgeo::{Side, Space, SpacePoint, SurfaceKind, SurfaceSpec, TangentVec};
use crate::linalg::{lobpcg, minres, Csr, Multigrid};

/// Uniform lattice of step `spacing` on `|x| ≤ clip` in the unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskGrid {
    pub spacing: f64,
    pub kappa: f64,
    #[serde(default = "default_clip")]
    pub clip: f64,
}

fn default_clip() -> f64 {
    DiskGrid::DEFAULT_CLIP
}

impl DiskGrid {
    pub const DEFAULT_CLIP: f64 = 0.9999;

    pub fn new(spacing: f64, kappa: f64) -> Result<Self> {
        Self::with_clip(spacing, kappa, Self::DEFAULT_CLIP)
    }

    pub fn with_clip(spacing: f64, kappa: f64, clip: f64) -> Result<Self> {
        let g = DiskGrid { spacing, kappa, clip };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing < 0.5) {
            return Err(invalid("grid spacing must lie in (0, 0.5)"));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(invalid("clip radius must lie in (0, 1)"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(invalid("kappa must be positive"));
        }
        Ok(())
    }

    pub fn half(&self) -> usize {
        (self.clip / self.spacing).floor() as usize
    }

    /// Lattice side length.
    pub fn size(&self) -> usize {
        2 * self.half() + 1
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.half() as f64) * self.spacing
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.coord(i), self.coord(j)]
    }

    /// `4/(κ(1 − |x|²)²)`, the factor with `Δ_euc = W Δ_g`.
    pub fn weight(&self, x: [f64; 2]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        4.0 / (self.kappa * (1.0 - r2) * (1.0 - r2))
    }

    /// Geodesic distance from the origin.
    pub fn geodesic_radius(&self, x: [f64; 2]) -> f64 {
        2.0 * x[0].hypot(x[1]).atanh() / self.kappa.sqrt()
    }

    pub fn disk_radius(&self, rho: f64) -> f64 {
        (self.kappa.sqrt() * rho / 2.0).tanh()
    }

    /// Geodesic radius of the clip circle.
    pub fn max_radius(&self) -> f64 {
        2.0 * self.clip.atanh() / self.kappa.sqrt()
    }

    pub fn space(&self) -> Space {
        Space::model(2, self.kappa).expect("validated kappa")
    }
}

pub fn disk_point(x: [f64; 2]) -> SpacePoint {
    SpacePoint::from_disk(&x).expect("point inside the unit disk")
}

/// Boolean lattice, serialized as run lengths of alternating `false`/`true` starting with `false`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MaskRle", try_from = "MaskRle")]
pub struct Mask {
    pub size: usize,
    pub bits: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRle {
    pub size: usize,
    pub runs: Vec<usize>,
}

impl From<Mask> for MaskRle {
    fn from(m: Mask) -> Self {
        let mut runs = Vec::new();
        let mut cur = false;
        let mut len = 0;
        for &b in &m.bits {
            if b == cur {
                len += 1;
            } else {
                runs.push(len);
                cur = b;
                len = 1;
            }
        }
        runs.push(len);
        MaskRle { size: m.size, runs }
    }
}

impl TryFrom<MaskRle> for Mask {
    type Error = Error;
    fn try_from(r: MaskRle) -> Result<Self> {
        let mut bits = Vec::with_capacity(r.size * r.size);
        let mut cur = false;
        for &len in &r.runs {
            bits.extend(std::iter::repeat_n(cur, len));
            cur = !cur;
        }
        if bits.len() != r.size * r.size {
            return Err(invalid(format!("mask runs cover {} cells, expected {}", bits.len(), r.size * r.size)));
        }
        Ok(Mask { size: r.size, bits })
    }
}

impl Mask {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.size + j]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Whether every set cell of `self` is set in `other`.
    pub fn subset_of(&self, other: &Mask) -> bool {
        self.size == other.size && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Cells of `grid` strictly inside the clip circle that satisfy `pred`.
    pub fn from_predicate<F: Fn([f64; 2]) -> bool>(grid: &DiskGrid, pred: F) -> Mask {
        let m = grid.size();
        let mut bits = vec![false; m * m];
        for i in 0..m {
            for j in 0..m {
                let x = grid.node(i, j);
                bits[i * m + j] = x[0].hypot(x[1]) < grid.clip && pred(x);
            }
        }
        Mask { size: m, bits }
    }
}

/// Visual cap on the boundary circle: center at polar angle `angle`, visual radius `radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapSpec {
    pub angle: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainKind {
    GeodesicDisk { radius: f64 },
    /// `C_o(z, θ) ∩ B_o(r)` with `z` at polar angle `direction`.
    TruncatedCone { direction: f64, theta: f64, radius: f64 },
    /// Side of the geodesic orthogonal to the ray toward `direction` at signed time `t`
    /// into which the ray continues; `t < 0` puts the origin inside.
    HalfPlane { t: f64, direction: f64 },
    /// Complement of the convex barrier sets built over visual caps at offset `c`.
    BarrierComplement { caps: Vec<CapSpec>, offset: f64 },
    Omega0 { mask: Mask },
}

/// A domain, optionally intersected with `B_o(truncate)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    #[serde(default)]
    pub truncate: Option<f64>,
}

impl DomainSpec {
    pub fn disk(radius: f64) -> Self {
        DomainSpec { kind: DomainKind::GeodesicDisk { radius }, truncate: None }
    }

    pub fn truncated(kind: DomainKind, radius: f64) -> Self {
        DomainSpec { kind, truncate: Some(radius) }
    }
}

/// Cone barriers over planar caps: `θ = 2 arcsin r`, apex direction at the cap center.
pub fn cap_barriers(space: &Space, caps: &[CapSpec], offset: f64) -> Result<Vec<ConvexBarrier>> {
    caps.iter()
        .map(|cap| {
            if !(cap.radius > 0.0 && cap.radius < 1.0) {
                return Err(invalid(format!("cap radius {} outside (0, 1)", cap.radius)));
            }
            let z = TangentVec::from_spatial(space.origin(), &[cap.angle.cos(), cap.angle.sin()])?;
            build_cone_barrier(space, &z, 2.0 * cap.radius.asin(), offset)
        })
        .collect()
}

enum Geometry {
    Level(Box<dyn Fn([f64; 2]) -> f64 + Sync>),
    Mask(Mask),
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d = 2.0 * PI - d;
    }
    d
}

fn geometry(domain: &DomainSpec, grid: &DiskGrid) -> Result<Geometry> {
    let space = grid.space();
    let g = *grid;
    let base: Box<dyn Fn([f64; 2]) -> f64 + Sync> = match &domain.kind {
        DomainKind::GeodesicDisk { radius } => {
            let r = *radius;
            if !(r > 0.0) {
                return Err(invalid("disk radius must be positive"));
            }
            Box::new(move |x| r - g.geodesic_radius(x))
        }
        DomainKind::TruncatedCone { direction, theta, radius } => {
            let (dir, th, r) = (*direction, *theta, *radius);
            if !(th > 0.0 && th <= PI && r > 0.0) {
                return Err(invalid("cone needs theta in (0, pi] and radius > 0"));
            }
            Box::new(move |x| (th - angle_gap(x[1].atan2(x[0]), dir)).min(r - g.geodesic_radius(x)))
        }
        DomainKind::HalfPlane { t, direction } => {
            let z = TangentVec::from_spatial(space.origin(), &[direction.cos(), direction.sin()])?;
            let m = space.geodesic_tangent(&z, *t);
            let surf = SurfaceSpec::new(SurfaceKind::TotallyGeodesic { normal: m.dir.clone() }, Side::Positive)?;
            Box::new(move |x| space.signed_dist(&surf, &disk_point(x)))
        }
        DomainKind::BarrierComplement { caps, offset } => {
            let bars = cap_barriers(&space, caps, *offset)?;
            Box::new(move |x| {
                let p = disk_point(x);
                bars.iter().map(|b| b.core_dist(&space, &p) - b.offset).fold(f64::INFINITY, f64::min)
            })
        }
        DomainKind::Omega0 { mask } => {
            if mask.size != grid.size() {
                return Err(invalid(format!("mask size {} does not match the grid size {}", mask.size, grid.size())));
            }
            if domain.truncate.is_some() {
                let r = domain.truncate.expect("checked");
                let mut m = mask.clone();
                for i in 0..m.size {
                    for j in 0..m.size {
                        if g.geodesic_radius(g.node(i, j)) >= r {
                            m.bits[i * m.size + j] = false;
                        }
                    }
                }
                return Ok(Geometry::Mask(m));
            }
            return Ok(Geometry::Mask(mask.clone()));
        }
    };
    Ok(match domain.truncate {
        Some(r) => {
            if !(r > 0.0) {
                return Err(invalid("truncation radius must be positive"));
            }
            Geometry::Level(Box::new(move |x| base(x).min(r - g.geodesic_radius(x))))
        }
        None => Geometry::Level(base),
    })
}

/// Assembled discrete Dirichlet problem.
pub struct Problem {
    pub grid: DiskGrid,
    pub domain: DomainSpec,
    /// Lattice position of each unknown.
    pub nodes: Vec<(usize, usize)>,
    index: Vec<usize>,
    /// Symmetric Shortley–Weller matrix for `−Δ_euc`.
    pub a: Csr,
    /// Conformal weights `W`.
    pub w: Vec<f64>,
    /// Unknowns with at least one neighbour outside the domain.
    pub boundary_layer: Vec<bool>,
    mg: Multigrid,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem").field("grid", &self.grid).field("unknowns", &self.nodes.len()).finish()
    }
}

const MIN_FRACTION: f64 = 1e-6;
const MIN_NODES: usize = 100;

pub fn assemble(domain: &DomainSpec, grid: &DiskGrid) -> Result<Problem> {
    grid.validate()?;
    let geo = geometry(domain, grid)?;
    let m = grid.size();
    let clip = grid.clip;
    // combined level: positive inside the domain and the clip disk
    let level = |x: [f64; 2]| -> f64 {
        let c = clip - x[0].hypot(x[1]);
        match &geo {
            Geometry::Level(f) => {
                if c <= 0.0 {
                    c
                } else {
                    f(x).min(c * 1e3)
                }
            }
            Geometry::Mask(_) => c,
        }
    };
    let inside = |i: usize, j: usize| -> bool {
        let x = grid.node(i, j);
        match &geo {
            Geometry::Level(_) => level(x) > 0.0,
            Geometry::Mask(mk) => level(x) > 0.0 && mk.get(i, j),
        }
    };
    let mut index = vec![usize::MAX; m * m];
    let mut nodes = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if inside(i, j) {
                index[i * m + j] = nodes.len();
                nodes.push((i, j));
            }
        }
    }
    if nodes.len() < MIN_NODES {
        return Err(precondition(format!("only {} interior nodes; need at least {MIN_NODES}", nodes.len())));
    }
    let h = grid.spacing;
    let inv_h2 = 1.0 / (h * h);
    let mut trip = Vec::with_capacity(nodes.len() * 5);
    let mut boundary_layer = vec![false; nodes.len()];
    let mut w = Vec::with_capacity(nodes.len());
    for (k, &(i, j)) in nodes.iter().enumerate() {
        let x = grid.node(i, j);
        w.push(grid.weight(x));
        let mut diag = 0.0;
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let ni = i as i64 + di;
            let nj = j as i64 + dj;
            let nb = if ni >= 0 && nj >= 0 && (ni as usize) < m && (nj as usize) < m {
                index[ni as usize * m + nj as usize]
            } else {
                usize::MAX
            };
            if nb != usize::MAX {
                trip.push((k, nb, -inv_h2));
                diag += inv_h2;
                continue;
            }
            boundary_layer[k] = true;
            let theta = match &geo {
                Geometry::Mask(_) => 1.0,
                Geometry::Level(_) => {
                    let y = [x[0] + di as f64 * h, x[1] + dj as f64 * h];
                    let (mut lo, mut hi) = (0.0, 1.0);
                    if level(y) > 0.0 {
                        // outside only by lattice truncation: treat the neighbour as the boundary
                        1.0
                    } else {
                        for _ in 0..50 {
                            let mid = 0.5 * (lo + hi);
                            let p = [x[0] + mid * di as f64 * h, x[1] + mid * dj as f64 * h];
                            if level(p) > 0.0 {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        0.5 * (lo + hi)
                    }
                }
            };
            diag += inv_h2 / theta.max(MIN_FRACTION);
        }
        trip.push((k, k, diag));
    }
    let a = Csr::from_triplets(nodes.len(), nodes.len(), trip);
    for i in 0..a.n_rows {
        for (j, v) in a.row(i) {
            if (j == i && !(v > 0.0)) || (j != i && v > 0.0) {
                return Err(Error::Numerical("assembled matrix is not an M-matrix".into()));
            }
        }
    }
    let mg = Multigrid::new(&a, m, &nodes)?;
    Ok(Problem { grid: *grid, domain: domain.clone(), nodes, index, a, w, boundary_layer, mg })
}

impl Problem {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.nodes[k];
        self.grid.node(i, j)
    }

    pub fn unknown_at(&self, i: usize, j: usize) -> Option<usize> {
        let m = self.grid.size();
        (i < m && j < m).then(|| self.index[i * m + j]).filter(|&k| k != usize::MAX)
    }

    /// Node set as a lattice mask.
    pub fn mask(&self) -> Mask {
        let m = self.grid.size();
        Mask { size: m, bits: self.index.iter().map(|&k| k != usize::MAX).collect() }
    }

    /// Discrete `Δ_g u` at every unknown, with zero boundary data.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.a.mul(u).iter().zip(&self.w).map(|(au, w)| -au / w).collect()
    }

    /// `f(x)` at every unknown.
    pub fn sample<F: Fn(&SpacePoint) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|k| f(&disk_point(self.coords(k)))).collect()
    }

    pub fn field(&self, values: Vec<f64>, residual: f64, iterations: usize) -> DomainField {
        DomainField { grid: self.grid, nodes: self.nodes.clone(), values, residual, iterations }
    }

    /// `A⁻¹ b` by multigrid-preconditioned CG.
    pub fn solve_poisson(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut x = vec![0.0; b.len()];
        crate::linalg::pcg(&self.a, b, &mut x, |r| self.mg.apply(r), tol, 2000)?;
        Ok(x)
    }

    pub fn lambda1(&self) -> Result<Eigen> {
        let x0 = vec![1.0; self.len()];
        let e = lobpcg(&self.a, &self.w, &x0, |r| self.mg.apply(r), EIGEN_TOL, 10_000)?;
        Ok(Eigen { lambda: e.lambda, iterations: e.iterations, residual: e.residual, field: self.field(e.vector, e.residual, e.iterations) })
    }
}

/// Relative eigen-residual target; the Rayleigh quotient error is of its square.
pub const EIGEN_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainField {
    pub grid: DiskGrid,
    pub nodes: Vec<(usize, usize)>,
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl DomainField {
    pub fn coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.nodes[k];
        self.grid.node(i, j)
    }

    pub fn max_abs(&self) -> (f64, usize) {
        self.values.iter().enumerate().fold((0.0, 0), |acc, (k, v)| if v.abs() > acc.0 { (v.abs(), k) } else { acc })
    }

    /// `(x, y, u)` rows.
    pub fn rows(&self) -> Vec<[f64; 3]> {
        (0..self.values.len()).map(|k| {
            let c = self.coords(k);
            [c[0], c[1], self.values[k]]
        }).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigen {
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip_serializing)]
    pub field: DomainField,
}

/// Smallest Dirichlet eigenvalue of `−Δ_g` on the rasterized domain.
pub fn lambda1(domain: &DomainSpec, grid: &DiskGrid) -> Result<Eigen> {
    assemble(domain, grid)?.lambda1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Linear { lambda: f64 },
    AllenCahn,
    Tanh,
    Arctan,
    Rational,
}

impl NonlinearitySpec {
    pub fn f(&self, u: f64) -> f64 {
        match self {
            NonlinearitySpec::Linear { lambda } => lambda * u,
            NonlinearitySpec::AllenCahn => u - u * u * u,
            NonlinearitySpec::Tanh => u.tanh(),
            NonlinearitySpec::Arctan => u.atan(),
            NonlinearitySpec::Rational => u / (1.0 + u * u),
        }
    }

    pub fn fprime(&self, u: f64) -> f64 {
        match self {
            NonlinearitySpec::Linear { lambda } => *lambda,
            NonlinearitySpec::AllenCahn => 1.0 - 3.0 * u * u,
            NonlinearitySpec::Tanh => 1.0 / (u.cosh() * u.cosh()),
            NonlinearitySpec::Arctan => 1.0 / (1.0 + u * u),
            NonlinearitySpec::Rational => (1.0 - u * u) / ((1.0 + u * u) * (1.0 + u * u)),
        }
    }

    /// `f'(0)`.
    pub fn lambda_eff(&self) -> f64 {
        self.fprime(0.0)
    }

    /// Range of `|u|` on which `|f(u)| ≤ λ_eff |u|` is checked. Allen–Cahn only satisfies
    /// it for `|u| ≤ √2`, and its bounded solutions live in `[−1, 1]`.
    pub fn hypothesis_range(&self) -> f64 {
        match self {
            NonlinearitySpec::AllenCahn => 1.0,
            _ => 10.0,
        }
    }

    /// Oddness and the linear bound on a 2001-point grid.
    pub fn check_hypotheses(&self) -> Result<()> {
        let l = self.lambda_eff();
        let range = self.hypothesis_range();
        for i in 0..=2000 {
            let u = -range + 2.0 * range * i as f64 / 2000.0;
            if (self.f(-u) + self.f(u)).abs() > 1e-14 * (1.0 + u.abs()) {
                return Err(Error::Precondition(format!("f is not odd at u = {u}")));
            }
            if self.f(u).abs() > l.abs() * u.abs() + 1e-14 {
                return Err(Error::Precondition(format!("|f(u)| > lambda|u| at u = {u}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub linear_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-9, max_iter: 50, max_halvings: 50, linear_tol: 1e-10 }
    }
}

impl Problem {
    /// `max |Δ_g u + f(u)|` over the unknowns.
    pub fn residual(&self, f: &NonlinearitySpec, u: &[f64]) -> f64 {
        self.laplacian(u).iter().zip(u).map(|(l, ui)| (l + f.f(*ui)).abs()).fold(0.0, f64::max)
    }
}

/// Damped Newton: MINRES on the symmetric Jacobian `A − W f'(u)` preconditioned by a
/// multigrid cycle for `A`, step halving whenever the max-norm residual fails to drop.
pub fn solve_semilinear(problem: &Problem, f: &NonlinearitySpec, init: &[f64], opts: &NewtonOptions) -> Result<DomainField> {
    if init.len() != problem.len() {
        return Err(invalid("initial guess does not match the unknowns"));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial guess must be finite"));
    }
    let mut u = init.to_vec();
    let mut res = problem.residual(f, &u);
    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(problem.field(u, res, it));
        }
        let g: Vec<f64> = problem.a.mul(&u).iter().enumerate().map(|(i, au)| -(au - problem.w[i] * f.f(u[i]))).collect();
        let shift: Vec<f64> = u.iter().zip(&problem.w).map(|(ui, w)| -w * f.fprime(*ui)).collect();
        let j = problem.a.add_diagonal(&shift);
        let (delta, _) = minres(|v| j.mul(v), &g, |r| problem.mg.apply(r), opts.linear_tol, 5000)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            let r = problem.residual(f, &trial);
            if r < res {
                u = trial;
                res = r;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence(format!("Newton stagnated with residual {res:e}")));
        }
    }
    if res <= opts.tol {
        return Ok(problem.field(u, res, opts.max_iter));
    }
    Err(Error::NoConvergence(format!("Newton did not converge; last residual {res:e}")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcBoundReport {
    pub max_abs: f64,
    pub argmax: [f64; 2],
    pub passed: bool,
}

pub fn allen_cahn_bound_check(field: &DomainField) -> AcBoundReport {
    let (max_abs, k) = field.max_abs();
    let argmax = if field.values.is_empty() { [0.0, 0.0] } else { field.coords(k) };
    AcBoundReport { max_abs, argmax, passed: max_abs <= 1.0 + 1e-8 }
}

/// `Δ(r²) = 2 + 2(n − 1)√κ r coth(√κ r)` with `n = 2`.
pub fn delta_r2_closed(kappa: f64, r: f64) -> f64 {
    let s = kappa.sqrt();
    if r == 0.0 {
        return 4.0;
    }
    2.0 + 2.0 * s * r / (s * r).tanh()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaR2Report {
    /// `(r, FD at h, FD at h/2, closed form)`.
    pub rows: Vec<[f64; 4]>,
    pub max_err: f64,
    pub max_err_half: f64,
    /// Worst `closed(r) − (A + B r)` on `r ∈ [1, 6]`; nonpositive when the envelope holds.
    pub envelope_excess: f64,
    pub passed: bool,
}

fn fd_delta_g<F: Fn([f64; 2]) -> f64>(grid: &DiskGrid, f: &F, x: [f64; 2], h: f64) -> f64 {
    let lap = (f([x[0] + h, x[1]]) + f([x[0] - h, x[1]]) + f([x[0], x[1] + h]) + f([x[0], x[1] - h]) - 4.0 * f(x)) / (h * h);
    lap / grid.weight(x)
}

/// FD `Δ_g(r²)` at the given disk points (step `spacing` and half of it) against the
/// closed form, plus the linear envelope `A + B r`, `A = 4`, `B = 2.4√κ`, on `r ∈ [1, 6]`.
pub fn delta_r2_check(grid: &DiskGrid, points: &[[f64; 2]]) -> Result<DeltaR2Report> {
    let h = grid.spacing;
    if points.iter().any(|p| p[0].hypot(p[1]) < h) {
        return Err(precondition("points must stay at least one spacing away from the origin"));
    }
    if points.iter().any(|p| p[0].hypot(p[1]) + h >= 1.0) {
        return Err(precondition("stencil leaves the disk"));
    }
    let r2 = |x: [f64; 2]| grid.geodesic_radius(x).powi(2);
    let mut rows = Vec::new();
    let (mut e1, mut e2): (f64, f64) = (0.0, 0.0);
    for &p in points {
        let r = grid.geodesic_radius(p);
        let closed = delta_r2_closed(grid.kappa, r);
        let a = fd_delta_g(grid, &r2, p, h);
        let b = fd_delta_g(grid, &r2, p, h / 2.0);
        e1 = e1.max((a - closed).abs());
        e2 = e2.max((b - closed).abs());
        rows.push([r, a, b, closed]);
    }
    let s = grid.kappa.sqrt();
    let (ca, cb) = (4.0, 2.0 * s * 1.2);
    let envelope_excess = (0..=500)
        .map(|i| 1.0 + 5.0 * i as f64 / 500.0)
        .map(|r| delta_r2_closed(grid.kappa, r) - (ca + cb * r))
        .fold(f64::NEG_INFINITY, f64::max);
    // second order: halving the step must cut the error by at least 3, unless at roundoff
    let second_order = e2 <= e1 / 3.0 || e1 < 1e-8;
    Ok(DeltaR2Report { rows, max_err: e1, max_err_half: e2, envelope_excess, passed: second_order && envelope_excess <= 0.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tol: f64,
    pub max_violation: f64,
    pub argmax: [f64; 2],
    pub passed: bool,
}

/// Checks `u ≤ v + tol` on every unknown, given `u ≤ v` on the boundary layer.
pub fn comparison_check(problem: &Problem, u: &DomainField, v: &[f64]) -> Result<ComparisonReport> {
    if u.values.len() != problem.len() || v.len() != problem.len() {
        return Err(invalid("fields do not match the problem"));
    }
    let tol = (u.residual * 10.0).max(1e-12);
    for k in 0..problem.len() {
        if problem.boundary_layer[k] && u.values[k] > v[k] + tol {
            return Err(precondition(format!("u > v on the boundary layer at {:?}", problem.coords(k))));
        }
    }
    let (mut worst, mut arg) = (f64::NEG_INFINITY, 0);
    for k in 0..problem.len() {
        let d = u.values[k] - v[k];
        if d > worst {
            worst = d;
            arg = k;
        }
    }
    Ok(ComparisonReport { tol, max_violation: worst, argmax: problem.coords(arg), passed: worst <= tol })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropLambdaReport {
    pub lambda: f64,
    pub lambda1: f64,
    pub min_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Given `v > 0` with `Δv + λv ≥ −tol·max v` on the grid, checks `λ₁ ≤ λ + 10·tol`.
pub fn prop_lambda_check(problem: &Problem, v: &[f64], lambda: f64, tol: f64) -> Result<PropLambdaReport> {
    if v.len() != problem.len() {
        return Err(invalid("field does not match the problem"));
    }
    if v.iter().any(|x| !(*x > 0.0)) {
        return Err(invalid("v must be positive at every interior node"));
    }
    let vmax = v.iter().cloned().fold(0.0, f64::max);
    let lap = problem.laplacian(v);
    let min_residual = lap.iter().zip(v).map(|(l, x)| (l + lambda * x) / vmax).fold(f64::INFINITY, f64::min);
    if min_residual < -tol {
        return Err(precondition(format!("v is not a subsolution: min (Δv + λv)/max v = {min_residual:e}")));
    }
    let lambda1 = problem.lambda1()?.lambda;
    Ok(PropLambdaReport { lambda, lambda1, min_residual, tol, passed: lambda1 <= lambda + 10.0 * tol })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendTable {
    pub rows: Vec<(f64, f64)>,
    pub monotone: bool,
}

/// `λ₁(family(R))` for each `R`.
pub fn threshold_trend<F: Fn(f64) -> DomainSpec>(family: F, radii: &[f64], grid: &DiskGrid) -> Result<TrendTable> {
    if radii.len() < 3 {
        return Err(invalid("a trend needs at least three radii"));
    }
    let mut rows = Vec::new();
    for &r in radii {
        rows.push((r, lambda1(&family(r), grid)?.lambda));
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    Ok(TrendTable { rows, monotone })
}
