//! The barrier profile `h`: the solution of
//! `h'' + (n-1)√κ tanh(√κ t) h' + λ h = 0` that is positive, decreasing and
//! decays like `e^{-(n-1)√κ t/2}`.
//!
//! The fast branch is selected by integrating backward from a large time `T`
//! seeded on the asymptotic slope `μ_fast`. Going backward the slow mode is
//! damped relative to the fast one, so the shooting is stable.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeParams {
    pub n: usize,
    pub kappa: f64,
    pub lambda: f64,
}

impl OdeParams {
    pub fn new(n: usize, kappa: f64, lambda: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("n = {n} must be >= 2")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa = {kappa} must be positive")));
        }
        let p = OdeParams { n, kappa, lambda };
        let crit = p.critical_lambda();
        if !(lambda >= 0.0 && lambda <= crit * (1.0 + 1e-12)) {
            return Err(invalid(format!("lambda = {lambda} outside [0, {crit}]")));
        }
        Ok(p)
    }

    /// `(n-1)²κ/4`.
    pub fn critical_lambda(&self) -> f64 {
        let b = self.damping();
        b * b / 4.0
    }

    /// `(n-1)√κ`, the limiting damping coefficient.
    pub fn damping(&self) -> f64 {
        (self.n - 1) as f64 * self.kappa.sqrt()
    }

    /// `h''` from the equation.
    pub fn accel(&self, t: f64, h: f64, hp: f64) -> f64 {
        let s = self.kappa.sqrt();
        -self.damping() * (s * t).tanh() * hp - self.lambda * h
    }

    /// Derivative of `accel` along a solution.
    fn jerk(&self, t: f64, h: f64, hp: f64) -> f64 {
        let s = self.kappa.sqrt();
        let th = (s * t).tanh();
        let hpp = self.accel(t, h, hp);
        -self.damping() * (s * (1.0 - th * th) * hp + th * hpp) - self.lambda * hp
    }
}

/// Roots of `μ² + (n-1)√κ μ + λ = 0`, returned as `(μ_slow, μ_fast)`.
pub fn mu_roots(p: &OdeParams) -> Result<(f64, f64)> {
    let p = OdeParams::new(p.n, p.kappa, p.lambda)?;
    let b = p.damping();
    let disc = (b * b - 4.0 * p.lambda).max(0.0);
    let r = disc.sqrt();
    // the slow root via the product of roots avoids cancellation when λ is small
    let fast = (-b - r) / 2.0;
    let slow = if fast != 0.0 { p.lambda / fast } else { 0.0 };
    Ok((slow, fast))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Fast,
    Slow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootOptions {
    /// Start time of the backward integration; `None` picks [`default_horizon`].
    pub horizon: Option<f64>,
    pub grid_step: f64,
    pub seed: f64,
    pub atol: f64,
    pub rtol: f64,
    /// Value imposed on `h(t0)`.
    pub normalization: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions { horizon: None, grid_step: 0.01, seed: 1e-8, atol: 1e-12, rtol: 1e-10, normalization: 1.0 }
    }
}

/// Horizon long enough that slow-mode contamination falls below `1e-10`
/// and the tail regression window `[10, 20]` sits well inside the grid.
pub fn default_horizon(p: &OdeParams) -> f64 {
    let b = p.damping();
    let s = p.kappa.sqrt();
    let (slow, fast) = mu_roots(p).unwrap_or((0.0, -b));
    let gap = slow - fast;
    let mut t = (20.0 / b).max(60.0 / s);
    if gap > 0.0 {
        t = t.max((1e10f64.ln() / gap).min(200.0 / b));
    }
    t
}

/// Numerically certified barrier profile on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierProfile {
    pub params: OdeParams,
    pub branch: Branch,
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub hp: Vec<f64>,
    pub t0: f64,
    pub decay_c: f64,
    pub mu_slow: f64,
    pub mu_fast: f64,
    pub horizon: f64,
    pub grid_step: f64,
    pub max_residual: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub c: f64,
    pub argmax_t: f64,
    pub head_max: f64,
    pub tail_max: f64,
    pub growth_ratio: f64,
    pub passed: bool,
}

/// Fast decaying branch, normalized to `h(t0) = 1` and certified.
pub fn decaying_branch(p: &OdeParams, horizon: f64, grid_step: f64) -> Result<BarrierProfile> {
    let opts = ShootOptions { horizon: Some(horizon), grid_step, ..ShootOptions::default() };
    decaying_branch_with(p, &opts)
}

pub fn decaying_branch_with(p: &OdeParams, opts: &ShootOptions) -> Result<BarrierProfile> {
    let b = p.damping();
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(p));
    if horizon < 20.0 / b {
        return Err(precondition(format!("horizon {horizon} must be >= 20/((n-1)sqrt(kappa)) = {}", 20.0 / b)));
    }
    let mut prof = shoot(p, Branch::Fast, opts)?;
    if prof.max_residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!("ODE residual {:e} exceeds {RESIDUAL_TOL:e}", prof.max_residual)));
    }
    let t0 = find_t0(&prof).map_err(|e| Error::Numerical(format!("integration failure: {e}")))?;
    prof.normalize_at(t0, opts.normalization);
    let (c, report) = decay_certificate(&prof)?;
    if !report.passed {
        return Err(Error::Numerical(format!("decay certificate failed: growth ratio {}", report.growth_ratio)));
    }
    prof.decay_c = c;
    prof.certified = true;
    Ok(prof)
}

/// Residual bound on the grid, relative to `max(1, |h|)`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Backward shooting on either branch without certification. The profile is
/// normalized at the first time after which it is positive and decreasing, or
/// at `t = 0` when no such time exists.
pub fn shoot(p: &OdeParams, branch: Branch, opts: &ShootOptions) -> Result<BarrierProfile> {
    let p = OdeParams::new(p.n, p.kappa, p.lambda)?;
    if !(opts.grid_step > 0.0) {
        return Err(invalid("grid step must be positive"));
    }
    let (mu_slow, mu_fast) = mu_roots(&p)?;
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(&p));
    let steps = (horizon / opts.grid_step).round() as usize;
    if steps < 8 {
        return Err(invalid("grid must contain at least 8 steps"));
    }
    let dt = horizon / steps as f64;
    let t: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    let mu = match branch {
        Branch::Fast => mu_fast,
        Branch::Slow => mu_slow,
    };
    let seed = [opts.seed, mu * opts.seed];
    let f = |tt: f64, y: &[f64; 2]| [y[1], p.accel(tt, y[0], y[1])];
    let ys = rk::integrate_to_grid(&f, &t, steps, seed, opts.atol, opts.rtol)?;
    let h: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    let hp: Vec<f64> = ys.iter().map(|y| y[1]).collect();
    let mut prof = BarrierProfile {
        params: p,
        branch,
        t,
        h,
        hp,
        t0: 0.0,
        decay_c: f64::NAN,
        mu_slow,
        mu_fast,
        horizon,
        grid_step: dt,
        max_residual: f64::NAN,
        certified: false,
    };
    let t0 = find_t0(&prof).unwrap_or(0.0);
    prof.normalize_at(t0, opts.normalization);
    prof.max_residual = prof.residual_max();
    Ok(prof)
}

/// Smallest grid time after which `h > 0` and `h' ≤ 0` hold up to the end of the grid.
pub fn find_t0(profile: &BarrierProfile) -> Result<f64> {
    let n = profile.t.len();
    let mut start = n;
    for i in (0..n).rev() {
        if profile.h[i] > 0.0 && profile.hp[i] <= 0.0 {
            start = i;
        } else {
            break;
        }
    }
    if start == n {
        return Err(Error::Numerical("profile is not positive and decreasing at the end of the grid".into()));
    }
    Ok(profile.t[start])
}

/// `C = max_{t ≥ t0} h(t) e^{(n-1)√κ t/2}`, with a tail test: the maximum over the
/// last third of the grid must not exceed the maximum over the earlier part.
pub fn decay_certificate(profile: &BarrierProfile) -> Result<(f64, DecayReport)> {
    let t0 = find_t0(profile)?;
    let half = profile.params.damping() / 2.0;
    let start = profile.index_of(t0);
    let g: Vec<f64> = (start..profile.t.len()).map(|i| profile.h[i] * (half * profile.t[i]).exp()).collect();
    if g.len() < 3 {
        return Err(Error::Numerical("too few grid points past t0".into()));
    }
    let cut = g.len() * 2 / 3;
    let head_max = g[..cut].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail_max = g[cut..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (imax, c) = g
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let growth_ratio = tail_max / head_max;
    let passed = c.is_finite() && growth_ratio <= 1.0 + 1e-6;
    let report = DecayReport { c, argmax_t: profile.t[start + imax], head_max, tail_max, growth_ratio, passed };
    Ok((c, report))
}

/// Least-squares slope of `ln h` over the grid points in `[a, b]`.
pub fn tail_log_slope(profile: &BarrierProfile, a: f64, b: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = profile
        .t
        .iter()
        .zip(&profile.h)
        .filter(|(t, h)| **t >= a && **t <= b && **h > 0.0)
        .map(|(t, h)| (*t, h.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(precondition("regression window holds fewer than 3 positive samples"));
    }
    Ok(crate::stats::linear_fit(&pts).slope)
}

impl BarrierProfile {
    fn index_of(&self, t: f64) -> usize {
        (((t - self.t[0]) / self.grid_step).round() as usize).min(self.t.len() - 1)
    }

    fn normalize_at(&mut self, t0: f64, value: f64) {
        let i = self.index_of(t0);
        let s = value / self.h[i];
        self.h.iter_mut().for_each(|v| *v *= s);
        self.hp.iter_mut().for_each(|v| *v *= s);
        self.t0 = self.t[i];
    }

    pub fn h_t0(&self) -> f64 {
        self.h[self.index_of(self.t0)]
    }

    /// Maximum over interior grid points of the equation residual with `h''`
    /// taken from sixth-order central differences of `h'`, relative to `max(1, |h|)`.
    pub fn residual_max(&self) -> f64 {
        let n = self.t.len();
        let dt = self.grid_step;
        let p = &self.params;
        let s = p.kappa.sqrt();
        let mut worst: f64 = 0.0;
        let f = &self.hp;
        for i in 3..n.saturating_sub(3) {
            let hpp = (f[i + 3] - 9.0 * f[i + 2] + 45.0 * f[i + 1] - 45.0 * f[i - 1] + 9.0 * f[i - 2] - f[i - 3]) / (60.0 * dt);
            let r = hpp + p.damping() * (s * self.t[i]).tanh() * self.hp[i] + p.lambda * self.h[i];
            worst = worst.max(r.abs() / self.h[i].abs().max(1.0));
        }
        worst
    }

    /// `(h, h')` at any `t` in the grid range, by quintic Hermite interpolation
    /// with `h''` supplied by the equation.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let last = *self.t.last().expect("nonempty grid");
        if !(t >= self.t[0] && t <= last) {
            return Err(Error::Domain(format!("t = {t} outside the profile range [0, {last}]")));
        }
        Ok(self.eval_clamped(t))
    }

    fn eval_clamped(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        let i = (((t - self.t[0]) / self.grid_step).floor() as usize).min(n - 2);
        let a = self.t[i];
        let dt = self.grid_step;
        let p = &self.params;
        let (h0, d0) = (self.h[i], self.hp[i]);
        let (h1, d1) = (self.h[i + 1], self.hp[i + 1]);
        let a0 = p.accel(a, h0, d0);
        let a1 = p.accel(a + dt, h1, d1);
        quintic_hermite(t - a, dt, [h0, d0, a0], [h1, d1, a1])
    }

    /// `h''` at `t` from the equation.
    pub fn accel_at(&self, t: f64) -> Result<f64> {
        let (h, hp) = self.eval(t)?;
        Ok(self.params.accel(t, h, hp))
    }

    /// Third derivative along the profile.
    pub fn jerk_at(&self, t: f64) -> Result<f64> {
        let (h, hp) = self.eval(t)?;
        Ok(self.params.jerk(t, h, hp))
    }

    /// Copy with `h'` negated on the grid; used as a negative control.
    pub fn with_flipped_slope(&self) -> Self {
        let mut c = self.clone();
        c.hp.iter_mut().for_each(|v| *v = -*v);
        c.certified = false;
        c
    }

    pub fn csv_rows(&self) -> Vec<[f64; 3]> {
        (0..self.t.len()).map(|i| [self.t[i], self.h[i], self.hp[i]]).collect()
    }

    pub fn header(&self) -> ProfileHeader {
        ProfileHeader {
            params: self.params,
            branch: self.branch,
            t0: self.t0,
            decay_c: self.decay_c,
            mu_slow: self.mu_slow,
            mu_fast: self.mu_fast,
            horizon: self.horizon,
            grid_step: self.grid_step,
            max_residual: self.max_residual,
            certified: self.certified,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileHeader {
    pub params: OdeParams,
    pub branch: Branch,
    pub t0: f64,
    pub decay_c: f64,
    pub mu_slow: f64,
    pub mu_fast: f64,
    pub horizon: f64,
    pub grid_step: f64,
    pub max_residual: f64,
    pub certified: bool,
}

/// Quintic Hermite interpolant on `[0, dt]` from value, slope and curvature at both ends;
/// returns value and slope at offset `s`.
fn quintic_hermite(s: f64, dt: f64, l: [f64; 3], r: [f64; 3]) -> (f64, f64) {
    let x = s / dt;
    let x2 = x * x;
    let x3 = x2 * x;
    let x4 = x3 * x;
    let x5 = x4 * x;
    let h00 = 1.0 - 10.0 * x3 + 15.0 * x4 - 6.0 * x5;
    let h10 = x - 6.0 * x3 + 8.0 * x4 - 3.0 * x5;
    let h20 = 0.5 * x2 - 1.5 * x3 + 1.5 * x4 - 0.5 * x5;
    let h01 = 10.0 * x3 - 15.0 * x4 + 6.0 * x5;
    let h11 = -4.0 * x3 + 7.0 * x4 - 3.0 * x5;
    let h21 = 0.5 * x3 - x4 + 0.5 * x5;
    let d00 = -30.0 * x2 + 60.0 * x3 - 30.0 * x4;
    let d10 = 1.0 - 18.0 * x2 + 32.0 * x3 - 15.0 * x4;
    let d20 = x - 4.5 * x2 + 6.0 * x3 - 2.5 * x4;
    let d01 = 30.0 * x2 - 60.0 * x3 + 30.0 * x4;
    let d11 = -12.0 * x2 + 28.0 * x3 - 15.0 * x4;
    let d21 = 1.5 * x2 - 4.0 * x3 + 2.5 * x4;
    let v = h00 * l[0] + h10 * dt * l[1] + h20 * dt * dt * l[2] + h01 * r[0] + h11 * dt * r[1] + h21 * dt * dt * r[2];
    let d = (d00 * l[0] + d10 * dt * l[1] + d20 * dt * dt * l[2] + d01 * r[0] + d11 * dt * r[1] + d21 * dt * dt * r[2]) / dt;
    (v, d)
}

mod rk {
    //! Dormand–Prince 5(4) with steps clipped to land on every output node.

    use crate::error::{Error, Result};

    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    /// Integrates from `grid[start]` toward `grid[0]` (or the other way when `start = 0`),
    /// returning the state at every grid node.
    pub fn integrate_to_grid<F: Fn(f64, &[f64; 2]) -> [f64; 2]>(
        f: &F,
        grid: &[f64],
        start: usize,
        y0: [f64; 2],
        atol: f64,
        rtol: f64,
    ) -> Result<Vec<[f64; 2]>> {
        let n = grid.len();
        let mut out = vec![[0.0; 2]; n];
        out[start] = y0;
        let backward = start > 0;
        let mut t = grid[start];
        let mut y = y0;
        let mut h = (grid[1] - grid[0]).abs();
        let mut idx = start;
        let mut steps = 0usize;
        while (backward && idx > 0) || (!backward && idx + 1 < n) {
            let next = if backward { idx - 1 } else { idx + 1 };
            let target = grid[next];
            loop {
                steps += 1;
                if steps > 50_000_000 {
                    return Err(Error::Numerical("step budget exhausted".into()));
                }
                let remaining = target - t;
                let mut step = h.min(remaining.abs());
                let landing = step >= remaining.abs() * (1.0 - 1e-12);
                if landing {
                    step = remaining.abs();
                }
                let sdt = if backward { -step } else { step };
                let (ynew, err) = trial(f, t, &y, sdt, atol, rtol);
                if !err.is_finite() {
                    return Err(Error::Numerical("non-finite state during integration".into()));
                }
                if err <= 1.0 {
                    t = if landing { target } else { t + sdt };
                    y = ynew;
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !landing {
                        h = step * fac;
                    } else {
                        h = h.max(step * fac);
                    }
                    if landing {
                        break;
                    }
                } else {
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                    if h < 1e-14 {
                        return Err(Error::Numerical("step size underflow".into()));
                    }
                }
            }
            idx = next;
            out[idx] = y;
        }
        Ok(out)
    }

    fn trial<F: Fn(f64, &[f64; 2]) -> [f64; 2]>(
        f: &F,
        t: f64,
        y: &[f64; 2],
        h: f64,
        atol: f64,
        rtol: f64,
    ) -> ([f64; 2], f64) {
        let mut k = [[0.0; 2]; 7];
        for s in 0..7 {
            let mut ys = *y;
            for (j, kj) in k.iter().enumerate().take(s) {
                for d in 0..2 {
                    ys[d] += h * A[s][j] * kj[d];
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut ynew = *y;
        let mut err = 0.0;
        for d in 0..2 {
            let mut acc = 0.0;
            let mut e = 0.0;
            for s in 0..7 {
                acc += B[s] * k[s][d];
                e += E[s] * k[s][d];
            }
            ynew[d] = y[d] + h * acc;
            let sc = atol + rtol * y[d].abs().max(ynew[d].abs());
            let r = h * e / sc;
            err += r * r;
        }
        (ynew, (err / 2.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn roots_examples() {
        let (s, f) = mu_roots(&OdeParams::new(2, 1.0, 0.25).unwrap()).unwrap();
        assert_abs_diff_eq!(s, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(f, -0.5, epsilon = 1e-12);
        let (s, f) = mu_roots(&OdeParams::new(2, 1.0, 0.21).unwrap()).unwrap();
        assert_abs_diff_eq!(s, -0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(f, -0.7, epsilon = 1e-12);
        let (s, f) = mu_roots(&OdeParams::new(2, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(s, 0.0);
        assert_abs_diff_eq!(f, -1.0, epsilon = 1e-15);
        assert!(OdeParams::new(2, 1.0, 0.3).is_err());
        assert!(OdeParams::new(2, 1.0, -0.01).is_err());
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let p = |x: f64| 1.0 + 2.0 * x - x * x + 0.5 * x.powi(3) - 0.25 * x.powi(5);
        let dp = |x: f64| 2.0 - 2.0 * x + 1.5 * x * x - 1.25 * x.powi(4);
        let ddp = |x: f64| -2.0 + 3.0 * x - 5.0 * x.powi(3);
        let (a, b) = (0.3, 0.8);
        for s in [0.0, 0.1, 0.25, 0.5] {
            let (v, d) = quintic_hermite(s, b - a, [p(a), dp(a), ddp(a)], [p(b), dp(b), ddp(b)]);
            assert_abs_diff_eq!(v, p(a + s), epsilon = 1e-13);
            assert_abs_diff_eq!(d, dp(a + s), epsilon = 1e-12);
        }
    }

    #[test]
    fn sign_flip_has_no_t0() {
        let prof = decaying_branch_with(&OdeParams::new(2, 1.0, 0.25).unwrap(), &ShootOptions::default()).unwrap();
        let mut bad = prof.clone();
        let last = bad.h.len() - 1;
        bad.h[last] = -bad.h[last];
        assert!(find_t0(&bad).is_err());
    }
}
