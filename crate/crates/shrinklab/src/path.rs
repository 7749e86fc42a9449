//! Brownian paths, Itô sums, stochastic exponentials and Euler–Maruyama.
//!
//! All integrals are left-endpoint sums on the path's grid:
//!
//! ```text
//! (H . X)_j = sum_{i<j} H_i (X_{i+1} - X_i)
//! [X]_j     = sum_{i<j} (X_{i+1} - X_i)^2
//! E(X)_j    = exp(X_j - X_0 - [X]_j / 2)
//! ```

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{RngStream, SamplePath, TimeGrid};

/// Standard Brownian motion started at 0.
pub fn gen_brownian(grid: &TimeGrid, rng: &RngStream) -> SamplePath {
    brownian_from(grid, &mut rng.increments())
}

/// Brownian motion on the second-driver lane, independent of [`gen_brownian`].
pub fn gen_second_brownian(grid: &TimeGrid, rng: &RngStream) -> SamplePath {
    brownian_from(grid, &mut rng.second_driver())
}

fn brownian_from<R: Rng>(grid: &TimeGrid, r: &mut R) -> SamplePath {
    let mut values = Vec::with_capacity(grid.len());
    let mut w = 0.0;
    values.push(w);
    if grid.is_uniform() {
        let sq = grid.dt().sqrt();
        for _ in 0..grid.steps() {
            let z: f64 = r.sample(StandardNormal);
            w += sq * z;
            values.push(w);
        }
    } else {
        for j in 0..grid.steps() {
            let z: f64 = r.sample(StandardNormal);
            w += grid.step(j).sqrt() * z;
            values.push(w);
        }
    }
    SamplePath::from_parts(grid.clone(), values)
}

/// Left-endpoint Itô sum of `integrand` against `integrator`.
pub fn ito_integral(integrand: &SamplePath, integrator: &SamplePath) -> Result<SamplePath> {
    if integrand.grid() != integrator.grid() {
        return Err(Error::GridMismatch);
    }
    let h = integrand.values();
    let x = integrator.values();
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..x.len() - 1 {
        acc += h[i] * (x[i + 1] - x[i]);
        out.push(acc);
    }
    Ok(SamplePath::from_parts(integrator.grid().clone(), out))
}

/// Realized quadratic variation.
pub fn quadratic_variation(path: &SamplePath) -> SamplePath {
    let x = path.values();
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..x.len() - 1 {
        let d = x[i + 1] - x[i];
        acc += d * d;
        out.push(acc);
    }
    SamplePath::from_parts(path.grid().clone(), out)
}

/// Realized covariation `[X, Y]`.
pub fn covariation(x: &SamplePath, y: &SamplePath) -> Result<SamplePath> {
    if x.grid() != y.grid() {
        return Err(Error::GridMismatch);
    }
    let (a, b) = (x.values(), y.values());
    let mut out = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..a.len() - 1 {
        acc += (a[i + 1] - a[i]) * (b[i + 1] - b[i]);
        out.push(acc);
    }
    Ok(SamplePath::from_parts(x.grid().clone(), out))
}

/// `exp(X - X_0 - [X]/2)` with the realized quadratic variation.
pub fn stoch_exponential(x: &SamplePath) -> SamplePath {
    let v = x.values();
    let x0 = v[0];
    let mut out = Vec::with_capacity(v.len());
    let mut qv = 0.0;
    out.push(1.0);
    for i in 0..v.len() - 1 {
        let d = v[i + 1] - v[i];
        qv += d * d;
        out.push((v[i + 1] - x0 - 0.5 * qv).exp());
    }
    SamplePath::from_parts(x.grid().clone(), out)
}

pub fn running_max(path: &SamplePath) -> SamplePath {
    let mut m = f64::NEG_INFINITY;
    let values = path
        .values()
        .iter()
        .map(|&v| {
            m = m.max(v);
            m
        })
        .collect();
    SamplePath::from_parts(path.grid().clone(), values)
}

pub fn running_min(path: &SamplePath) -> SamplePath {
    let mut m = f64::INFINITY;
    let values = path
        .values()
        .iter()
        .map(|&v| {
            m = m.min(v);
            m
        })
        .collect();
    SamplePath::from_parts(path.grid().clone(), values)
}

/// First time the path reaches `level`, from below (`v >= level`) or from
/// above (`v <= level`), linearly interpolated inside the bracketing step.
pub fn hitting_time(path: &SamplePath, level: f64, from_below: bool) -> Option<f64> {
    hitting_index(path.values(), level, from_below, 0).map(|j| interpolate_crossing(path, j, level))
}

/// First index `j >= start` with `v_j >= level` (or `<=` when `from_below` is false).
pub fn hitting_index(values: &[f64], level: f64, from_below: bool, start: usize) -> Option<usize> {
    let slice = values.get(start..)?;
    let pos = if from_below {
        slice.iter().position(|&v| v >= level)
    } else {
        slice.iter().position(|&v| v <= level)
    };
    pos.map(|p| p + start)
}

/// Interpolated crossing time of `level` inside step `(j-1, j]`.
pub fn interpolate_crossing(path: &SamplePath, j: usize, level: f64) -> f64 {
    let g = path.grid();
    if j == 0 {
        return 0.0;
    }
    let v = path.values();
    let (a, b) = (v[j - 1], v[j]);
    let frac = if b != a { ((level - a) / (b - a)).clamp(0.0, 1.0) } else { 1.0 };
    g.time(j - 1) + frac * g.step(j - 1)
}

/// Result of [`euler_maruyama`]. `exploded_at` is the first index at which the
/// drift (or the update) stopped being finite; values from there on are frozen.
#[derive(Debug, Clone)]
pub struct EmPath {
    pub path: SamplePath,
    pub exploded_at: Option<usize>,
}

impl EmPath {
    pub fn exploded(&self) -> bool {
        self.exploded_at.is_some()
    }
}

/// Euler–Maruyama for `dX = b dt + s dW`.
///
/// Coefficients are called as `f(t_j, &x[..=j])` so they may depend on the
/// whole prefix; being `FnMut` they can also carry running state such as a
/// running maximum. With `b = 0`, `s = 1` the output equals
/// [`gen_brownian`] for the same stream bit for bit.
pub fn euler_maruyama<D, S>(
    mut drift: D,
    mut diffusion: S,
    grid: &TimeGrid,
    rng: &RngStream,
    x0: f64,
) -> Result<EmPath>
where
    D: FnMut(f64, &[f64]) -> f64,
    S: FnMut(f64, &[f64]) -> f64,
{
    let mut r = rng.increments();
    let n = grid.steps();
    let mut x = Vec::with_capacity(n + 1);
    x.push(x0);
    let uniform_sq = if grid.is_uniform() { Some(grid.dt().sqrt()) } else { None };
    let mut exploded_at = None;
    for j in 0..n {
        let t = grid.time(j);
        let h = grid.step(j);
        let z: f64 = r.sample(StandardNormal);
        let dw = uniform_sq.unwrap_or_else(|| h.sqrt()) * z;
        let xj = x[j];
        let b = drift(t, &x);
        let s = diffusion(t, &x);
        if !(s >= 0.0) {
            return Err(Error::InvalidInput(format!("diffusion must be nonnegative, got {s} at t = {t}")));
        }
        let next = xj + b * h + s * dw;
        if !b.is_finite() || !next.is_finite() {
            exploded_at = Some(j);
            x.resize(n + 1, xj);
            break;
        }
        x.push(next);
    }
    Ok(EmPath { path: SamplePath::from_parts(grid.clone(), x), exploded_at })
}
