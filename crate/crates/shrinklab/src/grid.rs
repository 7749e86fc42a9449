//! Time grids, sampled paths and per-path random streams.

use std::io::{self, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Spacing {
    Uniform,
    /// Explicit node times, `t[0] = 0`, strictly increasing.
    Explicit(Arc<[f64]>),
}

/// Time axis `0 = t_0 < t_1 < ... < t_steps = horizon`.
///
/// The default is uniform spacing. [`TimeGrid::graded`] builds a
/// geometrically refined mesh near zero, which is what excursion sign
/// extraction needs at small local-time levels.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    spacing: Spacing,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::InvalidGrid("steps must be at least 1".into()));
        }
        Ok(Self { horizon, steps, spacing: Spacing::Uniform })
    }

    /// Uniform grid with step as close to `dt` as the horizon allows.
    pub fn with_dt(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        let steps = (horizon / dt).round().max(1.0);
        if steps > 1e10 {
            return Err(Error::InvalidGrid(format!("{steps} steps is too many")));
        }
        Self::new(horizon, steps as usize)
    }

    /// Mesh with `t_1 = t_min` and `t_{i+1} = t_i (1 + 1/resolution)`, i.e. relative
    /// step `1/resolution` everywhere. The last step is clipped to land on `horizon`.
    pub fn graded(horizon: f64, resolution: f64, t_min: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if !(resolution >= 1.0 && resolution.is_finite()) {
            return Err(Error::InvalidGrid(format!("resolution must be >= 1, got {resolution}")));
        }
        if !(t_min > 0.0 && t_min < horizon) {
            return Err(Error::InvalidGrid(format!("t_min must lie in (0, horizon), got {t_min}")));
        }
        let ratio = 1.0 + 1.0 / resolution;
        let n_est = ((horizon / t_min).ln() / ratio.ln()).ceil() as usize + 2;
        let mut times = Vec::with_capacity(n_est + 1);
        times.push(0.0);
        let mut t = t_min;
        while t < horizon {
            times.push(t);
            t *= ratio;
        }
        // avoid a sliver of a last step
        if horizon - times[times.len() - 1] < 0.5 * (times[times.len() - 1] / resolution) && times.len() > 2 {
            times.pop();
        }
        times.push(horizon);
        Self::from_times(times)
    }

    /// Grid from explicit node times starting at 0.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidGrid("need at least two nodes".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid("first node must be 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidGrid("node times must be finite and strictly increasing".into()));
        }
        let horizon = times[times.len() - 1];
        let steps = times.len() - 1;
        Ok(Self { horizon, steps, spacing: Spacing::Explicit(times.into()) })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of nodes, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.spacing, Spacing::Uniform)
    }

    /// Step of a uniform grid. For a graded grid this is the largest step.
    pub fn dt(&self) -> f64 {
        match &self.spacing {
            Spacing::Uniform => self.horizon / self.steps as f64,
            Spacing::Explicit(t) => t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max),
        }
    }

    #[inline]
    pub fn time(&self, j: usize) -> f64 {
        match &self.spacing {
            Spacing::Uniform => {
                if j == self.steps {
                    self.horizon
                } else {
                    self.horizon * (j as f64) / (self.steps as f64)
                }
            }
            Spacing::Explicit(t) => t[j],
        }
    }

    /// Length of step `j`, i.e. `t_{j+1} - t_j`.
    #[inline]
    pub fn step(&self, j: usize) -> f64 {
        match &self.spacing {
            Spacing::Uniform => self.horizon / self.steps as f64,
            Spacing::Explicit(t) => t[j + 1] - t[j],
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |j| self.time(j))
    }

    /// Smallest index with `t_j >= t - 1e-12 * horizon`, or `None` past the horizon.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon;
        if t > self.horizon + tol {
            return None;
        }
        if t <= 0.0 {
            return Some(0);
        }
        match &self.spacing {
            Spacing::Uniform => {
                let dt = self.horizon / self.steps as f64;
                let mut j = ((t - tol) / dt).ceil().max(0.0) as usize;
                j = j.min(self.steps);
                while j > 0 && self.time(j - 1) >= t - tol {
                    j -= 1;
                }
                while self.time(j) < t - tol {
                    j += 1;
                }
                Some(j)
            }
            Spacing::Explicit(ts) => Some(ts.partition_point(|&s| s < t - tol).min(self.steps)),
        }
    }
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        match (&self.spacing, &other.spacing) {
            (Spacing::Uniform, Spacing::Uniform) => {
                self.steps == other.steps && self.horizon == other.horizon
            }
            (Spacing::Explicit(a), Spacing::Explicit(b)) => Arc::ptr_eq(a, b) || a[..] == b[..],
            _ => false,
        }
    }
}

/// Values of one process on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "path has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: &TimeGrid, value: f64) -> Self {
        Self { grid: grid.clone(), values: vec![value; grid.len()] }
    }

    /// Path `f(t_j)` for a deterministic function.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.times().map(f).collect();
        Self { grid: grid.clone(), values }
    }

    pub(crate) fn from_parts(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Value at the first node with time `>= t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.grid.index_at(t).map(|j| self.values[j])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two paths on the same grid.
    pub fn zip_with(&self, other: &SamplePath, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    /// CSV with header `t,value` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", self.grid.time(j), v)?;
        }
        Ok(())
    }
}

/// `(seed, stream_id)` names one independent random stream.
///
/// Each stream has 16 lanes: lane 0 carries the Gaussian increments of the
/// driving Brownian motion, higher lanes carry auxiliary draws (parameter
/// sampling, coin flips) so that adding them never perturbs the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub const MAX_STREAM_ID: u64 = (1 << 60) - 1;

    pub fn new(seed: u64, stream_id: u64) -> Self {
        assert!(stream_id <= Self::MAX_STREAM_ID, "stream id {stream_id} out of range");
        Self { seed, stream_id }
    }

    pub fn lane(&self, lane: u8) -> ChaCha8Rng {
        assert!(lane < 16);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((self.stream_id << 4) | lane as u64);
        rng
    }

    /// Generator for the Brownian increments.
    pub fn increments(&self) -> ChaCha8Rng {
        self.lane(0)
    }

    /// Generator for auxiliary draws, independent of the increments.
    pub fn auxiliary(&self) -> ChaCha8Rng {
        self.lane(1)
    }

    /// Independent second driver for two-dimensional examples.
    pub fn second_driver(&self) -> ChaCha8Rng {
        self.lane(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_nodes() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(g.time(4), 1.0);
        assert_eq!(g.time(2), 0.5);
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.index_at(0.5), Some(2));
        assert_eq!(g.index_at(0.51), Some(3));
        assert_eq!(g.index_at(1.5), None);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::graded(1.0, 10.0, 2.0).is_err());
    }

    #[test]
    fn graded_grid_has_constant_relative_step() {
        let g = TimeGrid::graded(10.0, 100.0, 1e-6).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(1), 1e-6);
        assert_eq!(g.horizon(), 10.0);
        for j in 1..g.steps() - 1 {
            let rel = g.step(j) / g.time(j);
            assert!((rel - 0.01).abs() < 1e-9, "j={j} rel={rel}");
        }
        let last = g.step(g.steps() - 1) / g.time(g.steps() - 1);
        assert!(last > 0.004 && last < 0.016);
        let j = g.index_at(1.0).unwrap();
        assert!(g.time(j) >= 1.0 && g.time(j - 1) < 1.0);
    }

    #[test]
    fn lanes_are_distinct() {
        use rand::Rng;
        let s = RngStream::new(7, 3);
        let a: u64 = s.lane(0).random();
        let b: u64 = s.lane(1).random();
        let c: u64 = RngStream::new(7, 4).lane(0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        let a2: u64 = s.lane(0).random();
        assert_eq!(a, a2);
    }
}
