//! Lévy transform, local time, excursion signs and stopping times built from them.
//!
//! `B = ∫ sign(W) dW = |W| - Λ`. On the grid Λ is recovered as `|W| - B`
//! and made monotone by a running maximum.
//!
//! Sign extraction works on *sign-resolved excursions*. Grid values of W
//! outside the zero band `|W_j| > c sqrt(dt_j)` form runs of constant sign.
//! Given `|W|` at the nodes, the signs of a Brownian path are a Markov chain
//! with step correlation `tanh(|W_j| |W_{j+1}| / dt_j)`, so two runs separated
//! by a short dip into the band still carry almost the same sign. Runs are
//! therefore merged until the correlation product across the gap falls below
//! `merge_threshold`; a merged excursion takes the sign and local-time
//! coordinate of its highest point.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{SamplePath, TimeGrid};
use crate::path::ito_integral;

/// `sign(x)` with `sign(0) = -1`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn levy_transform(w: &SamplePath) -> SamplePath {
    let s = w.map(sign);
    ito_integral(&s, w).expect("same grid")
}

/// Nondecreasing local time of W at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimePath(SamplePath);

impl LocalTimePath {
    pub fn path(&self) -> &SamplePath {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.0.grid()
    }
}

pub fn local_time(w: &SamplePath, b: &SamplePath) -> Result<LocalTimePath> {
    if w.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let mut m = f64::NEG_INFINITY;
    let values = w
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| {
            m = m.max(x.abs() - y);
            m
        })
        .collect();
    Ok(LocalTimePath(SamplePath::new(w.grid().clone(), values)?))
}

/// Local time of W through its Lévy transform.
pub fn local_time_of(w: &SamplePath) -> LocalTimePath {
    local_time(w, &levy_transform(w)).expect("same grid")
}

/// First index with `Λ_j > s`.
pub fn inverse_local_time_index(lt: &LocalTimePath, s: f64) -> Option<usize> {
    let v = lt.values();
    // Λ is monotone, so binary search works
    let j = v.partition_point(|&x| x <= s);
    (j < v.len()).then_some(j)
}

/// `σ_s = inf{t : Λ_t > s}`, interpolated inside the step where Λ passes `s`.
pub fn inverse_local_time(lt: &LocalTimePath, s: f64) -> Option<f64> {
    let j = inverse_local_time_index(lt, s)?;
    let g = lt.grid();
    if j == 0 {
        return Some(0.0);
    }
    let v = lt.values();
    let frac = ((s - v[j - 1]) / (v[j] - v[j - 1])).clamp(0.0, 1.0);
    Some(g.time(j - 1) + frac * g.step(j - 1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionRecord {
    pub start_index: usize,
    /// First node after the span (clamped to the last node).
    pub end_index: usize,
    /// Node where `|W|` is largest.
    pub peak_index: usize,
    pub sign: i8,
    pub height: f64,
    pub duration: f64,
    /// Λ at the peak.
    pub local_time_coord: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcursionConfig {
    /// Zero band is `|W_j| <= band_factor * sqrt(dt_j)`.
    pub band_factor: f64,
    /// Runs merge while the sign correlation across the gap is at least this.
    pub merge_threshold: f64,
}

impl Default for ExcursionConfig {
    fn default() -> Self {
        Self { band_factor: 2.0, merge_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Run {
    start: usize,
    end: usize,
    peak: usize,
}

/// Band runs and gap correlations of one path, reusable for every prefix.
pub struct ExcursionScan<'a> {
    w: &'a [f64],
    lambda: &'a [f64],
    grid: &'a TimeGrid,
    runs: Vec<Run>,
    /// `cum[j] = sum_{i<j} ln tanh(|W_i||W_{i+1}|/dt_i)` over steps that can lie in a gap.
    cum: Vec<f64>,
    log_threshold: f64,
}

impl<'a> ExcursionScan<'a> {
    /// Scan nodes `0..=upto` of `w`.
    pub fn new(w: &'a SamplePath, lt: &'a LocalTimePath, cfg: ExcursionConfig, upto: usize) -> Self {
        let grid = w.grid();
        let w = &w.values()[..=upto];
        let lambda = &lt.values()[..=upto];
        let n = w.len();
        let uniform_eps = grid.is_uniform().then(|| cfg.band_factor * grid.dt().sqrt());
        let eps = |j: usize| -> f64 {
            uniform_eps.unwrap_or_else(|| {
                let h = if j < grid.steps() { grid.step(j) } else { grid.step(j - 1) };
                cfg.band_factor * h.sqrt()
            })
        };

        let mut runs = Vec::new();
        let mut j = 0;
        while j < n {
            if w[j].abs() <= eps(j) {
                j += 1;
                continue;
            }
            let positive = w[j] > 0.0;
            let start = j;
            let mut peak = j;
            while j < n && w[j].abs() > eps(j) && (w[j] > 0.0) == positive {
                if w[j].abs() > w[peak].abs() {
                    peak = j;
                }
                j += 1;
            }
            runs.push(Run { start, end: j, peak });
        }

        let mut cum = vec![0.0; n];
        let mut r = 0;
        for i in 0..n.saturating_sub(1) {
            while r < runs.len() && runs[r].end <= i {
                r += 1;
            }
            let interior = r < runs.len() && runs[r].start <= i && i + 1 < runs[r].end;
            let x = w[i].abs() * w[i + 1].abs() / grid.step(i);
            // ln tanh x ≈ -2e^{-2x} is below 1e-17 past x = 20
            let lt = if interior || x > 20.0 { 0.0 } else { x.tanh().ln().max(-745.0) };
            cum[i + 1] = cum[i] + lt;
        }

        Self {
            w,
            lambda,
            grid,
            runs,
            cum,
            log_threshold: cfg.merge_threshold.ln(),
        }
    }

    /// Sign-resolved excursions using nodes `0..=upto` only.
    pub fn excursions(&self, upto: usize) -> Vec<ExcursionRecord> {
        let limit = (upto + 1).min(self.w.len());
        let last = limit - 1;
        let mut out = Vec::new();
        let mut cur: Option<(usize, usize, usize)> = None;
        for run in &self.runs {
            if run.start >= limit {
                break;
            }
            let run = if run.end > limit {
                let mut peak = run.start;
                for k in run.start..limit {
                    if self.w[k].abs() > self.w[peak].abs() {
                        peak = k;
                    }
                }
                Run { start: run.start, end: limit, peak }
            } else {
                *run
            };
            cur = Some(match cur {
                None => (run.start, run.end, run.peak),
                Some((cs, ce, cp)) => {
                    let gap = self.cum[run.start] - self.cum[ce - 1];
                    if gap >= self.log_threshold {
                        let peak = if self.w[run.peak].abs() > self.w[cp].abs() { run.peak } else { cp };
                        (cs, run.end, peak)
                    } else {
                        self.push_record(&mut out, (cs, ce, cp), last);
                        (run.start, run.end, run.peak)
                    }
                }
            });
        }
        if let Some(c) = cur {
            self.push_record(&mut out, c, last);
        }
        out
    }

    fn push_record(&self, out: &mut Vec<ExcursionRecord>, (s, e, p): (usize, usize, usize), last: usize) {
        let end = e.min(last);
        if end <= s {
            return;
        }
        out.push(ExcursionRecord {
            start_index: s,
            end_index: end,
            peak_index: p,
            sign: if self.w[p] > 0.0 { 1 } else { -1 },
            height: self.w[p].abs(),
            duration: self.grid.time(end) - self.grid.time(s),
            local_time_coord: self.lambda[p],
        });
    }

    /// Total length of steps whose left node lies in the zero band and
    /// outside every excursion span.
    pub fn band_time(&self, records: &[ExcursionRecord]) -> f64 {
        let mut covered = vec![false; self.w.len()];
        for r in records {
            for c in &mut covered[r.start_index..r.end_index] {
                *c = true;
            }
        }
        (0..self.w.len() - 1).filter(|&i| !covered[i]).map(|i| self.grid.step(i)).sum()
    }
}

/// Excursions of W with height at least `h_min`, in start order.
pub fn excursions(w: &SamplePath, h_min: f64) -> Vec<ExcursionRecord> {
    excursions_with(w, h_min, ExcursionConfig::default())
}

pub fn excursions_with(w: &SamplePath, h_min: f64, cfg: ExcursionConfig) -> Vec<ExcursionRecord> {
    let lt = local_time_of(w);
    let upto = w.len() - 1;
    let scan = ExcursionScan::new(w, &lt, cfg, upto);
    scan.excursions(upto).into_iter().filter(|r| r.height >= h_min).collect()
}

/// Strictly decreasing positive levels `s_1 > s_2 > ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSequence {
    levels: Vec<f64>,
}

impl LevelSequence {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidInput("need at least one level".into()));
        }
        if levels.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("levels must be positive".into()));
        }
        if levels.windows(2).any(|p| !(p[1] < p[0])) {
            return Err(Error::InvalidInput("levels must be strictly decreasing".into()));
        }
        Ok(Self { levels })
    }

    /// `s_n = s_1 2^{-(n-1)}`, `n = 1..=count`.
    pub fn geometric(s1: f64, count: usize) -> Result<Self> {
        Self::new((0..count).map(|n| s1 * 0.5f64.powi(n as i32)).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Local-time window `(s_{n+1}, s_n]` of level `n` (0-based); the deepest
    /// level takes everything below it.
    pub fn window(&self, n: usize) -> (f64, f64) {
        let lo = self.levels.get(n + 1).copied().unwrap_or(0.0);
        (lo, self.levels[n])
    }
}

/// Binary expansion read off excursion signs in one local-time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformDraw {
    /// `sum_{k <= bits} 2^{-k} X_k`.
    pub value: f64,
    pub bits: usize,
    pub k_bits: usize,
    /// Index of σ at this level, or `None` if the grid ends first.
    pub sigma_index: Option<usize>,
}

impl UniformDraw {
    /// Fewer than `k_bits` excursions were available.
    pub fn flagged(&self) -> bool {
        self.bits < self.k_bits
    }

    /// Partial expansion completed with the midpoint of the unresolved interval.
    pub fn completed(&self) -> f64 {
        if self.bits < self.k_bits {
            self.value + 0.5f64.powi(self.bits as i32 + 1)
        } else {
            self.value
        }
    }
}

/// Everything the stopping-time recursion needs from one path.
#[derive(Debug, Clone)]
pub struct LevelDraws {
    pub draws: Vec<UniformDraw>,
    /// Grid time of `σ_{s_n}` (first node with Λ above the level).
    pub sigma_times: Vec<Option<f64>>,
    pub horizon: f64,
}

/// `U_n` for every level. Level `n` only looks at nodes up to `σ_{s_n}`, so
/// each draw is known at that time.
pub fn extract_uniforms(w: &SamplePath, levels: &LevelSequence, k_bits: usize) -> Result<LevelDraws> {
    extract_uniforms_with(w, levels, k_bits, ExcursionConfig::default())
}

pub fn extract_uniforms_with(
    w: &SamplePath,
    levels: &LevelSequence,
    k_bits: usize,
    cfg: ExcursionConfig,
) -> Result<LevelDraws> {
    extract_uniforms_given(w, &local_time_of(w), levels, k_bits, cfg)
}

/// As [`extract_uniforms_with`] with the local time of `w` already computed.
pub fn extract_uniforms_given(
    w: &SamplePath,
    lt: &LocalTimePath,
    levels: &LevelSequence,
    k_bits: usize,
    cfg: ExcursionConfig,
) -> Result<LevelDraws> {
    if k_bits == 0 || k_bits > 52 {
        return Err(Error::InvalidInput(format!("k_bits must be in 1..=52, got {k_bits}")));
    }
    if lt.values().len() != w.len() {
        return Err(Error::GridMismatch);
    }
    let last = w.len() - 1;
    let sigma_idx: Vec<Option<usize>> =
        levels.levels().iter().map(|&s| inverse_local_time_index(lt, s)).collect();
    let scan_end = sigma_idx[0].unwrap_or(last);
    let scan = ExcursionScan::new(w, lt, cfg, scan_end);
    let mut draws = Vec::with_capacity(levels.len());
    for (n, &si) in sigma_idx.iter().enumerate() {
        let upto = si.unwrap_or(last);
        let (lo, hi) = levels.window(n);
        let mut sel: Vec<ExcursionRecord> = scan
            .excursions(upto)
            .into_iter()
            .filter(|r| r.local_time_coord > lo && r.local_time_coord <= hi)
            .collect();
        sel.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.start_index.cmp(&b.start_index)));
        sel.truncate(k_bits);
        let value = sel
            .iter()
            .enumerate()
            .filter(|(_, r)| r.sign > 0)
            .map(|(k, _)| 0.5f64.powi(k as i32 + 1))
            .sum();
        draws.push(UniformDraw { value, bits: sel.len(), k_bits, sigma_index: si });
    }
    let g = w.grid();
    Ok(LevelDraws {
        draws,
        sigma_times: sigma_idx.iter().map(|o| o.map(|j| g.time(j))).collect(),
        horizon: g.horizon(),
    })
}

/// Law of τ on `(0, ∞]`.
#[derive(Clone)]
pub enum TargetLaw {
    Exponential { rate: f64 },
    /// `(location, weight)` pairs; locations in `(0, ∞]`, weights summing to 1.
    Atoms(Vec<(f64, f64)>),
    /// Continuous CDF on `(0, ∞)`; conditional inverses by bisection.
    Continuous(std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for TargetLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "Exponential({rate})"),
            Self::Atoms(a) => write!(f, "Atoms({a:?})"),
            Self::Continuous(_) => write!(f, "Continuous(..)"),
        }
    }
}

impl TargetLaw {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be positive, got {rate}")));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        Self::atoms(vec![(c, 1.0)])
    }

    pub fn atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() || atoms.iter().any(|&(a, p)| !(a > 0.0) || !(p >= 0.0)) {
            return Err(Error::InvalidInput("atoms need locations in (0, inf] and weights >= 0".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("atom weights sum to {total}, not 1")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::Atoms(atoms))
    }

    /// Location of a degenerate law.
    pub fn point_location(&self) -> Option<f64> {
        match self {
            Self::Atoms(a) => {
                let charged: Vec<f64> = a.iter().filter(|x| x.1 > 0.0).map(|x| x.0).collect();
                (charged.len() == 1).then(|| charged[0])
            }
            _ => None,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            Self::Atoms(a) => a.iter().filter(|x| x.0 <= t).map(|x| x.1).sum(),
            Self::Continuous(f) => {
                if t <= 0.0 {
                    0.0
                } else {
                    f(t)
                }
            }
        }
    }

    /// `F(t-)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        match self {
            Self::Atoms(a) => a.iter().filter(|x| x.0 < t).map(|x| x.1).sum(),
            _ => self.cdf(t),
        }
    }

    /// `μ((s, ∞])`.
    pub fn tail(&self, s: f64) -> f64 {
        match self {
            Self::Exponential { rate } => (-rate * s.max(0.0)).exp(),
            Self::Atoms(a) => a.iter().filter(|x| x.0 > s).map(|x| x.1).sum(),
            Self::Continuous(_) => 1.0 - self.cdf(s),
        }
    }

    /// Generalized inverse `inf{t : F_s(t) >= u}` of the law conditioned on
    /// `(s, ∞]`; point mass at infinity when that set has no mass.
    pub fn conditional_inverse(&self, s: f64, u: f64) -> f64 {
        let tail = self.tail(s);
        if tail <= 0.0 {
            return f64::INFINITY;
        }
        match self {
            Self::Exponential { rate } => {
                if u >= 1.0 {
                    f64::INFINITY
                } else {
                    s.max(0.0) - (-u).ln_1p() / rate
                }
            }
            Self::Atoms(a) => {
                let mut c = 0.0;
                let mut last = f64::INFINITY;
                for &(loc, p) in a.iter().filter(|x| x.0 > s) {
                    c += p / tail;
                    last = loc;
                    if p > 0.0 && c >= u - 1e-12 {
                        return loc;
                    }
                }
                last
            }
            Self::Continuous(f) => {
                if u >= 1.0 {
                    return f64::INFINITY;
                }
                let fs = self.cdf(s);
                let goal = fs + u * (1.0 - fs);
                let mut lo = s.max(0.0);
                let mut hi = lo.max(1.0);
                while f(hi) < goal {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return f64::INFINITY;
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    if f(mid) >= goal {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTime {
    /// `f64::INFINITY` stands for τ = ∞.
    pub tau: f64,
    /// `τ_n` after each level that was used.
    pub trajectory: Vec<f64>,
    pub levels_used: usize,
}

impl LevelDraws {
    /// Run the level recursion for `target`, skipping levels with fewer than
    /// `min_bits` excursions.
    pub fn stopping_time(&self, target: &TargetLaw, min_bits: usize) -> Result<StoppingTime> {
        if self.sigma_times.first().copied().flatten().is_none() {
            return Err(Error::HorizonTooShort {
                horizon: self.horizon,
                level: f64::NAN,
            });
        }
        let mut tau = None;
        let mut prev_sigma: Option<f64> = None;
        let mut trajectory = Vec::new();
        for (d, sigma) in self.draws.iter().zip(&self.sigma_times) {
            let Some(sigma) = *sigma else { continue };
            if d.bits < min_bits.max(1) {
                continue;
            }
            let candidate = target.conditional_inverse(sigma, d.completed());
            match prev_sigma {
                Some(ps) if candidate > ps => {}
                _ => tau = Some(candidate),
            }
            prev_sigma = Some(sigma);
            trajectory.push(tau.unwrap());
        }
        let tau = tau.ok_or_else(|| Error::InvalidInput("no level had enough excursions".into()))?;
        Ok(StoppingTime { tau, levels_used: trajectory.len(), trajectory })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauOptions {
    pub k_bits: usize,
    pub min_bits: usize,
    pub excursions: ExcursionConfig,
}

impl Default for TauOptions {
    fn default() -> Self {
        Self { k_bits: 20, min_bits: 1, excursions: ExcursionConfig::default() }
    }
}

/// Stopping time of W with law `target`, independent of the Lévy transform of W.
pub fn independent_stopping_time(
    w: &SamplePath,
    target: &TargetLaw,
    levels: &LevelSequence,
    opts: TauOptions,
) -> Result<StoppingTime> {
    let draws = extract_uniforms_with(w, levels, opts.k_bits, opts.excursions)?;
    draws.stopping_time(target, opts.min_bits).map_err(|e| match e {
        Error::HorizonTooShort { horizon, .. } => Error::HorizonTooShort { horizon, level: levels.levels()[0] },
        e => e,
    })
}

/// Graded mesh used for stopping-time runs: relative step `1/resolution`
/// from `t_min` up to `horizon`.
pub fn tau_grid(horizon: f64, resolution: f64, t_min: f64) -> Result<TimeGrid> {
    TimeGrid::graded(horizon, resolution, t_min)
}

/// Brownian-bridge refinement of the steps that may hide a zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    /// Target sub-step `(kappa Λ)²`, so the zero band scales with the local time.
    pub kappa: f64,
    /// A step is refined when it changes sign or an endpoint lies within
    /// `near_factor · sqrt(step)` of zero.
    pub near_factor: f64,
    /// Most sub-steps per original step.
    pub max_split: usize,
    /// Steps starting above this local time are left alone.
    pub max_local_time: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { kappa: 0.005, near_factor: 3.0, max_split: 4096, max_local_time: f64::INFINITY }
    }
}

/// Insert bridge points into the steps of `w` that come close to zero.
///
/// Given the coarse path the inserted values are drawn from the exact
/// Brownian bridge law, so the result is a Brownian path on the finer grid.
/// Small excursions then become visible where the local time is small.
pub fn refine_near_zero<R: Rng>(w: &SamplePath, cfg: RefineConfig, rng: &mut R) -> Result<SamplePath> {
    if !(cfg.kappa > 0.0 && cfg.near_factor >= 0.0 && cfg.max_split >= 1) {
        return Err(Error::InvalidInput(format!("bad refinement settings {cfg:?}")));
    }
    let g = w.grid();
    let v = w.values();
    let lt = local_time_of(w);
    let lam = lt.values();
    let mut times = Vec::with_capacity(v.len());
    let mut vals = Vec::with_capacity(v.len());
    times.push(g.time(0));
    vals.push(v[0]);
    for i in 0..v.len() - 1 {
        let (a, b, dt) = (v[i], v[i + 1], g.step(i));
        let near = lam[i] <= cfg.max_local_time
            && (a * b <= 0.0 || a.abs().min(b.abs()) < cfg.near_factor * dt.sqrt());
        if near {
            let target = (cfg.kappa * lam[i]).powi(2);
            let m = if target > 0.0 { (dt / target).ceil().min(cfg.max_split as f64) as usize } else { cfg.max_split };
            if m > 1 {
                let t0 = g.time(i);
                let sub = dt / m as f64;
                let mut x = a;
                for k in 1..m {
                    let rem = dt - (k - 1) as f64 * sub;
                    let mean = x + sub / rem * (b - x);
                    let var = sub * (rem - sub) / rem;
                    let z: f64 = rng.sample(StandardNormal);
                    x = mean + var.sqrt() * z;
                    times.push(t0 + k as f64 * sub);
                    vals.push(x);
                }
            }
        }
        times.push(g.time(i + 1));
        vals.push(b);
    }
    SamplePath::new(TimeGrid::from_times(times)?, vals)
}

/// Excursion list as CSV `start_t,end_t,sign,height,local_time`.
pub fn write_excursions_csv<W: std::io::Write>(
    grid: &TimeGrid,
    records: &[ExcursionRecord],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "start_t,end_t,sign,height,local_time")?;
    for r in records {
        writeln!(
            out,
            "{:.16e},{:.16e},{},{:.16e},{:.16e}",
            grid.time(r.start_index),
            grid.time(r.end_index),
            r.sign,
            r.height,
            r.local_time_coord
        )?;
    }
    Ok(())
}
