//! Bayesian drift filtering with parameter extinction.
//!
//! Under the reference measure the observation `X` is a Brownian motion; under
//! `P^θ` it has drift `G(θ, X, t)`. Each parameter carries the density
//!
//! ```text
//! ζ^θ = E( ∫ G(θ, X, u) dX_u )
//! ```
//!
//! accumulated on the grid as `Σ G ΔX - ½ Σ G² ΔX²`. A parameter dies when
//! its family's kill rule fires (for the never-cross family: `θ X_t >= 1`)
//! and never comes back. The mixture is `ζ = Σ w_θ ζ^θ`, the mass loss is
//! `K^h = Σ_dead h_θ w_θ` and the projected deflator is `(1 - K^h) / ζ`.

use std::sync::Arc;

use rand::Rng;

use crate::ensemble::map_paths;
use crate::error::{Error, Result};
use crate::grid::{RngStream, SamplePath, TimeGrid};
use crate::path::{euler_maruyama, gen_brownian};
use crate::stats::{normal_cdf, CompensatedSum, Summary};

/// Finite-atom prior with an optional positive tilt `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPrior {
    thetas: Vec<f64>,
    weights: Vec<f64>,
    tilt: Vec<f64>,
    heavy_tailed: bool,
}

impl ParamPrior {
    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("prior needs at least one atom".into()));
        }
        if atoms.iter().any(|&(t, w)| !t.is_finite() || !(w >= 0.0)) {
            return Err(Error::InvalidInput("atoms need finite locations and nonnegative weights".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("prior weights sum to {total}, not 1")));
        }
        let n = atoms.len();
        Ok(Self {
            thetas: atoms.iter().map(|a| a.0).collect(),
            weights: atoms.iter().map(|a| a.1).collect(),
            tilt: vec![1.0; n],
            heavy_tailed: false,
        })
    }

    pub fn point(theta: f64) -> Self {
        Self::atoms(vec![(theta, 1.0)]).expect("valid point mass")
    }

    /// Equal weights on `-1` and `+1`.
    pub fn symmetric_pair() -> Self {
        Self::atoms(vec![(-1.0, 0.5), (1.0, 0.5)]).expect("valid pair")
    }

    /// Prior density `θ^{-3} e^{-1/θ}` on `(0, ∞)`.
    ///
    /// `v = 1/θ` is Gamma(2, 1). The v-axis is cut at the Gamma(2, 1)
    /// quantiles into `cells` cells of equal mass; each cell becomes one atom
    /// carrying the exact cell mass, placed at the cell's conditional mean of
    /// θ. Total mass and the first moment of θ are then exact.
    pub fn inverse_gamma(cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::InvalidInput("need at least two cells".into()));
        }
        // survival of Gamma(2,1) and the partial first moment of 1/v
        let surv = |v: f64| (1.0 + v) * (-v).exp();
        let m1 = |v: f64| (-v).exp();
        let quantile = |p: f64| {
            let (mut lo, mut hi) = (0.0, 1.0);
            while surv(hi) > 1.0 - p {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if surv(mid) > 1.0 - p {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        let cuts: Vec<f64> = (0..cells).map(|k| if k == 0 { 0.0 } else { quantile(k as f64 / cells as f64) }).collect();
        let mut atoms = Vec::with_capacity(cells);
        for k in 0..cells {
            let a = cuts[k];
            let (mass, first) = match cuts.get(k + 1) {
                Some(&b) => (surv(a) - surv(b), m1(a) - m1(b)),
                None => (surv(a), m1(a)),
            };
            atoms.push((first / mass, mass));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        for a in &mut atoms {
            a.1 /= total;
        }
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        Self::atoms(atoms)
    }

    /// Gridded continuous prior with trapezoidal weights from density values.
    pub fn gridded(thetas: &[f64], density: &[f64]) -> Result<Self> {
        if thetas.len() != density.len() || thetas.len() < 2 {
            return Err(Error::InvalidInput("grid and density must match, length >= 2".into()));
        }
        if thetas.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidInput("theta grid must be increasing".into()));
        }
        let n = thetas.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = thetas[i + 1] - thetas[i];
            w[i] += 0.5 * h * density[i];
            w[i + 1] += 0.5 * h * density[i + 1];
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("density has no mass".into()));
        }
        Self::atoms(thetas.iter().copied().zip(w.into_iter().map(|x| x / total)).collect())
    }

    /// Mark the prior as lacking a first moment; the posterior mean drift is
    /// then refused at `t = 0`.
    pub fn with_heavy_tail(mut self) -> Self {
        self.heavy_tailed = true;
        self
    }

    /// Replace the tilt `h`; requires `h > 0` and `Σ h w = 1`.
    pub fn with_tilt(mut self, tilt: Vec<f64>) -> Result<Self> {
        if tilt.len() != self.thetas.len() || tilt.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidInput("tilt must be positive, one value per atom".into()));
        }
        let norm: f64 = tilt.iter().zip(&self.weights).map(|(h, w)| h * w).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("sum of h w is {norm}, not 1")));
        }
        self.tilt = tilt;
        Ok(self)
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tilt(&self) -> &[f64] {
        &self.tilt
    }

    pub fn heavy_tailed(&self) -> bool {
        self.heavy_tailed
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Atom index for a uniform draw `u` (inverse CDF over the atom order).
    pub fn sample_index(&self, u: f64) -> usize {
        let mut c = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            c += w;
            if u < c {
                return i;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

type PathFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type ParamPathFn<T> = Arc<dyn Fn(f64, &[f64], f64) -> T + Send + Sync>;

/// Drift family `G(θ, x, t)`; `x` is the observed prefix up to `t`.
#[derive(Clone)]
pub enum DriftModel {
    /// `G = θ H(x, t)`; parameters never die.
    Linear(PathFn),
    /// `G = -θ / (1 - θ x_t)`, parameter dies when `θ x_t >= 1`.
    NeverCross,
    Custom { drift: ParamPathFn<f64>, kill: ParamPathFn<bool> },
}

impl std::fmt::Debug for DriftModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear(_) => "Linear",
            Self::NeverCross => "NeverCross",
            Self::Custom { .. } => "Custom",
        })
    }
}

impl DriftModel {
    /// `G = θ`.
    pub fn constant_drift() -> Self {
        Self::Linear(Arc::new(|_, _| 1.0))
    }

    #[inline]
    pub fn drift(&self, theta: f64, x: &[f64], t: f64) -> f64 {
        match self {
            Self::Linear(h) => theta * h(x, t),
            Self::NeverCross => {
                if theta == 0.0 {
                    0.0
                } else {
                    -theta / (1.0 - theta * x[x.len() - 1])
                }
            }
            Self::Custom { drift, .. } => drift(theta, x, t),
        }
    }

    /// Kill rule evaluated at the latest node of `x`.
    #[inline]
    pub fn killed(&self, theta: f64, x: &[f64], t: f64) -> bool {
        match self {
            Self::Linear(_) => false,
            Self::NeverCross => theta * x[x.len() - 1] >= 1.0,
            Self::Custom { kill, .. } => kill(theta, x, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub t: f64,
    /// `log ζ^θ`, `-inf` once dead.
    pub log_zeta: Vec<f64>,
    pub alive: Vec<bool>,
    /// `∫ G² dt` per atom (up to the death time).
    pub integrated_sq_drift: Vec<f64>,
    /// `log ζ`, `-inf` when every charged atom is dead.
    pub log_mixture: f64,
    /// Posterior weights, all zero when `ζ = 0`.
    pub posterior: Vec<f64>,
    pub k_h: f64,
}

impl FilterState {
    fn initial(prior: &ParamPrior) -> Self {
        let n = prior.len();
        let mut s = Self {
            t: 0.0,
            log_zeta: vec![0.0; n],
            alive: vec![true; n],
            integrated_sq_drift: vec![0.0; n],
            log_mixture: 0.0,
            posterior: prior.weights().to_vec(),
            k_h: 0.0,
        };
        s.renormalize(prior);
        s
    }

    pub fn zeta(&self) -> f64 {
        self.log_mixture.exp()
    }

    pub fn n_alive(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Prior mass of the dead set.
    pub fn dead_mass(&self, prior: &ParamPrior) -> f64 {
        self.alive.iter().zip(prior.weights()).filter(|(a, _)| !**a).map(|(_, w)| w).sum()
    }

    /// True while some atom of positive prior weight is alive.
    pub fn charged_alive(&self, prior: &ParamPrior) -> bool {
        self.alive.iter().zip(prior.weights()).any(|(&a, &w)| a && w > 0.0)
    }

    fn renormalize(&mut self, prior: &ParamPrior) {
        let w = prior.weights();
        let m = self
            .log_zeta
            .iter()
            .zip(&self.alive)
            .zip(w)
            .filter(|((_, &a), &wi)| a && wi > 0.0)
            .map(|((&l, _), _)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            self.log_mixture = f64::NEG_INFINITY;
            self.posterior.iter_mut().for_each(|p| *p = 0.0);
            return;
        }
        let mut s = CompensatedSum::default();
        for i in 0..w.len() {
            let p = if self.alive[i] { w[i] * (self.log_zeta[i] - m).exp() } else { 0.0 };
            self.posterior[i] = p;
            s.add(p);
        }
        let s = s.value();
        self.posterior.iter_mut().for_each(|p| *p /= s);
        self.log_mixture = m + s.ln();
    }
}

/// Step-by-step filter over an observed path.
pub struct Filter<'a> {
    prior: &'a ParamPrior,
    model: &'a DriftModel,
    state: FilterState,
}

impl<'a> Filter<'a> {
    pub fn new(prior: &'a ParamPrior, model: &'a DriftModel) -> Self {
        Self { prior, model, state: FilterState::initial(prior) }
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    /// Advance from node `j` to `j + 1`; `x` holds nodes `0..=j+1`.
    pub fn advance(&mut self, x: &[f64], t: f64, t_next: f64) -> Result<()> {
        let n = x.len();
        let prefix = &x[..n - 1];
        let dx = x[n - 1] - x[n - 2];
        let st = &mut self.state;
        for i in 0..self.prior.len() {
            if !st.alive[i] {
                continue;
            }
            let theta = self.prior.thetas()[i];
            if self.model.killed(theta, x, t_next) {
                st.alive[i] = false;
                st.log_zeta[i] = f64::NEG_INFINITY;
                st.k_h += self.prior.tilt()[i] * self.prior.weights()[i];
                continue;
            }
            let g = self.model.drift(theta, prefix, t);
            if !g.is_finite() {
                return Err(Error::NonFiniteDrift { theta, t });
            }
            // Euler step of dζ = ζ G dX; a nonpositive factor means the
            // density left (0, ∞) inside the step
            let step = g * dx;
            if step <= -1.0 {
                st.alive[i] = false;
                st.log_zeta[i] = f64::NEG_INFINITY;
                st.k_h += self.prior.tilt()[i] * self.prior.weights()[i];
                continue;
            }
            st.log_zeta[i] += step.ln_1p();
            st.integrated_sq_drift[i] += g * g * (t_next - t);
        }
        st.t = t_next;
        st.renormalize(self.prior);
        Ok(())
    }
}

/// `Σ_alive G(θ, x, t) μ_t(θ)`.
pub fn posterior_mean_drift(
    state: &FilterState,
    prior: &ParamPrior,
    model: &DriftModel,
    x: &[f64],
    t: f64,
) -> Result<f64> {
    if prior.heavy_tailed() && t <= 0.0 {
        return Err(Error::UndefinedAtZero);
    }
    if state.log_mixture == f64::NEG_INFINITY {
        return Err(Error::ZeroMixture { t });
    }
    let mut s = CompensatedSum::default();
    for (i, &p) in state.posterior.iter().enumerate() {
        if state.alive[i] && p > 0.0 {
            s.add(model.drift(prior.thetas()[i], x, t) * p);
        }
    }
    Ok(s.value())
}

/// Filter output on every grid node.
#[derive(Debug, Clone)]
pub struct FilterTrajectory {
    pub grid: TimeGrid,
    pub zeta: Vec<f64>,
    pub log_zeta: Vec<f64>,
    pub k_h: Vec<f64>,
    /// Posterior mean drift; NaN where undefined.
    pub f_drift: Vec<f64>,
    pub n_alive: Vec<usize>,
    /// First node with `ζ = 0`.
    pub zero_at: Option<usize>,
    pub final_state: FilterState,
}

pub fn run_filter(x: &SamplePath, prior: &ParamPrior, model: &DriftModel) -> Result<FilterTrajectory> {
    let g = x.grid();
    let v = x.values();
    let n = v.len();
    let mut f = Filter::new(prior, model);
    let mut out = FilterTrajectory {
        grid: g.clone(),
        zeta: Vec::with_capacity(n),
        log_zeta: Vec::with_capacity(n),
        k_h: Vec::with_capacity(n),
        f_drift: Vec::with_capacity(n),
        n_alive: Vec::with_capacity(n),
        zero_at: None,
        final_state: f.state().clone(),
    };
    let record = |f: &Filter, j: usize, out: &mut FilterTrajectory| {
        let s = f.state();
        out.zeta.push(s.zeta());
        out.log_zeta.push(s.log_mixture);
        out.k_h.push(s.k_h);
        out.f_drift.push(posterior_mean_drift(s, prior, model, &v[..=j], g.time(j)).unwrap_or(f64::NAN));
        out.n_alive.push(s.n_alive());
        if s.log_mixture == f64::NEG_INFINITY && out.zero_at.is_none() {
            out.zero_at = Some(j);
        }
    };
    record(&f, 0, &mut out);
    for j in 0..n - 1 {
        f.advance(&v[..=j + 1], g.time(j), g.time(j + 1))?;
        record(&f, j + 1, &mut out);
    }
    out.final_state = f.state;
    Ok(out)
}

/// Projected deflator `(1 - K^h)/ζ` and its local-martingale factor `1/ζ`.
#[derive(Debug, Clone)]
pub struct DeflatorPaths {
    pub oy: SamplePath,
    pub l: SamplePath,
    /// Node at which ζ hit zero; values are frozen from there on.
    pub frozen_at: Option<usize>,
}

pub fn projected_deflator(traj: &FilterTrajectory) -> DeflatorPaths {
    let n = traj.zeta.len();
    let mut oy = Vec::with_capacity(n);
    let mut l = Vec::with_capacity(n);
    for j in 0..n {
        if traj.zero_at.is_some_and(|z| j >= z) {
            let (a, b) = if j == 0 { (f64::NAN, f64::NAN) } else { (oy[j - 1], l[j - 1]) };
            oy.push(a);
            l.push(b);
        } else {
            let inv = (-traj.log_zeta[j]).exp();
            oy.push((1.0 - traj.k_h[j]) * inv);
            l.push(inv);
        }
    }
    DeflatorPaths {
        oy: SamplePath::from_parts(traj.grid.clone(), oy),
        l: SamplePath::from_parts(traj.grid.clone(), l),
        frozen_at: traj.zero_at,
    }
}

/// Trajectory CSV `t,zeta,K_h,F_drift,n_alive,oY`.
pub fn write_filter_csv<W: std::io::Write>(traj: &FilterTrajectory, mut out: W) -> std::io::Result<()> {
    let d = projected_deflator(traj);
    writeln!(out, "t,zeta,K_h,F_drift,n_alive,oY")?;
    for j in 0..traj.zeta.len() {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            traj.grid.time(j),
            traj.zeta[j],
            traj.k_h[j],
            traj.f_drift[j],
            traj.n_alive[j],
            d.oy.values()[j]
        )?;
    }
    Ok(())
}

/// `P[X*_∞ > y] = μ((-∞, 1/y)) - y ∫_{(0, 1/y)} θ μ(dθ)` for the never-cross family.
pub fn max_law(y: f64, prior: &ParamPrior) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    let bound = 1.0 / y;
    let mut mass = CompensatedSum::default();
    let mut first = CompensatedSum::default();
    for (&t, &w) in prior.thetas().iter().zip(prior.weights()) {
        if t < bound {
            mass.add(w);
            if t > 0.0 {
                first.add(t * w);
            }
        }
    }
    mass.value() - y * first.value()
}

/// `P[X*_T > y]` for the never-cross family at a finite horizon.
///
/// Under `θ > 0` the gap `1/θ - X` is a three-dimensional Bessel process, so
/// `P^θ[X*_T > y] = (1 - θy)⁺ · 2(1 - Φ(y/√T))`. Under `θ < 0` the same holds
/// for `X - 1/θ` and the law of its exit from `(0, 1/|θ| + y)` is a sine
/// series. `θ = 0` is Brownian.
pub fn max_law_finite(y: f64, horizon: f64, prior: &ParamPrior) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    let reach = 2.0 * (1.0 - normal_cdf(y / horizon.sqrt()));
    let mut s = CompensatedSum::default();
    for (&t, &w) in prior.thetas().iter().zip(prior.weights()) {
        let p = if t > 0.0 {
            (1.0 - t * y).max(0.0) * reach
        } else if t == 0.0 {
            reach
        } else {
            1.0 - bessel3_stays_below(-1.0 / t, -1.0 / t + y, horizon)
        };
        s.add(w * p);
    }
    s.value()
}

/// `P_r[BES(3) stays in (0, b) up to T]`.
fn bessel3_stays_below(r: f64, b: f64, horizon: f64) -> f64 {
    let mut s = CompensatedSum::default();
    for n in 1..100_000u32 {
        let k = n as f64 * std::f64::consts::PI / b;
        let decay = (-0.5 * k * k * horizon).exp();
        if decay < 1e-18 {
            break;
        }
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        s.add(sign / n as f64 * (k * r).sin() * decay);
    }
    (2.0 * b / (std::f64::consts::PI * r) * s.value()).clamp(0.0, 1.0)
}

/// Which measure drives the simulated observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Mixture dynamics: draw θ from the prior, then simulate under `P^θ`.
    P,
    /// Pure Brownian observation.
    W,
}

/// Stream ids of P-side paths are offset so that the two sides never share noise.
const P_SIDE_OFFSET: u64 = 1 << 58;

/// Simulate one observation path on `grid`.
pub fn simulate_observation(
    side: Side,
    prior: &ParamPrior,
    model: &DriftModel,
    grid: &TimeGrid,
    seed: u64,
    path: u64,
) -> Result<(SamplePath, Option<usize>, bool)> {
    match side {
        Side::W => Ok((gen_brownian(grid, &RngStream::new(seed, path)), None, false)),
        Side::P => {
            let stream = RngStream::new(seed, P_SIDE_OFFSET + path);
            let u: f64 = stream.auxiliary().random();
            let i = prior.sample_index(u);
            let theta = prior.thetas()[i];
            let em = euler_maruyama(|t, x| model.drift(theta, x, t), |_, _| 1.0, grid, &stream, 0.0)?;
            let exploded = em.exploded();
            Ok((em.path, Some(i), exploded))
        }
    }
}

/// Monte Carlo prices at several maturities.
#[derive(Debug, Clone)]
pub struct PriceEstimate {
    pub side: Side,
    pub times: Vec<f64>,
    pub estimates: Vec<Summary>,
    /// P paths excluded because ζ vanished, the drawn atom died or the
    /// simulation exploded.
    pub flagged: usize,
    pub n_paths: usize,
}

/// `E_P[ξ/ζ_t]` (P side) or `E_W[ξ 1{μ[Σ_t] < 1}]` (W side) for each `t`.
///
/// `xi(x, t)` sees the observed prefix up to `t`.
#[allow(clippy::too_many_arguments)]
pub fn dual_prices<F>(
    xi: F,
    times: &[f64],
    prior: &ParamPrior,
    model: &DriftModel,
    side: Side,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<PriceEstimate>
where
    F: Fn(&[f64], f64) -> f64 + Sync + Send,
{
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| grid.index_at(t).ok_or_else(|| Error::InvalidInput(format!("t = {t} beyond horizon"))))
        .collect::<Result<_>>()?;
    let last = *idx.iter().max().unwrap_or(&0);
    let per_path: Vec<Result<Option<Vec<f64>>>> = map_paths(n_paths, |p| {
        let (x, drawn, exploded) = simulate_observation(side, prior, model, grid, seed, p)?;
        let v = x.values();
        let mut filter = Filter::new(prior, model);
        let mut vals = vec![0.0; idx.len()];
        let mut bad = exploded;
        for j in 0..=last {
            if j > 0 {
                filter.advance(&v[..=j], grid.time(j - 1), grid.time(j))?;
            }
            for (k, &jj) in idx.iter().enumerate() {
                if jj != j {
                    continue;
                }
                let s = filter.state();
                let payoff = xi(&v[..=j], grid.time(j));
                vals[k] = match side {
                    Side::P => {
                        // a P path that killed its own atom crossed the barrier between nodes
                        if s.log_mixture == f64::NEG_INFINITY || drawn.is_some_and(|i| !s.alive[i]) {
                            bad = true;
                            0.0
                        } else {
                            payoff * (-s.log_mixture).exp()
                        }
                    }
                    Side::W => {
                        if s.charged_alive(prior) {
                            payoff
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
        Ok((!bad).then_some(vals))
    });
    let mut cols = vec![Vec::with_capacity(n_paths); idx.len()];
    let mut flagged = 0;
    for r in per_path {
        match r? {
            Some(v) => v.into_iter().enumerate().for_each(|(k, x)| cols[k].push(x)),
            None => flagged += 1,
        }
    }
    Ok(PriceEstimate {
        side,
        times: times.to_vec(),
        estimates: cols.iter().map(|c| Summary::of(c)).collect(),
        flagged,
        n_paths,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn dual_price<F>(
    xi: F,
    t: f64,
    prior: &ParamPrior,
    model: &DriftModel,
    side: Side,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Summary>
where
    F: Fn(&[f64], f64) -> f64 + Sync + Send,
{
    Ok(dual_prices(xi, &[t], prior, model, side, grid, n_paths, seed)?.estimates[0])
}

#[derive(Debug, Clone)]
pub struct HedgingCosts {
    /// `E_W[ξ 1{μ[Σ_t] < 1}]`.
    pub p: Summary,
    /// `E_W[ξ 1{θ ∉ Σ_t}]` per atom.
    pub p_theta: Vec<Summary>,
    /// Largest `p^θ` over atoms with positive weight.
    pub ess_sup: f64,
    pub ess_sup_atom: usize,
    /// Paired estimate of `p - p^{θ*}` at the maximizing atom.
    pub gap: Summary,
}

pub fn hedging_costs<F>(
    xi: F,
    t: f64,
    prior: &ParamPrior,
    model: &DriftModel,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<HedgingCosts>
where
    F: Fn(&[f64], f64) -> f64 + Sync + Send,
{
    let jt = grid.index_at(t).ok_or_else(|| Error::InvalidInput(format!("t = {t} beyond horizon")))?;
    let per_path: Vec<Result<(f64, Vec<bool>)>> = map_paths(n_paths, |p| {
        let w = gen_brownian(grid, &RngStream::new(seed, p));
        let v = w.values();
        let mut filter = Filter::new(prior, model);
        for j in 1..=jt {
            filter.advance(&v[..=j], grid.time(j - 1), grid.time(j))?;
        }
        Ok((xi(&v[..=jt], grid.time(jt)), filter.state().alive.clone()))
    });
    let rows: Vec<(f64, Vec<bool>)> = per_path.into_iter().collect::<Result<_>>()?;
    let charged: Vec<bool> = prior.weights().iter().map(|&w| w > 0.0).collect();
    let p_vals: Vec<f64> = rows
        .iter()
        .map(|(x, a)| if a.iter().zip(&charged).any(|(&a, &c)| a && c) { *x } else { 0.0 })
        .collect();
    let p_theta: Vec<Summary> = (0..prior.len())
        .map(|i| {
            let col: Vec<f64> = rows.iter().map(|(x, a)| if a[i] { *x } else { 0.0 }).collect();
            Summary::of(&col)
        })
        .collect();
    let (ess_sup_atom, ess_sup) = p_theta
        .iter()
        .enumerate()
        .filter(|(i, _)| charged[*i])
        .map(|(i, s)| (i, s.mean))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let gap_vals: Vec<f64> = rows
        .iter()
        .zip(&p_vals)
        .map(|((x, a), &pv)| pv - if a[ess_sup_atom] { *x } else { 0.0 })
        .collect();
    Ok(HedgingCosts {
        p: Summary::of(&p_vals),
        p_theta,
        ess_sup,
        ess_sup_atom,
        gap: Summary::of(&gap_vals),
    })
}
