//! Multiplicative decompositions `Y = L (1 - K)` and survival processes.
//!
//! On a finite chain the decomposition is exact: with `r_n = E[Y_child | n] / Y_n`,
//!
//! ```text
//! 1 - K_child = (1 - K_n) r_n        L_child = Y_child / (1 - K_child)
//! ```
//!
//! so `K` is predictable and nondecreasing and `L` is a martingale. After the
//! first zero of `Y` both factors are frozen.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::{RngStream, SamplePath, TimeGrid};
use crate::levy::local_time_of;
use crate::path::{euler_maruyama, gen_brownian};
use crate::stats::{normal_cdf, Summary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainNode {
    pub parent: Option<usize>,
    /// Transition probability from the parent.
    pub prob: f64,
    pub value: f64,
    pub step: usize,
}

/// Finite tree of nodes carrying a nonnegative adapted process.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    nodes: Vec<ChainNode>,
    children: Vec<Vec<usize>>,
}

impl FiniteChain {
    pub fn new(root_value: f64) -> Self {
        Self {
            nodes: vec![ChainNode { parent: None, prob: 1.0, value: root_value, step: 0 }],
            children: vec![Vec::new()],
        }
    }

    pub fn add_child(&mut self, parent: usize, prob: f64, value: f64) -> usize {
        let id = self.nodes.len();
        let step = self.nodes[parent].step + 1;
        self.nodes.push(ChainNode { parent: Some(parent), prob, value, step });
        self.children.push(Vec::new());
        self.children[parent].push(id);
        id
    }

    pub fn nodes(&self) -> &[ChainNode] {
        &self.nodes
    }

    pub fn children(&self, n: usize) -> &[usize] {
        &self.children[n]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&n| self.children[n].is_empty())
    }

    /// Root-to-node index path.
    pub fn lineage(&self, mut n: usize) -> Vec<usize> {
        let mut out = vec![n];
        while let Some(p) = self.nodes[n].parent {
            out.push(p);
            n = p;
        }
        out.reverse();
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (n, ch) in self.children.iter().enumerate() {
            if !(self.nodes[n].value >= 0.0 && self.nodes[n].value.is_finite()) {
                return Err(Error::InvalidInput(format!("node {n} has value {}", self.nodes[n].value)));
            }
            if ch.is_empty() {
                continue;
            }
            if ch.iter().any(|&c| !(self.nodes[c].prob >= 0.0)) {
                return Err(Error::InvalidInput(format!("negative probability below node {n}")));
            }
            let s: f64 = ch.iter().map(|&c| self.nodes[c].prob).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("probabilities below node {n} sum to {s}")));
            }
        }
        Ok(())
    }

    /// One-step conditional mean of the process below node `n`.
    pub fn conditional_mean(&self, n: usize) -> Option<f64> {
        let ch = &self.children[n];
        (!ch.is_empty()).then(|| ch.iter().map(|&c| self.nodes[c].prob * self.nodes[c].value).sum())
    }

    /// Random full tree of depth `steps` with 2 or 3 branches per node.
    ///
    /// With `martingale` every node's children average to the node value;
    /// otherwise each node loses a random fraction of its value in
    /// expectation, and a child is sometimes absorbed at zero.
    pub fn random<R: Rng>(rng: &mut R, steps: usize, martingale: bool) -> Self {
        let mut chain = Self::new(rng.random_range(0.5..2.0));
        let mut frontier = vec![0];
        for _ in 0..steps {
            let mut next = Vec::new();
            for &n in &frontier {
                let y = chain.nodes[n].value;
                let b = rng.random_range(2..=3);
                let mut p: Vec<f64> = (0..b).map(|_| rng.random_range(0.1..1.0)).collect();
                let ps: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= ps);
                let mut m: Vec<f64> = (0..b).map(|_| rng.random_range(0.2..2.0)).collect();
                if !martingale && rng.random_bool(0.15) {
                    m[0] = 0.0;
                }
                let mean: f64 = p.iter().zip(&m).map(|(a, b)| a * b).sum();
                let target = if martingale { 1.0 } else { rng.random_range(0.5..0.98) };
                for (pi, mi) in p.iter().zip(&m) {
                    let v = if y == 0.0 { 0.0 } else { y * mi * target / mean };
                    next.push(chain.add_child(n, *pi, v));
                }
                // rescale so the mixture is exact after the rounding above
                let kids = chain.children[n].clone();
                let got: f64 = kids.iter().map(|&c| chain.nodes[c].prob * chain.nodes[c].value).sum();
                if got > 0.0 && martingale {
                    let f = y / got;
                    for c in kids {
                        chain.nodes[c].value *= f;
                    }
                }
            }
            frontier = next;
        }
        chain
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub l: Vec<f64>,
    pub k: Vec<f64>,
    /// Node where `Y` first hit zero on its lineage, if any.
    pub stopped: Vec<bool>,
}

pub fn chain_decompose(chain: &FiniteChain) -> Result<DecompositionResult> {
    chain.validate()?;
    let n = chain.len();
    let mut l = vec![0.0; n];
    let mut k = vec![0.0; n];
    let mut stopped = vec![false; n];
    let y0 = chain.nodes[0].value;
    l[0] = y0;
    stopped[0] = y0 == 0.0;
    for node in 0..n {
        let Some(m) = chain.conditional_mean(node) else { continue };
        let y = chain.nodes[node].value;
        if m > y * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::NotSupermartingale { node, mean: m, value: y });
        }
        for &c in chain.children(node) {
            if stopped[node] {
                k[c] = k[node];
                l[c] = l[node];
                stopped[c] = true;
                continue;
            }
            let r = (m / y).min(1.0);
            let kc = 1.0 - (1.0 - k[node]) * r;
            k[c] = kc;
            l[c] = if kc < 1.0 { chain.nodes[c].value / (1.0 - kc) } else { l[node] };
            stopped[c] = chain.nodes[c].value == 0.0;
        }
    }
    Ok(DecompositionResult { l, k, stopped })
}

/// Additive Doob compensator `A` with `Y = Y_0 + M - A`.
pub fn additive_doob(chain: &FiniteChain) -> Result<Vec<f64>> {
    chain.validate()?;
    let mut a = vec![0.0; chain.len()];
    for node in 0..chain.len() {
        let Some(m) = chain.conditional_mean(node) else { continue };
        for &c in chain.children(node) {
            a[c] = a[node] + (chain.nodes[node].value - m);
        }
    }
    Ok(a)
}

/// Decomposition CSV `node,L,K`.
pub fn write_decomposition_csv<W: std::io::Write>(d: &DecompositionResult, mut out: W) -> std::io::Result<()> {
    writeln!(out, "node,L,K")?;
    for (i, (l, k)) in d.l.iter().zip(&d.k).enumerate() {
        writeln!(out, "{i},{l:.16e},{k:.16e}")?;
    }
    Ok(())
}

/// Closed-form survival examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurvivalScenario {
    /// Parameter in {-1, 0, 1} revealed when W returns to the opposite unit level.
    DiscreteReveal { q: f64 },
    /// Gaussian parameter learnt through an independent driver.
    GaussianReveal,
    /// Mass halves each time `|W|` reaches `(1 + Λ)/2`.
    ExcursionCount,
    /// Bernoulli drift revealed at time 1.
    BernoulliReveal { q: f64 },
}

impl SurvivalScenario {
    pub fn from_tag(tag: &str, q: f64) -> Result<Self> {
        let s = match tag {
            "discrete_reveal" => Self::DiscreteReveal { q },
            "gaussian_reveal" => Self::GaussianReveal,
            "excursion_count" => Self::ExcursionCount,
            "bernoulli_reveal" => Self::BernoulliReveal { q },
            other => return Err(Error::InvalidInput(format!("unknown survival scenario `{other}`"))),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::DiscreteReveal { q } if !(q > 0.0 && q <= 1.0) => {
                Err(Error::InvalidInput(format!("q must lie in (0, 1], got {q}")))
            }
            Self::BernoulliReveal { q } if !(q > 0.0 && q < 1.0) => {
                Err(Error::InvalidInput(format!("q must lie in (0, 1), got {q}")))
            }
            _ => Ok(()),
        }
    }
}

/// Paths the closed forms are evaluated on.
#[derive(Debug, Clone, Copy)]
pub struct Drivers<'a> {
    pub w: &'a SamplePath,
    /// Second, independent Brownian motion (Gaussian reveal).
    pub b: Option<&'a SamplePath>,
    /// Realized parameter (discrete and Bernoulli reveal).
    pub theta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SurvivalOutput {
    /// Conditional survival probability; for the Bernoulli example the
    /// projected deflator.
    pub value: SamplePath,
    pub k: Option<SamplePath>,
    pub m: Option<SamplePath>,
}

/// `ν` (first `|W| = 1`) and `ρ` (first return of W to `-sign(W_ν)`) as node indices.
pub fn reveal_times(w: &SamplePath) -> (Option<usize>, Option<usize>, f64) {
    let v = w.values();
    let Some(nu) = v.iter().position(|x| x.abs() >= 1.0) else { return (None, None, 0.0) };
    let s = if v[nu] > 0.0 { 1.0 } else { -1.0 };
    let rho = v[nu..].iter().position(|x| s * x <= -1.0).map(|p| p + nu);
    (Some(nu), rho, s)
}

pub fn survival_process(scenario: SurvivalScenario, d: Drivers) -> Result<SurvivalOutput> {
    scenario.validate()?;
    let g = d.w.grid();
    let n = d.w.len();
    let path = |v: Vec<f64>| SamplePath::from_parts(g.clone(), v);
    match scenario {
        SurvivalScenario::DiscreteReveal { q } => {
            let theta = d.theta.ok_or_else(|| Error::InvalidInput("discrete_reveal needs theta".into()))?;
            if ![-1.0, 0.0, 1.0].contains(&theta) || (q == 1.0 && theta == 0.0) {
                return Err(Error::InvalidInput(format!("theta {theta} impossible for q = {q}")));
            }
            let (nu, rho, _) = reveal_times(d.w);
            let nu = nu.unwrap_or(n);
            let rho = rho.unwrap_or(n);
            let mut surv = Vec::with_capacity(n);
            let mut k = Vec::with_capacity(n);
            let mut m = Vec::with_capacity(n);
            for j in 0..n {
                let between = j >= nu && j < rho;
                let after = j >= rho;
                surv.push(if between { 1.0 - q / 2.0 } else if after { if theta != 0.0 { 0.0 } else { 1.0 } } else { 1.0 });
                k.push(if between { q / 2.0 } else if after { q } else { 0.0 });
                m.push(if !after || q == 1.0 {
                    1.0
                } else if theta == 0.0 {
                    1.0 / (1.0 - q)
                } else {
                    0.0
                });
            }
            Ok(SurvivalOutput { value: path(surv), k: Some(path(k)), m: Some(path(m)) })
        }
        SurvivalScenario::GaussianReveal => {
            let b = d.b.ok_or_else(|| Error::InvalidInput("gaussian_reveal needs a second driver".into()))?;
            if b.grid() != g {
                return Err(Error::GridMismatch);
            }
            let (w, bv) = (d.w.values(), b.values());
            let mut psi = 0.0;
            let (mut sup, mut inf) = (f64::NEG_INFINITY, f64::INFINITY);
            let mut a = Vec::with_capacity(n);
            for j in 0..n {
                if j > 0 {
                    psi += std::f64::consts::SQRT_2 * (-g.time(j - 1)).exp() * (bv[j] - bv[j - 1]);
                }
                sup = sup.max(w[j]);
                inf = inf.min(w[j]);
                let upper = if sup > 0.0 { 1.0 / sup } else { f64::INFINITY };
                let lower = if inf < 0.0 { 1.0 / inf } else { f64::NEG_INFINITY };
                let e = g.time(j).exp();
                let hi = if upper.is_finite() { normal_cdf(e * (upper - psi)) } else { 1.0 };
                let lo = if lower.is_finite() { normal_cdf(e * (lower - psi)) } else { 0.0 };
                a.push(hi - lo);
            }
            Ok(SurvivalOutput { value: path(a), k: None, m: None })
        }
        SurvivalScenario::ExcursionCount => {
            let lt = local_time_of(d.w);
            let (w, l) = (d.w.values(), lt.values());
            let mut count = vec![0u32; n];
            let mut j = 0;
            let mut c = 0;
            'outer: loop {
                // τ_i: |W| reaches (1 + Λ)/2 strictly after the last return
                let tau = loop {
                    j += 1;
                    if j >= n {
                        break 'outer;
                    }
                    if w[j].abs() >= 0.5 * (1.0 + l[j]) {
                        break j;
                    }
                };
                c += 1;
                count[tau] = c;
                let s = w[tau] > 0.0;
                // ρ_i: W crosses zero
                loop {
                    j += 1;
                    if j >= n {
                        break 'outer;
                    }
                    if (w[j] > 0.0) != s {
                        break;
                    }
                }
            }
            let mut running = 0;
            let mut surv = Vec::with_capacity(n);
            for cj in count {
                running = running.max(cj);
                surv.push(0.5f64.powi(running as i32));
            }
            let k = surv.iter().map(|s| 1.0 - s).collect();
            Ok(SurvivalOutput { value: path(surv), k: Some(path(k)), m: Some(SamplePath::constant(g, 1.0)) })
        }
        SurvivalScenario::BernoulliReveal { q } => {
            let theta = d.theta.ok_or_else(|| Error::InvalidInput("bernoulli_reveal needs theta".into()))?;
            if theta != 0.0 && theta != 1.0 {
                return Err(Error::InvalidInput(format!("theta must be 0 or 1, got {theta}")));
            }
            let x = bernoulli_observation(d.w, theta);
            let v = x.values();
            let oy = (0..n)
                .map(|j| {
                    let t = g.time(j);
                    if t < 1.0 {
                        1.0 / (1.0 - q + q * (v[j] - 0.5 * t).exp())
                    } else if theta == 0.0 {
                        1.0
                    } else {
                        (-v[j] + 0.5 * t).exp()
                    }
                })
                .collect();
            Ok(SurvivalOutput { value: path(oy), k: None, m: None })
        }
    }
}

/// `X = Θ t + ∫ (1_{u<1} + Θ 1_{u>=1}) dW`.
pub fn bernoulli_observation(w: &SamplePath, theta: f64) -> SamplePath {
    let g = w.grid();
    let v = w.values();
    let mut x = Vec::with_capacity(v.len());
    x.push(0.0);
    for j in 0..v.len() - 1 {
        let vol = if g.time(j) < 1.0 { 1.0 } else { theta };
        x.push(x[j] + theta * g.step(j) + vol * (v[j + 1] - v[j]));
    }
    SamplePath::from_parts(g.clone(), x)
}

/// Ratio `M / °Z` of the discrete-reveal example, with the node where it
/// stopped being finite (numerical barrier crossing) if any.
#[derive(Debug, Clone)]
pub struct RatioPath {
    pub path: SamplePath,
    pub flagged_at: Option<usize>,
}

pub fn discrete_reveal_ratio(w: &SamplePath, theta: f64, q: f64) -> Result<RatioPath> {
    SurvivalScenario::DiscreteReveal { q }.validate()?;
    let (nu, rho, s) = reveal_times(w);
    let n = w.len();
    let (nu, rho) = (nu.unwrap_or(n), rho.unwrap_or(n));
    let v = w.values();
    let mut out = Vec::with_capacity(n);
    let mut flagged_at = None;
    for j in 0..n {
        let r = if j < nu {
            1.0
        } else if q == 1.0 {
            2.0 / (1.0 + s * v[j])
        } else if j < rho {
            1.0 / (1.0 - q + 0.5 * q * (1.0 + s * v[j]))
        } else if theta == 0.0 {
            1.0 / (1.0 - q)
        } else {
            0.0
        };
        if !(r.is_finite() && r >= 0.0) || flagged_at.is_some() {
            flagged_at.get_or_insert(j);
            out.push(out.last().copied().unwrap_or(1.0));
        } else {
            out.push(r);
        }
    }
    Ok(RatioPath { path: SamplePath::from_parts(w.grid().clone(), out), flagged_at })
}

/// Which measure the discrete-reveal paths are drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevealMeasure {
    /// W Brownian, Θ independent.
    Q,
    /// W conditioned never to reach `1/Θ`.
    P,
}

/// Draw `(W, Θ)` for the discrete-reveal example.
pub fn simulate_discrete_reveal(q: f64, measure: RevealMeasure, grid: &TimeGrid, stream: &RngStream) -> Result<(SamplePath, f64, bool)> {
    SurvivalScenario::DiscreteReveal { q }.validate()?;
    let u: f64 = stream.auxiliary().random();
    let theta = if u < q / 2.0 {
        -1.0
    } else if u < q {
        1.0
    } else {
        0.0
    };
    match measure {
        RevealMeasure::Q => Ok((gen_brownian(grid, stream), theta, false)),
        RevealMeasure::P => {
            let em = euler_maruyama(
                |_, x| if theta == 0.0 { 0.0 } else { -theta / (1.0 - theta * x[x.len() - 1]) },
                |_, _| 1.0,
                grid,
                stream,
                0.0,
            )?;
            let crossed = theta != 0.0 && em.path.values().iter().any(|&x| theta * x >= 1.0);
            let bad = em.exploded() || crossed;
            Ok((em.path, theta, bad))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Constant,
    Decreasing,
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    MartingaleConsistent,
    StrictSupermartingaleEvidence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointStat {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairVerdict {
    pub t0: f64,
    pub t1: f64,
    /// Paired difference `X_{t1} - X_{t0}`.
    pub diff: Summary,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub n_paths: usize,
    pub excluded: usize,
    pub checkpoints: Vec<CheckpointStat>,
    pub pairs: Vec<PairVerdict>,
    pub classification: Classification,
}

impl MartingaleReport {
    pub fn lines(&self) -> Vec<String> {
        self.pairs
            .iter()
            .map(|p| {
                format!(
                    "{:.4} -> {:.4}: diff {:+.6} +- {:.6} ({:?})",
                    p.t0, p.t1, p.diff.mean, p.diff.se, p.verdict
                )
            })
            .collect()
    }
}

pub const MIN_PATHS: usize = 1000;

/// Mean trend test over checkpoints at 3 standard errors, paired across paths.
pub fn martingale_test(paths: &[SamplePath], checkpoints: &[f64]) -> Result<MartingaleReport> {
    let rows: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| checkpoints.iter().map(|&t| p.value_at(t).unwrap_or(f64::NAN)).collect())
        .collect();
    martingale_test_values(&rows, checkpoints)
}

/// As [`martingale_test`] with values already sampled; rows containing a
/// non-finite value are excluded and counted.
pub fn martingale_test_values(rows: &[Vec<f64>], checkpoints: &[f64]) -> Result<MartingaleReport> {
    let good: Vec<&Vec<f64>> = rows.iter().filter(|r| r.iter().all(|x| x.is_finite())).collect();
    if good.len() < MIN_PATHS {
        return Err(Error::TooFewPaths { needed: MIN_PATHS, got: good.len() });
    }
    if checkpoints.len() < 2 {
        return Err(Error::InvalidInput("need at least two checkpoints".into()));
    }
    let col = |k: usize| good.iter().map(|r| r[k]).collect::<Vec<_>>();
    let checkpoints_stats = (0..checkpoints.len())
        .map(|k| {
            let s = Summary::of(&col(k));
            CheckpointStat { t: checkpoints[k], mean: s.mean, se: s.se }
        })
        .collect();
    let mut pairs_idx: Vec<(usize, usize)> = (0..checkpoints.len() - 1).map(|k| (k, k + 1)).collect();
    if checkpoints.len() > 2 {
        pairs_idx.push((0, checkpoints.len() - 1));
    }
    let pairs: Vec<PairVerdict> = pairs_idx
        .into_iter()
        .map(|(a, b)| {
            let d: Vec<f64> = good.iter().map(|r| r[b] - r[a]).collect();
            let diff = Summary::of(&d);
            let verdict = if diff.mean < -3.0 * diff.se {
                Verdict::Decreasing
            } else if diff.mean > 3.0 * diff.se {
                Verdict::Increasing
            } else {
                Verdict::Constant
            };
            PairVerdict { t0: checkpoints[a], t1: checkpoints[b], diff, verdict }
        })
        .collect();
    let classification = if pairs.iter().any(|p| p.verdict == Verdict::Decreasing) {
        Classification::StrictSupermartingaleEvidence
    } else {
        Classification::MartingaleConsistent
    };
    Ok(MartingaleReport {
        n_paths: good.len(),
        excluded: rows.len() - good.len(),
        checkpoints: checkpoints_stats,
        pairs,
        classification,
    })
}

/// Survival CSV `t,survival,K,M`; missing factors are written as NaN.
pub fn write_survival_csv<W: std::io::Write>(s: &SurvivalOutput, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,survival,K,M")?;
    let g = s.value.grid();
    for j in 0..s.value.len() {
        let k = s.k.as_ref().map_or(f64::NAN, |p| p.values()[j]);
        let m = s.m.as_ref().map_or(f64::NAN, |p| p.values()[j]);
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", g.time(j), s.value.values()[j], k, m)?;
    }
    Ok(())
}
