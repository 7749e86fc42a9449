//! The eight runnable scenarios and their parameter tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use shrinklab::bayes::ParamPrior;
use shrinklab::levy::TargetLaw;

use crate::config::Config;
use crate::report::RunReport;

mod brownian;
mod filter;
mod hedging;
mod incompleteness;
mod inverse_gamma;
mod levy_tau;
mod never_cross;
mod survival;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamKind {
    Float { min: f64, max: f64 },
    Int { min: usize, max: usize },
    /// `;`-separated numbers.
    FloatList,
    /// `;`-separated target laws: `exp(rate)`, `atoms(t:w, ...)`, `point(c)`.
    Target,
    /// `atoms(θ:w, ...)`, `point(θ)` or `inverse_gamma`.
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub key: &'static str,
    pub default: &'static str,
    pub kind: ParamKind,
    pub help: &'static str,
}

#[derive(Debug, PartialEq)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// Acceptance criteria checked by the scenario.
    pub criteria: &'static [u8],
    pub seed: u64,
    pub n_paths: usize,
    pub horizon: f64,
    /// `None` marks a graded mesh.
    pub steps: Option<usize>,
    pub params: &'static [ParamSpec],
}

const fn float(key: &'static str, default: &'static str, min: f64, max: f64, help: &'static str) -> ParamSpec {
    ParamSpec { key, default, kind: ParamKind::Float { min, max }, help }
}

const fn int(key: &'static str, default: &'static str, min: usize, max: usize, help: &'static str) -> ParamSpec {
    ParamSpec { key, default, kind: ParamKind::Int { min, max }, help }
}

const fn list(key: &'static str, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec { key, default, kind: ParamKind::FloatList, help }
}

const P: f64 = 1.0;
const BIG: f64 = f64::MAX;

pub static SCENARIOS: [ScenarioInfo; 8] = [
    ScenarioInfo {
        name: "brownian-checks",
        summary: "Brownian moments, Lévy transform increments and QV, excursion sign statistics",
        criteria: &[1, 2],
        seed: 42,
        n_paths: 10_000,
        horizon: 1.0,
        steps: Some(10_000),
        params: &[
            int("ks_samples_per_path", "100", 1, usize::MAX, "B increments per path entering the pooled KS test (strided)"),
            float("ks_p_min", "0.01", 0.0, P, "minimum KS p-value for B increments"),
            float("qv_mean_min", "0.99", 0.0, BIG, "lower bound on the mean of [B,B]_T"),
            float("qv_mean_max", "1.01", 0.0, BIG, "upper bound on the mean of [B,B]_T"),
            float("sign_h_min", "0.05", 1e-6, BIG, "minimum excursion height for sign statistics"),
            float("z_max", "3", 0.0, BIG, "standard errors allowed on mean-type checks"),
            float("chi2_p_min", "0.01", 0.0, P, "minimum p-value of the consecutive-sign independence test"),
        ],
    },
    ScenarioInfo {
        name: "levy-tau",
        summary: "uniforms from excursion signs and stopping times with a prescribed law",
        criteria: &[2, 3],
        seed: 7,
        n_paths: 10_000,
        horizon: 64.0,
        steps: None,
        params: &[
            float("resolution", "4000", 10.0, BIG, "graded mesh: steps per unit of log-time"),
            float("t_min", "1e-10", 1e-300, 1.0, "graded mesh: first positive node"),
            int("levels", "12", 1, 60, "number of local-time levels s_n"),
            float("s1", "0.5", 1e-12, BIG, "first level; s_n = s1 2^{1-n}"),
            int("k_bits", "20", 1, 52, "sign bits per uniform"),
            int("min_bits", "1", 1, 52, "levels with fewer excursions are skipped"),
            float("band_factor", "2", 0.0, BIG, "zero band half-width in units of sqrt(step)"),
            float("merge_threshold", "0.1", 0.0, P, "merge same-sign runs when the no-crossing likelihood exceeds this"),
            float("refine_kappa", "0.005", 0.0, 1.0, "bridge refinement near zero to sub-steps (kappa local time)^2; 0 disables"),
            ParamSpec {
                key: "targets",
                default: "exp(1); atoms(1:0.3, 2:0.7); point(0.7)",
                kind: ParamKind::Target,
                help: "target laws of the stopping time",
            },
            float("ks_distance_max", "0.02", 0.0, P, "maximum KS distance of tau to each target"),
            float("corr_max", "0.03", 0.0, P, "maximum |corr| of tau with Λ_1 and sup|W| on [0,1]"),
            float("u1_ks_p_min", "0.01", 0.0, P, "minimum KS p-value of U_1 against Uniform(0,1)"),
        ],
    },
    ScenarioInfo {
        name: "bayes-filter",
        summary: "default identity E_P[1/ζ_t] = W[μ(Σ_t) < 1] for the never-cross family",
        criteria: &[6],
        seed: 17,
        n_paths: 10_000,
        horizon: 2.0,
        steps: Some(20_000),
        params: &[
            ParamSpec { key: "prior", default: "atoms(-1:0.5, 1:0.5)", kind: ParamKind::Prior, help: "parameter prior" },
            list("times", "0.5; 1; 2", "maturities"),
            float("z_max", "3", 0.0, BIG, "combined standard errors allowed"),
        ],
    },
    ScenarioInfo {
        name: "never-cross",
        summary: "closed-form densities, barrier mass loss and the law of the running maximum",
        criteria: &[4],
        seed: 11,
        n_paths: 10_000,
        horizon: 20.0,
        steps: Some(200_000),
        params: &[
            ParamSpec { key: "prior", default: "atoms(-1:0.5, 1:0.5)", kind: ParamKind::Prior, help: "parameter prior" },
            int("closed_form_paths", "20", 1, usize::MAX, "paths on which ζ^θ = 1 - θX is checked"),
            float("closed_form_factor", "10", 0.0, BIG, "allowed error in units of dt per unit time"),
            int("jump_paths", "200", 1, usize::MAX, "Brownian paths on which the K jump is checked"),
            list("y_values", "0.5; 1; 2", "levels y for P[X*_T > y]"),
            float("finite_t_bias", "0.01", 0.0, P, "allowance for the finite-horizon bias of P[X*_T > y]"),
            float("z_max", "3", 0.0, BIG, "standard errors allowed"),
            float("flagged_max", "0.005", 0.0, P, "maximum fraction of paths crossing the barrier on the grid"),
        ],
    },
    ScenarioInfo {
        name: "inverse-gamma",
        summary: "inverse-Gamma prior: exponential maximum, closed-form density and drift",
        criteria: &[5],
        seed: 13,
        n_paths: 10_000,
        horizon: 50.0,
        steps: Some(500_000),
        params: &[
            int("prior_cells", "10000", 2, usize::MAX, "atoms of the discretised prior"),
            int("filter_paths", "3", 1, usize::MAX, "paths on which the filter is compared with the closed forms"),
            float("filter_horizon", "1", 1e-6, BIG, "horizon of the filter comparison"),
            float("ks_distance_max", "0.03", 0.0, P, "maximum KS distance of X*_T to Exp(1)"),
            float("zeta_tol", "1e-3", 0.0, BIG, "maximum |ζ - (1 + X* - X) e^{-X*}|"),
            float("drift_tol", "2e-3", 0.0, BIG, "maximum |F + 1/(1 + X* - X)| once X* >= drift_from_max"),
            float("drift_from_max", "0.1", 0.0, BIG, "the straddling prior cell biases F by about 1/(cells X*); skip smaller X*"),
        ],
    },
    ScenarioInfo {
        name: "survival",
        summary: "survival processes, discrete-reveal deflator ratios and the finite-chain decomposition",
        criteria: &[8, 9],
        seed: 23,
        n_paths: 10_000,
        horizon: 4.0,
        steps: Some(40_000),
        params: &[
            float("q_martingale", "0.5", 1e-9, P, "reveal probability with a true martingale ratio"),
            float("q_strict", "1", 1e-9, P, "reveal probability with a strict local martingale ratio"),
            list("checkpoints", "0; 1; 2; 4", "checkpoint times of the martingale test"),
            float("z_max", "3", 0.0, BIG, "standard errors allowed"),
            int("chains", "1000", 1, usize::MAX, "random chains for the decomposition oracle"),
            int("chain_steps", "4", 1, 12, "steps per random chain"),
            float("chain_tol", "1e-12", 0.0, BIG, "reconstruction tolerance"),
            float("reveal_q", "0.5", 1e-9, 0.999_999, "q of the Bernoulli reveal example"),
        ],
    },
    ScenarioInfo {
        name: "hedging",
        summary: "hedging cost of the uninformed agent against the informed worst case",
        criteria: &[7],
        seed: 19,
        n_paths: 10_000,
        horizon: 1.0,
        steps: Some(10_000),
        params: &[
            ParamSpec { key: "one_sided_prior", default: "atoms(0.5:0.5, 1:0.5)", kind: ParamKind::Prior, help: "prior on θ >= 0" },
            ParamSpec { key: "gap_prior", default: "atoms(-1:0.5, 1:0.5)", kind: ParamKind::Prior, help: "prior with a gap around 0" },
            float("t", "1", 1e-12, BIG, "maturity of the claim ξ = 1"),
            float("z_max", "3", 0.0, BIG, "standard errors allowed"),
        ],
    },
    ScenarioInfo {
        name: "incompleteness",
        summary: "price interval of a sign claim, sign recovery from QV, the ±1/2 jump martingale",
        criteria: &[10],
        seed: 29,
        n_paths: 10_000,
        horizon: 4.0,
        steps: Some(40_000),
        params: &[
            float("f0", "1", 0.0, BIG, "payoff when B_1 <= 0"),
            float("f1", "0", 0.0, BIG, "payoff when B_1 > 0"),
            int("alpha_count", "19", 1, 100_000, "interior α grid size"),
            list("mc_alphas", "-0.5; 0.5", "α values cross-checked by Monte Carlo"),
            float("switch_horizon", "2", 1.0001, BIG, "horizon of the θ-switch market"),
            float("recovery_min", "0.999", 0.0, P, "minimum fraction of correctly recovered signs"),
            list("n_checkpoints", "1; 2; 4", "times at which the mean of N is tested"),
            float("z_max", "3", 0.0, BIG, "standard errors allowed"),
        ],
    },
];

pub fn find(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

pub fn names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|s| s.name).collect()
}

/// One line per scenario for `list`.
pub fn listing() -> String {
    let w = SCENARIOS.iter().map(|s| s.name.len()).max().unwrap_or(0);
    SCENARIOS.iter().map(|s| format!("{:<w$}  {}\n", s.name, s.summary)).collect()
}

fn parse_call(s: &str) -> Result<(&str, &str), String> {
    let s = s.trim();
    if !s.contains('(') {
        return Ok((s, ""));
    }
    let (name, rest) = s.split_once('(').ok_or_else(|| format!("bad syntax `{s}`"))?;
    let args = rest.strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
    Ok((name.trim(), args.trim()))
}

fn parse_pairs(args: &str) -> Result<Vec<(f64, f64)>, String> {
    args.split(',')
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| format!("expected `value:weight`, got `{}`", p.trim()))?;
            let a = a.trim();
            let x = if a == "inf" { f64::INFINITY } else { a.parse().map_err(|_| format!("bad number `{a}`"))? };
            let w = b.trim().parse().map_err(|_| format!("bad weight `{}`", b.trim()))?;
            Ok((x, w))
        })
        .collect()
}

fn one_number(args: &str) -> Result<f64, String> {
    args.parse().map_err(|_| format!("bad number `{args}`"))
}

pub fn parse_targets(s: &str) -> Result<Vec<(String, TargetLaw)>, String> {
    s.split(';')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|item| {
            let (name, args) = parse_call(item)?;
            let law = match name {
                "exp" => TargetLaw::exponential(one_number(args)?),
                "point" => TargetLaw::point_mass(one_number(args)?),
                "atoms" => TargetLaw::atoms(parse_pairs(args)?),
                other => return Err(format!("unknown target `{other}`")),
            }
            .map_err(|e| e.to_string())?;
            Ok((item.to_string(), law))
        })
        .collect::<Result<Vec<_>, String>>()
        .and_then(|v| if v.is_empty() { Err("no targets".into()) } else { Ok(v) })
}

pub fn parse_prior(s: &str) -> Result<ParamPrior, String> {
    let (name, args) = parse_call(s)?;
    match name {
        "atoms" => ParamPrior::atoms(parse_pairs(args)?).map_err(|e| e.to_string()),
        "point" => Ok(ParamPrior::point(one_number(args)?)),
        "inverse_gamma" => ParamPrior::inverse_gamma(10_000).map_err(|e| e.to_string()),
        other => Err(format!("unknown prior `{other}`")),
    }
}

/// Cross-key constraints that single-value checks cannot see.
pub fn check_consistency(cfg: &Config) -> Result<(), String> {
    let within = |key: &str| {
        let t = cfg.floats(key);
        match t.iter().find(|&&x| x < 0.0 || x > cfg.horizon) {
            Some(x) => Err(format!("{key}: {x} lies outside [0, horizon = {}]", cfg.horizon)),
            None => Ok(()),
        }
    };
    match cfg.scenario.name {
        "bayes-filter" => within("times"),
        "survival" => within("checkpoints"),
        "incompleteness" => within("n_checkpoints"),
        "hedging" if cfg.float("t") > cfg.horizon => Err(format!("t exceeds the horizon {}", cfg.horizon)),
        "brownian-checks" if cfg.int("ks_samples_per_path") > cfg.steps.unwrap_or(1) => {
            Err("ks_samples_per_path exceeds steps".into())
        }
        "levy-tau" if cfg.int("min_bits") > cfg.int("k_bits") => Err("min_bits exceeds k_bits".into()),
        _ => Ok(()),
    }
}

/// Artifact sink; `None` runs without writing files.
#[derive(Debug, Clone, Copy)]
pub struct Out<'a>(pub Option<&'a Path>);

impl Out<'_> {
    pub fn write(&self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> anyhow::Result<()> {
        let Some(dir) = self.0 else { return Ok(()) };
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
        Ok(())
    }
}

/// Run the configured scenario; CSV artifacts and `report.txt` go to the
/// output directory when one is set.
pub fn run(cfg: &Config) -> anyhow::Result<RunReport> {
    if let Some(d) = &cfg.output_dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let out = Out(cfg.output_dir.as_deref());
    let mut report = RunReport::new(cfg.scenario.name, cfg.seed, cfg.grid_label(), cfg.n_paths);
    match cfg.scenario.name {
        "brownian-checks" => brownian::run(cfg, out, &mut report)?,
        "levy-tau" => levy_tau::run(cfg, out, &mut report)?,
        "bayes-filter" => filter::run(cfg, out, &mut report)?,
        "never-cross" => never_cross::run(cfg, out, &mut report)?,
        "inverse-gamma" => inverse_gamma::run(cfg, out, &mut report)?,
        "survival" => survival::run(cfg, out, &mut report)?,
        "hedging" => hedging::run(cfg, out, &mut report)?,
        "incompleteness" => incompleteness::run(cfg, out, &mut report)?,
        other => anyhow::bail!("scenario {other} has no runner"),
    }
    out.write("report.txt", |w| w.write_all(report.render().as_bytes()))?;
    Ok(report)
}

/// Uniform grid of a configured scenario.
pub(crate) fn uniform_grid(cfg: &Config) -> anyhow::Result<shrinklab::TimeGrid> {
    let steps = cfg.steps.context("scenario needs a uniform grid")?;
    Ok(shrinklab::TimeGrid::new(cfg.horizon, steps)?)
}

pub(crate) fn fmt_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_scenarios_with_unique_keys() {
        assert_eq!(SCENARIOS.len(), 8);
        for s in &SCENARIOS {
            let mut keys: Vec<_> = s.params.iter().map(|p| p.key).collect();
            keys.sort_unstable();
            keys.dedup();
            assert_eq!(keys.len(), s.params.len(), "{}", s.name);
            let cfg = Config::defaults(s.name).unwrap();
            check_consistency(&cfg).unwrap();
        }
    }

    #[test]
    fn target_and_prior_syntax() {
        let t = parse_targets("exp(1); atoms(1:0.3, 2:0.7); point(0.7)").unwrap();
        assert_eq!(t.len(), 3);
        assert!(parse_targets("gamma(2)").is_err());
        assert!(parse_targets("atoms(1:0.3)").is_err());
        let p = parse_prior("atoms(-1:0.5, 1:0.5)").unwrap();
        assert_eq!(p.thetas(), &[-1.0, 1.0]);
        assert!(parse_prior("point(x)").is_err());
    }
}
