use rand::Rng;
use shrinklab::ensemble::map_paths;
use shrinklab::path::{gen_brownian, gen_second_brownian};
use shrinklab::projection::{
    additive_doob, chain_decompose, discrete_reveal_ratio, martingale_test_values, reveal_times,
    simulate_discrete_reveal, survival_process, write_decomposition_csv, write_survival_csv, Classification, Drivers,
    FiniteChain, MartingaleReport, RevealMeasure, SurvivalOutput, SurvivalScenario,
};
use shrinklab::stats::binomial_z;
use shrinklab::{RngStream, TimeGrid};

use super::{uniform_grid, Out};
use crate::config::Config;
use crate::report::RunReport;

fn ratio_report(cfg: &Config, g: &TimeGrid, q: f64, seed: u64) -> anyhow::Result<MartingaleReport> {
    let cps = cfg.floats("checkpoints");
    let idx: Vec<usize> = cps.iter().map(|&t| g.index_at(t).expect("checked against horizon")).collect();
    let rows = map_paths(cfg.n_paths, |i| -> shrinklab::Result<Vec<f64>> {
        let (w, theta, bad) = simulate_discrete_reveal(q, RevealMeasure::P, g, &RngStream::new(seed, i))?;
        let ratio = discrete_reveal_ratio(&w, theta, q)?;
        if bad || ratio.flagged_at.is_some() {
            return Ok(vec![f64::NAN; idx.len()]);
        }
        Ok(idx.iter().map(|&j| ratio.path.values()[j]).collect())
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_, _>>()?;
    Ok(martingale_test_values(&rows, &cps)?)
}

/// Largest `|(1 - K) M - survival|` over the path, when both factors exist.
fn identity_gap(s: &SurvivalOutput) -> f64 {
    let (Some(k), Some(m)) = (&s.k, &s.m) else { return 0.0 };
    (0..s.value.len())
        .map(|j| ((1.0 - k.values()[j]) * m.values()[j] - s.value.values()[j]).abs())
        .fold(0.0, f64::max)
}

pub(super) fn run(cfg: &Config, out: Out, r: &mut RunReport) -> anyhow::Result<()> {
    let g = uniform_grid(cfg)?;
    let z = cfg.float("z_max");

    let qm = cfg.float("q_martingale");
    let rep = ratio_report(cfg, &g, qm, cfg.seed)?;
    let worst = rep
        .checkpoints
        .iter()
        .map(|c| if c.se > 0.0 { (c.mean - 1.0).abs() / c.se } else if c.mean == 1.0 { 0.0 } else { f64::INFINITY })
        .fold(0.0, f64::max);
    r.check(
        Some(8),
        &format!("ratio_mean_one_q{qm}"),
        format!(
            "means {} (worst {worst:.2} se)",
            rep.checkpoints.iter().map(|c| format!("{:.4}", c.mean)).collect::<Vec<_>>().join(" ")
        ),
        format!("|mean - 1| <= {z} se at every checkpoint"),
        worst <= z,
    );
    r.check(
        Some(8),
        &format!("ratio_verdict_q{qm}"),
        format!("{:?}", rep.classification),
        "MartingaleConsistent",
        rep.classification == Classification::MartingaleConsistent,
    );
    r.note(format!("q = {qm}: {} paths excluded (barrier crossed on the grid)", rep.excluded));
    out.write(&format!("martingale_q{qm}.txt"), |f| writeln!(f, "{}", rep.lines().join("\n")))?;

    let qs = cfg.float("q_strict");
    let rep = ratio_report(cfg, &g, qs, cfg.seed.wrapping_add(1))?;
    let fall = rep.pairs.last().map(|p| p.diff).expect("at least one pair");
    r.check(
        Some(8),
        &format!("ratio_verdict_q{qs}"),
        format!("{:?} (first-to-last change {:+.4} +- {:.4})", rep.classification, fall.mean, fall.se),
        "StrictSupermartingaleEvidence",
        rep.classification == Classification::StrictSupermartingaleEvidence,
    );
    r.note(format!("q = {qs}: {} paths excluded (barrier crossed on the grid)", rep.excluded));
    out.write(&format!("martingale_q{qs}.txt"), |f| writeln!(f, "{}", rep.lines().join("\n")))?;

    // finite-chain oracle, alternating martingale and strict supermartingale chains
    let steps = cfg.int("chain_steps");
    let tol = cfg.float("chain_tol");
    let chains = map_paths(cfg.int("chains"), |i| -> shrinklab::Result<(bool, f64, f64, f64)> {
        let martingale = i % 2 == 0;
        let chain = FiniteChain::random(&mut RngStream::new(cfg.seed, i).auxiliary(), steps, martingale);
        let d = chain_decompose(&chain)?;
        let recon = chain
            .nodes()
            .iter()
            .enumerate()
            .map(|(n, node)| (d.l[n] * (1.0 - d.k[n]) - node.value).abs() / node.value.max(1.0))
            .fold(0.0, f64::max);
        let kmax = d.k.iter().copied().fold(0.0, f64::max);
        // multiplicative compensator against the additive one, on live nodes
        let a = additive_doob(&chain)?;
        let mut cross: f64 = 0.0;
        for n in 1..chain.len() {
            let p = chain.nodes()[n].parent.expect("non-root");
            if d.stopped[p] {
                continue;
            }
            let y = chain.nodes()[p].value;
            let ratio = 1.0 - (a[n] - a[p]) / y;
            cross = cross.max(((1.0 - d.k[p]) * ratio - (1.0 - d.k[n])).abs());
        }
        Ok((martingale, recon, kmax, cross))
    });
    let chains: Vec<(bool, f64, f64, f64)> = chains.into_iter().collect::<Result<_, _>>()?;
    let recon = chains.iter().map(|c| c.1).fold(0.0, f64::max);
    r.check(
        Some(9),
        "chain_reconstruction",
        format!("max |L(1-K) - Y| = {recon:.2e} over {} chains", chains.len()),
        format!("<= {tol:e}"),
        recon <= tol,
    );
    let wrong = chains.iter().filter(|c| c.0 != (c.2 <= tol)).count();
    r.check(
        Some(9),
        "chain_k_zero_iff_martingale",
        format!("{wrong} misclassified"),
        format!("K <= {tol:e} exactly on martingale chains"),
        wrong == 0,
    );
    let cross = chains.iter().map(|c| c.3).fold(0.0, f64::max);
    r.check(None, "chain_additive_cross_check", format!("{cross:.2e}"), format!("<= {tol:e}"), cross <= tol);

    // closed-form survival processes: algebraic identity and Q-frequencies
    let cps = cfg.floats("checkpoints");
    let q_rows = map_paths(cfg.n_paths, |i| -> shrinklab::Result<(f64, Vec<Option<bool>>)> {
        let (w, theta, _) = simulate_discrete_reveal(qm, RevealMeasure::Q, &g, &RngStream::new(cfg.seed.wrapping_add(2), i))?;
        let s = survival_process(SurvivalScenario::DiscreteReveal { q: qm }, Drivers { w: &w, b: None, theta: Some(theta) })?;
        let (nu, rho, sign) = reveal_times(&w);
        let n = w.len();
        let (nu, rho) = (nu.unwrap_or(n), rho.unwrap_or(n));
        // between ν and ρ the parameter is dead iff it points at the level hit first
        let flags = cps
            .iter()
            .map(|&t| {
                let j = g.index_at(t).expect("within horizon");
                (j >= nu && j < rho).then_some(theta == sign)
            })
            .collect();
        Ok((identity_gap(&s), flags))
    });
    let q_rows: Vec<(f64, Vec<Option<bool>>)> = q_rows.into_iter().collect::<Result<_, _>>()?;
    let gap = q_rows.iter().map(|r| r.0).fold(0.0, f64::max);
    r.check(None, "survival_identity", format!("max |(1-K)M - survival| = {gap:.1e}"), "== 0", gap == 0.0);
    let mut worst_z: f64 = 0.0;
    for (k, _) in cps.iter().enumerate() {
        let hits: Vec<bool> = q_rows.iter().filter_map(|r| r.1[k]).collect();
        if hits.len() >= 30 {
            let zz = binomial_z(hits.iter().filter(|&&h| h).count(), hits.len(), qm / 2.0);
            worst_z = worst_z.max(zz.abs());
        }
    }
    r.check(
        None,
        "reveal_dead_frequency",
        format!("worst |z| = {worst_z:.2}"),
        format!("P[tau_0 <= t | nu <= t < rho] = q/2 within {z} se"),
        worst_z <= z,
    );

    let w0 = gen_brownian(&g, &RngStream::new(cfg.seed, 0));
    let b0 = gen_second_brownian(&g, &RngStream::new(cfg.seed, 0));
    let (wq, th, _) = simulate_discrete_reveal(qm, RevealMeasure::Q, &g, &RngStream::new(cfg.seed, 0))?;
    let rq = cfg.float("reveal_q");
    let bern_theta = if RngStream::new(cfg.seed, 0).lane(3).random::<f64>() < rq { 1.0 } else { 0.0 };
    let outputs = [
        ("discrete", survival_process(SurvivalScenario::DiscreteReveal { q: qm }, Drivers { w: &wq, b: None, theta: Some(th) })?),
        ("gaussian", survival_process(SurvivalScenario::GaussianReveal, Drivers { w: &w0, b: Some(&b0), theta: None })?),
        ("excursion", survival_process(SurvivalScenario::ExcursionCount, Drivers { w: &w0, b: None, theta: None })?),
        ("bernoulli", survival_process(SurvivalScenario::BernoulliReveal { q: rq }, Drivers { w: &w0, b: None, theta: Some(bern_theta) })?),
    ];
    for (tag, s) in &outputs {
        out.write(&format!("survival_{tag}.csv"), |f| write_survival_csv(s, f))?;
    }
    let chain0 = FiniteChain::random(&mut RngStream::new(cfg.seed, 0).auxiliary(), steps, true);
    let d0 = chain_decompose(&chain0)?;
    out.write("decomposition.csv", |f| write_decomposition_csv(&d0, f))?;
    Ok(())
}
