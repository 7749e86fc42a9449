use shrinklab::ensemble::map_paths;
use shrinklab::market::{
    alpha_grid, alpha_price_mc, price_interval, sign_martingale_n, theta_switch_market, write_alpha_csv, SignClaim,
};
use shrinklab::path::gen_brownian;
use shrinklab::stats::Summary;
use shrinklab::{RngStream, TimeGrid};

use super::{uniform_grid, Out};
use crate::config::Config;
use crate::report::RunReport;

pub(super) fn run(cfg: &Config, out: Out, r: &mut RunReport) -> anyhow::Result<()> {
    let g = uniform_grid(cfg)?;
    let z = cfg.float("z_max");
    let (f0, f1) = (cfg.float("f0"), cfg.float("f1"));
    let claim = SignClaim::new(f0, f1)?;
    let pi = price_interval(claim, &alpha_grid(cfg.int("alpha_count")))?;

    let complete = 0.5 * (f0 + f1);
    r.check(
        Some(10),
        "complete_price",
        format!("{:.6}", pi.complete_price),
        format!("== (f0 + f1)/2 = {complete}"),
        pi.complete_price == complete,
    );
    let cost = f0.max(f1);
    r.check(
        Some(10),
        "small_filtration_cost",
        format!("{:.6}", pi.small_filtration_cost),
        format!("== max(f0, f1) = {cost}"),
        pi.small_filtration_cost == cost,
    );
    let inside = pi.alpha_prices.iter().all(|&(_, p)| p >= f0.min(f1) && p <= cost);
    r.check(None, "alpha_prices_in_interval", format!("{} prices", pi.alpha_prices.len()), "within [min f, max f]", inside);
    for (k, &a) in cfg.floats("mc_alphas").iter().enumerate() {
        let mc = alpha_price_mc(claim, a, cfg.n_paths, cfg.seed.wrapping_add(100 + k as u64));
        let exact = claim.alpha_price(a);
        r.check(
            None,
            &format!("alpha_price_mc_{a}"),
            format!("{:.5}+-{:.5} vs {exact:.5}", mc.mean, mc.se),
            format!("within {z} se"),
            (mc.mean - exact).abs() <= z * mc.se,
        );
    }

    // sign of B_1 read off the post-1 quadratic variation of log S
    let sg = TimeGrid::with_dt(cfg.float("switch_horizon"), g.dt())?;
    let hits = map_paths(cfg.n_paths, |i| -> shrinklab::Result<bool> {
        let b = gen_brownian(&sg, &RngStream::new(cfg.seed.wrapping_add(1), i));
        let m = theta_switch_market(&b)?;
        Ok(m.recovered_positive == m.true_positive)
    });
    let hits: Vec<bool> = hits.into_iter().collect::<Result<_, _>>()?;
    let frac = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    let rmin = cfg.float("recovery_min");
    r.check(Some(10), "sign_recovery", format!("{frac:.5}"), format!(">= {rmin}"), frac >= rmin);

    // the ±1/2 jump martingale has mean zero at every checkpoint
    let cps = cfg.floats("n_checkpoints");
    let idx: Vec<usize> = cps.iter().map(|&t| g.index_at(t).expect("checked against horizon")).collect();
    let rows = map_paths(cfg.n_paths, |i| {
        let n = sign_martingale_n(&gen_brownian(&g, &RngStream::new(cfg.seed, i)));
        let lattice = n.n.values().iter().all(|&x| (2.0 * x).fract() == 0.0);
        (idx.iter().map(|&j| n.n.values()[j]).collect::<Vec<f64>>(), n.censored, lattice)
    });
    let censored = rows.iter().filter(|r| r.1).count();
    let off_lattice = rows.iter().filter(|r| !r.2).count();
    let mut stats = Vec::new();
    for (k, &t) in cps.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r.0[k]).collect();
        let s = Summary::of(&xs);
        r.check(
            Some(10),
            &format!("n_mean_zero_t{t}"),
            format!("{:+.5}+-{:.5}", s.mean, s.se),
            format!("|mean| <= {z} se"),
            s.mean.abs() <= z * s.se,
        );
        stats.push((t, s));
    }
    r.check(None, "n_half_lattice", format!("{off_lattice} paths off the lattice"), "0", off_lattice == 0);
    r.note(format!("N: {censored} of {} paths have tau beyond T = {}", rows.len(), g.horizon()));

    out.write("alpha.csv", |f| write_alpha_csv(&pi, f))?;
    out.write("n_ensemble.csv", |f| {
        writeln!(f, "t,mean,se")?;
        for (t, s) in &stats {
            writeln!(f, "{t},{:.16e},{:.16e}", s.mean, s.se)?;
        }
        Ok(())
    })?;
    let m0 = theta_switch_market(&gen_brownian(&sg, &RngStream::new(cfg.seed.wrapping_add(1), 0)))?;
    out.write("theta_switch.csv", |f| m0.s.write_csv(f))?;
    Ok(())
}
