use shrinklab::bayes::{max_law, posterior_mean_drift, DriftModel, Filter, ParamPrior};
use shrinklab::ensemble::map_paths;
use shrinklab::path::euler_maruyama;
use shrinklab::stats::{ks_distance, ks_test, normal_cdf};
use shrinklab::{RngStream, SamplePath, TimeGrid};

use super::{fmt_p, uniform_grid, Out};
use crate::config::Config;
use crate::report::RunReport;

/// `dX = -dt / (1 + X* - X) + dW`, the mixture dynamics under the inverse-Gamma prior.
fn simulate(g: &TimeGrid, stream: &RngStream) -> shrinklab::Result<SamplePath> {
    let mut m = f64::NEG_INFINITY;
    let em = euler_maruyama(
        |_, x| {
            let last = x[x.len() - 1];
            m = m.max(last);
            -1.0 / (1.0 + m - last)
        },
        |_, _| 1.0,
        g,
        stream,
        0.0,
    )?;
    Ok(em.path)
}

pub(super) fn run(cfg: &Config, out: Out, r: &mut RunReport) -> anyhow::Result<()> {
    let g = uniform_grid(cfg)?;
    let maxes = map_paths(cfg.n_paths, |i| {
        simulate(&g, &RngStream::new(cfg.seed, i)).map(|p| p.values().iter().copied().fold(0.0, f64::max))
    });
    let maxes: Vec<f64> = maxes.into_iter().collect::<Result<_, _>>()?;
    let exp_cdf = |y: f64| if y <= 0.0 { 0.0 } else { -(-y).exp_m1() };
    let d = ks_distance(&maxes, exp_cdf, exp_cdf);
    let d_max = cfg.float("ks_distance_max");
    r.check(Some(5), "max_exponential_ks", format!("D={d:.5} n={}", maxes.len()), format!("D <= {d_max}"), d <= d_max);
    // finite horizon: P[X*_T > y] = e^-y 2(1 - Phi(y/sqrt T))
    let sq = g.horizon().sqrt();
    let finite_cdf = |y: f64| if y <= 0.0 { 0.0 } else { 1.0 - (-y).exp() * 2.0 * (1.0 - normal_cdf(y / sq)) };
    let ks = ks_test(&maxes, finite_cdf);
    let d_inf = (1..=2000)
        .map(|k| {
            let y = k as f64 * 0.005;
            (finite_cdf(y) - exp_cdf(y)).abs()
        })
        .fold(0.0, f64::max);
    r.check(
        None,
        "max_finite_horizon_ks",
        format!("p={} D={:.5}", fmt_p(ks.p_value), ks.statistic),
        "p > 0.01",
        ks.p_value > 0.01,
    );
    r.note(format!("sup distance between the T = {} law of X*_T and Exp(1): {d_inf:.5}", g.horizon()));

    let prior = ParamPrior::inverse_gamma(cfg.int("prior_cells"))?;
    let model = DriftModel::NeverCross;
    let from_max = cfg.float("drift_from_max");
    let fg = TimeGrid::with_dt(cfg.float("filter_horizon"), g.dt())?;
    let errs = map_paths(cfg.int("filter_paths"), |i| -> shrinklab::Result<(f64, f64)> {
        let x = simulate(&fg, &RngStream::new(cfg.seed, i))?;
        let v = x.values();
        let mut f = Filter::new(&prior, &model);
        let mut m: f64 = 0.0;
        let (mut ez, mut ef): (f64, f64) = (0.0, 0.0);
        for j in 0..v.len() {
            if j > 0 {
                f.advance(&v[..=j], fg.time(j - 1), fg.time(j))?;
            }
            m = m.max(v[j]);
            let s = f.state();
            let zeta = (1.0 + m - v[j]) * (-m).exp();
            ez = ez.max((s.zeta() - zeta).abs());
            if m >= from_max {
                let drift = posterior_mean_drift(s, &prior, &model, &v[..=j], fg.time(j))?;
                ef = ef.max((drift + 1.0 / (1.0 + m - v[j])).abs());
            }
        }
        Ok((ez, ef))
    });
    let errs: Vec<(f64, f64)> = errs.into_iter().collect::<Result<_, _>>()?;
    let ez = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let ef = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let (zt, ft) = (cfg.float("zeta_tol"), cfg.float("drift_tol"));
    r.check(
        Some(5),
        "zeta_closed_form",
        format!("max |zeta - (1 + X* - X) e^-X*| = {ez:.2e}"),
        format!("<= {zt:e}"),
        ez <= zt,
    );
    r.check(None, "drift_closed_form", format!("max |F + 1/(1 + X* - X)| = {ef:.2e} where X* >= {from_max}"), format!("<= {ft:e}"), ef <= ft);
    let worst_law = [0.1, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&y| (max_law(y, &prior) - (-y).exp()).abs())
        .fold(0.0, f64::max);
    r.check(
        None,
        "max_law_closed_form",
        format!("max |P[X* > y] - e^-y| = {worst_law:.2e}"),
        "<= 1e-3",
        worst_law <= 1e-3,
    );
    r.note(format!(
        "filter comparison on {} paths over [0, {}] with {} prior atoms",
        errs.len(),
        fg.horizon(),
        prior.len()
    ));

    out.write("max.csv", |f| {
        writeln!(f, "x_star")?;
        for m in &maxes {
            writeln!(f, "{m:.16e}")?;
        }
        Ok(())
    })?;
    Ok(())
}
