use shrinklab::bayes::{dual_prices, run_filter, write_filter_csv, DriftModel, Side};
use shrinklab::path::gen_brownian;
use shrinklab::RngStream;

use super::{parse_prior, uniform_grid, Out};
use crate::config::Config;
use crate::report::RunReport;

pub(super) fn run(cfg: &Config, out: Out, r: &mut RunReport) -> anyhow::Result<()> {
    let g = uniform_grid(cfg)?;
    let prior = parse_prior(cfg.text("prior")).map_err(anyhow::Error::msg)?;
    let model = DriftModel::NeverCross;
    let times = cfg.floats("times");
    let z = cfg.float("z_max");

    let one = |_: &[f64], _: f64| 1.0;
    let p = dual_prices(one, &times, &prior, &model, Side::P, &g, cfg.n_paths, cfg.seed)?;
    let w = dual_prices(one, &times, &prior, &model, Side::W, &g, cfg.n_paths, cfg.seed)?;
    for (k, &t) in times.iter().enumerate() {
        let (a, b) = (p.estimates[k], w.estimates[k]);
        let se = (a.se * a.se + b.se * b.se).sqrt();
        let d = a.mean - b.mean;
        r.check(
            Some(6),
            &format!("default_identity_t{t}"),
            format!("E_P[1/zeta]={:.5}+-{:.5} W[mu(Sigma)<1]={:.5}+-{:.5} diff={:+.5}", a.mean, a.se, b.mean, b.se, d),
            format!("|diff| <= {z} x {se:.5}"),
            d.abs() <= z * se,
        );
        r.note(format!("t = {t}: default probability 1 - E_P[1/zeta_t] = {:.5}", 1.0 - a.mean));
    }
    r.note(format!("P side: {} of {} paths flagged (barrier crossed on the grid)", p.flagged, p.n_paths));

    out.write("prices.csv", |f| {
        writeln!(f, "t,p_side,p_se,w_side,w_se")?;
        for (k, t) in times.iter().enumerate() {
            let (a, b) = (p.estimates[k], w.estimates[k]);
            writeln!(f, "{t},{:.16e},{:.16e},{:.16e},{:.16e}", a.mean, a.se, b.mean, b.se)?;
        }
        Ok(())
    })?;
    let x0 = gen_brownian(&g, &RngStream::new(cfg.seed, 0));
    let traj = run_filter(&x0, &prior, &model)?;
    out.write("filter.csv", |f| write_filter_csv(&traj, f))?;
    Ok(())
}
