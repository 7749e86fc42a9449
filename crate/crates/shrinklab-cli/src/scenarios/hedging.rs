use shrinklab::bayes::{hedging_costs, DriftModel, HedgingCosts};

use super::{parse_prior, uniform_grid, Out};
use crate::config::Config;
use crate::report::RunReport;

pub(super) fn run(cfg: &Config, out: Out, r: &mut RunReport) -> anyhow::Result<()> {
    let g = uniform_grid(cfg)?;
    let t = cfg.float("t");
    let z = cfg.float("z_max");
    let model = DriftModel::NeverCross;
    let one_sided = parse_prior(cfg.text("one_sided_prior")).map_err(anyhow::Error::msg)?;
    let gapped = parse_prior(cfg.text("gap_prior")).map_err(anyhow::Error::msg)?;

    let a = hedging_costs(|_, _| 1.0, t, &one_sided, &model, &g, cfg.n_paths, cfg.seed)?;
    r.check(
        Some(7),
        "one_sided_no_gap",
        format!("p={:.5} ess_sup={:.5} gap={:+.5}+-{:.5}", a.p.mean, a.ess_sup, a.gap.mean, a.gap.se),
        format!("|gap| <= {z} se"),
        a.gap.mean.abs() <= z * a.gap.se,
    );
    let b = hedging_costs(|_, _| 1.0, t, &gapped, &model, &g, cfg.n_paths, cfg.seed)?;
    r.check(
        Some(7),
        "gap_prior_strict_gap",
        format!("p={:.5} ess_sup={:.5} gap={:+.5}+-{:.5}", b.p.mean, b.ess_sup, b.gap.mean, b.gap.se),
        format!("gap > {z} se"),
        b.gap.mean > z * b.gap.se,
    );

    let rows = |label: &str, h: &HedgingCosts, thetas: &[f64]| {
        let mut s = format!("{label},p,,{:.16e},{:.16e}\n", h.p.mean, h.p.se);
        for (th, p) in thetas.iter().zip(&h.p_theta) {
            s.push_str(&format!("{label},p_theta,{th},{:.16e},{:.16e}\n", p.mean, p.se));
        }
        s
    };
    out.write("hedging.csv", |f| {
        writeln!(f, "prior,quantity,theta,value,se")?;
        f.write_all(rows("one_sided", &a, one_sided.thetas()).as_bytes())?;
        f.write_all(rows("gap", &b, gapped.thetas()).as_bytes())
    })?;
    Ok(())
}
