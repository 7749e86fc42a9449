use shrinklab::ensemble::map_paths;
use shrinklab::levy::{excursions, levy_transform, local_time_of, write_excursions_csv};
use shrinklab::path::{gen_brownian, hitting_time, quadratic_variation, stoch_exponential};
use shrinklab::stats::{binomial_z, chi_square_independence, ks_test, normal_cdf, skew_kurtosis, Summary};
use shrinklab::RngStream;

use super::{fmt_p, uniform_grid, Out};
use crate::config::Config;
use crate::report::RunReport;

struct PathStats {
    w_t: f64,
    qv_b: f64,
    exp_b: f64,
    lt: f64,
    hit: bool,
    incs: Vec<f64>,
    signs: Vec<i8>,
}

pub(super) fn run(cfg: &Config, out: Out, r: &mut RunReport) -> anyhow::Result<()> {
    let g = uniform_grid(cfg)?;
    let t = g.horizon();
    let dt = g.dt();
    let k = cfg.int("ks_samples_per_path");
    let stride = g.steps() / k;
    let h_min = cfg.float("sign_h_min");
    let z = cfg.float("z_max");

    let rows = map_paths(cfg.n_paths, |i| {
        let w = gen_brownian(&g, &RngStream::new(cfg.seed, i));
        let b = levy_transform(&w);
        let bv = b.values();
        PathStats {
            w_t: w.last(),
            qv_b: quadratic_variation(&b).last(),
            exp_b: stoch_exponential(&b).last(),
            lt: local_time_of(&w).path().last(),
            hit: hitting_time(&w, 1.0, true).is_some(),
            incs: (0..k).map(|m| bv[m * stride + 1] - bv[m * stride]).collect(),
            signs: excursions(&w, h_min).iter().map(|e| e.sign).collect(),
        }
    });

    let w0 = gen_brownian(&g, &RngStream::new(cfg.seed, 0));
    out.write("brownian_path.csv", |f| w0.write_csv(f))?;
    out.write("levy_path.csv", |f| levy_transform(&w0).write_csv(f))?;
    out.write("excursions.csv", |f| write_excursions_csv(&g, &excursions(&w0, h_min), f))?;

    let incs: Vec<f64> = rows.iter().flat_map(|s| s.incs.iter().copied()).collect();
    let sd = dt.sqrt();
    let ks = ks_test(&incs, |x| normal_cdf(x / sd));
    let p_min = cfg.float("ks_p_min");
    r.check(
        Some(1),
        "b_increments_ks",
        format!("p={} D={:.5} n={}", fmt_p(ks.p_value), ks.statistic, ks.n),
        format!("p > {p_min}"),
        ks.p_value > p_min,
    );
    let qv = Summary::of(&rows.iter().map(|s| s.qv_b).collect::<Vec<_>>());
    let (lo, hi) = (cfg.float("qv_mean_min"), cfg.float("qv_mean_max"));
    r.check(
        Some(1),
        "b_qv_mean",
        format!("{:.6} +- {:.6}", qv.mean, qv.se),
        format!("in [{lo}, {hi}]"),
        qv.mean >= lo && qv.mean <= hi,
    );

    let signs: Vec<i8> = rows.iter().flat_map(|s| s.signs.iter().copied()).collect();
    let pos = signs.iter().filter(|&&s| s > 0).count();
    let zs = binomial_z(pos, signs.len(), 0.5);
    r.check(
        Some(2),
        "sign_positive_fraction",
        format!("{:.5} (z={zs:+.2}, n={})", pos as f64 / signs.len() as f64, signs.len()),
        format!("|z| <= {z}"),
        zs.abs() <= z,
    );
    let mut table = vec![vec![0.0; 2]; 2];
    for s in &rows {
        for p in s.signs.windows(2) {
            table[(p[0] > 0) as usize][(p[1] > 0) as usize] += 1.0;
        }
    }
    let chi = chi_square_independence(&table);
    let chi_min = cfg.float("chi2_p_min");
    r.check(
        Some(2),
        "sign_consecutive_chi2",
        format!("p={} stat={:.3} pairs={}", fmt_p(chi.p_value), chi.statistic, table.iter().flatten().sum::<f64>()),
        format!("p > {chi_min}"),
        chi.p_value > chi_min,
    );

    // path-engine sanity lines
    let wt = Summary::of(&rows.iter().map(|s| s.w_t).collect::<Vec<_>>());
    r.check(
        None,
        "w_mean",
        format!("{:+.5}", wt.mean),
        format!("|mean| <= {z} sqrt(T/n) = {:.5}", z * (t / cfg.n_paths as f64).sqrt()),
        wt.mean.abs() <= z * (t / cfg.n_paths as f64).sqrt(),
    );
    r.check(
        None,
        "w_variance",
        format!("{:.5}", wt.variance / t),
        "Var(W_T)/T within 5% of 1",
        (wt.variance / t - 1.0).abs() <= 0.05,
    );
    let e = Summary::of(&rows.iter().map(|s| s.exp_b).collect::<Vec<_>>());
    r.check(
        None,
        "exp_b_mean",
        format!("{:.5} +- {:.5}", e.mean, e.se),
        format!("1 within {z} se"),
        (e.mean - 1.0).abs() <= z * e.se,
    );
    let lt = Summary::of(&rows.iter().map(|s| s.lt).collect::<Vec<_>>());
    let lt_target = (2.0 * t / std::f64::consts::PI).sqrt();
    r.check(
        None,
        "local_time_mean",
        format!("{:.5} +- {:.5}", lt.mean, lt.se),
        format!("sqrt(2T/pi) = {lt_target:.5} within {z} se"),
        (lt.mean - lt_target).abs() <= z * lt.se,
    );
    let hits = rows.iter().filter(|s| s.hit).count();
    let p_hit = 2.0 * (1.0 - normal_cdf(1.0 / t.sqrt()));
    let zh = binomial_z(hits, rows.len(), p_hit);
    r.check(
        None,
        "hit_probability",
        format!("{:.5} (z={zh:+.2})", hits as f64 / rows.len() as f64),
        format!("2(1 - Phi(1/sqrt T)) = {p_hit:.5}, |z| <= {z}"),
        zh.abs() <= z,
    );
    // [B]_T = dt * chi2_n on the grid; normal approximation of its spread
    let sd_qv = t * (2.0 / g.steps() as f64).sqrt();
    let p_conc = 2.0 * normal_cdf(0.01 * t / sd_qv) - 1.0;
    let conc = rows.iter().filter(|s| (s.qv_b / t - 1.0).abs() <= 0.01).count();
    let zc = binomial_z(conc, rows.len(), p_conc);
    r.check(
        None,
        "qv_within_1pct",
        format!("{:.4} (z={zc:+.2})", conc as f64 / rows.len() as f64),
        format!("{p_conc:.4}, |z| <= {z}"),
        zc.abs() <= z,
    );
    let (sk, ku) = skew_kurtosis(&incs);
    let n = incs.len() as f64;
    r.check(
        None,
        "increment_moments",
        format!("skew={sk:+.4} exkurt={ku:+.4}"),
        format!("within {z} se of 0"),
        sk.abs() <= z * (6.0 / n).sqrt() && ku.abs() <= z * (24.0 / n).sqrt(),
    );
    r.note(format!("KS uses every {stride}-th increment of B ({k} per path)"));
    Ok(())
}
