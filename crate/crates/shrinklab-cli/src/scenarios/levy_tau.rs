use shrinklab::ensemble::map_paths;
use shrinklab::levy::{
    extract_uniforms_given, local_time_of, refine_near_zero, tau_grid, write_excursions_csv, ExcursionConfig,
    ExcursionScan, LevelSequence, RefineConfig,
};
use shrinklab::path::gen_brownian;
use shrinklab::stats::{correlation, ks_distance, ks_test, Summary};
use shrinklab::{Error, RngStream};

use super::{fmt_p, parse_targets, Out};
use crate::config::Config;
use crate::report::RunReport;

struct PathOut {
    /// `None` when σ at the first level lies beyond the horizon.
    taus: Option<Vec<f64>>,
    /// Smallest σ among levels that entered the recursion.
    sigma_min: f64,
    u: Vec<f64>,
    bits: Vec<usize>,
    lt1: f64,
    sup1: f64,
}

pub(super) fn run(cfg: &Config, out: Out, r: &mut RunReport) -> anyhow::Result<()> {
    let g = tau_grid(cfg.horizon, cfg.float("resolution"), cfg.float("t_min"))?;
    let levels = LevelSequence::geometric(cfg.float("s1"), cfg.int("levels"))?;
    let k_bits = cfg.int("k_bits");
    let min_bits = cfg.int("min_bits");
    let ecfg = ExcursionConfig { band_factor: cfg.float("band_factor"), merge_threshold: cfg.float("merge_threshold") };
    let targets = parse_targets(cfg.text("targets")).map_err(anyhow::Error::msg)?;
    let kappa = cfg.float("refine_kappa");
    let path = |i: u64| -> shrinklab::Result<shrinklab::SamplePath> {
        let stream = RngStream::new(cfg.seed, i);
        let w = gen_brownian(&g, &stream);
        if kappa > 0.0 {
            let rc = RefineConfig { kappa, ..RefineConfig::default() };
            refine_near_zero(&w, rc, &mut stream.lane(3))
        } else {
            Ok(w)
        }
    };

    let rows: Vec<shrinklab::Result<PathOut>> = map_paths(cfg.n_paths, |i| {
        let w = path(i)?;
        let one = w.grid().index_at(1.0).unwrap_or(w.grid().steps());
        let lt = local_time_of(&w);
        let draws = extract_uniforms_given(&w, &lt, &levels, k_bits, ecfg)?;
        let mut taus = Some(Vec::with_capacity(targets.len()));
        for (_, law) in &targets {
            match draws.stopping_time(law, min_bits) {
                Ok(st) => taus.as_mut().expect("set").push(st.tau),
                Err(Error::HorizonTooShort { .. }) => taus = None,
                Err(e) => return Err(e),
            }
            if taus.is_none() {
                break;
            }
        }
        let sigma_min = draws
            .sigma_times
            .iter()
            .zip(&draws.draws)
            .filter(|(_, d)| d.bits >= min_bits)
            .filter_map(|(s, _)| *s)
            .fold(f64::INFINITY, f64::min);
        Ok(PathOut {
            taus,
            sigma_min,
            u: draws.draws.iter().map(|d| d.completed()).collect(),
            bits: draws.draws.iter().map(|d| d.bits).collect(),
            lt1: lt.values()[one],
            sup1: w.values()[..=one].iter().fold(0.0f64, |m, x| m.max(x.abs())),
        })
    });
    let rows: Vec<PathOut> = rows.into_iter().collect::<Result<_, _>>()?;
    let ok: Vec<&PathOut> = rows.iter().filter(|p| p.taus.is_some()).collect();
    let failed = rows.len() - ok.len();
    r.note(format!(
        "{failed} of {} paths ({:.2}%) excluded: local time stayed below s_1 = {} up to the horizon",
        rows.len(),
        100.0 * failed as f64 / rows.len() as f64,
        levels.levels()[0]
    ));
    if ok.is_empty() {
        anyhow::bail!("no path resolved the first level; increase the horizon");
    }

    let u1: Vec<f64> = ok.iter().map(|p| p.u[0]).collect();
    let ks = ks_test(&u1, |x| x.clamp(0.0, 1.0));
    let u_min = cfg.float("u1_ks_p_min");
    r.check(
        Some(2),
        "u1_uniform_ks",
        format!("p={} D={:.5} n={}", fmt_p(ks.p_value), ks.statistic, ks.n),
        format!("p > {u_min}"),
        ks.p_value > u_min,
    );
    let bits: Vec<String> = (0..levels.len())
        .map(|n| format!("{:.1}", ok.iter().map(|p| p.bits[n] as f64).sum::<f64>() / ok.len() as f64))
        .collect();
    r.note(format!("mean sign bits per level (k_bits = {k_bits}): {}", bits.join(" ")));
    if levels.len() > 1 {
        let u2: Vec<f64> = ok.iter().map(|p| p.u[1]).collect();
        let c = correlation(&u1, &u2);
        let bound = 3.0 / (ok.len() as f64).sqrt();
        r.check(None, "u1_u2_correlation", format!("{c:+.4}"), format!("|corr| <= {bound:.4}"), c.abs() <= bound);
    }

    let d_max = cfg.float("ks_distance_max");
    let c_max = cfg.float("corr_max");
    let lt1: Vec<f64> = ok.iter().map(|p| p.lt1).collect();
    let sup1: Vec<f64> = ok.iter().map(|p| p.sup1).collect();
    for (k, (label, law)) in targets.iter().enumerate() {
        let tau: Vec<f64> = ok.iter().map(|p| p.taus.as_ref().expect("filtered")[k]).collect();
        let slug = label.split('(').next().unwrap_or("target");
        let name = |s: &str| format!("tau_{slug}{k}_{s}");
        if let Some(c) = law.point_location() {
            let reached: Vec<usize> = (0..ok.len()).filter(|&i| ok[i].sigma_min < c).collect();
            let exact = reached.iter().filter(|&&i| tau[i] == c).count();
            r.check(
                Some(3),
                &name("point_exact"),
                format!("{exact}/{}", reached.len()),
                format!("tau == {c} once some sigma_n < {c}"),
                exact == reached.len(),
            );
            continue;
        }
        let d = ks_distance(&tau, |t| law.cdf(t), |t| law.cdf_left(t));
        r.check(Some(3), &name("ks"), format!("D={d:.5} n={}", tau.len()), format!("D <= {d_max}"), d <= d_max);
        let finite: Vec<usize> = (0..tau.len()).filter(|&i| tau[i].is_finite()).collect();
        let tf: Vec<f64> = finite.iter().map(|&i| tau[i]).collect();
        let pick = |v: &[f64]| finite.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let c1 = correlation(&tf, &pick(&lt1));
        let c2 = correlation(&tf, &pick(&sup1));
        r.check(Some(3), &name("corr_local_time"), format!("{c1:+.4}"), format!("|corr| <= {c_max}"), c1.abs() <= c_max);
        r.check(Some(3), &name("corr_sup_abs_w"), format!("{c2:+.4}"), format!("|corr| <= {c_max}"), c2.abs() <= c_max);
        let s = Summary::of(&tf);
        r.note(format!("{label}: mean tau {:.4} +- {:.4}", s.mean, s.se));
    }

    out.write("tau.csv", |f| {
        writeln!(f, "path,target,tau")?;
        for (i, p) in rows.iter().enumerate() {
            if let Some(t) = &p.taus {
                for (k, v) in t.iter().enumerate() {
                    writeln!(f, "{i},{k},{v:.16e}")?;
                }
            }
        }
        Ok(())
    })?;
    let w0 = path(0)?;
    let lt0 = local_time_of(&w0);
    let scan = ExcursionScan::new(&w0, &lt0, ecfg, w0.len() - 1);
    out.write("excursions.csv", |f| write_excursions_csv(w0.grid(), &scan.excursions(w0.len() - 1), f))?;
    Ok(())
}
