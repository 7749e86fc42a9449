use std::sync::Arc;

use proptest::prelude::*;
use shrinklab::bayes::{
    dual_price, dual_prices, max_law, max_law_finite, posterior_mean_drift, projected_deflator, run_filter, DriftModel,
    Filter, ParamPrior, Side,
};
use shrinklab::path::{gen_brownian, quadratic_variation, running_max};
use shrinklab::stats::normal_cdf;
use shrinklab::{Error, RngStream, SamplePath, TimeGrid};

fn brownian(steps: usize, seed: u64) -> SamplePath {
    gen_brownian(&TimeGrid::new(1.0, steps).unwrap(), &RngStream::new(seed, 0))
}

#[test]
fn zero_drift_prior_changes_nothing() {
    let x = brownian(2000, 1);
    let tr = run_filter(&x, &ParamPrior::point(0.0), &DriftModel::NeverCross).unwrap();
    assert!(tr.zeta.iter().all(|&z| z == 1.0));
    assert!(tr.k_h.iter().all(|&k| k == 0.0));
    assert!(tr.f_drift.iter().all(|&f| f == 0.0));
}

#[test]
fn single_atom_posterior_drift_is_its_drift() {
    let x = brownian(1000, 2);
    let model = DriftModel::constant_drift();
    let tr = run_filter(&x, &ParamPrior::point(1.7), &model).unwrap();
    assert!(tr.f_drift.iter().all(|&f| (f - 1.7).abs() <= 1e-12));
}

#[test]
fn symmetric_pair_on_a_flat_path_has_no_drift() {
    let g = TimeGrid::new(1.0, 100).unwrap();
    let x = SamplePath::constant(&g, 0.0);
    let tr = run_filter(&x, &ParamPrior::symmetric_pair(), &DriftModel::NeverCross).unwrap();
    assert!(tr.f_drift.iter().all(|&f| f.abs() <= 1e-15));
    assert!(tr.zeta.iter().all(|&z| (z - 1.0).abs() <= 1e-15));
}

#[test]
fn never_cross_density_is_linear_in_the_observation() {
    // the product of the step factors telescopes to 1 - θ X
    let prior = ParamPrior::atoms(vec![(-1.0, 0.25), (0.5, 0.25), (1.0, 0.5)]).unwrap();
    let model = DriftModel::NeverCross;
    for seed in 0..20 {
        let x = brownian(5000, 100 + seed);
        let v = x.values();
        let mut f = Filter::new(&prior, &model);
        for j in 1..v.len() {
            f.advance(&v[..=j], x.grid().time(j - 1), x.grid().time(j)).unwrap();
            let s = f.state();
            for (a, &th) in prior.thetas().iter().enumerate() {
                if s.alive[a] {
                    let exact = 1.0 - th * v[j];
                    assert!((s.log_zeta[a].exp() - exact).abs() <= 1e-9 * exact.max(1.0));
                } else {
                    assert!(v[..=j].iter().any(|&y| th * y >= 1.0));
                }
            }
        }
    }
}

#[test]
fn barrier_hit_moves_mass_loss_by_the_atom_weight() {
    let g = TimeGrid::new(1.0, 4).unwrap();
    let x = SamplePath::new(g, vec![0.0, 0.4, 0.8, 1.2, 0.5]).unwrap();
    let tr = run_filter(&x, &ParamPrior::symmetric_pair(), &DriftModel::NeverCross).unwrap();
    assert_eq!(tr.k_h, vec![0.0, 0.0, 0.0, 0.5, 0.5]);
    assert_eq!(tr.n_alive, vec![2, 2, 2, 1, 1]);
    // the surviving atom θ = -1 has ζ = 1 + X
    assert!((tr.zeta[4] - 0.5 * 1.5).abs() <= 1e-12);
}

#[test]
fn gaussian_family_density_on_a_smooth_path() {
    // linear drift θ: ζ^θ = exp(θ X - θ² [X] / 2) up to the cubic variation
    let g = TimeGrid::new(1.0, 10_000).unwrap();
    let x = SamplePath::from_fn(&g, |t| (2.0 * t).sin());
    let prior = ParamPrior::atoms(vec![(-0.5, 0.5), (2.0, 0.5)]).unwrap();
    let model = DriftModel::constant_drift();
    let tr = run_filter(&x, &prior, &model).unwrap();
    let q = quadratic_variation(&x);
    for j in (0..g.len()).step_by(500) {
        let xj = x.values()[j];
        let expected: f64 = prior
            .thetas()
            .iter()
            .zip(prior.weights())
            .map(|(&th, &w)| w * (th * xj - 0.5 * th * th * q.values()[j]).exp())
            .sum();
        assert!((tr.zeta[j] / expected - 1.0).abs() <= 1e-6, "t = {}", g.time(j));
    }
}

#[test]
fn max_law_limits() {
    let pair = ParamPrior::symmetric_pair();
    assert_eq!(max_law(0.0, &pair), 1.0);
    assert!((max_law(1e-9, &pair) - 1.0).abs() < 1e-8);
    assert!((max_law(0.5, &pair) - 0.75).abs() < 1e-15);
    assert!((max_law(3.0, &pair) - 0.5).abs() < 1e-15);
    // θ = 1: the gap to the barrier is a Bessel(3) process
    let one = ParamPrior::point(1.0);
    let reach = 2.0 * (1.0 - normal_cdf(0.5 / 20f64.sqrt()));
    assert!((max_law_finite(0.5, 20.0, &one) - 0.5 * reach).abs() < 1e-15);
    for y in [0.25, 0.5, 2.0] {
        assert!((max_law_finite(y, 1e8, &pair) - max_law(y, &pair)).abs() < 1e-3);
    }
}

#[test]
fn inverse_gamma_cells() {
    let p = ParamPrior::inverse_gamma(2000).unwrap();
    let total: f64 = p.weights().iter().sum();
    let mean: f64 = p.thetas().iter().zip(p.weights()).map(|(t, w)| t * w).sum();
    assert!((total - 1.0).abs() < 1e-9);
    // E θ = E[1/V] with V ~ Gamma(2, 1)
    assert!((mean - 1.0).abs() < 1e-6, "{mean}");
    assert!(p.thetas().iter().all(|&t| t > 0.0));
}

#[test]
fn inverse_gamma_density_closed_form() {
    let prior = ParamPrior::inverse_gamma(10_000).unwrap();
    let model = DriftModel::NeverCross;
    let g = TimeGrid::new(1.0, 2000).unwrap();
    let x = SamplePath::from_fn(&g, |t| 1.5 * (3.0 * t).sin());
    let tr = run_filter(&x, &prior, &model).unwrap();
    let m = running_max(&x);
    for j in 0..g.len() {
        let (xs, xj) = (m.values()[j], x.values()[j]);
        let exact = (1.0 + xs - xj) * (-xs).exp();
        assert!((tr.zeta[j] - exact).abs() <= 1e-3, "t = {}: {} vs {exact}", g.time(j), tr.zeta[j]);
    }
}

#[test]
fn heavy_tail_drift_is_refused_at_time_zero() {
    let prior = ParamPrior::atoms(vec![(1.0, 0.5), (3.0, 0.5)]).unwrap().with_heavy_tail();
    let model = DriftModel::constant_drift();
    let f = Filter::new(&prior, &model);
    assert!(matches!(posterior_mean_drift(f.state(), &prior, &model, &[0.0], 0.0), Err(Error::UndefinedAtZero)));
    assert!(posterior_mean_drift(f.state(), &prior, &model, &[0.0], 0.1).is_ok());
}

#[test]
fn custom_family_declares_its_kill_rule() {
    // never-cross written out by hand must agree with the built-in family
    let custom = DriftModel::Custom {
        drift: Arc::new(|th: f64, x: &[f64], _| -th / (1.0 - th * x[x.len() - 1])),
        kill: Arc::new(|th: f64, x: &[f64], _| th * x[x.len() - 1] >= 1.0),
    };
    let prior = ParamPrior::symmetric_pair();
    let x = brownian(3000, 9);
    let a = run_filter(&x, &prior, &custom).unwrap();
    let b = run_filter(&x, &prior, &DriftModel::NeverCross).unwrap();
    assert_eq!(a.zeta, b.zeta);
    assert_eq!(a.k_h, b.k_h);
}

#[test]
fn zero_claim_has_zero_price() {
    let g = TimeGrid::new(1.0, 500).unwrap();
    let prior = ParamPrior::symmetric_pair();
    for side in [Side::P, Side::W] {
        let s = dual_price(|_, _| 0.0, 1.0, &prior, &DriftModel::NeverCross, side, &g, 200, 4).unwrap();
        assert_eq!(s.mean, 0.0);
    }
}

#[test]
fn default_identity_at_small_scale() {
    let g = TimeGrid::new(1.0, 2000).unwrap();
    let prior = ParamPrior::symmetric_pair();
    let model = DriftModel::NeverCross;
    let one = |_: &[f64], _: f64| 1.0;
    let p = dual_prices(one, &[0.5, 1.0], &prior, &model, Side::P, &g, 3000, 31).unwrap();
    let w = dual_prices(one, &[0.5, 1.0], &prior, &model, Side::W, &g, 3000, 31).unwrap();
    for k in 0..2 {
        let (a, b) = (p.estimates[k], w.estimates[k]);
        let se = (a.se * a.se + b.se * b.se).sqrt();
        assert!((a.mean - b.mean).abs() <= 3.0 * se, "{} vs {} (se {se})", a.mean, b.mean);
    }
    // W side: the pair is dead exactly when X has hit both ±1, which is rare by t = 1
    assert!(w.estimates[1].mean > 0.9);
}

fn prior_strategy() -> impl Strategy<Value = ParamPrior> {
    prop::collection::vec((-3.0f64..3.0, 0.01f64..1.0), 1..6).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        ParamPrior::atoms(atoms.into_iter().map(|(t, w)| (t, w / total)).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_loss_grows_and_posterior_is_normalised(prior in prior_strategy(), seed in any::<u64>()) {
        let model = DriftModel::NeverCross;
        let x = gen_brownian(&TimeGrid::new(2.0, 2000).unwrap(), &RngStream::new(seed, 0));
        let v = x.values();
        let mut f = Filter::new(&prior, &model);
        let mut prev_k = 0.0;
        let mut prev_alive = f.state().alive.clone();
        for j in 1..v.len() {
            f.advance(&v[..=j], x.grid().time(j - 1), x.grid().time(j)).unwrap();
            let s = f.state();
            prop_assert!(s.k_h >= prev_k);
            prop_assert!(s.k_h >= 0.0 && s.k_h <= 1.0 + 1e-12);
            // atoms never come back
            prop_assert!(s.alive.iter().zip(&prev_alive).all(|(&now, &before)| before || !now));
            if s.zeta() > 0.0 {
                let total: f64 = s.posterior.iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
                prop_assert!(s.posterior.iter().all(|&p| p >= 0.0));
                prop_assert!(s.k_h < 1.0);
            }
            for (a, &alive) in s.alive.iter().enumerate() {
                prop_assert_eq!(alive, s.log_zeta[a] > f64::NEG_INFINITY);
            }
            prev_k = s.k_h;
            prev_alive = s.alive.clone();
        }
    }

    #[test]
    fn deflator_is_mass_loss_over_density(prior in prior_strategy(), seed in any::<u64>()) {
        let model = DriftModel::NeverCross;
        let x = gen_brownian(&TimeGrid::new(1.0, 1000).unwrap(), &RngStream::new(seed, 0));
        let tr = run_filter(&x, &prior, &model).unwrap();
        let d = projected_deflator(&tr);
        let stop = tr.zero_at.unwrap_or(tr.zeta.len());
        for j in 0..stop {
            let expected = (1.0 - tr.k_h[j]) / tr.zeta[j];
            prop_assert!((d.oy.values()[j] - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }
    }
}
