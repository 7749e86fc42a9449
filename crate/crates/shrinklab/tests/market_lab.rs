use proptest::prelude::*;
use shrinklab::ensemble::map_paths;
use shrinklab::market::{
    alpha_grid, alpha_price_mc, price_interval, sign_martingale_n, theta_switch_closed_form, theta_switch_market,
    SignClaim,
};
use shrinklab::path::{gen_brownian, quadratic_variation};
use shrinklab::stats::Summary;
use shrinklab::{RngStream, TimeGrid};

#[test]
fn flat_claim_has_one_price() {
    let p = price_interval(SignClaim::new(1.0, 1.0).unwrap(), &alpha_grid(9)).unwrap();
    assert_eq!(p.complete_price, 1.0);
    assert_eq!(p.small_filtration_cost, 1.0);
    assert!(p.alpha_prices.iter().all(|&(_, v)| v == 1.0));
}

#[test]
fn digital_claim_interval() {
    let claim = SignClaim::new(1.0, 0.0).unwrap();
    let p = price_interval(claim, &alpha_grid(99)).unwrap();
    assert_eq!(p.complete_price, 0.5);
    assert_eq!(p.small_filtration_cost, 1.0);
    assert_eq!(claim.alpha_price(0.0), p.complete_price);
    // open interval: the supremum is approached, not attained
    assert!(p.alpha_prices.iter().all(|&(_, v)| v > 0.0 && v < 1.0));
    assert!(price_interval(claim, &[1.0]).is_err());
    assert!(SignClaim::new(-1.0, 0.0).is_err());
}

#[test]
fn alpha_price_by_simulation() {
    let claim = SignClaim::new(1.0, 0.0).unwrap();
    for (k, a) in [-0.5, 0.5].into_iter().enumerate() {
        let s = alpha_price_mc(claim, a, 20_000, 40 + k as u64);
        assert!((s.mean - claim.alpha_price(a)).abs() <= 3.0 * s.se, "alpha {a}: {} (se {})", s.mean, s.se);
    }
}

#[test]
fn n_lives_on_the_half_lattice() {
    let g = TimeGrid::new(10.0, 20_000).unwrap();
    for i in 0..50 {
        let np = sign_martingale_n(&gen_brownian(&g, &RngStream::new(5, i)));
        let v = np.n.values();
        assert!(v.iter().all(|&x| (2.0 * x).fract() == 0.0));
        assert!(np.jumps.iter().all(|&(_, d)| d.abs() == 0.5));
        // constant between the listed jumps
        let jump_nodes: Vec<usize> = np.jumps.iter().map(|j| j.0).collect();
        for j in 1..v.len() {
            if !jump_nodes.contains(&j) {
                assert_eq!(v[j], v[j - 1]);
            }
        }
        assert_eq!(np.censored, np.tau_index.is_none());
        if let Some(t) = np.tau_index {
            assert_eq!(np.jumps.last().unwrap(), &(t, 0.5));
        }
    }
}

#[test]
fn n_has_mean_zero() {
    let g = TimeGrid::new(4.0, 4000).unwrap();
    let ends: Vec<f64> = map_paths(4000, |i| sign_martingale_n(&gen_brownian(&g, &RngStream::new(6, i))).n.last());
    let s = Summary::of(&ends);
    assert!(s.mean.abs() <= 3.0 * s.se, "{} (se {})", s.mean, s.se);
}

#[test]
fn theta_switch_grid_identity_before_one() {
    let g = TimeGrid::new(2.0, 20_000).unwrap();
    let b = gen_brownian(&g, &RngStream::new(8, 0));
    let m = theta_switch_market(&b).unwrap();
    let closed = theta_switch_closed_form(&b);
    let q = quadratic_variation(&b);
    let one = g.index_at(1.0).unwrap();
    for j in 0..=one {
        // the two forms differ only through [B]_t - t
        let ratio = m.s.values()[j] / closed.values()[j];
        let expected = (-0.5 * (q.values()[j] - g.time(j))).exp();
        assert!((ratio / expected - 1.0).abs() <= 1e-9, "t = {}", g.time(j));
    }
}

#[test]
fn theta_switch_closed_form_at_fine_steps() {
    let g = TimeGrid::new(1.5, 1_500_000).unwrap();
    let b = gen_brownian(&g, &RngStream::new(8, 1));
    let m = theta_switch_market(&b).unwrap();
    let closed = theta_switch_closed_form(&b);
    let one = g.index_at(1.0).unwrap();
    let worst = (0..=one).map(|j| (m.s.values()[j] / closed.values()[j] - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 3e-3, "{worst}");
}

#[test]
fn volatility_reveals_the_sign() {
    let g = TimeGrid::new(2.0, 4000).unwrap();
    let ok: Vec<bool> = map_paths(1000, |i| {
        let m = theta_switch_market(&gen_brownian(&g, &RngStream::new(9, i))).unwrap();
        m.recovered_positive == m.true_positive
    });
    assert!(ok.iter().all(|&b| b));
    assert!(theta_switch_market(&gen_brownian(&TimeGrid::new(1.0, 10).unwrap(), &RngStream::new(1, 1))).is_err());
}

proptest! {
    #[test]
    fn alpha_prices_are_affine_and_bounded(f0 in 0.0f64..10.0, f1 in 0.0f64..10.0, a in -0.999f64..0.999, b in -0.999f64..0.999) {
        let c = SignClaim::new(f0, f1).unwrap();
        let mid = c.alpha_price(0.5 * (a + b));
        prop_assert!((c.alpha_price(a) + c.alpha_price(b) - 2.0 * mid).abs() <= 1e-12 * (1.0 + f0 + f1));
        let p = price_interval(c, &[a, b]).unwrap();
        for &(_, v) in &p.alpha_prices {
            prop_assert!(v >= f0.min(f1) - 1e-12 && v <= f0.max(f1) + 1e-12);
        }
        prop_assert_eq!(p.small_filtration_cost, f0.max(f1));
    }
}
