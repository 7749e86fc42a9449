use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shrinklab::ensemble::map_paths;
use shrinklab::path::{gen_brownian, gen_second_brownian, stoch_exponential};
use shrinklab::projection::{
    additive_doob, chain_decompose, martingale_test, reveal_times, simulate_discrete_reveal, survival_process,
    Classification, Drivers, FiniteChain, RevealMeasure, SurvivalScenario,
};
use shrinklab::stats::binomial_z;
use shrinklab::{Error, RngStream, SamplePath, TimeGrid};

#[test]
fn one_step_chain_by_hand() {
    let mut c = FiniteChain::new(1.0);
    let a = c.add_child(0, 0.5, 1.2);
    let b = c.add_child(0, 0.5, 0.4);
    let d = chain_decompose(&c).unwrap();
    // conditional mean 0.8, so one fifth of the mass is lost at step one
    assert!((d.k[a] - 0.2).abs() < 1e-15 && (d.k[b] - 0.2).abs() < 1e-15);
    assert!((d.l[a] - 1.5).abs() < 1e-15 && (d.l[b] - 0.5).abs() < 1e-15);
    assert_eq!(d.l[0], 1.0);
}

#[test]
fn martingale_chain_has_no_mass_loss() {
    let mut c = FiniteChain::new(2.0);
    let a = c.add_child(0, 0.25, 5.0);
    c.add_child(0, 0.75, 1.0);
    c.add_child(a, 0.5, 4.0);
    c.add_child(a, 0.5, 6.0);
    let d = chain_decompose(&c).unwrap();
    assert!(d.k.iter().all(|&k| k == 0.0));
    for (n, node) in c.nodes().iter().enumerate() {
        assert_eq!(d.l[n], node.value);
    }
}

#[test]
fn absorption_freezes_the_factors() {
    let mut c = FiniteChain::new(1.0);
    let z = c.add_child(0, 0.5, 0.0);
    c.add_child(0, 0.5, 1.0);
    let zz = c.add_child(z, 1.0, 0.0);
    let d = chain_decompose(&c).unwrap();
    assert!(d.stopped[z] && d.stopped[zz]);
    assert_eq!(d.k[zz], d.k[z]);
    assert_eq!(d.l[zz], d.l[z]);
}

#[test]
fn submartingale_step_is_rejected() {
    let mut c = FiniteChain::new(1.0);
    c.add_child(0, 0.5, 2.0);
    c.add_child(0, 0.5, 1.0);
    assert!(matches!(chain_decompose(&c), Err(Error::NotSupermartingale { node: 0, .. })));
}

#[test]
fn survival_processes_are_probabilities() {
    let g = TimeGrid::new(5.0, 5000).unwrap();
    for i in 0..30 {
        let s = RngStream::new(3, i);
        let w = gen_brownian(&g, &s);
        let b = gen_second_brownian(&g, &s);
        let outputs = [
            survival_process(SurvivalScenario::DiscreteReveal { q: 0.5 }, Drivers { w: &w, b: None, theta: Some(0.0) })
                .unwrap(),
            survival_process(SurvivalScenario::GaussianReveal, Drivers { w: &w, b: Some(&b), theta: None }).unwrap(),
            survival_process(SurvivalScenario::ExcursionCount, Drivers { w: &w, b: None, theta: None }).unwrap(),
        ];
        for out in &outputs {
            assert!(out.value.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert_eq!(out.value.values()[0], 1.0);
            if let (Some(k), Some(m)) = (&out.k, &out.m) {
                assert!(k.values().windows(2).all(|p| p[1] >= p[0]));
                for j in 0..w.len() {
                    assert_eq!((1.0 - k.values()[j]) * m.values()[j], out.value.values()[j]);
                }
            }
        }
    }
}

#[test]
fn discrete_reveal_closed_form() {
    let g = TimeGrid::new(4.0, 4).unwrap();
    // ν at node 2 (W = 1), ρ at node 4 (W = -1)
    let w = SamplePath::new(g, vec![0.0, 0.5, 1.0, 0.0, -1.0]).unwrap();
    assert_eq!(reveal_times(&w), (Some(2), Some(4), 1.0));
    let q = 0.5;
    let dead = survival_process(SurvivalScenario::DiscreteReveal { q }, Drivers { w: &w, b: None, theta: Some(1.0) })
        .unwrap();
    assert_eq!(dead.value.values(), &[1.0, 1.0, 0.75, 0.75, 0.0]);
    let alive = survival_process(SurvivalScenario::DiscreteReveal { q }, Drivers { w: &w, b: None, theta: Some(0.0) })
        .unwrap();
    assert_eq!(alive.value.values(), &[1.0, 1.0, 0.75, 0.75, 1.0]);
    assert_eq!(alive.m.unwrap().values()[4], 2.0);
    assert!(survival_process(SurvivalScenario::DiscreteReveal { q: 1.0 }, Drivers { w: &w, b: None, theta: Some(0.0) })
        .is_err());
}

#[test]
fn reveal_frequencies_under_q() {
    // given ν <= t < ρ, the parameter points at the level hit first with probability q/2
    let g = TimeGrid::new(4.0, 4000).unwrap();
    let q = 0.5;
    let n = 4000;
    let rows: Vec<Option<bool>> = map_paths(n, |i| {
        let (w, theta, _) = simulate_discrete_reveal(q, RevealMeasure::Q, &g, &RngStream::new(7, i)).unwrap();
        let (nu, rho, sign) = reveal_times(&w);
        let j = g.index_at(3.0).unwrap();
        let between = nu.is_some_and(|a| a <= j) && rho.is_none_or(|b| j < b);
        between.then_some(theta == sign)
    });
    let hits: Vec<bool> = rows.into_iter().flatten().collect();
    assert!(hits.len() > 500);
    let z = binomial_z(hits.iter().filter(|&&h| h).count(), hits.len(), q / 2.0);
    assert!(z.abs() <= 3.0, "z = {z}");
}

#[test]
fn martingale_classifier() {
    let g = TimeGrid::new(1.0, 500).unwrap();
    let cps = [0.25, 0.5, 1.0];
    let e: Vec<SamplePath> = map_paths(2000, |i| stoch_exponential(&gen_brownian(&g, &RngStream::new(9, i))));
    assert_eq!(martingale_test(&e, &cps).unwrap().classification, Classification::MartingaleConsistent);
    // discounting at rate one turns it into a strict supermartingale
    let d: Vec<SamplePath> = e
        .iter()
        .map(|p| SamplePath::new(g.clone(), p.values().iter().zip(g.times()).map(|(v, t)| v * (-t).exp()).collect()).unwrap())
        .collect();
    let rep = martingale_test(&d, &cps).unwrap();
    assert_eq!(rep.classification, Classification::StrictSupermartingaleEvidence);
    assert!(matches!(martingale_test(&e[..10], &cps), Err(Error::TooFewPaths { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_chain_decomposition(seed in any::<u64>(), steps in 1usize..5, martingale in any::<bool>()) {
        let chain = FiniteChain::random(&mut ChaCha8Rng::seed_from_u64(seed), steps, martingale);
        let d = chain_decompose(&chain).unwrap();
        let a = additive_doob(&chain).unwrap();
        for (n, node) in chain.nodes().iter().enumerate() {
            // reconstruction
            prop_assert!((d.l[n] * (1.0 - d.k[n]) - node.value).abs() <= 1e-12 * node.value.max(1.0));
            if martingale {
                prop_assert!(d.k[n].abs() <= 1e-12);
            }
            let kids = chain.children(n);
            if kids.is_empty() || d.stopped[n] {
                continue;
            }
            // K is predictable: every child carries the same value
            prop_assert!(kids.iter().all(|&c| d.k[c] == d.k[kids[0]]));
            prop_assert!(d.k[kids[0]] >= d.k[n]);
            // L is a martingale where K < 1
            if d.k[kids[0]] < 1.0 {
                let mean: f64 = kids.iter().map(|&c| chain.nodes()[c].prob * d.l[c]).sum();
                prop_assert!((mean - d.l[n]).abs() <= 1e-12 * d.l[n].max(1.0));
            }
            // multiplicative against additive compensator
            let y = node.value;
            let ratio = 1.0 - (a[kids[0]] - a[n]) / y;
            prop_assert!(((1.0 - d.k[n]) * ratio - (1.0 - d.k[kids[0]])).abs() <= 1e-12);
        }
    }
}
