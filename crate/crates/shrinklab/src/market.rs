//! Small markets where shrinking the filtration breaks completeness.
//!
//! * [`sign_martingale_n`]: a purely discontinuous martingale in the
//!   filtration of `|W|` enlarged at `τ`, with jumps of `±1/2`.
//! * [`price_interval`]: prices of a claim `f(1{B_1 > 0})` under the
//!   extremal densities `Z^α_1 = 1 + α (2·1{B_1 > 0} - 1)`.
//! * [`theta_switch_market`]: a stock whose post-1 volatility reveals the
//!   sign of `B_1`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{RngStream, SamplePath, TimeGrid};
use crate::path::{gen_brownian, quadratic_variation};
use crate::stats::Summary;

#[derive(Debug, Clone)]
pub struct NPath {
    pub n: SamplePath,
    /// Node of `τ`, the first hit of `+1`.
    pub tau_index: Option<usize>,
    /// `(node, jump)` for every jump; each jump is `±1/2`.
    pub jumps: Vec<(usize, f64)>,
    /// `τ` lies beyond the horizon.
    pub censored: bool,
}

/// `N = 1_{[τ,∞)} - ½ Σ_i 1_{[τ_i,∞)} 1{τ_i <= τ}` where the `τ_i` are the
/// successive hits of `|W| = 1`, each after a return to zero.
pub fn sign_martingale_n(w: &SamplePath) -> NPath {
    let v = w.values();
    let mut out = vec![0.0; v.len()];
    let mut jumps = Vec::new();
    let mut level = 0.0;
    let mut j = 0;
    let mut tau_index = None;
    'outer: while j < v.len() {
        // next τ_i
        while v[j].abs() < 1.0 {
            out[j] = level;
            j += 1;
            if j == v.len() {
                break 'outer;
            }
        }
        let up = v[j] > 0.0;
        let jump = if up { 0.5 } else { -0.5 };
        level += jump;
        jumps.push((j, jump));
        if up {
            tau_index = Some(j);
            out[j..].iter_mut().for_each(|x| *x = level);
            break;
        }
        // ρ_i: back to zero
        while v[j] < 0.0 {
            out[j] = level;
            j += 1;
            if j == v.len() {
                break 'outer;
            }
        }
    }
    NPath {
        n: SamplePath::from_parts(w.grid().clone(), out),
        tau_index,
        jumps,
        censored: tau_index.is_none(),
    }
}

/// Claim `f(1{B_1 > 0})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignClaim {
    pub f0: f64,
    pub f1: f64,
}

impl SignClaim {
    pub fn new(f0: f64, f1: f64) -> Result<Self> {
        if !(f0 >= 0.0 && f1 >= 0.0 && f0.is_finite() && f1.is_finite()) {
            return Err(Error::InvalidInput(format!("payoff must be finite and nonnegative, got ({f0}, {f1})")));
        }
        Ok(Self { f0, f1 })
    }

    /// `E[Z^α_1 f]`.
    pub fn alpha_price(&self, alpha: f64) -> f64 {
        0.5 * self.f1 * (1.0 + alpha) + 0.5 * self.f0 * (1.0 - alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceInterval {
    pub complete_price: f64,
    pub small_filtration_cost: f64,
    pub alpha_prices: Vec<(f64, f64)>,
}

pub fn price_interval(claim: SignClaim, alphas: &[f64]) -> Result<PriceInterval> {
    if let Some(a) = alphas.iter().find(|a| !(a.abs() < 1.0)) {
        return Err(Error::InvalidInput(format!("alpha must lie in (-1, 1), got {a}")));
    }
    Ok(PriceInterval {
        complete_price: claim.alpha_price(0.0),
        // the affine map is maximised at one of the excluded endpoints
        small_filtration_cost: claim.alpha_price(1.0).max(claim.alpha_price(-1.0)),
        alpha_prices: alphas.iter().map(|&a| (a, claim.alpha_price(a))).collect(),
    })
}

/// Evenly spaced interior grid of `count` values in `(-1, 1)`.
pub fn alpha_grid(count: usize) -> Vec<f64> {
    (1..=count).map(|i| -1.0 + 2.0 * i as f64 / (count + 1) as f64).collect()
}

/// Monte Carlo `E[Z^α_1 f]` from simulated signs of `B_1`.
pub fn alpha_price_mc(claim: SignClaim, alpha: f64, n_paths: usize, seed: u64) -> Summary {
    let g = TimeGrid::new(1.0, 1).expect("unit grid");
    let xs: Vec<f64> = crate::ensemble::map_paths(n_paths, |i| {
        let up = gen_brownian(&g, &RngStream::new(seed, i)).last() > 0.0;
        let z = 1.0 + alpha * if up { 1.0 } else { -1.0 };
        z * if up { claim.f1 } else { claim.f0 }
    });
    Summary::of(&xs)
}

/// `alpha,price` rows followed by a commented summary block.
pub fn write_alpha_csv<W: Write>(p: &PriceInterval, mut out: W) -> std::io::Result<()> {
    writeln!(out, "alpha,price")?;
    for (a, v) in &p.alpha_prices {
        writeln!(out, "{a:.16e},{v:.16e}")?;
    }
    writeln!(out, "# complete_price,{:.16e}", p.complete_price)?;
    writeln!(out, "# small_filtration_cost,{:.16e}", p.small_filtration_cost)
}

#[derive(Debug, Clone)]
pub struct ThetaSwitch {
    pub s: SamplePath,
    /// `([log S]_T - [log S]_1) / (T - 1)`.
    pub slope: f64,
    pub recovered_positive: bool,
    pub true_positive: bool,
}

/// QV slope separating `θ = 1` (slope 1) from `θ = 2` (slope 4).
pub const SLOPE_THRESHOLD: f64 = 1.5;

/// `S = E(∫ θ dB)` with `θ_t = B_t` before 1 and `θ = 1` (if `B_1 > 0`)
/// or `2` afterwards. The compensator uses the grid steps, so before 1
///
/// ```text
/// log S_t = (B_t² - [B]_t) / 2 - ½ Σ B_i² dt_i
/// ```
///
/// holds exactly on the grid.
pub fn theta_switch_market(b: &SamplePath) -> Result<ThetaSwitch> {
    let g = b.grid();
    if g.horizon() <= 1.0 {
        return Err(Error::InvalidInput(format!("horizon must exceed 1, got {}", g.horizon())));
    }
    let one = g.index_at(1.0).ok_or_else(|| Error::InvalidGrid("time 1 is not a grid node".into()))?;
    let v = b.values();
    let true_positive = v[one] > 0.0;
    let after = if true_positive { 1.0 } else { 2.0 };
    let mut log_s = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    log_s.push(0.0);
    for j in 0..v.len() - 1 {
        let theta = if j < one { v[j] } else { after };
        acc += theta * (v[j + 1] - v[j]) - 0.5 * theta * theta * g.step(j);
        log_s.push(acc);
    }
    let log_s = SamplePath::from_parts(g.clone(), log_s);
    let qv = quadratic_variation(&log_s);
    let slope = (qv.last() - qv.values()[one]) / (g.horizon() - g.time(one));
    Ok(ThetaSwitch {
        s: log_s.map(f64::exp),
        slope,
        recovered_positive: slope < SLOPE_THRESHOLD,
        true_positive,
    })
}

/// `exp(B_t²/2 - ½ ∫_0^t (1 + B_s²) ds)` with a left-point time integral.
pub fn theta_switch_closed_form(b: &SamplePath) -> SamplePath {
    let g = b.grid();
    let v = b.values();
    let mut out = Vec::with_capacity(v.len());
    let mut int = 0.0;
    for j in 0..v.len() {
        out.push((0.5 * v[j] * v[j] - 0.5 * int).exp());
        if j + 1 < v.len() {
            int += (1.0 + v[j] * v[j]) * g.step(j);
        }
    }
    SamplePath::from_parts(g.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn path(vals: &[f64]) -> SamplePath {
        SamplePath::new(TimeGrid::new(vals.len() as f64 - 1.0, vals.len() - 1).unwrap(), vals.to_vec()).unwrap()
    }

    #[test]
    fn first_excursion_up_gives_half() {
        let n = sign_martingale_n(&path(&[0.0, 0.5, 1.2, 0.3, -2.0]));
        assert_eq!(n.n.values(), &[0.0, 0.0, 0.5, 0.5, 0.5]);
        assert_eq!(n.jumps, vec![(2, 0.5)]);
        assert!(!n.censored);
    }

    #[test]
    fn down_hits_need_a_return_to_zero() {
        // -1 hit, stays negative (second touch not counted), returns, then +1
        let n = sign_martingale_n(&path(&[0.0, -1.1, -0.5, -1.3, 0.2, 1.0]));
        assert_eq!(n.n.values(), &[0.0, -0.5, -0.5, -0.5, -0.5, 0.0]);
        assert_eq!(n.jumps, vec![(1, -0.5), (5, 0.5)]);
        assert_eq!(n.tau_index, Some(5));
    }

    #[test]
    fn censored_when_tau_not_reached() {
        let n = sign_martingale_n(&path(&[0.0, -1.0, -0.2]));
        assert!(n.censored);
        assert_eq!(n.n.last(), -0.5);
    }

    #[test]
    fn price_interval_examples() {
        let p = price_interval(SignClaim::new(1.0, 0.0).unwrap(), &alpha_grid(9)).unwrap();
        assert_eq!(p.complete_price, 0.5);
        assert_eq!(p.small_filtration_cost, 1.0);
        let c = price_interval(SignClaim::new(1.0, 1.0).unwrap(), &[-0.5, 0.0, 0.5]).unwrap();
        assert!(c.alpha_prices.iter().all(|&(_, v)| v == 1.0));
        assert!(price_interval(SignClaim::new(1.0, 0.0).unwrap(), &[1.0]).is_err());
        assert!(SignClaim::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn theta_switch_discrete_identity() {
        let g = TimeGrid::new(2.0, 2000).unwrap();
        let b = gen_brownian(&g, &RngStream::new(4, 0));
        let ts = theta_switch_market(&b).unwrap();
        assert_eq!(ts.s.values()[0], 1.0);
        let qv = quadratic_variation(&b);
        let mut int = 0.0;
        for j in 0..=1000 {
            let bj = b.values()[j];
            let want = 0.5 * (bj * bj - qv.values()[j]) - 0.5 * int;
            assert_relative_eq!(ts.s.values()[j].ln(), want, epsilon = 1e-12);
            int += bj * bj * g.step(j);
        }
        assert_eq!(ts.recovered_positive, ts.true_positive);
    }

    #[test]
    fn theta_switch_needs_post_one_window() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(theta_switch_market(&SamplePath::constant(&g, 0.0)).is_err());
    }
}
