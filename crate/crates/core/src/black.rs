//! Black (lognormal forward) option prices and synthetic chains built from them.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::chain::{OptionChain, StrikeRow};
use crate::math::norm_cdf;
use crate::Result;

/// Undiscounted Black call and put prices on a forward.
pub fn black_call_put(forward: f64, strike: f64, sigma: f64, tau: f64) -> (f64, f64) {
    let sd = sigma * tau.sqrt();
    if sd <= 0.0 {
        return ((forward - strike).max(0.0), (strike - forward).max(0.0));
    }
    let d1 = (forward / strike).ln() / sd + 0.5 * sd;
    let d2 = d1 - sd;
    let call = forward * norm_cdf(d1) - strike * norm_cdf(d2);
    let put = strike * norm_cdf(-d2) - forward * norm_cdf(-d1);
    (call, put)
}

/// Out-of-the-money Black price: put below `split`, call at or above it.
pub fn black_otm(forward: f64, strike: f64, sigma: f64, tau: f64, split: f64) -> f64 {
    let (c, p) = black_call_put(forward, strike, sigma, tau);
    if strike < split {
        p
    } else {
        c
    }
}

/// Chain with bid = ask = discounted Black price at every strike.
pub fn black_chain(forward: f64, sigma: f64, days: u32, rate: f64, strikes: &[f64]) -> Result<OptionChain> {
    let tau = f64::from(days) / 365.0;
    let df = (-rate * tau).exp();
    let rows: Vec<StrikeRow> = strikes
        .iter()
        .map(|&k| {
            let (c, p) = black_call_put(forward, k, sigma, tau);
            StrikeRow { strike: k, call_bid: df * c, call_ask: df * c, put_bid: df * p, put_ask: df * p }
        })
        .collect();
    OptionChain::from_rows(tau, days, rate, rows)
}

/// Strikes `forward·(lo + i·step)` for `i = 0..`, up to and including `hi`.
pub fn relative_strike_grid(forward: f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| forward * (lo + i as f64 * step)).collect()
}
