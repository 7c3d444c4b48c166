//! Option chains, the discrete CBOE VIX formula, 30-day interpolation and static
//! replication of a payoff by a strip of options.

use alloc::vec::Vec;
use alloc::{format, vec};
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::scalar::ScalarFn;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// A single quote. Non-finite bids or asks mark a missing side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    pub bid: f64,
    pub ask: f64,
    pub kind: OptionKind,
}

/// Call and put quotes sharing one strike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrikeRow {
    pub strike: f64,
    pub call_bid: f64,
    pub call_ask: f64,
    pub put_bid: f64,
    pub put_ask: f64,
}

impl StrikeRow {
    pub fn call_mid(&self) -> f64 {
        0.5 * (self.call_bid + self.call_ask)
    }

    pub fn put_mid(&self) -> f64 {
        0.5 * (self.put_bid + self.put_ask)
    }
}

/// One expiry's quotes, sorted by strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionChain {
    /// Year fraction to expiry (ACT/365).
    pub expiry_time: f64,
    pub days_to_expiry: u32,
    /// Continuously compounded annual rate.
    pub rate: f64,
    rows: Vec<StrikeRow>,
}

fn check_side(strike: f64, bid: f64, ask: f64, side: &str) -> Result<()> {
    if bid.is_finite() && ask.is_finite() && !(bid >= 0.0 && ask >= bid) {
        return Err(Error::InvalidChain(format!(
            "{side} quote at strike {strike} violates ask >= bid >= 0 (bid {bid}, ask {ask})"
        )));
    }
    Ok(())
}

impl OptionChain {
    /// Builds a chain from per-strike rows in any order.
    pub fn from_rows(expiry_time: f64, days_to_expiry: u32, rate: f64, mut rows: Vec<StrikeRow>) -> Result<Self> {
        if !(expiry_time > 0.0) {
            return Err(Error::InvalidChain(format!("expiry time must be positive, got {expiry_time}")));
        }
        if !rate.is_finite() {
            return Err(Error::InvalidChain(format!("rate must be finite, got {rate}")));
        }
        for r in &rows {
            if !(r.strike > 0.0 && r.strike.is_finite()) {
                return Err(Error::InvalidChain(format!("strike must be positive, got {}", r.strike)));
            }
            check_side(r.strike, r.call_bid, r.call_ask, "call")?;
            check_side(r.strike, r.put_bid, r.put_ask, "put")?;
        }
        rows.sort_by(|a, b| a.strike.total_cmp(&b.strike));
        if let Some(w) = rows.windows(2).find(|w| w[1].strike <= w[0].strike) {
            return Err(Error::InvalidChain(format!("duplicate strike {}", w[0].strike)));
        }
        Ok(Self { expiry_time, days_to_expiry, rate, rows })
    }

    /// Builds a chain from individual quotes; every strike needs exactly one call and one put.
    pub fn from_quotes(expiry_time: f64, days_to_expiry: u32, rate: f64, quotes: &[OptionQuote]) -> Result<Self> {
        let mut sorted: Vec<OptionQuote> = quotes.to_vec();
        sorted.sort_by(|a, b| a.strike.total_cmp(&b.strike).then((a.kind as u8).cmp(&(b.kind as u8))));
        let mut rows = Vec::with_capacity(sorted.len() / 2);
        for pair in sorted.chunks(2) {
            match pair {
                [c, p] if c.kind == OptionKind::Call && p.kind == OptionKind::Put && c.strike == p.strike => {
                    rows.push(StrikeRow {
                        strike: c.strike,
                        call_bid: c.bid,
                        call_ask: c.ask,
                        put_bid: p.bid,
                        put_ask: p.ask,
                    });
                }
                _ => {
                    return Err(Error::InvalidChain(format!(
                        "strike {} does not carry exactly one call and one put",
                        pair[0].strike
                    )))
                }
            }
        }
        Self::from_rows(expiry_time, days_to_expiry, rate, rows)
    }

    pub fn rows(&self) -> &[StrikeRow] {
        &self.rows
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.strike).collect()
    }

    /// All quotes, calls before puts at each strike.
    pub fn quotes(&self) -> Vec<OptionQuote> {
        let mut out = Vec::with_capacity(2 * self.rows.len());
        for r in &self.rows {
            out.push(OptionQuote { strike: r.strike, bid: r.call_bid, ask: r.call_ask, kind: OptionKind::Call });
            out.push(OptionQuote { strike: r.strike, bid: r.put_bid, ask: r.put_ask, kind: OptionKind::Put });
        }
        out
    }

    fn index_of(&self, strike: f64) -> Option<usize> {
        self.rows.iter().position(|r| r.strike == strike)
    }
}

/// Forward level implied by put-call parity at the strike minimizing `|C − P|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardPcp {
    pub forward: f64,
    pub k0: f64,
}

pub fn compute_forward_pcp(chain: &OptionChain) -> Result<ForwardPcp> {
    if chain.rows.is_empty() {
        return Err(Error::NoStrikes);
    }
    let mut best: Option<(f64, &StrikeRow)> = None;
    for row in &chain.rows {
        let diff = (row.call_mid() - row.put_mid()).abs();
        if !diff.is_finite() {
            continue;
        }
        // Strict comparison keeps the lower strike on ties.
        if best.map_or(true, |(d, _)| diff < d) {
            best = Some((diff, row));
        }
    }
    let (_, row) = best.ok_or(Error::NoMids)?;
    let growth = (chain.rate * chain.expiry_time).exp();
    Ok(ForwardPcp { forward: row.strike + growth * (row.call_mid() - row.put_mid()), k0: row.strike })
}

fn positive_bid(bid: f64) -> bool {
    bid.is_finite() && bid > 0.0
}

/// Strikes entering the VIX sum: puts below `k0`, calls above, `k0` itself always.
///
/// Zero bids are skipped; a scan stops at the second consecutive zero bid.
pub fn select_strikes(chain: &OptionChain, k0: f64) -> Vec<f64> {
    let Some(i0) = chain.index_of(k0) else {
        return Vec::new();
    };
    let rows = &chain.rows;
    let mut below = Vec::new();
    let mut zeros = 0;
    for row in rows[..i0].iter().rev() {
        if positive_bid(row.put_bid) {
            zeros = 0;
            below.push(row.strike);
        } else {
            zeros += 1;
            if zeros == 2 {
                break;
            }
        }
    }
    let mut out: Vec<f64> = below.into_iter().rev().collect();
    out.push(k0);
    zeros = 0;
    for row in &rows[i0 + 1..] {
        if positive_bid(row.call_bid) {
            zeros = 0;
            out.push(row.strike);
        } else {
            zeros += 1;
            if zeros == 2 {
                break;
            }
        }
    }
    out
}

/// One strike's share of the VIX sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrikeContribution {
    pub strike: f64,
    pub delta_k: f64,
    /// Out-of-the-money mid price (put/call average at `k0`).
    pub theta: f64,
    /// `(2 e^{rτ}/τ)·Δk/k²·Θ`
    pub weight: f64,
}

/// Result of the single-expiry VIX formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixComputation {
    pub forward: f64,
    pub k0: f64,
    pub included_strikes: Vec<f64>,
    pub per_strike_contribution: Vec<StrikeContribution>,
    /// Sub-index in vol points.
    pub sub_index: f64,
    pub expiry_time: f64,
    pub days_to_expiry: u32,
}

pub fn compute_single_expiry_vix(chain: &OptionChain) -> Result<VixComputation> {
    let ForwardPcp { forward, k0 } = compute_forward_pcp(chain)?;
    let strikes = select_strikes(chain, k0);
    if strikes.is_empty() {
        return Err(Error::NoUsableQuotes);
    }
    let tau = chain.expiry_time;
    let growth = (chain.rate * tau).exp();
    let n = strikes.len();
    let mut contributions = Vec::with_capacity(n);
    let mut sum = 0.0;
    for (j, &k) in strikes.iter().enumerate() {
        let delta_k = if n == 1 {
            single_strike_spacing(chain, k)
        } else if j == 0 {
            strikes[1] - strikes[0]
        } else if j == n - 1 {
            strikes[n - 1] - strikes[n - 2]
        } else {
            0.5 * (strikes[j + 1] - strikes[j - 1])
        };
        let row = &chain.rows[chain.index_of(k).expect("selected strike belongs to the chain")];
        let theta = if k < k0 {
            row.put_mid()
        } else if k > k0 {
            row.call_mid()
        } else {
            0.5 * (row.put_mid() + row.call_mid())
        };
        let weight = 2.0 * growth / tau * delta_k / (k * k) * theta;
        sum += weight;
        contributions.push(StrikeContribution { strike: k, delta_k, theta, weight });
    }
    let bracket = sum - (forward / k0 - 1.0).powi(2) / tau;
    if bracket < 0.0 || !bracket.is_finite() {
        return Err(Error::NegativeVariance(bracket));
    }
    Ok(VixComputation {
        forward,
        k0,
        included_strikes: strikes,
        per_strike_contribution: contributions,
        sub_index: 100.0 * bracket.sqrt(),
        expiry_time: tau,
        days_to_expiry: chain.days_to_expiry,
    })
}

fn single_strike_spacing(chain: &OptionChain, k: f64) -> f64 {
    let strikes = chain.strikes();
    if strikes.len() == 1 {
        return k;
    }
    let i = chain.index_of(k).unwrap_or(0);
    if i == 0 {
        strikes[1] - strikes[0]
    } else if i == strikes.len() - 1 {
        strikes[i] - strikes[i - 1]
    } else {
        0.5 * (strikes[i + 1] - strikes[i - 1])
    }
}

/// 30-day interpolation of two sub-indices given in vol points.
///
/// `t1`, `t2` are year fractions and `n1`, `n2` calendar days; the pair must bracket 30
/// days, with equality allowed at either end.
pub fn interpolate_30d(s1: f64, t1: f64, n1: u32, s2: f64, t2: f64, n2: u32) -> Result<f64> {
    let ((s1, t1, n1), (s2, t2, n2)) = if n1 <= n2 { ((s1, t1, n1), (s2, t2, n2)) } else { ((s2, t2, n2), (s1, t1, n1)) };
    if n1 == n2 {
        return Err(Error::EqualExpiries(n1));
    }
    if !(n1 <= 30 && 30 <= n2) {
        return Err(Error::NotBracketing(n1, n2));
    }
    let span = f64::from(n2 - n1);
    let w1 = f64::from(n2 - 30) / span;
    let w2 = f64::from(30 - n1) / span;
    let var = 365.0 / 30.0 * (t1 * s1 * s1 * w1 + t2 * s2 * s2 * w2);
    Ok(var.max(0.0).sqrt())
}

pub fn interpolate_vix_30d(v1: &VixComputation, v2: &VixComputation) -> Result<f64> {
    interpolate_30d(v1.sub_index, v1.expiry_time, v1.days_to_expiry, v2.sub_index, v2.expiry_time, v2.days_to_expiry)
}

/// Static decomposition of a payoff into a bond, a forward and a strip of options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationWeights {
    pub anchor: f64,
    pub value_at_anchor: f64,
    pub linear_coeff: f64,
    /// `(strike, weight)` for puts struck at or below the anchor.
    pub put_weights: Vec<(f64, f64)>,
    /// `(strike, weight)` for calls struck at or above the anchor.
    pub call_weights: Vec<(f64, f64)>,
    pub grid: Vec<f64>,
}

pub fn replication_weights(f: &ScalarFn, anchor: f64, grid: &[f64]) -> Result<ReplicationWeights> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("strike grid must be strictly increasing with at least two nodes".into()));
    }
    if !(anchor >= grid[0] && anchor <= grid[grid.len() - 1]) {
        return Err(Error::AnchorOutsideGrid(anchor));
    }
    let mut nodes = grid.to_vec();
    if let Err(pos) = nodes.binary_search_by(|v| v.total_cmp(&anchor)) {
        nodes.insert(pos, anchor);
    }
    let split = nodes.iter().position(|&k| k == anchor).expect("anchor is a node");
    let side = |part: &[f64]| -> Vec<(f64, f64)> {
        let w = crate::math::trapezoid_weights(part);
        part.iter().zip(w).map(|(&k, wk)| (k, wk * f.second_derivative(k))).collect()
    };
    let put_weights = if split > 0 { side(&nodes[..=split]) } else { vec![] };
    let call_weights = if split + 1 < nodes.len() { side(&nodes[split..]) } else { vec![] };
    Ok(ReplicationWeights {
        anchor,
        value_at_anchor: f.value(anchor),
        linear_coeff: f.derivative(anchor),
        put_weights,
        call_weights,
        grid: nodes,
    })
}

pub fn apply_replication(w: &ReplicationWeights, x: f64) -> f64 {
    let calls: f64 = w.call_weights.iter().map(|&(k, c)| c * (x - k).max(0.0)).sum();
    let puts: f64 = w.put_weights.iter().map(|&(k, c)| c * (k - x).max(0.0)).sum();
    w.value_at_anchor + w.linear_coeff * (x - w.anchor) + calls + puts
}
