//! Capacity region of the degraded Gaussian broadcast channel.
//!
//! Two descriptions of the same region are provided:
//!
//! * the superposition form, where a power split `α` (summing to 1) gives each
//!   layer `i` the rate `log2(1 + α_i γ_i / (1 + γ_i Σ_{j>i} α_j))`;
//! * the cumulative-rate form, where a rate vector is feasible iff
//!   `Σ_i (1/γ_i − 1/γ_{i+1}) 2^{r_1 + … + r_i} − 1/γ_1 ≤ 1` with `1/γ_{G+1} = 0`.
//!
//! Gains are squared magnitudes sorted ascending, so layer 1 belongs to the
//! weakest receiver and every stronger receiver can strip it off first.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack accepted on the region boundary before a rate vector is infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Power shares this far below zero are floating-point dust and clamp to 0.
pub const CLAMP_TOL: f64 = 1e-9;

/// Fraction of the unit transmit power given to each superposition layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerShares(Vec<f64>);

impl PowerShares {
    /// Clamps dust below zero and rejects anything worse, or a sum above 1.
    pub fn new(mut shares: Vec<f64>) -> Result<Self> {
        for (index, a) in shares.iter_mut().enumerate() {
            if !a.is_finite() || *a < -CLAMP_TOL {
                return Err(Error::NegativePower { index, value: *a });
            }
            if *a < 0.0 {
                *a = 0.0;
            }
        }
        let sum: f64 = shares.iter().sum();
        if sum > 1.0 + CLAMP_TOL {
            return Err(Error::PowerOverflow { sum });
        }
        Ok(PowerShares(shares))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-layer rates in bits per slot per unit bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r >= 0.0))
        {
            return Err(Error::InvalidRate { index, value });
        }
        Ok(RateVector(rates))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `2^x − 1` without cancellation for small `x`.
pub(crate) fn exp2_m1(x: f64) -> f64 {
    (x * LN_2).exp_m1()
}

fn check_gains(gains: &[f64], expected: usize) -> Result<()> {
    if gains.len() != expected || expected == 0 {
        return Err(Error::LengthMismatch {
            expected,
            found: gains.len(),
        });
    }
    Ok(())
}

/// `1/γ_i − 1/γ_{i+1}` for each layer, with `1/γ_{G+1} = 0`.
pub(crate) fn layer_weights(gains: &[f64]) -> impl Iterator<Item = f64> + '_ {
    gains.iter().enumerate().map(move |(i, &g)| {
        let next = gains.get(i + 1).map_or(0.0, |&h| 1.0 / h);
        1.0 / g - next
    })
}

/// Left-hand side of the cumulative-rate membership test. `rates` is feasible
/// iff the result is at most 1 and on the boundary iff it equals 1.
pub fn region_lhs(rates: &RateVector, gains: &[f64]) -> Result<f64> {
    check_gains(gains, rates.len())?;
    // The weights telescope to 1/γ_1, so the constant folds into each term
    // as 2^{S_i} − 1 and every summand stays nonnegative.
    let mut partial = 0.0;
    Ok(layer_weights(gains)
        .zip(rates.as_slice())
        .map(|(w, &r)| {
            partial += r;
            w * exp2_m1(partial)
        })
        .sum())
}

/// Rates achieved by superposition coding with power split `shares`.
pub fn rates_from_power(shares: &PowerShares, gains: &[f64]) -> Result<RateVector> {
    check_gains(gains, shares.len())?;
    let alpha = shares.as_slice();
    let mut above = 0.0;
    let mut rates = vec![0.0; alpha.len()];
    for i in (0..alpha.len()).rev() {
        let g = gains[i];
        rates[i] = (alpha[i] * g / (1.0 + above * g)).ln_1p() / LN_2;
        above += alpha[i];
    }
    RateVector::new(rates)
}

/// Power split realising `rates`, built from the tail sums
/// `δ_i = Σ_{j≥i} α_j` via `δ_i = 2^{r_i}(δ_{i+1} + 1/γ_i) − 1/γ_i`.
///
/// Layers 2.. are reproduced exactly by [`rates_from_power`]; the weakest
/// layer receives all leftover power and may end up with a higher rate.
pub fn power_from_rates(rates: &RateVector, gains: &[f64]) -> Result<PowerShares> {
    check_gains(gains, rates.len())?;
    let r = rates.as_slice();
    let g = r.len();
    let mut delta = vec![0.0; g + 1];
    for i in (0..g).rev() {
        delta[i] = exp2_m1(r[i]) * (delta[i + 1] + 1.0 / gains[i]) + delta[i + 1];
    }
    // delta[0] is exactly the region_lhs expression.
    if delta[0].is_nan() || delta[0] > 1.0 + FEASIBILITY_TOL {
        return Err(Error::InfeasibleRates { lhs: delta[0] });
    }
    let mut shares: Vec<f64> = (0..g).map(|i| delta[i] - delta[i + 1]).collect();
    shares[0] = 1.0 - delta.get(1).copied().unwrap_or(0.0);
    for a in &mut shares {
        if *a < 0.0 {
            *a = 0.0;
        }
    }
    Ok(PowerShares(shares))
}

/// Point-to-point capacity `log2(1 + γ)` of a single receiver.
pub fn single_user_capacity(gain: f64) -> f64 {
    gain.ln_1p() / LN_2
}
