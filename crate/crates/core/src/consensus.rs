//! Softmin-weighted consensus: stabilized weights, the consensus point, and
//! the Laplace-principle value.
//!
//! Weights are computed in log space with max-subtraction, so `alpha * cost`
//! magnitudes up to about 1e300 neither overflow nor produce NaN. The naive
//! `exp(-alpha * E)` formula is mathematically identical but dies for
//! `alpha` beyond roughly `700 / max|E|`.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::cost::CostFunction;
use crate::ensemble::EnsembleState;
use crate::error::{Error, Result};
use crate::math::{pairwise_sum, pairwise_sum_by};

/// The weighted ensemble average, its log-normalizer, and the effective
/// sample size of the weight vector.
#[derive(Debug, Clone, Serialize)]
pub struct ConsensusPoint {
    /// Softmin-weighted mean of the positions.
    pub x_alpha: Vec<f64>,
    /// `log((1/N) sum_i exp(-alpha E(x_i)))`.
    pub log_z: f64,
    /// `1 / sum_i w_i^2`, in `[1, N]`.
    pub ess: f64,
}

fn validate_costs(costs: &[f64]) -> Result<()> {
    if costs.is_empty() {
        return Err(Error::EmptyCosts);
    }
    for (index, c) in costs.iter().enumerate() {
        if !c.is_finite() {
            return Err(Error::NonFiniteCost { index });
        }
    }
    Ok(())
}

/// Normalized weights `w_i ∝ exp(-alpha * costs_i)` and the log-normalizer
/// `log((1/N) sum exp(-alpha costs))`, both computed with max-subtraction.
///
/// The shift happens in cost space before the multiplication by `alpha`:
/// `w_i ∝ exp(-alpha (c_i - min c))`. Subtracting the min first keeps every
/// exponent in `[-inf, 0]` (no overflow for `|alpha c| <= 1e300`) and makes
/// a common offset of the costs cancel exactly, not just approximately.
pub fn weights_logsumexp(costs: &[f64], alpha: f64) -> Result<(Vec<f64>, f64)> {
    validate_costs(costs)?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid_param("alpha", format!("must be >= 0, got {alpha}")));
    }
    let n = costs.len();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = costs.iter().map(|&c| (-alpha * (c - min)).exp()).collect();
    let sum = pairwise_sum(&weights);
    for w in &mut weights {
        *w /= sum;
    }
    let log_z = -alpha * min + sum.ln() - (n as f64).ln();
    Ok((weights, log_z))
}

/// Effective sample size `1 / sum w_i^2` of a normalized weight vector.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / pairwise_sum_by(weights.len(), |i| weights[i] * weights[i])
}

/// Consensus point from an explicit position matrix and cost vector.
pub fn consensus_from_positions(
    positions: &ArrayView2<'_, f64>,
    costs: &[f64],
    alpha: f64,
) -> Result<ConsensusPoint> {
    if positions.nrows() != costs.len() {
        return Err(Error::DimMismatch {
            expected: positions.nrows(),
            actual: costs.len(),
        });
    }
    let (weights, log_z) = weights_logsumexp(costs, alpha)?;
    let (n, d) = positions.dim();
    // deviation form around particle 0: an ensemble of identical points maps
    // to that point exactly, so a Dirac is a true fixed point of the dynamics
    let x_alpha: Vec<f64> = (0..d)
        .map(|k| {
            let anchor = positions[[0, k]];
            anchor + pairwise_sum_by(n, |i| weights[i] * (positions[[i, k]] - anchor))
        })
        .collect();
    let ess = effective_sample_size(&weights);
    if ess < 2.0 && n >= 2 {
        log::warn!("degenerate consensus weights: ess = {ess:.3} with n = {n}");
    }
    Ok(ConsensusPoint { x_alpha, log_z, ess })
}

/// Consensus point `X_alpha` of an ensemble under a cost function.
///
/// Invariant under shifting the cost by a constant, and always inside the
/// componentwise bounding box of the positions.
pub fn consensus_point(
    state: &EnsembleState,
    cost: &CostFunction,
    alpha: f64,
) -> Result<ConsensusPoint> {
    if cost.dim() != state.dim() {
        return Err(Error::DimMismatch {
            expected: state.dim(),
            actual: cost.dim(),
        });
    }
    let costs = cost.eval_rows(&state.positions.view());
    consensus_from_positions(&state.positions.view(), &costs, alpha)
}

/// `-(1/alpha) log((1/N) sum exp(-alpha costs))`, evaluated so that
/// `min(costs) <= value <= min(costs) + log(N)/alpha` holds exactly in
/// floating point.
pub fn laplace_value(costs: &[f64], alpha: f64) -> Result<f64> {
    validate_costs(costs)?;
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    let n = costs.len() as f64;
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    // sum of exp(-alpha (c - min)) lies in [1, N]: the min term contributes 1.
    let shifted = pairwise_sum_by(costs.len(), |i| (-alpha * (costs[i] - min)).exp());
    Ok(min + (n.ln() - shifted.ln()) / alpha)
}
