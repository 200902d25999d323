//! Empirical verification of the regularity conditions a cost function is
//! supposed to satisfy: a locally-Lipschitz-with-linear-factor bound, an
//! upper quadratic growth bound, and quadratic growth at infinity.
//!
//! No finite sample can certify these, so the checker reports what it saw:
//! the Lipschitz factor is an empirical lower estimate, and the growth
//! conditions are probed against the claimed constants when present.

use serde::Serialize;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::math::norm;
use crate::rng::{self, stream};

/// Pairs closer than this (in `|x| + |y|`) are excluded from the Lipschitz
/// ratio; the bound degenerates at the origin.
const PAIR_EXCLUSION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    Untestable,
}

/// One probed condition: the observed extremal ratio and the claimed bound.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub status: ConditionStatus,
    /// Extremal observed ratio (max for upper bounds, min for lower bounds).
    pub observed: Option<f64>,
    /// The claimed constant, when one was supplied.
    pub bound: Option<f64>,
}

/// Result of probing a cost function on random samples in a box.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// Max observed `|E(x)-E(y)| / ((|x|+|y|) |x-y|)`. An empirical lower
    /// estimate for the true factor; no finite procedure certifies it.
    pub lipschitz_estimate: f64,
    pub lipschitz_label: &'static str,
    pub lipschitz: ConditionReport,
    /// Condition 2: `E - E_lower <= C_u (1 + |x|^2)`.
    pub upper_growth: ConditionReport,
    /// Condition 3: `E - E_lower >= C_l |x|^2` for `|x| >= M`.
    pub lower_growth: ConditionReport,
    /// Points where `E(x) < E_lower`; never assumed silently.
    pub lower_bound_violations: usize,
    pub n_samples: usize,
    pub box_radius: f64,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        [&self.lipschitz, &self.upper_growth, &self.lower_growth]
            .iter()
            .all(|c| c.status == ConditionStatus::Pass)
    }
}

/// Probe `cost` on `n_samples` uniform pairs in `[-box_radius, box_radius]^d`.
pub fn check_assumptions(
    cost: &CostFunction,
    box_radius: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<AssumptionReport> {
    if !(box_radius > 0.0) {
        return Err(Error::invalid_param("box_radius", "must be > 0"));
    }
    if n_samples < 2 {
        return Err(Error::invalid_param("n_samples", "must be >= 2"));
    }
    let d = cost.dim();
    let e_lower = cost.lower_bound();
    let growth = cost.growth();

    let mut lipschitz_estimate: f64 = 0.0;
    let mut max_upper_ratio = f64::NEG_INFINITY;
    let mut min_lower_ratio = f64::INFINITY;
    let mut saw_far_point = false;
    let mut lower_bound_violations = 0usize;

    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for i in 0..n_samples {
        let mut r = rng::substream(rng_seed, &[stream::ASSUMPTION, i as u64]);
        rng::fill_uniform(&mut r, -box_radius, box_radius, &mut x);
        rng::fill_uniform(&mut r, -box_radius, box_radius, &mut y);
        let ex = cost.eval(&x);
        let ey = cost.eval(&y);

        let nx = norm(&x);
        let ny = norm(&y);
        let sep: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if nx + ny >= PAIR_EXCLUSION && sep >= PAIR_EXCLUSION {
            lipschitz_estimate = lipschitz_estimate.max((ex - ey).abs() / ((nx + ny) * sep));
        }

        for (e, n) in [(ex, nx), (ey, ny)] {
            if e_lower.is_finite() && e < e_lower {
                lower_bound_violations += 1;
            }
            if e_lower.is_finite() {
                max_upper_ratio = max_upper_ratio.max((e - e_lower) / (1.0 + n * n));
                if let Some(g) = growth {
                    if n >= g.radius && n > 0.0 {
                        saw_far_point = true;
                        min_lower_ratio = min_lower_ratio.min((e - e_lower) / (n * n));
                    }
                }
            }
        }
    }

    let lipschitz = ConditionReport {
        status: if lipschitz_estimate.is_finite() {
            ConditionStatus::Pass
        } else {
            ConditionStatus::Fail
        },
        observed: Some(lipschitz_estimate),
        bound: None,
    };

    // fp slack: an exactly-tight bound like E = |x|^2 vs C = 1 must not fail
    // on the last ulp of the ratio
    const REL_SLACK: f64 = 1e-12;

    let upper_growth = match (growth, e_lower.is_finite()) {
        (Some(g), true) => ConditionReport {
            status: if max_upper_ratio <= g.c_upper * (1.0 + REL_SLACK) {
                ConditionStatus::Pass
            } else {
                ConditionStatus::Fail
            },
            observed: Some(max_upper_ratio),
            bound: Some(g.c_upper),
        },
        _ => ConditionReport {
            status: ConditionStatus::Untestable,
            observed: e_lower.is_finite().then_some(max_upper_ratio),
            bound: None,
        },
    };

    let lower_growth = match (growth, e_lower.is_finite()) {
        (Some(g), true) if saw_far_point => ConditionReport {
            status: if min_lower_ratio >= g.c_lower * (1.0 - REL_SLACK) {
                ConditionStatus::Pass
            } else {
                ConditionStatus::Fail
            },
            observed: Some(min_lower_ratio),
            bound: Some(g.c_lower),
        },
        (Some(g), true) => ConditionReport {
            // no sample reached |x| >= M: nothing to refute
            status: ConditionStatus::Untestable,
            observed: None,
            bound: Some(g.c_lower),
        },
        _ => ConditionReport {
            status: ConditionStatus::Untestable,
            observed: None,
            bound: None,
        },
    };

    Ok(AssumptionReport {
        lipschitz_estimate,
        lipschitz_label: "empirical lower estimate",
        lipschitz,
        upper_growth,
        lower_growth,
        lower_bound_violations,
        n_samples,
        box_radius,
    })
}
