//! Picard reference solver for the limiting dynamics.
//!
//! The consensus path is frozen, the resulting linear SDE is simulated with
//! a Monte-Carlo cloud, and the consensus path is re-extracted from the
//! cloud; at the fixed point the cloud approximates the law of the limiting
//! process. All iterations share the same Brownian increments (common random
//! numbers), which makes the iteration map deterministic for a given seed
//! and gives the fixed-point defect a clean meaning.

use ndarray::Array2;
use serde::Serialize;

use crate::consensus::consensus_from_positions;
use crate::cost::CostFunction;
use crate::ensemble::{EnsembleState, InitialLaw};
use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::rng::{self, stream};

/// A prescribed consensus path on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConsensusTrajectory {
    pub time_grid: Vec<f64>,
    pub b_path: Vec<Vec<f64>>,
}

impl ConsensusTrajectory {
    pub fn new(time_grid: Vec<f64>, b_path: Vec<Vec<f64>>) -> Result<Self> {
        if time_grid.len() != b_path.len() || time_grid.is_empty() {
            return Err(Error::GridMismatch(
                "consensus path and grid lengths differ".into(),
            ));
        }
        if b_path.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid_param("b_path", "must be finite"));
        }
        Ok(Self { time_grid, b_path })
    }

    /// Constant-in-time path.
    pub fn constant(b: Vec<f64>, t_final: f64) -> Self {
        Self {
            time_grid: vec![0.0, t_final],
            b_path: vec![b.clone(), b],
        }
    }

    pub fn dim(&self) -> usize {
        self.b_path[0].len()
    }

    /// Piecewise-linear interpolation, clamped to the grid range.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let grid = &self.time_grid;
        if t <= grid[0] {
            return self.b_path[0].clone();
        }
        if t >= *grid.last().unwrap() {
            return self.b_path.last().unwrap().clone();
        }
        let idx = grid.partition_point(|&g| g <= t) - 1;
        let (t0, t1) = (grid[idx], grid[idx + 1]);
        let w = (t - t0) / (t1 - t0);
        self.b_path[idx]
            .iter()
            .zip(&self.b_path[idx + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

/// Converged output of the Picard iteration.
#[derive(Debug, Clone)]
pub struct PicardResult {
    /// The fixed-point consensus path on the simulation grid.
    pub consensus: ConsensusTrajectory,
    /// The sample cloud at the final time, approximating the limiting law.
    pub final_ensemble: EnsembleState,
    /// Iterations actually used.
    pub iterations: usize,
    /// Fixed-point defect after each iteration.
    pub defects: Vec<f64>,
    /// Monte-Carlo floor of the consensus estimator (3 standard errors at
    /// the last iteration). The iteration itself converges below this —
    /// common random numbers make the map deterministic — but the fixed
    /// point only approximates the true limiting path to within the floor,
    /// so the effective tolerance is `max(tol, mc_floor)`.
    pub mc_floor: f64,
}

/// Simulate the prescribed-drift linear SDE over the full grid with shared
/// increments, returning the consensus at each grid time and the final cloud.
fn sweep_linear_sde(
    cost: &CostFunction,
    params: &SimParams,
    n_samples: usize,
    initial: &Array2<f64>,
    b: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, f64, Array2<f64>)> {
    let steps = params.steps();
    let d = params.dim;
    let dt = params.dt;
    let sqrt_dt = dt.sqrt();
    let mut cloud = initial.clone();
    let mut b_next: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    let mut mc_floor = 0.0f64;
    let mut noise_row = vec![0.0; d];

    for step in 0..=steps {
        let costs = cost.eval_rows(&cloud.view());
        let cp = consensus_from_positions(&cloud.view(), &costs, params.alpha)?;
        // spread of the weighted-mean estimator, for the MC floor
        let (weights, _) = crate::consensus::weights_logsumexp(&costs, params.alpha)?;
        let spread_sq: f64 = (0..n_samples)
            .map(|i| {
                let dev_sq: f64 = (0..d)
                    .map(|k| {
                        let dv = cloud[[i, k]] - cp.x_alpha[k];
                        dv * dv
                    })
                    .sum();
                weights[i] * weights[i] * dev_sq
            })
            .sum();
        mc_floor = mc_floor.max(3.0 * spread_sq.sqrt());
        b_next.push(cp.x_alpha);
        if step == steps {
            break;
        }
        let target = &b[step];
        for i in 0..n_samples {
            let mut rng = rng::substream(params.seed, &[stream::PICARD_NOISE, i as u64, step as u64]);
            rng::fill_standard_normal(&mut rng, &mut noise_row);
            for k in 0..d {
                let dev = cloud[[i, k]] - target[k];
                cloud[[i, k]] += -params.lambda * dev * dt + params.sigma * dev * sqrt_dt * noise_row[k];
            }
        }
        if cloud.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState {
                step,
                detail: "linear SDE sweep overflowed".into(),
            });
        }
    }
    Ok((b_next, mc_floor, cloud))
}

/// Picard iteration on the consensus path of the limiting dynamics.
///
/// Starts from the constant path `b(t) = X_alpha(mu_0)` estimated on an
/// `n_samples` draw of `init`, then alternates: simulate the linear SDE with
/// the frozen path, re-extract the consensus path, and stop when the sup
/// defect drops below `max(tol, mc_floor)`.
pub fn mckean_picard(
    cost: &CostFunction,
    params: &SimParams,
    init: &InitialLaw,
    n_samples: usize,
    max_iters: usize,
    tol: f64,
) -> Result<PicardResult> {
    params.validate()?;
    if n_samples < 1000 {
        return Err(Error::invalid_param("n_samples", "need at least 1000 samples"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid_param("tol", "must be > 0"));
    }
    if max_iters == 0 {
        return Err(Error::invalid_param("max_iters", "must be >= 1"));
    }
    let d = params.dim;
    let steps = params.steps();
    let time_grid: Vec<f64> = (0..=steps).map(|s| s as f64 * params.dt).collect();

    let initial = {
        let mut cloud = Array2::zeros((n_samples, d));
        for i in 0..n_samples {
            let mut rng = rng::substream(params.seed, &[stream::PICARD_INIT, i as u64]);
            let row = init.sample_one(d, &mut rng)?;
            for k in 0..d {
                cloud[[i, k]] = row[k];
            }
        }
        cloud
    };

    // b^(0): constant at the initial consensus
    let costs0 = cost.eval_rows(&initial.view());
    let cp0 = consensus_from_positions(&initial.view(), &costs0, params.alpha)?;
    let mut b: Vec<Vec<f64>> = vec![cp0.x_alpha; steps + 1];

    let mut defects = Vec::new();
    for iter in 1..=max_iters {
        let (b_next, mc_floor, cloud) = sweep_linear_sde(cost, params, n_samples, &initial, &b)?;
        let defect = b
            .iter()
            .zip(&b_next)
            .map(|(a, c)| crate::math::dist(a, c))
            .fold(0.0, f64::max);
        defects.push(defect);
        b = b_next;
        if defect < tol {
            return Ok(PicardResult {
                consensus: ConsensusTrajectory::new(time_grid, b)?,
                final_ensemble: EnsembleState::new(params.t_final, cloud)?,
                iterations: iter,
                defects,
                mc_floor,
            });
        }
        if iter == max_iters {
            return Err(Error::PicardNoConvergence {
                iters: max_iters,
                defect,
            });
        }
    }
    unreachable!("loop returns or errors")
}
