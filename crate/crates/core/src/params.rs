//! Simulation parameters and their validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a first-order consensus dynamics run.
///
/// `t_final / dt` must round to an integer step count; `lambda * dt > 1`
/// overshoots the drift target in a single step and is rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimParams {
    /// Drift rate toward the consensus point, `>= 0` (1/time).
    pub lambda: f64,
    /// Noise strength, `>= 0` (1/sqrt(time)).
    pub sigma: f64,
    /// Inverse temperature of the softmin weights, `>= 0`.
    pub alpha: f64,
    /// Time step, `> 0`.
    pub dt: f64,
    /// Horizon `T > 0`.
    pub t_final: f64,
    /// Ensemble size.
    pub n_particles: usize,
    /// Spatial dimension.
    pub dim: usize,
    /// Master seed; every noise draw in a run derives from it.
    pub seed: u64,
}

/// Relative tolerance for `t_final/dt` rounding to an integer: decimal steps
/// like 0.01 are not exactly representable, so exact divisibility in binary
/// floating point is the wrong ask.
const STEP_COUNT_RTOL: f64 = 1e-9;

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid_param("lambda", "must be finite and >= 0"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid_param("sigma", "must be finite and >= 0"));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid_param("alpha", "must be finite and >= 0"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid_param("dt", "must be finite and > 0"));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::invalid_param("t_final", "must be finite and > 0"));
        }
        if self.dt > self.t_final {
            return Err(Error::invalid_param("dt", "must not exceed t_final"));
        }
        if self.lambda * self.dt > 1.0 {
            return Err(Error::invalid_param(
                "dt",
                format!("lambda*dt = {} > 1 overshoots the consensus", self.lambda * self.dt),
            ));
        }
        if self.n_particles == 0 {
            return Err(Error::invalid_param("n_particles", "must be >= 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid_param("dim", "must be >= 1"));
        }
        let ratio = self.t_final / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > STEP_COUNT_RTOL * steps.max(1.0) {
            return Err(Error::invalid_param(
                "t_final",
                format!("t_final/dt = {ratio} does not round to an integer step count"),
            ));
        }
        Ok(())
    }

    /// Number of time steps, `t_final / dt` rounded.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}
