//! Second-order swarm dynamics: position–velocity particles with inertia,
//! friction `gamma = 1 - m`, attraction to the spatial-marginal consensus,
//! and velocity-channel noise.
//!
//! One shared Euler–Maruyama step advances both channels; positions never
//! consume noise.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::consensus::{consensus_point, ConsensusPoint};
use crate::cost::CostFunction;
use crate::ensemble::{EnsembleState, InitialLaw};
use crate::error::{Error, Result};
use crate::params::SimParams;

/// Parameters of the second-order dynamics. The friction coefficient is
/// `gamma = 1 - m`, so `0 < m <= 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoParams {
    /// Inertia weight, `0 < m <= 1`.
    pub m: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_particles: usize,
    pub dim: usize,
    pub seed: u64,
}

impl PsoParams {
    /// Friction coefficient `1 - m`.
    pub fn gamma(&self) -> f64 {
        1.0 - self.m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::invalid_param(
                "m",
                format!("needs 0 < m <= 1 so that gamma = 1 - m >= 0, got {}", self.m),
            ));
        }
        // remaining constraints match the first-order parameter set
        self.as_sim_params().validate()
    }

    /// View of the shared scalar parameters as first-order params.
    pub fn as_sim_params(&self) -> SimParams {
        SimParams {
            lambda: self.lambda,
            sigma: self.sigma,
            alpha: self.alpha,
            dt: self.dt,
            t_final: self.t_final,
            n_particles: self.n_particles,
            dim: self.dim,
            seed: self.seed,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Position–velocity ensemble at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoEnsembleState {
    pub t: f64,
    pub positions: Array2<f64>,
    pub velocities: Array2<f64>,
}

impl PsoEnsembleState {
    pub fn new(t: f64, positions: Array2<f64>, velocities: Array2<f64>) -> Result<Self> {
        if positions.dim() != velocities.dim() {
            return Err(Error::DimMismatch {
                expected: positions.len(),
                actual: velocities.len(),
            });
        }
        if positions.iter().chain(velocities.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid_param("state", "entries must be finite"));
        }
        Ok(Self {
            t,
            positions,
            velocities,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    /// The spatial marginal as a first-order ensemble.
    pub fn spatial_marginal(&self) -> EnsembleState {
        EnsembleState {
            t: self.t,
            positions: self.positions.clone(),
        }
    }
}

/// Initial law for (position, velocity) pairs; defaults to positions uniform
/// on a box and centered Gaussian velocities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoInitialLaw {
    pub position: InitialLaw,
    pub velocity: InitialLaw,
}

impl Default for PsoInitialLaw {
    fn default() -> Self {
        Self {
            position: InitialLaw::default(),
            velocity: InitialLaw::GaussianDiag {
                mean: vec![],
                sd: vec![],
            },
        }
    }
}

impl PsoInitialLaw {
    /// Default with dimension-sized Gaussian velocity moments.
    pub fn default_for_dim(dim: usize) -> Self {
        Self {
            position: InitialLaw::default(),
            velocity: InitialLaw::GaussianDiag {
                mean: vec![0.0; dim],
                sd: vec![1.0; dim],
            },
        }
    }
}

/// Recorded second-order trajectory.
#[derive(Debug, Clone)]
pub struct PsoTrajectory {
    pub time_grid: Vec<f64>,
    pub snapshots: Vec<PsoEnsembleState>,
    pub consensus_path: Vec<ConsensusPoint>,
    pub params: PsoParams,
    pub noise_seed: u64,
}

impl PsoTrajectory {
    pub fn final_state(&self) -> &PsoEnsembleState {
        self.snapshots.last().expect("non-empty")
    }
}

/// Consensus of the spatial marginal; velocities are ignored.
pub fn pso_consensus(state: &PsoEnsembleState, cost: &CostFunction, alpha: f64) -> Result<ConsensusPoint> {
    consensus_point(&state.spatial_marginal(), cost, alpha)
}

/// One Euler–Maruyama step of the second-order system:
/// `X' = X + V dt`,
/// `V' = V - (gamma/m) V dt + (lambda/m)(x_alpha - X) dt + (sigma/m)(x_alpha - X) sqrt(dt) xi`.
pub fn pso_em_step(
    state: &PsoEnsembleState,
    consensus: &ConsensusPoint,
    params: &PsoParams,
    noise: &Array2<f64>,
) -> Result<PsoEnsembleState> {
    let (n, d) = state.positions.dim();
    if noise.dim() != (n, d) {
        return Err(Error::DimMismatch {
            expected: n * d,
            actual: noise.len(),
        });
    }
    let dt = params.dt;
    let sqrt_dt = dt.sqrt();
    let m = params.m;
    let gamma = params.gamma();
    let xa = &consensus.x_alpha;

    let mut pos = Array2::zeros((n, d));
    let mut vel = Array2::zeros((n, d));
    for i in 0..n {
        for k in 0..d {
            let x = state.positions[[i, k]];
            let v = state.velocities[[i, k]];
            let pull = xa[k] - x;
            pos[[i, k]] = x + v * dt;
            vel[[i, k]] = v - (gamma / m) * v * dt
                + (params.lambda / m) * pull * dt
                + (params.sigma / m) * pull * sqrt_dt * noise[[i, k]];
        }
    }
    if pos.iter().chain(vel.iter()).any(|v| !v.is_finite()) {
        let step = (state.t / dt).round() as usize;
        return Err(Error::NonFiniteState {
            step,
            detail: "second-order update overflowed".into(),
        });
    }
    Ok(PsoEnsembleState {
        t: state.t + dt,
        positions: pos,
        velocities: vel,
    })
}

/// Run the second-order system from the default initial law.
pub fn pso_simulate(cost: &CostFunction, params: &PsoParams, record_every: usize) -> Result<PsoTrajectory> {
    pso_simulate_from(cost, params, record_every, &PsoInitialLaw::default_for_dim(params.dim))
}

pub fn pso_simulate_from(
    cost: &CostFunction,
    params: &PsoParams,
    record_every: usize,
    init: &PsoInitialLaw,
) -> Result<PsoTrajectory> {
    params.validate()?;
    if cost.dim() != params.dim {
        return Err(Error::DimMismatch {
            expected: params.dim,
            actual: cost.dim(),
        });
    }
    if record_every == 0 {
        return Err(Error::invalid_param("record_every", "must be >= 1"));
    }
    let steps = params.steps();
    if steps % record_every != 0 {
        return Err(Error::invalid_param(
            "record_every",
            format!("must divide the step count {steps}"),
        ));
    }

    let positions = init
        .position
        .sample(params.n_particles, params.dim, params.seed, 0)?;
    let velocities = init
        .velocity
        .sample(params.n_particles, params.dim, params.seed, 1)?;
    let mut state = PsoEnsembleState::new(0.0, positions, velocities)?;

    let mut time_grid = Vec::new();
    let mut snapshots = Vec::new();
    let mut consensus_path = Vec::new();

    for step in 0..=steps {
        let cp = pso_consensus(&state, cost, params.alpha)?;
        if step % record_every == 0 {
            time_grid.push(step as f64 * params.dt);
            snapshots.push(state.clone());
            consensus_path.push(cp.clone());
        }
        if step == steps {
            break;
        }
        let noise = crate::cbo::step_noise(params.seed, step, params.n_particles, params.dim);
        state = pso_em_step(&state, &cp, params, &noise)?;
    }

    Ok(PsoTrajectory {
        time_grid,
        snapshots,
        consensus_path,
        params: params.clone(),
        noise_seed: params.seed,
    })
}

/// `sup_t (1/N) sum_i (|X_i|^4 + |V_i|^4)` over the recorded grid.
pub fn pso_moment_diagnostics(traj: &PsoTrajectory) -> f64 {
    traj.snapshots
        .iter()
        .map(|s| {
            let n = s.n() as f64;
            let m4 = |a: &Array2<f64>| {
                a.rows()
                    .into_iter()
                    .map(|row| {
                        let sq: f64 = row.iter().map(|v| v * v).sum();
                        sq * sq
                    })
                    .sum::<f64>()
            };
            (m4(&s.positions) + m4(&s.velocities)) / n
        })
        .fold(0.0, f64::max)
}
