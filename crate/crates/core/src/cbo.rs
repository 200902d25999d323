//! Consensus dynamics: Euler–Maruyama integration of the interacting
//! particle system with anisotropic diagonal noise.
//!
//! Per step, each particle moves by
//! `x' = x - lambda (x - x_alpha) dt + sigma (x - x_alpha) sqrt(dt) xi`
//! componentwise, with the consensus frozen within the step (synchronous
//! update). Noise comes from per-(step, particle) substreams of the master
//! seed, so a run is bit-identical no matter how many threads execute it.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::consensus::{consensus_point, ConsensusPoint};
use crate::cost::CostFunction;
use crate::ensemble::{EnsembleState, InitialLaw};
use crate::error::{Error, Result};
use crate::math::dist;
use crate::params::SimParams;
use crate::rng::{self, stream};

/// Row count below which the per-particle loops run serially; rayon overhead
/// dominates under this.
const PAR_THRESHOLD: usize = 2048;

/// Snapshots of an ensemble on a time grid, with the consensus path.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    /// Recorded times `0 = t_0 < ... < t_M = T`.
    pub time_grid: Vec<f64>,
    /// Ensemble states at the grid times.
    pub snapshots: Vec<EnsembleState>,
    /// Consensus computed from the matching snapshot.
    pub consensus_path: Vec<ConsensusPoint>,
    /// Parameters used for the run.
    pub params: SimParams,
    /// The master seed the noise derives from (same as `params.seed`).
    pub noise_seed: u64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &EnsembleState {
        self.snapshots.last().expect("non-empty trajectory")
    }

    pub fn final_consensus(&self) -> &ConsensusPoint {
        self.consensus_path.last().expect("non-empty trajectory")
    }

    /// True when the record covers every simulation step.
    pub fn records_every_step(&self) -> bool {
        self.time_grid.len() == self.params.steps() + 1
    }
}

/// Outcome of an optimization run.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Ensemble variance at each recorded time.
    pub variance_history: Vec<f64>,
    pub success: bool,
}

/// Gaussian increments for one step: row i holds particle i's noise, drawn
/// from the `[STEP, step, i]` substream of `seed`.
pub fn step_noise(seed: u64, step: usize, n: usize, dim: usize) -> Array2<f64> {
    let mut noise = Array2::zeros((n, dim));
    let fill_row = |i: usize, row: &mut [f64]| {
        let mut r = rng::substream(seed, &[stream::STEP, step as u64, i as u64]);
        rng::fill_standard_normal(&mut r, row);
    };
    if n >= PAR_THRESHOLD {
        let slice = noise.as_slice_mut().expect("contiguous");
        slice
            .par_chunks_mut(dim)
            .enumerate()
            .for_each(|(i, row)| fill_row(i, row));
    } else {
        for (i, mut row) in noise.rows_mut().into_iter().enumerate() {
            fill_row(i, row.as_slice_mut().expect("contiguous row"));
        }
    }
    noise
}

/// One Euler–Maruyama step with the consensus frozen.
///
/// A particle exactly at the consensus has zero drift and zero noise
/// amplitude, so it does not move.
pub fn em_step(
    state: &EnsembleState,
    consensus: &ConsensusPoint,
    params: &SimParams,
    noise: &Array2<f64>,
) -> Result<EnsembleState> {
    let (n, d) = state.positions.dim();
    if noise.dim() != (n, d) {
        return Err(Error::DimMismatch {
            expected: n * d,
            actual: noise.len(),
        });
    }
    if consensus.x_alpha.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            actual: consensus.x_alpha.len(),
        });
    }
    let dt = params.dt;
    let sqrt_dt = dt.sqrt();
    let lambda = params.lambda;
    let sigma = params.sigma;
    let xa = &consensus.x_alpha;

    let mut next = Array2::zeros((n, d));
    let update_row = |pos: &[f64], xi: &[f64], out: &mut [f64]| {
        for k in 0..d {
            let dev = pos[k] - xa[k];
            out[k] = pos[k] - lambda * dev * dt + sigma * dev * sqrt_dt * xi[k];
        }
    };
    if n >= PAR_THRESHOLD {
        let pos = state.positions.as_slice().expect("contiguous");
        let xi = noise.as_slice().expect("contiguous");
        next.as_slice_mut()
            .expect("contiguous")
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, out)| update_row(&pos[i * d..(i + 1) * d], &xi[i * d..(i + 1) * d], out));
    } else {
        for i in 0..n {
            let pos = state.positions.row(i);
            let xi = noise.row(i);
            let mut out = next.row_mut(i);
            update_row(
                pos.as_slice().unwrap(),
                xi.as_slice().unwrap(),
                out.as_slice_mut().unwrap(),
            );
        }
    }

    if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
        let step = (state.t / dt).round() as usize;
        return Err(Error::NonFiniteState {
            step,
            detail: format!("particle {} component {}", bad / d, bad % d),
        });
    }
    Ok(EnsembleState {
        t: state.t + dt,
        positions: next,
    })
}

/// Run the interacting system from the default initial law.
pub fn simulate(cost: &CostFunction, params: &SimParams, record_every: usize) -> Result<TrajectoryRecord> {
    simulate_from(cost, params, record_every, &InitialLaw::default())
}

/// Run the interacting system from `init`, recording every `record_every`-th
/// step (`record_every` must divide the step count so the final time is on
/// the record grid).
pub fn simulate_from(
    cost: &CostFunction,
    params: &SimParams,
    record_every: usize,
    init: &InitialLaw,
) -> Result<TrajectoryRecord> {
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

    let positions = init.sample(params.n_particles, params.dim, params.seed, 0)?;
    let mut state = EnsembleState::new(0.0, positions)?;

    let mut time_grid = Vec::with_capacity(steps / record_every + 1);
    let mut snapshots = Vec::with_capacity(steps / record_every + 1);
    let mut consensus_path = Vec::with_capacity(steps / record_every + 1);

    for step in 0..=steps {
        let cp = consensus_point(&state, cost, params.alpha)?;
        if step % record_every == 0 {
            time_grid.push(step as f64 * params.dt);
            snapshots.push(state.clone());
            consensus_path.push(cp.clone());
        }
        if step == steps {
            break;
        }
        let noise = step_noise(params.seed, step, params.n_particles, params.dim);
        state = em_step(&state, &cp, params, &noise)?;
    }

    Ok(TrajectoryRecord {
        time_grid,
        snapshots,
        consensus_path,
        params: params.clone(),
        noise_seed: params.seed,
    })
}

/// Full optimization run: simulate, then return the final consensus as the
/// candidate minimizer.
///
/// `success` is true when the cost knows its minimizer and the candidate
/// lands within `success_radius` of it; an infinite radius is vacuously true.
pub fn run_optimize(
    cost: &CostFunction,
    params: &SimParams,
    success_radius: f64,
) -> Result<OptimizationResult> {
    run_optimize_from(cost, params, success_radius, &InitialLaw::default())
}

pub fn run_optimize_from(
    cost: &CostFunction,
    params: &SimParams,
    success_radius: f64,
    init: &InitialLaw,
) -> Result<OptimizationResult> {
    let traj = simulate_from(cost, params, 1, init)?;
    let best_point = traj.final_consensus().x_alpha.clone();
    let best_value = cost.eval(&best_point);
    let variance_history = traj.snapshots.iter().map(|s| s.variance()).collect();
    let success = if success_radius == f64::INFINITY {
        true
    } else {
        match cost.known_min() {
            Some(km) => dist(&best_point, &km.location) <= success_radius,
            None => false,
        }
    };
    Ok(OptimizationResult {
        best_point,
        best_value,
        variance_history,
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn params_1d() -> SimParams {
        SimParams {
            lambda: 1.0,
            sigma: 0.0,
            alpha: 1.0,
            dt: 0.1,
            t_final: 1.0,
            n_particles: 1,
            dim: 1,
            seed: 0,
        }
    }

    #[test]
    fn euler_step_on_the_ode() {
        // sigma = 0, lambda = 1, dt = 0.1, x = 1, consensus frozen at 0.
        let state = EnsembleState::from_rows(0.0, vec![vec![1.0]]).unwrap();
        let cp = ConsensusPoint {
            x_alpha: vec![0.0],
            log_z: 0.0,
            ess: 1.0,
        };
        let noise = array![[0.0]];
        let next = em_step(&state, &cp, &params_1d(), &noise).unwrap();
        assert!((next.positions[[0, 0]] - 0.9).abs() < 1e-15);
        assert!((next.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn particle_at_consensus_is_fixed() {
        let state = EnsembleState::from_rows(0.0, vec![vec![0.7, -0.3]]).unwrap();
        let cp = ConsensusPoint {
            x_alpha: vec![0.7, -0.3],
            log_z: 0.0,
            ess: 1.0,
        };
        let mut p = params_1d();
        p.dim = 2;
        p.sigma = 5.0;
        let noise = array![[13.0, -8.0]];
        let next = em_step(&state, &cp, &p, &noise).unwrap();
        assert_eq!(next.positions, state.positions);
    }

    #[test]
    fn frozen_ode_matches_closed_form() {
        // x_{k+1} = (1 - dt) x_k with frozen consensus 0; after T/dt steps
        // x = (1-dt)^{T/dt}, which approaches e^{-T} at rate O(dt).
        let mut p = params_1d();
        for dt in [0.1, 0.01, 0.001] {
            p.dt = dt;
            let steps = p.steps();
            let mut state = EnsembleState::from_rows(0.0, vec![vec![1.0]]).unwrap();
            let cp = ConsensusPoint {
                x_alpha: vec![0.0],
                log_z: 0.0,
                ess: 1.0,
            };
            let noise = Array2::zeros((1, 1));
            for _ in 0..steps {
                state = em_step(&state, &cp, &p, &noise).unwrap();
            }
            let exact = (1.0 - dt).powi(steps as i32);
            assert!((state.positions[[0, 0]] - exact).abs() < 1e-12);
            assert!(
                (state.positions[[0, 0]] - (-1.0f64).exp()).abs() < dt,
                "dt={dt}"
            );
        }
    }

    #[test]
    fn single_particle_trajectory_is_constant() {
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let mut p = params_1d();
        p.sigma = 0.7;
        let traj = simulate_from(
            &cost,
            &p,
            1,
            &InitialLaw::Atoms {
                points: vec![vec![1.5]],
            },
        )
        .unwrap();
        for s in &traj.snapshots {
            assert_eq!(s.positions[[0, 0]], 1.5);
        }
    }

    #[test]
    fn symmetric_pair_contracts_symmetrically() {
        // Even cost and symmetric init: weights are symmetric under x -> -x,
        // so the consensus sits at 0 and positions stay mirrored.
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let p = SimParams {
            lambda: 1.0,
            sigma: 0.0,
            alpha: 2.5,
            dt: 0.01,
            t_final: 1.0,
            n_particles: 2,
            dim: 1,
            seed: 9,
        };
        let traj = simulate_from(
            &cost,
            &p,
            1,
            &InitialLaw::Atoms {
                points: vec![vec![-2.0], vec![2.0]],
            },
        )
        .unwrap();
        for s in &traj.snapshots {
            let a = s.positions[[0, 0]];
            let b = s.positions[[1, 0]];
            assert!((a + b).abs() < 1e-12, "asymmetry {a} {b}");
        }
        let last = traj.final_state();
        assert!(last.positions[[0, 0]].abs() < 2.0);
    }

    #[test]
    fn runs_are_reproducible_across_thread_counts() {
        let cost = CostFunction::quadratic(2, vec![0.0, 0.0]);
        let p = SimParams {
            lambda: 1.0,
            sigma: 0.4,
            alpha: 10.0,
            dt: 0.05,
            t_final: 1.0,
            n_particles: 40,
            dim: 2,
            seed: 1234,
        };
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate(&cost, &p, 1).unwrap())
        };
        let a = run(1);
        let b = run(8);
        assert_eq!(a.time_grid, b.time_grid);
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(x.positions, y.positions);
        }
        for (x, y) in a.consensus_path.iter().zip(&b.consensus_path) {
            assert_eq!(x.x_alpha, y.x_alpha);
        }
    }

    #[test]
    fn dirac_absorption() {
        // All particles coincide: drift and noise amplitudes vanish forever.
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let p = SimParams {
            lambda: 0.8,
            sigma: 1.5,
            alpha: 3.0,
            dt: 0.1,
            t_final: 2.0,
            n_particles: 8,
            dim: 1,
            seed: 5,
        };
        let traj = simulate_from(
            &cost,
            &p,
            1,
            &InitialLaw::Atoms {
                points: vec![vec![0.4]],
            },
        )
        .unwrap();
        for s in &traj.snapshots {
            for i in 0..s.n() {
                assert_eq!(s.positions[[i, 0]], 0.4);
            }
        }
    }

    #[test]
    fn sigma_zero_diameter_never_grows() {
        let cost = CostFunction::rastrigin(1, 10.0);
        let p = SimParams {
            lambda: 1.0,
            sigma: 0.0,
            alpha: 5.0,
            dt: 0.5,
            t_final: 5.0,
            n_particles: 16,
            dim: 1,
            seed: 77,
        };
        let traj = simulate(&cost, &p, 1).unwrap();
        let mut prev = f64::INFINITY;
        for s in &traj.snapshots {
            let d = s.diameter();
            assert!(d <= prev + 1e-12);
            prev = d;
        }
    }

    #[test]
    fn driftless_multiplicative_noise_is_a_martingale() {
        // lambda = 0, frozen consensus at 0: each coordinate is a geometric
        // Brownian Euler chain, so E[x_T] = x_0.
        let p = SimParams {
            lambda: 0.0,
            sigma: 0.5,
            alpha: 0.0,
            dt: 0.05,
            t_final: 1.0,
            n_particles: 1,
            dim: 1,
            seed: 0,
        };
        let cp = ConsensusPoint {
            x_alpha: vec![0.0],
            log_z: 0.0,
            ess: 1.0,
        };
        let replicas = 20_000usize;
        let mut terminal = Vec::with_capacity(replicas);
        for r in 0..replicas {
            let mut state = EnsembleState::from_rows(0.0, vec![vec![1.0]]).unwrap();
            for step in 0..p.steps() {
                let mut rng = rng::substream(1717, &[stream::REPLICA, r as u64, step as u64]);
                let mut z = [0.0];
                rng::fill_standard_normal(&mut rng, &mut z);
                let noise = array![[z[0]]];
                state = em_step(&state, &cp, &p, &noise).unwrap();
            }
            terminal.push(state.positions[[0, 0]]);
        }
        let mean = crate::math::mean(&terminal);
        let se = crate::math::stderr_of_mean(&terminal);
        assert!(
            (mean - 1.0).abs() <= 3.0 * se,
            "martingale violated: mean {mean}, se {se}"
        );
    }

    #[test]
    fn optimize_single_particle_returns_start() {
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let mut p = params_1d();
        p.sigma = 0.3;
        let res = run_optimize_from(
            &cost,
            &p,
            0.5,
            &InitialLaw::Atoms {
                points: vec![vec![2.0]],
            },
        )
        .unwrap();
        assert_eq!(res.best_point, vec![2.0]);
        assert!(!res.success);
        let res = run_optimize_from(
            &cost,
            &p,
            f64::INFINITY,
            &InitialLaw::Atoms {
                points: vec![vec![2.0]],
            },
        )
        .unwrap();
        assert!(res.success);
    }
}
