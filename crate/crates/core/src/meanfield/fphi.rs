//! The weak-solution residual functional and its ensemble-size scaling.
//!
//! For a recorded trajectory the functional is
//!
//! ```text
//! F_phi = <phi, mu_T> - <phi, mu_0>
//!         + lambda * Int_0^T <(x - X_alpha(mu_s)) . grad phi, mu_s> ds
//!         - (sigma^2/2) * Int_0^T sum_k <(x - X_alpha(mu_s))_k^2 d2_k phi, mu_s> ds
//! ```
//!
//! with ensemble averages for the brackets and left-endpoint quadrature for
//! the time integrals (the non-anticipating convention, matching the Euler
//! chain). For an exact weak solution the functional vanishes; for the
//! N-particle system its second moment decays like 1/N, and at sigma = 0
//! the whole residual is pure quadrature error of size O(dt).

use rayon::prelude::*;
use serde::Serialize;

use crate::cbo::{simulate_from, TrajectoryRecord};
use crate::consensus::consensus_point;
use crate::cost::CostFunction;
use crate::ensemble::InitialLaw;
use crate::error::{Error, Result};
use crate::math::{mean, ols, pairwise_sum_by, stderr_of_mean};
use crate::meanfield::testfn::TestFunction;
use crate::params::SimParams;
use crate::rng;

/// Value of the functional together with its three summands.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FphiResult {
    /// `term_boundary + term_drift - term_diffusion`.
    pub value: f64,
    pub term_boundary: f64,
    pub term_drift: f64,
    pub term_diffusion: f64,
}

/// Evaluate the residual functional on a trajectory recorded at every step.
///
/// The consensus path is recomputed from the snapshots at the given `alpha`,
/// so the functional can be probed at a temperature other than the one that
/// drove the dynamics.
pub fn fphi_residual(
    traj: &TrajectoryRecord,
    cost: &CostFunction,
    alpha: f64,
    phi: &TestFunction,
) -> Result<FphiResult> {
    if !traj.records_every_step() {
        return Err(Error::GridMismatch(format!(
            "need record_every = 1: {} snapshots for {} steps",
            traj.time_grid.len(),
            traj.params.steps()
        )));
    }
    let first = traj.snapshots.first().ok_or(Error::GridMismatch("empty trajectory".into()))?;
    if phi.dim() != first.dim() {
        return Err(Error::DimMismatch {
            expected: first.dim(),
            actual: phi.dim(),
        });
    }
    let dt = traj.params.dt;
    let lambda = traj.params.lambda;
    let sigma = traj.params.sigma;
    let m = traj.snapshots.len() - 1;

    let ensemble_phi = |s: &crate::ensemble::EnsembleState| {
        let n = s.n();
        pairwise_sum_by(n, |i| phi.eval(s.positions.row(i).as_slice().unwrap())) / n as f64
    };
    let term_boundary = ensemble_phi(&traj.snapshots[m]) - ensemble_phi(&traj.snapshots[0]);

    let mut term_drift = 0.0;
    let mut term_diffusion = 0.0;
    for s in 0..m {
        let snap = &traj.snapshots[s];
        let cp = consensus_point(snap, cost, alpha)?;
        let n = snap.n();
        let d = snap.dim();
        let drift_avg = pairwise_sum_by(n, |i| {
            let x = snap.positions.row(i);
            let x = x.as_slice().unwrap();
            let grad = phi.gradient(x);
            (0..d).map(|k| (x[k] - cp.x_alpha[k]) * grad[k]).sum::<f64>()
        }) / n as f64;
        let diff_avg = pairwise_sum_by(n, |i| {
            let x = snap.positions.row(i);
            let x = x.as_slice().unwrap();
            let hess = phi.hessian_diag(x);
            (0..d)
                .map(|k| {
                    let dev = x[k] - cp.x_alpha[k];
                    dev * dev * hess[k]
                })
                .sum::<f64>()
        }) / n as f64;
        term_drift += drift_avg * dt;
        term_diffusion += diff_avg * dt;
    }
    term_drift *= lambda;
    term_diffusion *= 0.5 * sigma * sigma;

    Ok(FphiResult {
        value: term_boundary + term_drift - term_diffusion,
        term_boundary,
        term_drift,
        term_diffusion,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FphiScalingRow {
    pub n: usize,
    pub mean_sq: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FphiScalingResult {
    pub rows: Vec<FphiScalingRow>,
    /// OLS slope of `log mean|F|^2` against `log N`, with its standard
    /// error; absent when the experiment is degenerate.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Set when `sigma = 0`: every mean sits on the dt-residual floor and a
    /// slope against N is meaningless.
    pub degenerate: bool,
}

const SCALING_STREAM: u64 = 0xF1;

/// Monte-Carlo estimate of `E|F_phi|^2` across ensemble sizes, with an OLS
/// log-log slope. Replicas use independent seeds derived from
/// `base.seed`.
pub fn fphi_scaling_experiment(
    cost: &CostFunction,
    base: &SimParams,
    init: &InitialLaw,
    n_list: &[usize],
    replicas: usize,
    phi: &TestFunction,
) -> Result<FphiScalingResult> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_param("n_list", "must be strictly increasing"));
    }
    if replicas < 30 {
        return Err(Error::invalid_param("replicas", "need at least 30"));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let sq: Vec<f64> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let mut params = base.clone();
                params.n_particles = n;
                params.seed = rng::derive_seed(base.seed, &[SCALING_STREAM, n as u64, r as u64]);
                let traj = simulate_from(cost, &params, 1, init)?;
                let f = fphi_residual(&traj, cost, params.alpha, phi)?;
                Ok(f.value * f.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(FphiScalingRow {
            n,
            mean_sq: mean(&sq),
            stderr: stderr_of_mean(&sq),
        });
    }

    let degenerate = base.sigma == 0.0;
    let (slope, slope_stderr) = if degenerate || rows.len() < 2 || rows.iter().any(|r| r.mean_sq <= 0.0)
    {
        (None, None)
    } else {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean_sq.ln()).collect();
        let (slope, _, stderr) = ols(&x, &y);
        (Some(slope), Some(stderr))
    };

    Ok(FphiScalingResult {
        rows,
        slope,
        slope_stderr,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_params() -> SimParams {
        SimParams {
            lambda: 1.0,
            sigma: 0.0,
            alpha: 10.0,
            dt: 0.01,
            t_final: 0.5,
            n_particles: 16,
            dim: 1,
            seed: 7,
        }
    }

    #[test]
    fn decomposition_sums_to_value() {
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let mut p = base_params();
        p.sigma = 0.4;
        let traj = simulate_from(&cost, &p, 1, &InitialLaw::default()).unwrap();
        let phi = TestFunction::new(vec![0.0], 5.0).unwrap();
        let f = fphi_residual(&traj, &cost, p.alpha, &phi).unwrap();
        assert!(
            (f.value - (f.term_boundary + f.term_drift - f.term_diffusion)).abs() < 1e-12
        );
    }

    #[test]
    fn disjoint_support_gives_exact_zero() {
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let p = base_params();
        let traj = simulate_from(&cost, &p, 1, &InitialLaw::default()).unwrap();
        // particles live in [-3, 3]; park the bump far away
        let phi = TestFunction::new(vec![100.0], 1.0).unwrap();
        let f = fphi_residual(&traj, &cost, p.alpha, &phi).unwrap();
        assert_eq!(f.value, 0.0);
        assert_eq!(f.term_boundary, 0.0);
        assert_eq!(f.term_drift, 0.0);
        assert_eq!(f.term_diffusion, 0.0);
    }

    #[test]
    fn stationary_single_particle_gives_exact_zero() {
        // N = 1, sigma = 0: the particle is its own consensus and never
        // moves, so every term vanishes identically.
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let mut p = base_params();
        p.n_particles = 1;
        let traj = simulate_from(
            &cost,
            &p,
            1,
            &InitialLaw::Atoms {
                points: vec![vec![0.8]],
            },
        )
        .unwrap();
        let phi = TestFunction::new(vec![0.0], 5.0).unwrap();
        let f = fphi_residual(&traj, &cost, p.alpha, &phi).unwrap();
        assert_eq!(f.value, 0.0);
    }

    #[test]
    fn sigma_zero_residual_is_order_dt() {
        // With sigma = 0 the continuous-time functional vanishes, so what is
        // left is Euler quadrature error: halving dt should halve it.
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let phi = TestFunction::new(vec![0.0], 5.0).unwrap();
        let mut values = Vec::new();
        for dt in [0.01, 0.005, 0.0025] {
            let mut p = base_params();
            p.dt = dt;
            p.t_final = 1.0;
            p.n_particles = 32;
            let traj = simulate_from(&cost, &p, 1, &InitialLaw::default()).unwrap();
            let f = fphi_residual(&traj, &cost, p.alpha, &phi).unwrap();
            values.push(f.value.abs());
        }
        for w in values.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (1.6..=2.4).contains(&ratio),
                "halving dt changed residual by {ratio}, values {values:?}"
            );
        }
    }

    #[test]
    fn requires_full_grid() {
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let p = base_params();
        let traj = simulate_from(&cost, &p, 5, &InitialLaw::default()).unwrap();
        let phi = TestFunction::new(vec![0.0], 5.0).unwrap();
        assert!(matches!(
            fphi_residual(&traj, &cost, p.alpha, &phi),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn degenerate_scaling_flags_itself() {
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let p = base_params(); // sigma = 0
        let phi = TestFunction::new(vec![0.0], 5.0).unwrap();
        let res = fphi_scaling_experiment(&cost, &p, &InitialLaw::default(), &[8, 16], 30, &phi)
            .unwrap();
        assert!(res.degenerate);
        assert!(res.slope.is_none());
        // all residuals sit on the dt floor
        for row in &res.rows {
            assert!(row.mean_sq < 1e-4, "{row:?}");
        }
    }

    #[test]
    fn scaling_preconditions() {
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let p = base_params();
        let phi = TestFunction::new(vec![0.0], 5.0).unwrap();
        assert!(fphi_scaling_experiment(&cost, &p, &InitialLaw::default(), &[16, 8], 30, &phi)
            .is_err());
        assert!(fphi_scaling_experiment(&cost, &p, &InitialLaw::default(), &[8, 16], 10, &phi)
            .is_err());
    }

    #[test]
    fn sigma_doubling_quadruples_mean_sq() {
        // The residual is a sigma-scaled stochastic integral, so doubling
        // sigma should multiply mean|F|^2 by about 4.
        let cost = CostFunction::quadratic(1, vec![0.0]);
        let phi = TestFunction::new(vec![0.0], 5.0).unwrap();
        let run = |sigma: f64| {
            let mut p = base_params();
            p.sigma = sigma;
            p.t_final = 1.0;
            p.n_particles = 64;
            let res = fphi_scaling_experiment(
                &cost,
                &p,
                &InitialLaw::default(),
                &[64],
                200,
                &phi,
            )
            .unwrap();
            res.rows[0].mean_sq
        };
        let lo = run(0.25);
        let hi = run(0.5);
        let ratio = hi / lo;
        assert!((3.0..=5.0).contains(&ratio), "sigma ratio {ratio}");
    }
}
