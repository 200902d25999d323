//! 1D finite-volume solver for the consensus Fokker–Planck dynamics
//! `d/dt mu = (sigma^2/2) d^2/dx^2 ((x-b)^2 mu) + lambda d/dx ((x-b) mu)`,
//! either with a prescribed consensus path `b_t` (the linear equation) or
//! with `b = X_alpha(mu_t)` recomputed from the grid each step.
//!
//! The scheme is explicit and conservative: advective fluxes are upwinded by
//! the sign of the velocity `-lambda (x - b)`, the diffusive flux is a
//! central difference of `D(x) mu` with `D = (sigma^2/2)(x-b)^2`, and both
//! boundaries are zero-flux. Mass is conserved to rounding per step and
//! positivity holds under the CFL restriction.
//!
//! The paper-level equation lives on the whole line; here the domain is a
//! truncated interval, so runs must keep essentially all mass away from the
//! boundary (monitored via [`PdeRunStats::max_boundary_mass`]).

use serde::{Deserialize, Serialize};

use crate::cbo::simulate_from;
use crate::cost::CostFunction;
use crate::ensemble::InitialLaw;
use crate::error::{Error, Result};
use crate::math::{pairwise_sum, pairwise_sum_by};
use crate::meanfield::{ConsensusTrajectory, TestFunction};
use crate::metrics::{histogram_l1, Sample};
use crate::params::SimParams;
use crate::rng::{self, stream};

/// Mesh geometry for a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) {
            return Err(Error::invalid_param("grid", "needs x_min < x_max"));
        }
        if self.n_cells < 3 {
            return Err(Error::invalid_param("grid", "needs at least 3 cells"));
        }
        Ok(())
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn center(&self, c: usize) -> f64 {
        self.x_min + (c as f64 + 0.5) * self.cell_width()
    }
}

/// Cell-centered nonnegative masses summing to one.
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub x_min: f64,
    pub x_max: f64,
    pub masses: Vec<f64>,
    pub t: f64,
}

impl GridDensity {
    pub fn new(spec: GridSpec, masses: Vec<f64>, t: f64) -> Result<Self> {
        spec.validate()?;
        if masses.len() != spec.n_cells {
            return Err(Error::DimMismatch {
                expected: spec.n_cells,
                actual: masses.len(),
            });
        }
        let total = pairwise_sum(&masses);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid_param(
                "masses",
                format!("must sum to 1, got {total}"),
            ));
        }
        if masses.iter().any(|&m| m < -1e-14) {
            return Err(Error::invalid_param("masses", "must be nonnegative"));
        }
        Ok(Self {
            x_min: spec.x_min,
            x_max: spec.x_max,
            masses,
            t,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.masses.len()
    }

    pub fn cell_width(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells() as f64
    }

    pub fn center(&self, c: usize) -> f64 {
        self.x_min + (c as f64 + 0.5) * self.cell_width()
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            n_cells: self.n_cells(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        pairwise_sum(&self.masses)
    }

    /// First moment `sum_c x_c m_c`.
    pub fn mean(&self) -> f64 {
        pairwise_sum_by(self.n_cells(), |c| self.center(c) * self.masses[c])
    }

    /// Second moment about `b`: `sum_c (x_c - b)^2 m_c`.
    pub fn second_moment_about(&self, b: f64) -> f64 {
        pairwise_sum_by(self.n_cells(), |c| {
            let d = self.center(c) - b;
            d * d * self.masses[c]
        })
    }

    /// `<psi, mu>` by midpoint quadrature over cells.
    pub fn pair_with(&self, psi: &TestFunction) -> f64 {
        pairwise_sum_by(self.n_cells(), |c| psi.eval(&[self.center(c)]) * self.masses[c])
    }

    /// Mass in the outermost `k` cells on each side.
    pub fn boundary_mass(&self, k: usize) -> f64 {
        let n = self.n_cells();
        let k = k.min(n / 2);
        pairwise_sum(&self.masses[..k]) + pairwise_sum(&self.masses[n - k..])
    }

    /// Exact cell integrals of an initial law, renormalized to unit mass.
    ///
    /// Uniform boxes and atoms integrate exactly; Gaussians use the error
    /// function, losing only the truncated tail (which must be negligible
    /// for the truncation to a bounded domain to make sense).
    pub fn from_initial_law(spec: GridSpec, law: &InitialLaw, t: f64) -> Result<Self> {
        spec.validate()?;
        law.validate(1)?;
        let h = spec.cell_width();
        let mut masses = vec![0.0; spec.n_cells];
        match law {
            InitialLaw::UniformBox { lo, hi } => {
                if lo == hi {
                    let c = cell_index_for(spec, *lo)?;
                    masses[c] = 1.0;
                } else {
                    if *lo < spec.x_min || *hi > spec.x_max {
                        return Err(Error::invalid_param(
                            "grid",
                            "uniform box must lie inside the domain",
                        ));
                    }
                    let width = hi - lo;
                    for (c, m) in masses.iter_mut().enumerate() {
                        let l = spec.x_min + c as f64 * h;
                        let r = l + h;
                        let overlap = (r.min(*hi) - l.max(*lo)).max(0.0);
                        *m = overlap / width;
                    }
                }
            }
            InitialLaw::GaussianDiag { mean, sd } => {
                let (mu, s) = (mean[0], sd[0]);
                if s == 0.0 {
                    let c = cell_index_for(spec, mu)?;
                    masses[c] = 1.0;
                } else {
                    let phi = |z: f64| 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2));
                    for (c, m) in masses.iter_mut().enumerate() {
                        let l = spec.x_min + c as f64 * h;
                        let r = l + h;
                        *m = phi((r - mu) / s) - phi((l - mu) / s);
                    }
                }
            }
            InitialLaw::Atoms { points } => {
                let w = 1.0 / points.len() as f64;
                for p in points {
                    let c = cell_index_for(spec, p[0])?;
                    masses[c] += w;
                }
            }
        }
        let total = pairwise_sum(&masses);
        if total <= 0.0 {
            return Err(Error::invalid_param("grid", "initial law has no mass in the domain"));
        }
        if (total - 1.0).abs() > 1e-8 {
            log::warn!("initial law leaves {:.3e} mass outside the domain", 1.0 - total);
        }
        for m in &mut masses {
            *m /= total;
        }
        Self::new(spec, masses, t)
    }
}

fn cell_index_for(spec: GridSpec, x: f64) -> Result<usize> {
    if x < spec.x_min || x > spec.x_max {
        return Err(Error::invalid_param(
            "grid",
            format!("point {x} outside the domain [{}, {}]", spec.x_min, spec.x_max),
        ));
    }
    let idx = ((x - spec.x_min) / spec.cell_width()).floor() as usize;
    Ok(idx.min(spec.n_cells - 1))
}

/// How the consensus entering the fluxes is chosen.
#[derive(Debug, Clone)]
pub enum ConsensusMode {
    /// Prescribed path `b_t` (the linear equation).
    Frozen(ConsensusTrajectory),
    /// `b = X_alpha(mu_t)` recomputed from the grid each step.
    SelfConsistent,
}

#[derive(Debug, Clone)]
pub struct PdeParams {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt_pde: f64,
    pub consensus_mode: ConsensusMode,
}

impl PdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_pde > 0.0) || !self.dt_pde.is_finite() {
            return Err(Error::invalid_param("dt_pde", "must be finite and > 0"));
        }
        if !(self.lambda >= 0.0) || !(self.sigma >= 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::invalid_param("pde", "lambda, sigma, alpha must be >= 0"));
        }
        if let ConsensusMode::Frozen(b) = &self.consensus_mode {
            if b.dim() != 1 {
                return Err(Error::invalid_param("b", "frozen consensus path must be 1D"));
            }
        }
        Ok(())
    }
}

/// A time step that satisfies both CFL conditions with the advective and
/// diffusive rates combined (the pair of individual conditions alone does
/// not guarantee positivity), assuming `b` stays inside the domain.
pub fn stable_dt(spec: GridSpec, lambda: f64, sigma: f64) -> f64 {
    let h = spec.cell_width();
    let reach = spec.x_max - spec.x_min;
    let adv_rate = lambda * reach / h;
    let diff_rate = sigma * sigma * reach * reach / (h * h);
    0.9 / (adv_rate + diff_rate).max(1e-300)
}

/// Consensus point of a grid density: cell centers as atoms weighted by
/// `mass * exp(-alpha E)`.
pub fn density_consensus(density: &GridDensity, cost: &CostFunction, alpha: f64) -> Result<f64> {
    let n = density.n_cells();
    // fold the masses into log space: weight ~ m_c * exp(-alpha E(x_c))
    let log_terms: Vec<f64> = (0..n)
        .map(|c| {
            let m = density.masses[c].max(0.0);
            let e = cost.eval(&[density.center(c)]);
            if m == 0.0 {
                f64::NEG_INFINITY
            } else {
                m.ln() - alpha * e
            }
        })
        .collect();
    let z_max = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if z_max == f64::NEG_INFINITY {
        return Err(Error::invalid_param("masses", "no mass on the grid"));
    }
    let weights: Vec<f64> = log_terms.iter().map(|&z| (z - z_max).exp()).collect();
    let total = pairwise_sum(&weights);
    Ok(pairwise_sum_by(n, |c| weights[c] * density.center(c)) / total)
}

fn consensus_for_step(
    density: &GridDensity,
    params: &PdeParams,
    cost: &CostFunction,
) -> Result<f64> {
    match &params.consensus_mode {
        ConsensusMode::Frozen(path) => Ok(path.value_at(density.t)[0]),
        ConsensusMode::SelfConsistent => density_consensus(density, cost, params.alpha),
    }
}

/// One explicit conservative step. Checks the CFL pair against the current
/// consensus before moving and rejects negative masses beyond -1e-14.
pub fn pde_step(density: &GridDensity, params: &PdeParams, cost: &CostFunction) -> Result<GridDensity> {
    params.validate()?;
    let b = consensus_for_step(density, params, cost)?;
    pde_step_with_b(density, params, b)
}

fn pde_step_with_b(density: &GridDensity, params: &PdeParams, b: f64) -> Result<GridDensity> {
    let n = density.n_cells();
    let h = density.cell_width();
    let dt = params.dt_pde;
    let lambda = params.lambda;
    let half_sigma_sq = 0.5 * params.sigma * params.sigma;

    // CFL checks against the current consensus location
    let max_dev = (0..n)
        .map(|c| (density.center(c) - b).abs())
        .fold(0.0, f64::max);
    if params.sigma > 0.0 {
        let bound = h * h / (params.sigma * params.sigma * max_dev * max_dev);
        if dt > bound {
            return Err(Error::CflViolation(format!(
                "diffusive: dt_pde = {dt:.3e} > h^2/(sigma^2 max(x-b)^2) = {bound:.3e}"
            )));
        }
    }
    if lambda > 0.0 {
        let bound = h / (lambda * max_dev);
        if dt > bound {
            return Err(Error::CflViolation(format!(
                "advective: dt_pde = {dt:.3e} > h/(lambda max|x-b|) = {bound:.3e}"
            )));
        }
    }

    // face fluxes; F[j] is the mass flux through face j+1/2, F e {0..n-2}
    // total flux = -d/dx(D p) + v p with v = -lambda (x - b), p = m/h
    let p = |c: usize| density.masses[c] / h;
    let d_coef = |c: usize| {
        let dev = density.center(c) - b;
        half_sigma_sq * dev * dev
    };
    let mut next = density.masses.clone();
    let mut prev_flux = 0.0; // zero-flux left boundary
    for j in 0..n - 1 {
        let x_face = density.x_min + (j as f64 + 1.0) * h;
        let v = -lambda * (x_face - b);
        let upwind = if v >= 0.0 { p(j) } else { p(j + 1) };
        let adv = v * upwind;
        let diff = -(d_coef(j + 1) * p(j + 1) - d_coef(j) * p(j)) / h;
        let flux = adv + diff;
        next[j] -= dt * (flux - prev_flux);
        prev_flux = flux;
    }
    next[n - 1] -= dt * (0.0 - prev_flux); // zero-flux right boundary

    for (cell, &m) in next.iter().enumerate() {
        if m < -1e-14 {
            return Err(Error::NegativeMass { cell, mass: m });
        }
    }
    Ok(GridDensity {
        x_min: density.x_min,
        x_max: density.x_max,
        masses: next,
        t: density.t + dt,
    })
}

/// Bookkeeping accumulated over an evolution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PdeRunStats {
    /// Largest per-step drift of the total mass.
    pub max_mass_defect: f64,
    /// Most negative cell mass seen (rounding-level at worst).
    pub min_mass: f64,
    /// Largest mass observed in the outermost cells; should stay below 1e-8
    /// for the truncation to the bounded domain to be faithful.
    pub max_boundary_mass: f64,
    pub steps: usize,
}

/// Evolve by `n_steps` explicit steps, tracking conservation and boundary
/// leakage.
pub fn evolve(
    density: &GridDensity,
    params: &PdeParams,
    cost: &CostFunction,
    n_steps: usize,
) -> Result<(GridDensity, PdeRunStats)> {
    params.validate()?;
    let mut current = density.clone();
    let mut stats = PdeRunStats {
        max_mass_defect: 0.0,
        min_mass: f64::INFINITY,
        max_boundary_mass: current.boundary_mass(1),
        steps: n_steps,
    };
    for _ in 0..n_steps {
        let before = current.total_mass();
        current = pde_step(&current, params, cost)?;
        let after = current.total_mass();
        stats.max_mass_defect = stats.max_mass_defect.max((after - before).abs());
        stats.min_mass = stats
            .min_mass
            .min(current.masses.iter().cloned().fold(f64::INFINITY, f64::min));
        stats.max_boundary_mass = stats.max_boundary_mass.max(current.boundary_mass(1));
    }
    Ok((current, stats))
}

/// One row of the particle-vs-grid comparison.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PdeCompareRow {
    pub n: usize,
    pub seed_index: usize,
    pub l1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PdeCompareResult {
    pub rows: Vec<PdeCompareRow>,
    pub pde_stats: PdeRunStats,
}

const PDE_SEED_STREAM: u64 = 0xD1;

/// Run the self-consistent grid solution once and compare the final-time
/// histogram of particle runs against it, for each ensemble size and seed.
pub fn pde_vs_particles(
    cost: &CostFunction,
    sim: &SimParams,
    spec: GridSpec,
    init: &InitialLaw,
    dt_pde: Option<f64>,
    n_list: &[usize],
    n_seeds: usize,
) -> Result<PdeCompareResult> {
    sim.validate()?;
    if sim.dim != 1 {
        return Err(Error::invalid_param("dim", "pde comparison needs d = 1"));
    }
    if n_list.is_empty() || n_seeds == 0 {
        return Err(Error::invalid_param("n_list", "need sizes and seeds"));
    }
    let dt = dt_pde.unwrap_or_else(|| stable_dt(spec, sim.lambda, sim.sigma));
    let n_steps = (sim.t_final / dt).ceil() as usize;
    let dt = sim.t_final / n_steps as f64;
    let params = PdeParams {
        lambda: sim.lambda,
        sigma: sim.sigma,
        alpha: sim.alpha,
        dt_pde: dt,
        consensus_mode: ConsensusMode::SelfConsistent,
    };
    let initial = GridDensity::from_initial_law(spec, init, 0.0)?;
    let (final_density, pde_stats) = evolve(&initial, &params, cost, n_steps)?;

    let mut rows = Vec::new();
    for &n in n_list {
        for s in 0..n_seeds {
            let mut p = sim.clone();
            p.n_particles = n;
            p.seed = rng::derive_seed(sim.seed, &[PDE_SEED_STREAM, n as u64, s as u64]);
            let traj = simulate_from(cost, &p, p.steps(), init)?;
            let sample = Sample::from_state(traj.final_state());
            let l1 = histogram_l1(&sample, &final_density)?;
            rows.push(PdeCompareRow {
                n,
                seed_index: s,
                l1: l1.value,
            });
        }
    }
    Ok(PdeCompareResult { rows, pde_stats })
}

/// Both sides of the duality pairing, with the Monte-Carlo error of the
/// path side.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualityResult {
    /// `<psi, mu_{t0}>` from the grid evolution.
    pub lhs: f64,
    /// Monte-Carlo average of `psi(X_{t0})` over paths of the linear SDE
    /// started from the initial law (the probabilistic representation of
    /// `<h_0, mu_0>` with `h` solving the backward equation).
    pub rhs: f64,
    pub mc_stderr: f64,
}

/// Check `<psi, mu_{t0}> = <h_0, mu_0>` in the prescribed-drift linear
/// setting: the left side by grid evolution, the right side by simulating
/// the linear SDE `dX = -lambda (X - b) dt + sigma (X - b) dB` from the
/// initial law and averaging `psi` at `t0`.
#[allow(clippy::too_many_arguments)]
pub fn duality_pairing_check(
    params: &PdeParams,
    spec: GridSpec,
    init: &InitialLaw,
    cost: &CostFunction,
    psi: &TestFunction,
    t0: f64,
    mc_samples: usize,
    dt_sde: f64,
    seed: u64,
) -> Result<DualityResult> {
    params.validate()?;
    let path = match &params.consensus_mode {
        ConsensusMode::Frozen(b) => b.clone(),
        ConsensusMode::SelfConsistent => {
            return Err(Error::invalid_param(
                "consensus_mode",
                "duality check needs the frozen-drift linear setting",
            ))
        }
    };
    if psi.dim() != 1 {
        return Err(Error::invalid_param("psi", "must be 1D"));
    }
    if !(t0 >= 0.0) {
        return Err(Error::invalid_param("t0", "must be >= 0"));
    }
    if mc_samples < 2 {
        return Err(Error::invalid_param("mc_samples", "need at least 2 paths"));
    }

    let initial = GridDensity::from_initial_law(spec, init, 0.0)?;
    if t0 == 0.0 {
        let v = initial.pair_with(psi);
        return Ok(DualityResult {
            lhs: v,
            rhs: v,
            mc_stderr: 0.0,
        });
    }

    // grid side
    let pde_steps = (t0 / params.dt_pde).round();
    if pde_steps < 1.0 || (t0 / params.dt_pde - pde_steps).abs() > 1e-9 * pde_steps {
        return Err(Error::invalid_param("t0", "must sit on the grid of dt_pde"));
    }
    let (evolved, _) = evolve(&initial, params, cost, pde_steps as usize)?;
    let lhs = evolved.pair_with(psi);

    // path side
    let sde_steps = (t0 / dt_sde).round();
    if sde_steps < 1.0 || (t0 / dt_sde - sde_steps).abs() > 1e-9 * sde_steps {
        return Err(Error::invalid_param("dt_sde", "t0 must be a multiple of dt_sde"));
    }
    let sde_steps = sde_steps as usize;
    let sqrt_dt = dt_sde.sqrt();
    let mut values = Vec::with_capacity(mc_samples);
    for j in 0..mc_samples {
        let mut rng = rng::substream(seed, &[stream::MC_PATH, j as u64]);
        let mut x = init.sample_one(1, &mut rng)?[0];
        let mut z = [0.0];
        for s in 0..sde_steps {
            let b = path.value_at(s as f64 * dt_sde)[0];
            rng::fill_standard_normal(&mut rng, &mut z);
            let dev = x - b;
            x += -params.lambda * dev * dt_sde + params.sigma * dev * sqrt_dt * z[0];
        }
        values.push(psi.eval(&[x]));
    }
    let rhs = crate::math::mean(&values);
    let mc_stderr = crate::math::stderr_of_mean(&values);
    Ok(DualityResult { lhs, rhs, mc_stderr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> GridSpec {
        GridSpec {
            x_min: -1.0,
            x_max: 2.0,
            n_cells: n,
        }
    }

    fn quadratic() -> CostFunction {
        CostFunction::quadratic(1, vec![0.0])
    }

    #[test]
    fn initial_mass_is_exact_for_uniform_box() {
        let g = GridDensity::from_initial_law(
            spec(300),
            &InitialLaw::UniformBox { lo: 0.0, hi: 1.0 },
            0.0,
        )
        .unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        assert!((g.mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_cells_integrate_to_one() {
        let g = GridDensity::from_initial_law(
            spec(600),
            &InitialLaw::GaussianDiag {
                mean: vec![0.5],
                sd: vec![0.2],
            },
            0.0,
        )
        .unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        assert!((g.mean() - 0.5).abs() < 1e-6);
        assert!((g.second_moment_about(0.5) - 0.04).abs() < 1e-5);
    }

    #[test]
    fn dirac_at_consensus_cell_is_stationary() {
        // an odd cell count centers a cell exactly at b = 0.5
        let s = GridSpec {
            x_min: -0.5,
            x_max: 1.5,
            n_cells: 101,
        };
        let h = s.cell_width();
        let center_cell = 50; // center = -0.5 + 50.5 * h = 0.51... must equal b
        let b = s.center(center_cell);
        let mut masses = vec![0.0; s.n_cells];
        masses[center_cell] = 1.0;
        let density = GridDensity::new(s, masses, 0.0).unwrap();
        let params = PdeParams {
            lambda: 1.0,
            sigma: 0.7,
            alpha: 1.0,
            dt_pde: 0.5 * stable_dt(s, 1.0, 0.7),
            consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(vec![b], 10.0)),
        };
        let mut current = density;
        for _ in 0..50 {
            current = pde_step(&current, &params, &quadratic()).unwrap();
        }
        assert_eq!(current.masses[center_cell], 1.0);
        assert!((current.total_mass() - 1.0).abs() < 1e-12);
        let _ = h;
    }

    #[test]
    fn mass_is_conserved_each_step() {
        let s = spec(400);
        let g = GridDensity::from_initial_law(
            s,
            &InitialLaw::GaussianDiag {
                mean: vec![0.5],
                sd: vec![0.2],
            },
            0.0,
        )
        .unwrap();
        let params = PdeParams {
            lambda: 1.0,
            sigma: 0.5,
            alpha: 1.0,
            dt_pde: 0.9 * stable_dt(s, 1.0, 0.5),
            consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(vec![0.0], 10.0)),
        };
        let (final_density, stats) = evolve(&g, &params, &quadratic(), 500).unwrap();
        assert!(stats.max_mass_defect <= 1e-12, "defect {}", stats.max_mass_defect);
        assert!(stats.min_mass >= -1e-14);
        assert!((final_density.total_mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cfl_violation_is_a_config_error() {
        let s = spec(100);
        let g = GridDensity::from_initial_law(
            s,
            &InitialLaw::UniformBox { lo: 0.0, hi: 1.0 },
            0.0,
        )
        .unwrap();
        let params = PdeParams {
            lambda: 1.0,
            sigma: 0.5,
            alpha: 1.0,
            dt_pde: 1.0, // way above any stable step
            consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(vec![0.0], 2.0)),
        };
        assert!(matches!(
            pde_step(&g, &params, &quadratic()),
            Err(Error::CflViolation(_))
        ));
    }

    #[test]
    fn first_moment_relaxes_exponentially() {
        // sigma = 0, frozen b: dm1/dt = -lambda (m1 - b).
        let s = spec(600);
        let g = GridDensity::from_initial_law(
            s,
            &InitialLaw::GaussianDiag {
                mean: vec![0.5],
                sd: vec![0.15],
            },
            0.0,
        )
        .unwrap();
        let lambda = 1.0;
        let dt = 0.5 * stable_dt(s, lambda, 0.0);
        let n_steps = (1.0 / dt).ceil() as usize;
        let dt = 1.0 / n_steps as f64;
        let params = PdeParams {
            lambda,
            sigma: 0.0,
            alpha: 1.0,
            dt_pde: dt,
            consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(vec![0.0], 2.0)),
        };
        let (final_density, _) = evolve(&g, &params, &quadratic(), n_steps).unwrap();
        let expected = 0.5 * (-1.0f64).exp();
        let got = final_density.mean();
        assert!(
            (got - expected).abs() / expected < 0.01,
            "m1(T) = {got}, want {expected}"
        );
    }

    #[test]
    fn centered_second_moment_follows_the_ode() {
        // v(t) = v(0) e^{(sigma^2 - 2 lambda) t} about the frozen b. The
        // multiplicative noise has log-normal tails, so the noise level and
        // domain are sized together to keep boundary mass below 1e-8.
        let s = GridSpec {
            x_min: -1.2,
            x_max: 1.8,
            n_cells: 1000,
        };
        let g = GridDensity::from_initial_law(
            s,
            &InitialLaw::GaussianDiag {
                mean: vec![0.5],
                sd: vec![0.15],
            },
            0.0,
        )
        .unwrap();
        let (lambda, sigma) = (1.0, 0.3);
        let dt = 0.9 * stable_dt(s, lambda, sigma);
        let n_steps = (1.0 / dt).ceil() as usize;
        let dt = 1.0 / n_steps as f64;
        let params = PdeParams {
            lambda,
            sigma,
            alpha: 1.0,
            dt_pde: dt,
            consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(vec![0.0], 2.0)),
        };
        let v0 = g.second_moment_about(0.0);
        let (final_density, stats) = evolve(&g, &params, &quadratic(), n_steps).unwrap();
        let expected = v0 * ((sigma * sigma - 2.0 * lambda) * 1.0f64).exp();
        let got = final_density.second_moment_about(0.0);
        assert!(
            (got - expected).abs() / expected < 0.02,
            "v(T) = {got}, want {expected}"
        );
        assert!(stats.max_boundary_mass < 1e-8);
    }

    #[test]
    fn density_consensus_matches_particle_formula() {
        let s = spec(200);
        let g = GridDensity::from_initial_law(
            s,
            &InitialLaw::UniformBox { lo: 0.0, hi: 1.0 },
            0.0,
        )
        .unwrap();
        // alpha = 0: plain mean
        let b = density_consensus(&g, &quadratic(), 0.0).unwrap();
        assert!((b - 0.5).abs() < 1e-10);
        // large alpha: pulled toward the cost minimum at 0
        let b = density_consensus(&g, &quadratic(), 50.0).unwrap();
        assert!(b < 0.2, "b = {b}");
    }

    #[test]
    fn duality_at_time_zero_is_exact() {
        let s = spec(200);
        let params = PdeParams {
            lambda: 1.0,
            sigma: 0.5,
            alpha: 1.0,
            dt_pde: 1e-4,
            consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(vec![0.0], 1.0)),
        };
        let psi = TestFunction::new(vec![0.5], 1.0).unwrap();
        let r = duality_pairing_check(
            &params,
            s,
            &InitialLaw::GaussianDiag {
                mean: vec![0.5],
                sd: vec![0.2],
            },
            &quadratic(),
            &psi,
            0.0,
            100,
            1e-2,
            7,
        )
        .unwrap();
        assert_eq!(r.lhs, r.rhs);
        assert_eq!(r.mc_stderr, 0.0);
    }

    #[test]
    fn sigma_zero_duality_matches_the_flow_map() {
        // Deterministic characteristics: X_t = b + (X_0 - b) e^{-lambda t}.
        // Quadrature of psi(flow(x)) against the initial cells is an
        // independent oracle for both sides.
        let s = GridSpec {
            x_min: -0.5,
            x_max: 1.5,
            n_cells: 1000,
        };
        let init = InitialLaw::GaussianDiag {
            mean: vec![0.5],
            sd: vec![0.15],
        };
        let lambda = 1.0;
        let t0 = 0.5;
        let dt = 0.5 * stable_dt(s, lambda, 0.0);
        let n_steps = (t0 / dt).ceil() as usize;
        let dt = t0 / n_steps as f64;
        let params = PdeParams {
            lambda,
            sigma: 0.0,
            alpha: 1.0,
            dt_pde: dt,
            consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(vec![0.0], 1.0)),
        };
        let psi = TestFunction::new(vec![0.3], 0.6).unwrap();
        let r = duality_pairing_check(
            &params, s, &init, &quadratic(), &psi, t0, 5000, t0 / 100.0, 3,
        )
        .unwrap();
        let initial = GridDensity::from_initial_law(s, &init, 0.0).unwrap();
        let oracle = pairwise_sum_by(initial.n_cells(), |c| {
            let x0 = initial.center(c);
            let xt = x0 * (-lambda * t0).exp();
            psi.eval(&[xt]) * initial.masses[c]
        });
        assert!(
            (r.lhs - oracle).abs() <= 0.01 * oracle.abs().max(0.05),
            "lhs {} vs oracle {oracle}",
            r.lhs
        );
        assert!(
            (r.rhs - oracle).abs() <= 0.01 * oracle.abs().max(0.05) + 3.0 * r.mc_stderr,
            "rhs {} vs oracle {oracle} (se {})",
            r.rhs,
            r.mc_stderr
        );
    }

    #[test]
    fn grid_convergence_is_first_order() {
        // halving h should cut the moment error by roughly two
        let run = |n_cells: usize| {
            let s = GridSpec {
                x_min: -1.2,
                x_max: 1.8,
                n_cells,
            };
            let g = GridDensity::from_initial_law(
                s,
                &InitialLaw::GaussianDiag {
                    mean: vec![0.5],
                    sd: vec![0.15],
                },
                0.0,
            )
            .unwrap();
            let (lambda, sigma) = (1.0, 0.3);
            let dt = 0.9 * stable_dt(s, lambda, sigma);
            let n_steps = (1.0 / dt).ceil() as usize;
            let dt = 1.0 / n_steps as f64;
            let params = PdeParams {
                lambda,
                sigma,
                alpha: 1.0,
                dt_pde: dt,
                consensus_mode: ConsensusMode::Frozen(ConsensusTrajectory::constant(
                    vec![0.0],
                    2.0,
                )),
            };
            let v0 = g.second_moment_about(0.0);
            let (fd, _) = evolve(&g, &params, &quadratic(), n_steps).unwrap();
            let expected = v0 * ((sigma * sigma - 2.0 * lambda) * 1.0f64).exp();
            (fd.second_moment_about(0.0) - expected).abs()
        };
        let coarse = run(300);
        let fine = run(600);
        let factor = coarse / fine;
        assert!(
            (1.5..=3.0).contains(&factor),
            "refinement factor {factor} (coarse {coarse}, fine {fine})"
        );
    }
}
