//! Run configuration: one TOML file per experiment, schema-validated with
//! unknown keys rejected before any computation starts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cbo_core::ensemble::InitialLaw;
use cbo_core::pde1d::GridSpec;
use cbo_core::pso::{PsoInitialLaw, PsoParams};
use cbo_core::{cost_by_name, CostFunction, SimParams};

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cost: CostConfig,
    pub sim: SimConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pso: Option<PsoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub n_particles: usize,
    pub dim: usize,
    pub seed: u64,
    /// Initial law of the ensemble; uniform on [-3, 3]^d when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialLaw>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoConfig {
    pub m: f64,
    /// Standard deviation of the Gaussian initial velocities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_sd: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_radius: Option<f64>,
    /// Reference for convergence runs: "picard" or "large_n".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_sde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_pde: Option<f64>,
    /// Frozen consensus location for linear-PDE experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

impl From<GridConfig> for GridSpec {
    fn from(g: GridConfig) -> Self {
        GridSpec {
            x_min: g.x_min,
            x_max: g.x_max,
            n_cells: g.n_cells,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Any of "csv", "json", "dat"; csv + json when empty.
    #[serde(default)]
    pub formats: Vec<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        for f in &self.output.formats {
            if !matches!(f.as_str(), "csv" | "json" | "dat") {
                return Err(CliError::config(format!("unknown output format `{f}`")));
            }
        }
        Ok(())
    }

    pub fn build_cost(&self) -> Result<CostFunction, CliError> {
        cost_by_name(&self.cost.name, self.sim.dim, &self.cost.params)
            .map_err(|e| CliError::config(e.to_string()))
    }

    pub fn build_sim(&self) -> Result<SimParams, CliError> {
        let p = SimParams {
            lambda: self.sim.lambda,
            sigma: self.sim.sigma,
            alpha: self.sim.alpha,
            dt: self.sim.dt,
            t_final: self.sim.t_final,
            n_particles: self.sim.n_particles,
            dim: self.sim.dim,
            seed: self.sim.seed,
        };
        p.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(p)
    }

    pub fn build_init(&self) -> Result<InitialLaw, CliError> {
        let law = self.sim.init.clone().unwrap_or_default();
        law.validate(self.sim.dim)
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(law)
    }

    pub fn build_pso(&self) -> Result<(PsoParams, PsoInitialLaw), CliError> {
        let pso = self
            .pso
            .as_ref()
            .ok_or_else(|| CliError::config("missing [pso] section".into()))?;
        let params = PsoParams {
            m: pso.m,
            lambda: self.sim.lambda,
            sigma: self.sim.sigma,
            alpha: self.sim.alpha,
            dt: self.sim.dt,
            t_final: self.sim.t_final,
            n_particles: self.sim.n_particles,
            dim: self.sim.dim,
            seed: self.sim.seed,
        };
        params
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        let sd = pso.velocity_sd.unwrap_or(1.0);
        let init = PsoInitialLaw {
            position: self.build_init()?,
            velocity: InitialLaw::GaussianDiag {
                mean: vec![0.0; self.sim.dim],
                sd: vec![sd; self.sim.dim],
            },
        };
        Ok((params, init))
    }

    pub fn experiment(&self) -> Result<&ExperimentSection, CliError> {
        self.experiment
            .as_ref()
            .ok_or_else(|| CliError::config("missing [experiment] section".into()))
    }
}
