//! Particle-based global optimization (consensus dynamics and second-order
//! swarms) together with the diagnostics that make its large-ensemble
//! behaviour checkable at desk scale: consensus-point formulas, moment
//! bounds, the weak-solution residual functional and its 1/N decay,
//! Wasserstein convergence of empirical measures, and a 1D finite-volume
//! solver for the limiting density with a forward–backward duality check.
//!
//! Everything is deterministic per seed: noise comes from counter-based
//! substreams keyed by (seed, step, particle), so thread counts change
//! wall-clock time and nothing else.

pub mod assumptions;
pub mod cbo;
pub mod consensus;
pub mod cost;
pub mod ensemble;
pub mod error;
pub mod math;
pub mod meanfield;
pub mod metrics;
pub mod params;
pub mod pde1d;
pub mod pso;
pub mod rng;

pub use assumptions::{check_assumptions, AssumptionReport, ConditionStatus};
pub use cbo::{em_step, run_optimize, simulate, simulate_from, OptimizationResult, TrajectoryRecord};
pub use consensus::{consensus_point, laplace_value, weights_logsumexp, ConsensusPoint};
pub use cost::{cost_by_name, CostFunction, CostRegistry, GrowthConstants};
pub use ensemble::{EnsembleState, InitialLaw};
pub use error::{Error, Result};
pub use params::SimParams;
pub use pso::{
    pso_consensus, pso_em_step, pso_moment_diagnostics, pso_simulate, pso_simulate_from,
    PsoEnsembleState, PsoInitialLaw, PsoParams, PsoTrajectory,
};
