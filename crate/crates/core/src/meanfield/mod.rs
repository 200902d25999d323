//! Quantitative probes of the large-ensemble limit: the weak-solution
//! residual functional and its 1/N scaling, moment diagnostics, increment
//! probes, and the Picard reference solver for the limiting dynamics.

mod fphi;
mod increments;
mod moments;
mod picard;
mod testfn;

pub use fphi::{fphi_residual, fphi_scaling_experiment, FphiResult, FphiScalingResult, FphiScalingRow};
pub use increments::{increment_probe, IncrementProbeResult, IncrementRow};
pub use moments::{moment_diagnostics, xalpha_bound_check, MomentDiagnostics, XalphaBoundReport, XalphaBoundRow};
pub use picard::{mckean_picard, ConsensusTrajectory, PicardResult};
pub use testfn::TestFunction;
