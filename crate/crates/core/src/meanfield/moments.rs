//! Moment diagnostics over recorded trajectories: the N-uniform moment
//! suprema and the consensus-bound check.

use serde::Serialize;

use crate::cbo::TrajectoryRecord;
use crate::math::{norm_sq, pairwise_sum_by};

/// Suprema over the recorded grid of the ensemble moments and the consensus
/// norms. The interesting property is that none of these grow with N.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentDiagnostics {
    pub sup_m2: f64,
    pub sup_m4: f64,
    pub sup_xalpha_sq: f64,
    pub sup_xalpha_4th: f64,
}

pub fn moment_diagnostics(traj: &TrajectoryRecord) -> MomentDiagnostics {
    let mut out = MomentDiagnostics {
        sup_m2: 0.0,
        sup_m4: 0.0,
        sup_xalpha_sq: 0.0,
        sup_xalpha_4th: 0.0,
    };
    for (snap, cp) in traj.snapshots.iter().zip(&traj.consensus_path) {
        let n = snap.n();
        let m2 = pairwise_sum_by(n, |i| {
            norm_sq(snap.positions.row(i).as_slice().unwrap())
        }) / n as f64;
        let m4 = pairwise_sum_by(n, |i| {
            let s = norm_sq(snap.positions.row(i).as_slice().unwrap());
            s * s
        }) / n as f64;
        let xa_sq = norm_sq(&cp.x_alpha);
        out.sup_m2 = out.sup_m2.max(m2);
        out.sup_m4 = out.sup_m4.max(m4);
        out.sup_xalpha_sq = out.sup_xalpha_sq.max(xa_sq);
        out.sup_xalpha_4th = out.sup_xalpha_4th.max(xa_sq * xa_sq);
    }
    out
}

/// One snapshot's consensus-bound check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct XalphaBoundRow {
    pub t: f64,
    pub xalpha_sq: f64,
    pub m2: f64,
    /// `|X_alpha|^2 <= b1 + b2 m2` for the user-supplied constants.
    pub bound_ok: bool,
    /// The unconditional convex-hull bound `|X_alpha|^2 <= max_i |x_i|^2`.
    pub hull_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct XalphaBoundReport {
    pub rows: Vec<XalphaBoundRow>,
    pub all_bound_ok: bool,
    pub all_hull_ok: bool,
}

/// Check `|X_alpha(mu_t)|^2 <= b1 + b2 m2(t)` at every snapshot, plus the
/// hull bound that holds for any convex combination. Failures are report
/// entries, not errors.
pub fn xalpha_bound_check(traj: &TrajectoryRecord, b1: f64, b2: f64) -> XalphaBoundReport {
    let mut rows = Vec::with_capacity(traj.snapshots.len());
    for (snap, cp) in traj.snapshots.iter().zip(&traj.consensus_path) {
        let n = snap.n();
        let m2 = pairwise_sum_by(n, |i| {
            norm_sq(snap.positions.row(i).as_slice().unwrap())
        }) / n as f64;
        let max_sq = (0..n)
            .map(|i| norm_sq(snap.positions.row(i).as_slice().unwrap()))
            .fold(0.0, f64::max);
        let xalpha_sq = norm_sq(&cp.x_alpha);
        rows.push(XalphaBoundRow {
            t: snap.t,
            xalpha_sq,
            m2,
            bound_ok: xalpha_sq <= b1 + b2 * m2 + 1e-12,
            hull_ok: xalpha_sq <= max_sq * (1.0 + 1e-12) + 1e-300,
        });
    }
    XalphaBoundReport {
        all_bound_ok: rows.iter().all(|r| r.bound_ok),
        all_hull_ok: rows.iter().all(|r| r.hull_ok),
        rows,
    }
}
