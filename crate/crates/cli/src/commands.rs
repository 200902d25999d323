//! One function per subcommand: build inputs from the config (config errors
//! exit 2), run the corresponding library operation (numerical errors exit
//! 3), and write one CSV table plus one JSON summary.

use serde::Serialize;

use cbo_core::cbo::{run_optimize_from, simulate_from};
use cbo_core::consensus::laplace_value;
use cbo_core::math::median;
use cbo_core::meanfield::{
    fphi_scaling_experiment, increment_probe, mckean_picard, TestFunction,
};
use cbo_core::metrics::{w2_1d, w2_sliced, Sample};
use cbo_core::pde1d::{pde_vs_particles, GridSpec};
use cbo_core::pso::{pso_moment_diagnostics, pso_simulate_from};
use cbo_core::{check_assumptions, rng};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{fmt_f64, OutputWriter};

fn phi_from_config(cfg: &ExperimentConfig) -> Result<TestFunction, CliError> {
    let exp = cfg.experiment()?;
    let center = exp.phi_center.clone().unwrap_or_else(|| vec![0.0; cfg.sim.dim]);
    let radius = exp.phi_radius.unwrap_or(5.0);
    TestFunction::new(center, radius).map_err(|e| CliError::config(e.to_string()))
}

pub fn cmd_optimize(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let sim = cfg.build_sim()?;
    let init = cfg.build_init()?;
    let (success_radius, record_every) = match &cfg.experiment {
        Some(exp) => (
            exp.success_radius.unwrap_or(f64::INFINITY),
            exp.record_every.unwrap_or(1),
        ),
        None => (f64::INFINITY, 1),
    };

    let result = run_optimize_from(&cost, &sim, success_radius, &init)?;
    // history on the recorded grid (re-run the trajectory for consensus/ess)
    let traj = simulate_from(&cost, &sim, record_every, &init)?;

    let mut headers: Vec<String> = vec!["t".into()];
    headers.extend((0..sim.dim).map(|k| format!("xalpha_{k}")));
    headers.push("variance".into());
    headers.push("ess".into());
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = traj
        .snapshots
        .iter()
        .zip(&traj.consensus_path)
        .map(|(snap, cp)| {
            let mut row = vec![fmt_f64(snap.t)];
            row.extend(cp.x_alpha.iter().map(|&v| fmt_f64(v)));
            row.push(fmt_f64(snap.variance()));
            row.push(fmt_f64(cp.ess));
            row
        })
        .collect();
    out.write_table("history", &header_refs, &rows)?;

    #[derive(Serialize)]
    struct Payload {
        best_point: Vec<f64>,
        best_value: f64,
        success: bool,
        final_variance: f64,
    }
    out.write_summary(
        "result",
        "optimize",
        cfg,
        &Payload {
            best_point: result.best_point.clone(),
            best_value: result.best_value,
            success: result.success,
            final_variance: *result.variance_history.last().unwrap_or(&f64::NAN),
        },
    )?;
    Ok(())
}

pub fn cmd_fphi_scaling(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let sim = cfg.build_sim()?;
    let init = cfg.build_init()?;
    let exp = cfg.experiment()?;
    let n_list = exp
        .n_list
        .clone()
        .ok_or_else(|| CliError::config("missing experiment.n_list".into()))?;
    let replicas = exp
        .replicas
        .ok_or_else(|| CliError::config("missing experiment.replicas".into()))?;
    let phi = phi_from_config(cfg)?;

    let res = fphi_scaling_experiment(&cost, &sim, &init, &n_list, replicas, &phi)?;

    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt_f64(r.mean_sq), fmt_f64(r.stderr)])
        .collect();
    out.write_table("fphi", &["n", "mean_sq", "stderr"], &rows)?;

    #[derive(Serialize)]
    struct Payload {
        slope: Option<f64>,
        slope_stderr: Option<f64>,
        degenerate: bool,
    }
    out.write_summary(
        "summary",
        "fphi-scaling",
        cfg,
        &Payload {
            slope: res.slope,
            slope_stderr: res.slope_stderr,
            degenerate: res.degenerate,
        },
    )?;
    Ok(())
}

const CONVERGE_STREAM: u64 = 0xC0;

pub fn cmd_meanfield_converge(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let sim = cfg.build_sim()?;
    let init = cfg.build_init()?;
    let exp = cfg.experiment()?;
    let n_list = exp
        .n_list
        .clone()
        .ok_or_else(|| CliError::config("missing experiment.n_list".into()))?;
    let seeds = exp.seeds.unwrap_or(10);
    let reference = exp.reference.clone().unwrap_or_else(|| "picard".into());
    let reference_samples = exp.reference_samples.unwrap_or(8192);

    let reference_sample: Sample = match reference.as_str() {
        "picard" => {
            let tol = exp.tol.unwrap_or(5e-4);
            let max_iters = exp.max_iters.unwrap_or(30);
            let res = mckean_picard(&cost, &sim, &init, reference_samples, max_iters, tol)?;
            Sample::from_state(&res.final_ensemble)
        }
        "large_n" => {
            let mut p = sim.clone();
            p.n_particles = reference_samples;
            p.seed = rng::derive_seed(sim.seed, &[CONVERGE_STREAM, 0xFF]);
            let traj = simulate_from(&cost, &p, p.steps(), &init)?;
            Sample::from_state(traj.final_state())
        }
        other => {
            return Err(CliError::config(format!(
                "experiment.reference must be \"picard\" or \"large_n\", got `{other}`"
            )))
        }
    };

    let distance = |a: &Sample, b: &Sample| -> Result<f64, CliError> {
        if sim.dim == 1 {
            Ok(w2_1d(a, b)?)
        } else {
            Ok(w2_sliced(a, b, 64, sim.seed)?)
        }
    };

    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &n in &n_list {
        let mut dists = Vec::new();
        for s in 0..seeds {
            let mut p = sim.clone();
            p.n_particles = n;
            p.seed = rng::derive_seed(sim.seed, &[CONVERGE_STREAM, n as u64, s as u64]);
            let traj = simulate_from(&cost, &p, p.steps(), &init)?;
            let w2 = distance(&Sample::from_state(traj.final_state()), &reference_sample)?;
            rows.push(vec![n.to_string(), s.to_string(), fmt_f64(w2)]);
            dists.push(w2);
        }
        medians.push((n, median(&dists)));
    }
    out.write_table("w2", &["n", "seed", "w2"], &rows)?;

    #[derive(Serialize)]
    struct Payload {
        reference: String,
        reference_samples: usize,
        medians: Vec<(usize, f64)>,
    }
    out.write_summary(
        "summary",
        "meanfield-converge",
        cfg,
        &Payload {
            reference,
            reference_samples,
            medians,
        },
    )?;
    Ok(())
}

pub fn cmd_laplace(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let sim = cfg.build_sim()?;
    let init = cfg.build_init()?;
    let exp = cfg.experiment()?;
    let alphas = exp
        .alphas
        .clone()
        .ok_or_else(|| CliError::config("missing experiment.alphas".into()))?;
    if alphas.iter().any(|&a| a <= 0.0) {
        return Err(CliError::config("alphas must be > 0".into()));
    }

    // cost vector from one ensemble draw of the initial law
    let positions = init.sample(sim.n_particles, sim.dim, sim.seed, 0)?;
    let costs: Vec<f64> = (0..sim.n_particles)
        .map(|i| cost.eval(positions.row(i).as_slice().unwrap()))
        .collect();
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let log_n = (sim.n_particles as f64).ln();

    let mut rows = Vec::new();
    let mut all_within = true;
    for &alpha in &alphas {
        let value = laplace_value(&costs, alpha)?;
        let upper = min_cost + log_n / alpha;
        let within = value >= min_cost - 1e-10 && value <= upper + 1e-10;
        all_within &= within;
        rows.push(vec![
            fmt_f64(alpha),
            fmt_f64(value),
            fmt_f64(min_cost),
            fmt_f64(upper),
            within.to_string(),
        ]);
    }
    out.write_table(
        "laplace",
        &["alpha", "value", "min_cost", "upper_bound", "within_bracket"],
        &rows,
    )?;

    #[derive(Serialize)]
    struct Payload {
        all_within_bracket: bool,
        min_cost: f64,
    }
    out.write_summary(
        "summary",
        "laplace",
        cfg,
        &Payload {
            all_within_bracket: all_within,
            min_cost,
        },
    )?;
    Ok(())
}

pub fn cmd_pde_compare(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let sim = cfg.build_sim()?;
    let init = cfg.build_init()?;
    let exp = cfg.experiment()?;
    let n_list = exp
        .n_list
        .clone()
        .ok_or_else(|| CliError::config("missing experiment.n_list".into()))?;
    let seeds = exp.seeds.unwrap_or(10);
    let grid: GridSpec = exp
        .grid
        .ok_or_else(|| CliError::config("missing experiment.grid".into()))?
        .into();
    grid.validate().map_err(|e| CliError::config(e.to_string()))?;

    let res = pde_vs_particles(&cost, &sim, grid, &init, exp.dt_pde, &n_list, seeds)?;

    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), r.seed_index.to_string(), fmt_f64(r.l1)])
        .collect();
    out.write_table("pde_compare", &["n", "seed", "l1"], &rows)?;

    let mut medians = Vec::new();
    for &n in &n_list {
        let vals: Vec<f64> = res
            .rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.l1)
            .collect();
        medians.push((n, median(&vals)));
    }

    #[derive(Serialize)]
    struct Payload {
        medians: Vec<(usize, f64)>,
        pde_stats: cbo_core::pde1d::PdeRunStats,
    }
    out.write_summary(
        "summary",
        "pde-compare",
        cfg,
        &Payload {
            medians,
            pde_stats: res.pde_stats,
        },
    )?;
    Ok(())
}

pub fn cmd_pso(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let (params, init) = cfg.build_pso()?;
    let record_every = cfg
        .experiment
        .as_ref()
        .and_then(|e| e.record_every)
        .unwrap_or(1);

    let traj = pso_simulate_from(&cost, &params, record_every, &init)?;
    let sup_moment = pso_moment_diagnostics(&traj);

    let mut headers: Vec<String> = vec!["t".into()];
    headers.extend((0..params.dim).map(|k| format!("xalpha_{k}")));
    headers.push("pos_m2".into());
    headers.push("vel_m2".into());
    headers.push("m4_sum".into());
    let header_refs: Vec<&str> = headers.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = traj
        .snapshots
        .iter()
        .zip(&traj.consensus_path)
        .map(|(snap, cp)| {
            let n = snap.n() as f64;
            let m2 = |a: &ndarray::Array2<f64>| {
                a.iter().map(|v| v * v).sum::<f64>() / n
            };
            let m4 = |a: &ndarray::Array2<f64>| {
                a.rows()
                    .into_iter()
                    .map(|r| {
                        let s: f64 = r.iter().map(|v| v * v).sum();
                        s * s
                    })
                    .sum::<f64>()
                    / n
            };
            let mut row = vec![fmt_f64(snap.t)];
            row.extend(cp.x_alpha.iter().map(|&v| fmt_f64(v)));
            row.push(fmt_f64(m2(&snap.positions)));
            row.push(fmt_f64(m2(&snap.velocities)));
            row.push(fmt_f64(m4(&snap.positions) + m4(&snap.velocities)));
            row
        })
        .collect();
    out.write_table("pso_history", &header_refs, &rows)?;

    #[derive(Serialize)]
    struct Payload {
        sup_fourth_moment: f64,
        final_consensus: Vec<f64>,
        gamma: f64,
    }
    out.write_summary(
        "summary",
        "pso",
        cfg,
        &Payload {
            sup_fourth_moment: sup_moment,
            final_consensus: traj.consensus_path.last().unwrap().x_alpha.clone(),
            gamma: params.gamma(),
        },
    )?;
    Ok(())
}

pub fn cmd_assumptions(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let exp = cfg.experiment()?;
    let box_radius = exp
        .box_radius
        .ok_or_else(|| CliError::config("missing experiment.box_radius".into()))?;
    let n_samples = exp
        .n_samples
        .ok_or_else(|| CliError::config("missing experiment.n_samples".into()))?;

    let report = check_assumptions(&cost, box_radius, n_samples, cfg.sim.seed)?;

    let fmt_opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "nan".into());
    let rows = vec![
        vec![
            "lipschitz".to_string(),
            format!("{:?}", report.lipschitz.status).to_lowercase(),
            fmt_opt(report.lipschitz.observed),
            fmt_opt(report.lipschitz.bound),
        ],
        vec![
            "upper_growth".to_string(),
            format!("{:?}", report.upper_growth.status).to_lowercase(),
            fmt_opt(report.upper_growth.observed),
            fmt_opt(report.upper_growth.bound),
        ],
        vec![
            "lower_growth".to_string(),
            format!("{:?}", report.lower_growth.status).to_lowercase(),
            fmt_opt(report.lower_growth.observed),
            fmt_opt(report.lower_growth.bound),
        ],
    ];
    out.write_table("assumptions", &["condition", "status", "observed", "bound"], &rows)?;

    #[derive(Serialize)]
    struct Payload {
        report: cbo_core::AssumptionReport,
        all_pass: bool,
    }
    let all_pass = report.all_pass();
    out.write_summary(
        "summary",
        "assumptions",
        cfg,
        &Payload { report, all_pass },
    )?;
    Ok(())
}

pub fn cmd_increment_probe(cfg: &ExperimentConfig, out: &OutputWriter) -> Result<(), CliError> {
    let cost = cfg.build_cost()?;
    let sim = cfg.build_sim()?;
    let init = cfg.build_init()?;
    let exp = cfg.experiment()?;
    let deltas = exp
        .deltas
        .clone()
        .ok_or_else(|| CliError::config("missing experiment.deltas".into()))?;
    let replicas = exp
        .replicas
        .ok_or_else(|| CliError::config("missing experiment.replicas".into()))?;

    let res = increment_probe(&cost, &sim, &init, &deltas, replicas)?;

    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .map(|r| vec![fmt_f64(r.delta), fmt_f64(r.mean_sq), fmt_f64(r.stderr)])
        .collect();
    out.write_table("increments", &["delta", "mean_sq", "stderr"], &rows)?;

    #[derive(Serialize)]
    struct Payload {
        fitted_c: f64,
        loglog_slope: f64,
        drift_dominated: bool,
        probe_time: f64,
    }
    out.write_summary(
        "summary",
        "increment-probe",
        cfg,
        &Payload {
            fitted_c: res.fitted_c,
            loglog_slope: res.loglog_slope,
            drift_dominated: res.drift_dominated,
            probe_time: res.probe_time,
        },
    )?;
    Ok(())
}

