use crate::config::Plan;
use crate::output::{render, render_with_header, OutputFile};
use anyhow::Result;
use nlwave::experiments::{
    decay_series, run_h_refinement, run_profile_study, run_truncation_study,
    simulate as run_simulation, uniform_snapshots,
};
use serde::Serialize;

/// Rendered files plus a human-readable report for stdout.
pub struct Outcome {
    pub files: Vec<OutputFile>,
    pub report: String,
}

#[derive(Serialize)]
struct ProfileRow {
    x: f64,
    numeric: f64,
}

#[derive(Serialize)]
struct ProfileExactRow {
    x: f64,
    numeric: f64,
    exact: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    kernel: String,
    nonlinearity: String,
    h: f64,
    #[serde(rename = "N")]
    n_half: usize,
    t_end: f64,
    outputs: usize,
    linf_error: Option<f64>,
    accepted_steps: usize,
    rejected_steps: usize,
    rhs_evaluations: usize,
    mass_drift: f64,
}

pub fn simulate(plan: &Plan) -> Result<Outcome> {
    let study = run_profile_study(
        &plan.problem,
        plan.half_width.unwrap(),
        plan.h.unwrap(),
        plan.t_end,
        &plan.snapshot_times,
        &plan.options,
    )?;
    let traj = &study.run.trajectory;
    let mut files = Vec::new();
    for (k, (t, state)) in traj.times.iter().zip(&traj.states).enumerate() {
        let name = format!("profile_t{t}.csv");
        files.push(match &study.exact {
            Some(exact) => {
                let rows: Vec<ProfileExactRow> = state
                    .iter()
                    .zip(exact[k].values())
                    .map(|((x, numeric), &exact)| ProfileExactRow { x, numeric, exact })
                    .collect();
                render(name, &rows)?
            }
            None => {
                let rows: Vec<ProfileRow> = state
                    .iter()
                    .map(|(x, numeric)| ProfileRow { x, numeric })
                    .collect();
                render(name, &rows)?
            }
        });
    }
    let stats = traj.step_statistics;
    let grid = plan.grid();
    let linf_error = study.record.as_ref().map(|r| r.linf_error);
    let summary = SummaryRow {
        kernel: plan.problem.kernel.name().to_string(),
        nonlinearity: plan.problem.nonlinearity.to_string(),
        h: grid.h(),
        n_half: grid.n_half(),
        t_end: plan.t_end,
        outputs: traj.times.len(),
        linf_error,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        rhs_evaluations: stats.rhs_evaluations,
        mass_drift: study.run.mass_drift(),
    };
    files.push(render("summary.csv", &[summary])?);
    let mut report = format!(
        "simulated {} on {grid} to t = {}: {} accepted steps, {} profiles",
        plan.problem.kernel,
        plan.t_end,
        stats.accepted,
        traj.times.len()
    );
    if let Some(e) = linf_error {
        report += &format!(", max error {e:e}");
    }
    Ok(Outcome { files, report })
}

#[derive(Serialize)]
struct ConvergenceRow {
    h: f64,
    #[serde(rename = "N")]
    n_half: usize,
    linf_error: f64,
    rho_vs_previous: Option<f64>,
    accepted_steps: usize,
    wall_seconds: f64,
}

pub fn converge(plan: &Plan) -> Result<Outcome> {
    let rows = run_h_refinement(
        &plan.problem,
        plan.half_width.unwrap(),
        &plan.h_list,
        plan.t_end,
        &plan.options,
    )?;
    let csv_rows: Vec<ConvergenceRow> = rows
        .iter()
        .map(|r| ConvergenceRow {
            h: r.record.h,
            n_half: r.record.n_half,
            linf_error: r.record.linf_error,
            rho_vs_previous: r.rate.map(|e| e.rho),
            accepted_steps: r.record.accepted_steps,
            wall_seconds: r.record.wall_seconds,
        })
        .collect();
    let header = [
        "h",
        "N",
        "linf_error",
        "rho_vs_previous",
        "accepted_steps",
        "wall_seconds",
    ];
    let rates: Vec<String> = rows
        .iter()
        .filter_map(|r| r.rate)
        .map(|r| format!("{:.4}", r.rho))
        .collect();
    Ok(Outcome {
        files: vec![render_with_header("convergence.csv", &header, &csv_rows)?],
        report: format!("{} mesh sizes, rates [{}]", rows.len(), rates.join(", ")),
    })
}

#[derive(Serialize)]
struct TruncationCsvRow {
    #[serde(rename = "N")]
    n_half: usize,
    domain_half_width: f64,
    linf_error: f64,
    delta: f64,
    eps_delta: f64,
}

pub fn truncation(plan: &Plan) -> Result<Outcome> {
    let h = plan.h.unwrap();
    let study = run_truncation_study(&plan.problem, h, &plan.n_list, plan.t_end, &plan.options)?;
    let rows: Vec<TruncationCsvRow> = study
        .rows
        .iter()
        .map(|r| TruncationCsvRow {
            n_half: r.record.n_half,
            domain_half_width: r.record.n_half as f64 * h,
            linf_error: r.record.linf_error,
            delta: r.delta,
            eps_delta: r.eps_delta,
        })
        .collect();
    let onset = match study.plateau_onset {
        Some(n) => format!("plateau from N = {n}"),
        None => "no plateau detected".into(),
    };
    Ok(Outcome {
        files: vec![render("truncation.csv", &rows)?],
        report: format!("{} domain sizes, {onset}", rows.len()),
    })
}

#[derive(Serialize)]
struct DecayRow {
    t: f64,
    worst_ratio: f64,
    worst_x: f64,
    holds: bool,
}

pub fn decay(plan: &Plan) -> Result<Outcome> {
    let snapshots = match plan.decay_snapshots {
        Some(count) => uniform_snapshots(plan.t_end, count),
        None if plan.snapshot_times.is_empty() => uniform_snapshots(plan.t_end, 20),
        None => plan.snapshot_times.clone(),
    };
    let run = run_simulation(
        &plan.problem,
        plan.grid(),
        plan.t_end,
        &snapshots,
        &plan.options,
    )?;
    let (envelope, reports) = decay_series(&run.trajectory, plan.decay_rate, plan.decay_scale)?;
    let rows: Vec<DecayRow> = reports
        .iter()
        .map(|(t, r)| DecayRow {
            t: *t,
            worst_ratio: r.worst_ratio,
            worst_x: r.worst_x,
            holds: r.holds,
        })
        .collect();
    let failing = rows.iter().filter(|r| !r.holds).count();
    Ok(Outcome {
        files: vec![render("decay.csv", &rows)?],
        report: format!(
            "envelope C = {:e}, r = {}, s = {}: {failing} of {} snapshots exceed it",
            envelope.constant(),
            envelope.rate(),
            envelope.scale(),
            rows.len()
        ),
    })
}
