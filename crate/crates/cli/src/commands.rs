use std::fs;
use std::path::Path;

use ortho_core::analysis::DiagnosticReport;
use ortho_core::io::{
    diagnostics_json, report_row, reports_csv, solve_report_json, write_atomic, write_field, REPORT_COLUMNS,
};
use ortho_core::{Axis, Error, Grid};
use rayon::prelude::*;

use crate::config::{Check, Experiment};
use crate::error::CliError;
use crate::plot::{Plot, Series};
use crate::suite;

// Progress output; a closed stdout (e.g. piped into `head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

impl Outcome {
    fn from_reports(reports: &[DiagnosticReport]) -> Self {
        if reports.iter().all(|r| r.pass) {
            Outcome::Pass
        } else {
            Outcome::CheckFailed
        }
    }
}

fn out_err(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| out_err(format!("cannot create {}: {e}", dir.display())))
}

fn put(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    write_atomic(path, bytes).map_err(|e| out_err(format!("{}: {e}", path.display())))
}

fn stem(grid: &Grid) -> String {
    format!("n{}", grid.nx())
}

fn describe(rep: &DiagnosticReport) -> String {
    let comp = match rep.params.component {
        Some(Axis::X1) => " x1",
        Some(Axis::X2) => " x2",
        None => "",
    };
    let ratio = rep.ratio.map_or_else(|| "-".to_owned(), |q| format!("{q:.4e}"));
    format!(
        "{} {}{comp} h={} lhs={:.4e} rhs={:.4e} ratio={ratio}",
        if rep.pass { "PASS" } else { "FAIL" },
        rep.name,
        rep.params.h,
        rep.lhs,
        rep.rhs
    )
}

/// Solves on every grid, writing `u_<n>.csv/json` and `solve_<n>.json`, and
/// `errors.csv` when the boundary data has a closed-form solution.
pub fn cmd_solve(exp: &Experiment) -> Result<Outcome, CliError> {
    prepare(&exp.out_dir)?;
    let mut errors = csv_table(&["n", "h", "max_error", "reduction"]);
    let mut previous: Option<f64> = None;
    let mut have_exact = false;
    for &grid in &exp.grids {
        let s = stem(&grid);
        let boundary = exp.boundary.sample(grid, exp.exps)?;
        let reg = suite::regularization(exp, exp.reg.eps)?;
        let sol = match ortho_core::solve_dirichlet(&boundary, exp.exps, reg, &exp.solver) {
            Ok(sol) => sol,
            Err(Error::NotConverged { partial }) => {
                write_field(&exp.out_dir, &format!("u_{s}"), &partial.field).map_err(out_err)?;
                put(&exp.out_dir.join(format!("solve_{s}.json")), &solve_report_json(&partial.report)?)?;
                return Err(CliError::Solver(format!(
                    "grid {s}: no convergence, residual {:.3e}",
                    partial.report.final_residual
                )));
            }
            Err(e) => return Err(e.into()),
        };
        write_field(&exp.out_dir, &format!("u_{s}"), &sol.field).map_err(out_err)?;
        put(&exp.out_dir.join(format!("solve_{s}.json")), &solve_report_json(&sol.report)?)?;
        say!(
            "solved {s}: converged={} iterations={} residual={:.3e} energy={:.10e}",
            sol.report.converged,
            sol.report.total_iterations(),
            sol.report.final_residual,
            sol.report.final_energy
        );
        if let Some(exact) = exp.boundary.exact_solution(grid, exp.exps)? {
            have_exact = true;
            let err = sol.field.max_abs_diff_interior(&exact)?;
            let reduction = previous.filter(|_| err > 0.0).map(|p| p / err);
            errors.push(vec![
                grid.nx().to_string(),
                grid.h().to_string(),
                err.to_string(),
                reduction.map(|r| r.to_string()).unwrap_or_default(),
            ]);
            say!("  max interior error {err:.4e}");
            previous = Some(err);
        }
    }
    if have_exact {
        put(&exp.out_dir.join("errors.csv"), &render_csv(&errors)?)?;
    }
    Ok(Outcome::Pass)
}

type Table = Vec<Vec<String>>;

fn csv_table(header: &[&str]) -> Table {
    vec![header.iter().map(|s| s.to_string()).collect()]
}

fn render_csv(rows: &Table) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(out_err)?;
    }
    w.into_inner().map_err(out_err)
}

fn write_reports(dir: &Path, reports: &[DiagnosticReport]) -> Result<(), CliError> {
    put(&dir.join("diagnostics.json"), &diagnostics_json(reports)?)?;
    put(&dir.join("diagnostics.csv"), &reports_csv(reports)?)
}

pub fn cmd_verify(exp: &Experiment) -> Result<Outcome, CliError> {
    prepare(&exp.out_dir)?;
    let reports = suite::run_suite(exp, &exp.grids, exp.reg.eps)?;
    write_reports(&exp.out_dir, &reports)?;
    for rep in &reports {
        say!("{}", describe(rep));
    }
    Ok(Outcome::from_reports(&reports))
}

struct Job {
    grid: Grid,
    eps: f64,
}

fn job_name(job: &Job) -> String {
    format!("{}_eps{:e}", stem(&job.grid), job.eps)
}

/// Runs every (grid, eps) point as an independent job, then merges the
/// results into `sweep.csv` in job order and draws the plots. The eps study,
/// when enabled, runs once on the finest grid instead of once per job.
pub fn cmd_sweep(exp: &Experiment) -> Result<Outcome, CliError> {
    prepare(&exp.out_dir)?;
    let jobs_dir = exp.out_dir.join("jobs");
    prepare(&jobs_dir)?;
    let eps_values = if exp.eps_list.is_empty() {
        vec![exp.reg.eps]
    } else {
        exp.eps_list.clone()
    };
    let jobs: Vec<Job> = exp
        .grids
        .iter()
        .flat_map(|&grid| eps_values.iter().map(move |&eps| Job { grid, eps }))
        .collect();
    let mut point = exp.clone();
    point.checks.retain(|&c| c != Check::EpsStudy);

    let results: Vec<Result<Vec<DiagnosticReport>, CliError>> = jobs
        .par_iter()
        .map(|job| {
            let reports = suite::run_suite(&point, &[job.grid], job.eps)?;
            put(&jobs_dir.join(format!("{}.json", job_name(job))), &diagnostics_json(&reports)?)?;
            Ok(reports)
        })
        .collect();

    let mut table: Table = vec![["job_n", "job_eps"]
        .into_iter()
        .chain(REPORT_COLUMNS)
        .map(str::to_owned)
        .collect()];
    let mut all = Vec::new();
    let mut per_job = Vec::new();
    for (job, res) in jobs.iter().zip(results) {
        let reports = res?;
        for rep in &reports {
            let mut row = vec![job.grid.nx().to_string(), job.eps.to_string()];
            row.extend(report_row(rep));
            table.push(row);
        }
        all.extend(reports.iter().cloned());
        per_job.push((job, reports));
    }

    let mut study = Vec::new();
    if exp.enabled(Check::EpsStudy) {
        let mut only = exp.clone();
        only.checks = vec![Check::EpsStudy];
        let finest = *exp.grids.last().expect("validated");
        study = suite::run_suite(&only, &[finest], exp.reg.eps)?;
        for rep in &study {
            let mut row = vec![finest.nx().to_string(), "study".to_owned()];
            row.extend(report_row(rep));
            table.push(row);
        }
        all.extend(study.iter().cloned());
    }
    put(&exp.out_dir.join("sweep.csv"), &render_csv(&table)?)?;
    draw_plots(exp, &per_job, &study)?;
    let failed = all.iter().filter(|r| !r.pass).count();
    say!("sweep: {} jobs, {} reports, {} failed", jobs.len(), all.len(), failed);
    for rep in all.iter().filter(|r| !r.pass) {
        say!("{}", describe(rep));
    }
    Ok(Outcome::from_reports(&all))
}

fn component_label(rep: &DiagnosticReport) -> &'static str {
    match rep.params.component {
        Some(Axis::X1) => " x1",
        Some(Axis::X2) => " x2",
        None => "",
    }
}

fn draw_plots(exp: &Experiment, per_job: &[(&Job, Vec<DiagnosticReport>)], study: &[DiagnosticReport]) -> Result<(), CliError> {
    let mut modulus = Plot {
        title: "Fitted modulus constant A(r)".into(),
        x_label: "log(R/r)".into(),
        y_label: "A(r)".into(),
        ..Plot::default()
    };
    let mut osc = Plot {
        title: "Oscillation of the gradient".into(),
        x_label: "r".into(),
        y_label: "osc grad u on B_r".into(),
        log_x: true,
        log_y: true,
        ..Plot::default()
    };
    for (job, reports) in per_job {
        let family: Vec<&DiagnosticReport> = reports
            .iter()
            .filter(|r| r.name == "theorem1" || r.name == "theorem2")
            .collect();
        for comp in [None, Some(Axis::X1), Some(Axis::X2)] {
            let pts: Vec<&DiagnosticReport> = family.iter().copied().filter(|r| r.params.component == comp).collect();
            if pts.is_empty() {
                continue;
            }
            let label = format!("{}{}", job_name(job), component_label(pts[0]));
            modulus.series.push(Series {
                label: label.clone(),
                points: pts
                    .iter()
                    .map(|r| ((exp.big_r / r.params.r.unwrap_or(f64::NAN)).ln(), r.ratio.unwrap_or(0.0)))
                    .collect(),
            });
            osc.series.push(Series {
                label,
                points: pts.iter().map(|r| (r.params.r.unwrap_or(f64::NAN), r.lhs)).collect(),
            });
        }
    }
    put(&exp.out_dir.join("modulus.svg"), modulus.to_svg().as_bytes())?;
    put(&exp.out_dir.join("oscillation.svg"), osc.to_svg().as_bytes())?;

    let rows: Vec<&DiagnosticReport> = study.iter().filter(|r| r.name == "eps_convergence").collect();
    let eps_plot = Plot {
        title: "Convergence as eps -> 0".into(),
        x_label: "eps".into(),
        y_label: "integral".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                label: "lhs".into(),
                points: rows.iter().map(|r| (r.params.eps, r.lhs)).collect(),
            },
            Series {
                label: "rhs bound".into(),
                points: rows.iter().map(|r| (r.params.eps, r.rhs)).collect(),
            },
        ],
    };
    put(&exp.out_dir.join("eps_convergence.svg"), eps_plot.to_svg().as_bytes())
}
