//! Solving and running the enabled checks for one experiment.

use ortho_core::analysis::{
    boundedness_summary, caccioppoli_first_check, caccioppoli_second_check, corollary_check, integrability_monitor,
    lebesgue_check_derivative, make_cutoff, monotonicity_check, sigma_comparison, stability_summary,
    theorem1_experiment, theorem2_experiment, DiagnosticReport, ReportParams, MAX_RELATIVE_CHANGE, MAX_SPREAD,
    MONOTONICITY_FRACTION,
};
use ortho_core::solver::{energy_roundoff, epsilon_convergence_study};
use ortho_core::{solve_dirichlet, Axis, DiskSpec, Grid, RegularizationParams, ScalarField, Solution};

use crate::config::{Check, Experiment, Injection};
use crate::error::CliError;

/// Smallest acceptable log-log slope of the eps study.
pub const MIN_EPS_SLOPE: f64 = 0.8;

pub fn regularization(exp: &Experiment, eps: f64) -> Result<RegularizationParams, CliError> {
    Ok(RegularizationParams::new(eps, exp.reg.sigma)?)
}

pub fn solve(exp: &Experiment, grid: Grid, eps: f64) -> Result<Solution, CliError> {
    let boundary = exp.boundary.sample(grid, exp.exps)?;
    Ok(solve_dirichlet(&boundary, exp.exps, regularization(exp, eps)?, &exp.solver)?)
}

/// The field the checks see: the solution, or the solution plus a narrow
/// bump when the negative control is enabled.
pub fn checked_field(exp: &Experiment, u: ScalarField) -> Result<ScalarField, CliError> {
    match exp.inject {
        Injection::None => Ok(u),
        Injection::NonMonotone => {
            let r_min = exp.monotonicity_radii.iter().copied().fold(f64::INFINITY, f64::min);
            let width = 0.25 * r_min;
            let slope = u.gradient().norm_sq().values().iter().fold(0.0f64, |m, v| m.max(v.sqrt()));
            let amp = width * (1.0 + slope);
            let c = exp.center;
            let bump = ScalarField::from_fn(*u.grid(), |p| {
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                amp * (-d2 / (2.0 * width * width)).exp()
            })?;
            Ok(u.zip_with(&bump, |a, b| a + b)?)
        }
    }
}

fn stamp(mut rep: DiagnosticReport, exp: &Experiment, eps: f64) -> DiagnosticReport {
    rep.params.p1 = exp.exps.p1();
    rep.params.p2 = exp.exps.p2();
    rep.params.eps = eps;
    rep.params.sigma = exp.reg.sigma;
    rep
}

fn worst_violation(rep: &DiagnosticReport) -> f64 {
    rep.params.values.get("relative_violation").copied().unwrap_or(0.0)
}

/// Checks that need only the field on one grid.
pub fn field_checks(exp: &Experiment, u: &ScalarField, eps: f64) -> Result<Vec<DiagnosticReport>, CliError> {
    let mut out = Vec::new();
    let reg = regularization(exp, eps)?;
    let c = exp.center;
    if exp.enabled(Check::Monotonicity) {
        let disks: Vec<DiskSpec> = exp
            .monotonicity_radii
            .iter()
            .map(|&r| DiskSpec::new(c, r))
            .collect::<Result<_, _>>()?;
        let grad = u.gradient();
        for axis in Axis::BOTH {
            let mut rep = monotonicity_check(&grad.component(axis), &disks, MONOTONICITY_FRACTION)?;
            rep.params.component = Some(axis);
            out.push(rep);
        }
    }
    if exp.enabled(Check::Lebesgue) {
        for axis in Axis::BOTH {
            for &(r1, r2) in &exp.lebesgue_pairs {
                out.push(lebesgue_check_derivative(u, exp.exps, reg, axis, c, r1, r2)?);
            }
        }
    }
    if exp.enabled(Check::Modulus) {
        let reps = if exp.exps.is_equal() {
            theorem1_experiment(u, exp.exps, c, exp.big_r, &exp.r_list)?
        } else {
            theorem2_experiment(u, exp.exps, c, exp.big_r, &exp.r_list)?
        };
        let per_family = exp.r_list.len();
        let families: Vec<Vec<DiagnosticReport>> = reps.chunks(per_family).map(|c| c.to_vec()).collect();
        for family in &families {
            out.extend(family.iter().cloned());
            out.push(boundedness_summary("modulus_bounded", family, MAX_SPREAD)?);
        }
    }
    if exp.enabled(Check::Caccioppoli) {
        let cutoff = make_cutoff(u.grid(), c, exp.cutoff.0, exp.cutoff.1)?;
        out.push(caccioppoli_first_check(u, exp.exps, eps, &cutoff)?);
        for nu in Axis::BOTH {
            out.push(caccioppoli_second_check(u, exp.exps, eps, &cutoff, nu)?);
        }
        out.push(corollary_check(u, exp.exps, eps, &cutoff)?);
    }
    if exp.enabled(Check::Integrability) {
        out.push(integrability_monitor(u, exp.exps, eps, c, exp.integrability_r, exp.big_r)?);
    }
    Ok(out.into_iter().map(|r| stamp(r, exp, eps)).collect())
}

/// Violations must strictly decrease under refinement; a sequence that has
/// reached exactly zero may stay there.
pub fn refinement_summary(name: &str, reports: &[&DiagnosticReport]) -> DiagnosticReport {
    let seq: Vec<f64> = reports.iter().map(|r| worst_violation(r)).collect();
    let pass = seq.windows(2).all(|w| w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0));
    let last = reports.last().expect("at least one report");
    let mut params = ReportParams {
        values: Default::default(),
        ..last.params.clone()
    };
    for (i, (v, r)) in seq.iter().zip(reports).enumerate() {
        params.values.insert(format!("violation_{i}"), *v);
        params.values.insert(format!("h_{i}"), r.params.h);
    }
    let mut rep = DiagnosticReport::measurement(name, *seq.last().unwrap(), seq[0], params);
    rep.pass = pass;
    rep
}

/// Solves `exp` at `eps` on every grid in `grids` and runs the enabled
/// checks, including the cross-grid summaries when there are several grids.
pub fn run_suite(exp: &Experiment, grids: &[Grid], eps: f64) -> Result<Vec<DiagnosticReport>, CliError> {
    let mut per_grid = Vec::new();
    for &grid in grids {
        let u = checked_field(exp, solve(exp, grid, eps)?.field)?;
        per_grid.push(field_checks(exp, &u, eps)?);
    }
    let mut out: Vec<DiagnosticReport> = per_grid.iter().flatten().cloned().collect();
    let finest_grid = *grids.last().expect("at least one grid");

    if grids.len() > 1 && exp.enabled(Check::Monotonicity) {
        for axis in Axis::BOTH {
            let seq: Vec<&DiagnosticReport> = per_grid
                .iter()
                .filter_map(|reps| {
                    reps.iter()
                        .find(|r| r.name == "monotonicity" && r.params.component == Some(axis))
                })
                .collect();
            out.push(refinement_summary("monotonicity_refinement", &seq));
        }
    }
    if exp.enabled(Check::Integrability) {
        if grids.len() > 1 {
            let seq: Vec<DiagnosticReport> = per_grid
                .iter()
                .filter_map(|reps| reps.iter().find(|r| r.name == "integrability").cloned())
                .collect();
            out.push(stability_summary("integrability_refinement", &seq, MAX_RELATIVE_CHANGE)?);
        }
        if exp.integrability_eps.len() > 1 {
            let mut seq = Vec::new();
            for &e in &exp.integrability_eps {
                let u = checked_field(exp, solve(exp, finest_grid, e)?.field)?;
                let rep = integrability_monitor(&u, exp.exps, e, exp.center, exp.integrability_r, exp.big_r)?;
                seq.push(stamp(rep, exp, e));
            }
            out.extend(seq.iter().cloned());
            out.push(stability_summary("integrability_eps", &seq, MAX_RELATIVE_CHANGE)?);
        }
    }
    if exp.enabled(Check::EpsStudy) {
        let boundary = exp.boundary.sample(finest_grid, exp.exps)?;
        let study = epsilon_convergence_study(&boundary, exp.exps, &exp.eps_list, exp.eps_ref, &exp.solver)?;
        for row in &study.rows {
            let mut params = ReportParams::new(exp.exps, RegularizationParams::new(row.eps, 0.0)?, finest_grid.h());
            params.values.insert("eps_ref".into(), study.eps_ref);
            out.push(DiagnosticReport::inequality("eps_convergence", row.lhs, row.rhs, 0.0, params));
        }
        let slope = study.slope.unwrap_or(f64::NAN);
        let mut params = ReportParams::new(exp.exps, RegularizationParams::NONE, finest_grid.h());
        params.values.insert("eps_ref".into(), study.eps_ref);
        params.note = Some("lhs: required slope, rhs: fitted log-log slope".into());
        let mut rep = DiagnosticReport::inequality("eps_slope", MIN_EPS_SLOPE, slope, 0.0, params);
        rep.pass = slope >= MIN_EPS_SLOPE;
        out.push(rep);
    }
    if exp.enabled(Check::Sigma) {
        let boundary = exp.boundary.sample(finest_grid, exp.exps)?;
        let study = sigma_comparison(&boundary, exp.exps, eps, &exp.sigma_list, &exp.solver)?;
        for row in &study.rows {
            let mut params = ReportParams::new(exp.exps, RegularizationParams::new(eps, row.sigma)?, finest_grid.h());
            params.values.insert("gap".into(), row.gap);
            params.values.insert("energy_bound".into(), row.energy_bound);
            let slack = energy_roundoff(row.energy_at_eps_solution) / row.energy_at_eps_solution.abs().max(f64::MIN_POSITIVE);
            out.push(DiagnosticReport::inequality(
                "sigma_minimality",
                row.energy_at_minimizer,
                row.energy_at_eps_solution,
                slack,
                params,
            ));
        }
        let last = study.rows.last().expect("sigma_list is non-empty");
        let mut params = ReportParams::new(exp.exps, RegularizationParams::new(eps, last.sigma)?, finest_grid.h());
        for (i, row) in study.rows.iter().enumerate() {
            params.values.insert(format!("gap_{i}"), row.gap);
        }
        let first_gap = study.rows[0].gap;
        let mut rep = DiagnosticReport::measurement("sigma_gap_decreasing", last.gap, first_gap, params);
        rep.pass = study.gaps_decreasing;
        out.push(rep);
    }
    Ok(out)
}
