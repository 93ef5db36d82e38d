//! Experiment configuration: a restricted TOML file (sections of scalar and
//! flat-array keys). See the README for the grammar.

use std::path::{Path, PathBuf};

use ortho_core::analysis::dyadic_radii;
use ortho_core::problems::BoundaryData;
use ortho_core::solver::{InitialGuess, LineSearch};
use ortho_core::{DiskSpec, ExponentPair, Grid, Point, Reduction, RegularizationParams, SolverConfig};
use serde::Deserialize;

use crate::error::CliError;

pub const OUT_ENV: &str = "ORTHO_OUT";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub exponents: ExponentSection,
    #[serde(default)]
    pub regularization: RegularizationSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub disks: DiskSection,
    #[serde(default)]
    pub checks: CheckSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default = "default_origin")]
    pub origin: Point,
    #[serde(default = "default_extent")]
    pub extent: [f64; 2],
    /// Node counts along x1; the x2 count follows from the extent.
    pub grids: Vec<usize>,
    pub boundary: BoundaryId,
    /// Affine coefficients `c0 + c1 x1 + c2 x2`.
    #[serde(default)]
    pub coefficients: Option<[f64; 3]>,
    #[serde(default)]
    pub coef_a: Option<f64>,
    #[serde(default)]
    pub corner: Option<Point>,
    #[serde(default)]
    pub k: Option<f64>,
}

fn default_origin() -> Point {
    [-1.0, -1.0]
}

fn default_extent() -> [f64; 2] {
    [2.0, 2.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryId {
    Affine,
    Separable,
    Corner,
    Trig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    pub p1: f64,
    pub p2: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSection {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Eps values for the eps study and for `sweep`.
    #[serde(default)]
    pub eps_list: Vec<f64>,
    /// Reference eps of the eps study; defaults to `min(eps_list) / 100`.
    #[serde(default)]
    pub eps_ref: Option<f64>,
    /// Decreasing sigma values for the sigma comparison.
    #[serde(default)]
    pub sigma_list: Vec<f64>,
}

fn default_eps() -> f64 {
    1e-3
}

impl Default for RegularizationSection {
    fn default() -> Self {
        RegularizationSection {
            eps: default_eps(),
            sigma: 0.0,
            eps_list: Vec::new(),
            eps_ref: None,
            sigma_list: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "ortho_core::solver::default_continuation")]
    pub continuation: Vec<f64>,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default = "default_armijo")]
    pub armijo: f64,
    #[serde(default)]
    pub initial: InitialGuess,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reduction: Reduction,
}

fn default_tol() -> f64 {
    SolverConfig::default().tol
}
fn default_max_iters() -> usize {
    SolverConfig::default().max_iters
}
fn default_shrink() -> f64 {
    LineSearch::default().shrink
}
fn default_armijo() -> f64 {
    LineSearch::default().armijo
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            tol: d.tol,
            max_iters: d.max_iters,
            continuation: d.continuation,
            shrink: d.line_search.shrink,
            armijo: d.line_search.armijo,
            initial: d.initial,
            seed: d.seed,
            reduction: d.reduction,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSection {
    pub center: Point,
    /// Outer radius `R` of the modulus-of-continuity experiments
    /// (which use the disk of radius `2R`) and of the integrability monitor.
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Radii `r < R`; defaults to `R 2^-k`, `k = 1..=levels`.
    #[serde(default)]
    pub r_list: Vec<f64>,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Nested disks of the monotonicity check.
    #[serde(default)]
    pub monotonicity_radii: Vec<f64>,
    /// Inner radii of the Lebesgue check.
    #[serde(default)]
    pub lebesgue_radii: Vec<f64>,
    /// `r2 / r1` ratios of the Lebesgue check.
    #[serde(default = "default_factors")]
    pub lebesgue_factors: Vec<f64>,
    #[serde(default)]
    pub cutoff_inner: Option<f64>,
    #[serde(default)]
    pub cutoff_outer: Option<f64>,
    /// Inner radius of the integrability monitor.
    #[serde(default)]
    pub integrability_r: Option<f64>,
}

fn default_levels() -> usize {
    5
}

fn default_factors() -> Vec<f64> {
    vec![2.0, 4.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Monotonicity,
    Lebesgue,
    Modulus,
    Caccioppoli,
    Integrability,
    EpsStudy,
    Sigma,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    #[default]
    None,
    /// Adds a narrow bump at the disk center to every solved field, so its
    /// derivatives have interior extrema.
    NonMonotone,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "default_checks")]
    pub enabled: Vec<Check>,
    #[serde(default)]
    pub inject: Injection,
    /// Eps values over which the integrability monitor must be stable.
    #[serde(default)]
    pub integrability_eps: Vec<f64>,
}

fn default_checks() -> Vec<Check> {
    vec![Check::Monotonicity, Check::Lebesgue, Check::Modulus, Check::Caccioppoli]
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            enabled: default_checks(),
            inject: Injection::None,
            integrability_eps: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub deterministic: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            deterministic: false,
        }
    }
}

/// Validated, ready-to-run form of the configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub grids: Vec<Grid>,
    pub boundary: BoundaryData,
    pub exps: ExponentPair,
    pub reg: RegularizationParams,
    pub eps_list: Vec<f64>,
    pub eps_ref: Option<f64>,
    pub sigma_list: Vec<f64>,
    pub solver: SolverConfig,
    pub center: Point,
    pub big_r: f64,
    pub r_list: Vec<f64>,
    pub monotonicity_radii: Vec<f64>,
    pub lebesgue_pairs: Vec<(f64, f64)>,
    pub cutoff: (f64, f64),
    pub integrability_r: f64,
    pub checks: Vec<Check>,
    pub inject: Injection,
    pub integrability_eps: Vec<f64>,
    pub out_dir: PathBuf,
}

impl Experiment {
    pub fn enabled(&self, check: Check) -> bool {
        self.checks.contains(&check)
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {reason}"))
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn boundary_data(p: &ProblemSection) -> Result<BoundaryData, CliError> {
    let need = |name: &str, v: Option<f64>| v.ok_or_else(|| invalid(&format!("problem.{name}"), "required for this boundary"));
    Ok(match p.boundary {
        BoundaryId::Affine => {
            let [c0, c1, c2] = p
                .coefficients
                .ok_or_else(|| invalid("problem.coefficients", "required for affine boundary data"))?;
            BoundaryData::Affine { c0, c1, c2 }
        }
        BoundaryId::Separable => BoundaryData::Separable {
            coef_a: need("coef_a", p.coef_a)?,
        },
        BoundaryId::Corner => BoundaryData::Corner {
            center: p.corner.unwrap_or([0.0, 0.0]),
        },
        BoundaryId::Trig => BoundaryData::Trig { k: need("k", p.k)? },
    })
}

fn build_grids(p: &ProblemSection) -> Result<Vec<Grid>, CliError> {
    if p.grids.is_empty() {
        return Err(invalid("problem.grids", "must list at least one grid"));
    }
    if p.grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("problem.grids", "must be strictly refining (increasing node counts)"));
    }
    p.grids
        .iter()
        .map(|&n| {
            if n < 3 {
                return Err(invalid("problem.grids", format!("node count {n} below 3")));
            }
            let h = p.extent[0] / (n - 1) as f64;
            let cells_y = p.extent[1] / h;
            let ny = cells_y.round();
            if (cells_y - ny).abs() > 1e-9 * cells_y.max(1.0) {
                return Err(invalid(
                    "problem.grids",
                    format!("{n} nodes along x1 give spacing {h} that does not divide the x2 extent"),
                ));
            }
            Grid::new(p.origin, p.extent, n, ny as usize + 1).map_err(|e| invalid("problem", e))
        })
        .collect()
}

fn positive(field: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn inside(field: &str, grid: &Grid, center: Point, r: f64) -> Result<(), CliError> {
    DiskSpec::new(center, r)
        .and_then(|d| d.check_inside(grid))
        .map_err(|e| invalid(field, e))
}

impl ExperimentConfig {
    /// Validates the configuration; `out_override` (from `--out` or the
    /// environment) replaces `output.dir`.
    pub fn resolve(&self, out_override: Option<PathBuf>, deterministic: bool) -> Result<Experiment, CliError> {
        let grids = build_grids(&self.problem)?;
        let exps =
            ExponentPair::new(self.exponents.p1, self.exponents.p2).map_err(|e| invalid("exponents", e))?;
        let boundary = boundary_data(&self.problem)?;
        boundary.validate(exps).map_err(|e| invalid("problem", e))?;
        let r = &self.regularization;
        let reg = RegularizationParams::new(r.eps, r.sigma).map_err(|e| invalid("regularization", e))?;
        if r.eps_list.windows(2).any(|w| !(w[1] < w[0])) || r.eps_list.iter().any(|&e| !(e > 0.0)) {
            return Err(invalid("regularization.eps_list", "must be positive and strictly decreasing"));
        }
        if let Some(e) = r.eps_ref {
            positive("regularization.eps_ref", e)?;
        }
        if r.sigma_list.windows(2).any(|w| !(w[1] < w[0])) || r.sigma_list.iter().any(|&s| !(s >= 0.0)) {
            return Err(invalid("regularization.sigma_list", "must be nonnegative and strictly decreasing"));
        }

        let s = &self.solver;
        let solver = SolverConfig {
            tol: s.tol,
            max_iters: s.max_iters,
            continuation: s.continuation.clone(),
            line_search: LineSearch {
                shrink: s.shrink,
                armijo: s.armijo,
            },
            seed: s.seed,
            initial: s.initial,
            reduction: if deterministic || self.output.deterministic {
                Reduction::Sequential
            } else {
                s.reduction
            },
        };
        solver.validate().map_err(|e| invalid("solver", e))?;

        let d = &self.disks;
        let coarse = &grids[0];
        let big_r = positive("disks.R", d.big_r)?;
        let r_list = if d.r_list.is_empty() {
            if d.levels == 0 {
                return Err(invalid("disks.levels", "must be at least 1"));
            }
            dyadic_radii(big_r, d.levels)
        } else {
            d.r_list.clone()
        };
        for &rr in &r_list {
            if !(rr > 0.0 && rr < big_r) {
                return Err(invalid("disks.r_list", format!("radius {rr} must lie in (0, R) with R = {big_r}")));
            }
        }
        let mut checks = self.checks.enabled.clone();
        checks.sort();
        checks.dedup();
        if checks.contains(&Check::Modulus) {
            inside("disks.R", coarse, d.center, 2.0 * big_r)
                .map_err(|e| CliError::Config(format!("{e} (the modulus check integrates over radius 2R)")))?;
        }
        inside("disks.R", coarse, d.center, big_r)?;

        let monotonicity_radii = if d.monotonicity_radii.is_empty() {
            vec![0.25 * big_r, 0.5 * big_r, big_r]
        } else {
            d.monotonicity_radii.clone()
        };
        for &rr in &monotonicity_radii {
            positive("disks.monotonicity_radii", rr)?;
            inside("disks.monotonicity_radii", coarse, d.center, rr)?;
        }

        let lebesgue_radii = if d.lebesgue_radii.is_empty() {
            vec![0.25 * big_r]
        } else {
            d.lebesgue_radii.clone()
        };
        let mut lebesgue_pairs = Vec::new();
        for &r1 in &lebesgue_radii {
            positive("disks.lebesgue_radii", r1)?;
            for &q in &d.lebesgue_factors {
                if !(q > 1.0) {
                    return Err(invalid("disks.lebesgue_factors", format!("ratio {q} must exceed 1")));
                }
                inside("disks.lebesgue_radii", coarse, d.center, r1 * q)?;
                lebesgue_pairs.push((r1, r1 * q));
            }
        }

        let cutoff = (
            d.cutoff_inner.unwrap_or(0.5 * big_r),
            d.cutoff_outer.unwrap_or(big_r),
        );
        positive("disks.cutoff_inner", cutoff.0)?;
        if !(cutoff.1 > cutoff.0) {
            return Err(invalid("disks.cutoff_outer", "must exceed cutoff_inner"));
        }
        inside("disks.cutoff_outer", coarse, d.center, cutoff.1)?;

        let integrability_r = d.integrability_r.unwrap_or(0.5 * big_r);
        if !(integrability_r > 0.0 && integrability_r < big_r) {
            return Err(invalid("disks.integrability_r", "must lie in (0, R)"));
        }

        if checks.contains(&Check::Integrability) && !(exps.p1() < exps.p2()) {
            return Err(invalid("checks.enabled", "integrability needs p1 < p2"));
        }
        if checks.contains(&Check::EpsStudy) && r.eps_list.is_empty() {
            return Err(invalid("regularization.eps_list", "required by the eps_study check"));
        }
        if checks.contains(&Check::Sigma) && r.sigma_list.is_empty() {
            return Err(invalid("regularization.sigma_list", "required by the sigma check"));
        }
        let integrability_eps = self.checks.integrability_eps.clone();
        if integrability_eps.windows(2).any(|w| !(w[1] < w[0])) || integrability_eps.iter().any(|&e| !(e > 0.0)) {
            return Err(invalid("checks.integrability_eps", "must be positive and strictly decreasing"));
        }

        let out_dir = out_override
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| self.output.dir.clone());

        Ok(Experiment {
            grids,
            boundary,
            exps,
            reg,
            eps_list: r.eps_list.clone(),
            eps_ref: r.eps_ref,
            sigma_list: r.sigma_list.clone(),
            solver,
            center: d.center,
            big_r,
            r_list,
            monotonicity_radii,
            lebesgue_pairs,
            cutoff,
            integrability_r,
            checks,
            inject: self.checks.inject,
            integrability_eps,
            out_dir,
        })
    }
}
