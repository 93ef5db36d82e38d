//! Damped Newton solver for the discrete Dirichlet problem with
//! eps-continuation, the separable manufactured solutions, and the
//! eps-convergence study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{abs_pow, energy_raw, max_abs, residual_raw, Density, ExponentPair, Reduction, RegularizationParams};
use crate::error::{Error, Result};
use crate::grid::{domain_integral, Axis, CellField, Grid, Point, ScalarField};
use crate::sparse::{nested_dissection, CholeskyFactor, CholeskySymbolic, UpperCsc};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    /// Step shrink factor in `(0, 1)`.
    pub shrink: f64,
    /// Sufficient-decrease constant in `(0, 1)`.
    pub armijo: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            shrink: 0.5,
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// Transfinite (Coons) blend of the boundary data.
    #[default]
    Transfinite,
    /// Seeded uniform values between the boundary minimum and maximum.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop when the max-norm of the interior residual is at most this.
    pub tol: f64,
    /// Newton iterations allowed per continuation stage.
    pub max_iters: usize,
    /// Strictly decreasing eps values visited before the target eps.
    pub continuation: Vec<f64>,
    pub line_search: LineSearch,
    pub seed: u64,
    pub initial: InitialGuess,
    pub reduction: Reduction,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iters: 100,
            continuation: default_continuation(),
            line_search: LineSearch::default(),
            seed: 0,
            initial: InitialGuess::Transfinite,
            reduction: Reduction::Sequential,
        }
    }
}

/// `1e-1, 1e-2, ..., 1e-8`.
pub fn default_continuation() -> Vec<f64> {
    (1..=8).map(|k| 10f64.powi(-k)).collect()
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if self.continuation.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::param("continuation", "must be strictly decreasing"));
        }
        if self.continuation.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::param("continuation", "entries must be finite and >= 0"));
        }
        let ls = self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0) {
            return Err(Error::param("line_search.shrink", "must lie in (0, 1)"));
        }
        if !(ls.armijo > 0.0 && ls.armijo < 1.0) {
            return Err(Error::param("line_search.armijo", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// The eps stages of a solve targeting `eps`: every continuation value
    /// above the target, then the target itself.
    pub fn stages(&self, eps: f64) -> Vec<f64> {
        let mut s: Vec<f64> = self.continuation.iter().copied().filter(|&e| e > eps).collect();
        s.push(eps);
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub eps: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub energy: f64,
    /// Energy of every accepted iterate, starting with the stage's initial
    /// field.
    pub energy_history: Vec<f64>,
    /// Steps taken along the scaled steepest-descent direction because the
    /// Newton matrix was not numerically positive definite.
    pub first_order_steps: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub stages: Vec<StageReport>,
    pub final_residual: f64,
    pub final_energy: f64,
    pub converged: bool,
    pub first_order_fallback: bool,
}

impl SolveReport {
    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(|s| s.iterations).sum()
    }

    pub fn final_eps(&self) -> f64 {
        self.stages.last().map_or(f64::NAN, |s| s.eps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub field: ScalarField,
    pub report: SolveReport,
}

/// Coons patch of the boundary values: exact for every field of the form
/// `a + b x1 + c x2 + d x1 x2`.
pub fn transfinite_blend(boundary: &ScalarField) -> ScalarField {
    let g = *boundary.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (lx, ly) = ((nx - 1) as f64, (ny - 1) as f64);
    let b = |i, j| boundary.at(i, j);
    let values = g
        .nodes()
        .map(|(i, j)| {
            if g.is_boundary(i, j) {
                return b(i, j);
            }
            let s = i as f64 / lx;
            let t = j as f64 / ly;
            (1.0 - s) * b(0, j) + s * b(nx - 1, j) + (1.0 - t) * b(i, 0) + t * b(i, ny - 1)
                - ((1.0 - s) * (1.0 - t) * b(0, 0)
                    + s * (1.0 - t) * b(nx - 1, 0)
                    + (1.0 - s) * t * b(0, ny - 1)
                    + s * t * b(nx - 1, ny - 1))
        })
        .collect();
    ScalarField::from_raw(g, values)
}

fn random_interior(boundary: &ScalarField, seed: u64) -> ScalarField {
    let g = *boundary.grid();
    let (lo, hi) = boundary.boundary_range();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = g
        .nodes()
        .map(|(i, j)| {
            if g.is_boundary(i, j) {
                boundary.at(i, j)
            } else if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        })
        .collect();
    ScalarField::from_raw(g, values)
}

/// Sparsity pattern and factorization workspace for the Newton matrix on
/// the interior nodes of a grid.
struct NewtonSystem {
    /// Node index of every unknown.
    node: Vec<usize>,
    /// `perm[new] = old` (unknown numbering).
    perm: Vec<usize>,
    matrix: UpperCsc,
    /// Slots of the ten upper-triangle corner pairs of each cell in
    /// `matrix`, `usize::MAX` where a corner is on the boundary.
    cell_slots: Vec<[usize; 10]>,
    symbolic: CholeskySymbolic,
}

/// Corner pairs `(a, b)`, `a <= b`, over corners `00, 10, 01, 11`.
const PAIRS: [(usize, usize); 10] = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];
/// Signs of `d g1 / d u` and `d g2 / d u` at the corners.
const S1: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];
const S2: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

impl NewtonSystem {
    fn new(grid: &Grid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let (w, h) = (nx - 2, ny - 2);
        let mut unknown = vec![usize::MAX; grid.node_count()];
        let mut node = Vec::with_capacity(w * h);
        for (i, j) in grid.interior_nodes() {
            let k = grid.node_index(i, j);
            unknown[k] = node.len();
            node.push(k);
        }
        // interior lattice index (i-1) + (j-1) w coincides with the unknown
        // numbering above
        let perm = nested_dissection(w, h);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let corners = |ci: usize, cj: usize| -> [usize; 4] {
            let k = grid.node_index(ci, cj);
            [k, k + 1, k + nx, k + nx + 1].map(|n| match unknown[n] {
                usize::MAX => usize::MAX,
                u => inv[u],
            })
        };
        let mut entries = Vec::new();
        for (ci, cj) in grid.cells() {
            let c = corners(ci, cj);
            for (a, b) in PAIRS {
                if c[a] != usize::MAX && c[b] != usize::MAX {
                    entries.push((c[a], c[b]));
                }
            }
        }
        let matrix = UpperCsc::from_pattern(node.len(), entries);
        let cell_slots = grid
            .cells()
            .map(|(ci, cj)| {
                let c = corners(ci, cj);
                PAIRS.map(|(a, b)| {
                    if c[a] != usize::MAX && c[b] != usize::MAX {
                        matrix.slot(c[a], c[b]).expect("pattern covers cell pairs")
                    } else {
                        usize::MAX
                    }
                })
            })
            .collect();
        let symbolic = CholeskySymbolic::analyze(&matrix);
        NewtonSystem {
            node,
            perm,
            matrix,
            cell_slots,
            symbolic,
        }
    }

    fn assemble(&mut self, grid: &Grid, values: &[f64], density: &Density) {
        self.matrix.clear();
        let nx = grid.nx();
        let inv2h = 0.5 / grid.h();
        let vals = self.matrix.values_mut();
        for ((ci, cj), slots) in grid.cells().zip(&self.cell_slots) {
            let (g1, g2) = crate::energy::cell_gradient(values, nx, ci, cj, inv2h);
            let (c1, c2) = density.curvature(g1, g2);
            // h^2 * (1 / 2h)^2 = 1/4
            let (w1, w2) = (0.25 * c1, 0.25 * c2);
            for (&(a, b), &slot) in PAIRS.iter().zip(slots) {
                if slot != usize::MAX {
                    vals[slot] += w1 * S1[a] * S1[b] + w2 * S2[a] * S2[b];
                }
            }
        }
    }

    /// Newton direction `-H^{-1} r` in node space, or `None` if `H` is not
    /// numerically positive definite.
    fn newton_direction(&self, residual: &[f64]) -> Option<Vec<f64>> {
        let factor = CholeskyFactor::factor(&self.matrix, &self.symbolic).ok()?;
        let mut rhs: Vec<f64> = self.perm.iter().map(|&u| -residual[self.node[u]]).collect();
        factor.solve_in_place(&mut rhs);
        let mut dir = vec![0.0; residual.len()];
        for (new, &u) in self.perm.iter().enumerate() {
            dir[self.node[u]] = rhs[new];
        }
        Some(dir)
    }

    /// Jacobi-scaled steepest descent `-r_k / H_kk`.
    fn scaled_descent(&self, residual: &[f64]) -> Vec<f64> {
        let mut dir = vec![0.0; residual.len()];
        for (new, &u) in self.perm.iter().enumerate() {
            let k = self.node[u];
            let diag = self
                .matrix
                .slot(new, new)
                .map(|s| self.matrix.values()[s])
                .unwrap_or(0.0);
            let scale = if diag > f64::MIN_POSITIVE { 1.0 / diag } else { 1.0 };
            dir[k] = -residual[k] * scale;
        }
        dir
    }
}

fn check_boundary(initial: &ScalarField) -> Result<()> {
    if initial.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::param("boundary", "boundary values must be finite"));
    }
    Ok(())
}

/// Minimizes the regularized energy with the boundary values of `boundary`
/// held fixed, visiting the continuation stages above `reg.eps` first.
pub fn solve_dirichlet(
    boundary: &ScalarField,
    exps: ExponentPair,
    reg: RegularizationParams,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    let start = match cfg.initial {
        InitialGuess::Transfinite => transfinite_blend(boundary),
        InitialGuess::Random => random_interior(boundary, cfg.seed),
    };
    solve_dirichlet_from(&start, exps, reg, cfg)
}

/// Like [`solve_dirichlet`], but starting from `initial`, whose boundary
/// entries are the Dirichlet data and whose interior is the first iterate.
pub fn solve_dirichlet_from(
    initial: &ScalarField,
    exps: ExponentPair,
    reg: RegularizationParams,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    check_boundary(initial)?;
    let grid = *initial.grid();
    let mut system = NewtonSystem::new(&grid);
    let mut u = initial.values().to_vec();
    let mut r = vec![0.0; u.len()];
    let mut trial = vec![0.0; u.len()];
    let mut stages = Vec::new();

    for eps in cfg.stages(reg.eps) {
        let stage_reg = reg.with_eps(eps)?;
        let density = Density::new(exps, stage_reg);
        let mut e = energy_raw(&grid, &u, &density, cfg.reduction);
        let mut history = vec![e];
        let mut iterations = 0;
        let mut first_order_steps = 0;
        let converged = loop {
            residual_raw(&grid, &u, &density, cfg.reduction, &mut r);
            if max_abs(&r) <= cfg.tol {
                break true;
            }
            if iterations == cfg.max_iters {
                break false;
            }
            system.assemble(&grid, &u, &density);
            let (mut dir, newton) = match system.newton_direction(&r) {
                Some(d) => (d, true),
                None => (system.scaled_descent(&r), false),
            };
            let mut slope: f64 = dir.iter().zip(&r).map(|(d, g)| d * g).sum();
            let mut used_first_order = !newton;
            if !(slope < 0.0) {
                dir = system.scaled_descent(&r);
                slope = dir.iter().zip(&r).map(|(d, g)| d * g).sum();
                used_first_order = true;
            }
            match line_search(&grid, &u, &dir, e, slope, &density, cfg, &mut trial) {
                Some(e_new) => {
                    std::mem::swap(&mut u, &mut trial);
                    e = e_new;
                    history.push(e);
                }
                None => break false,
            }
            if used_first_order {
                first_order_steps += 1;
            }
            iterations += 1;
        };
        stages.push(StageReport {
            eps,
            iterations,
            final_residual: max_abs(&r),
            energy: e,
            energy_history: history,
            first_order_steps,
            converged,
        });
        if !converged {
            let report = finish_report(stages);
            return Err(Error::NotConverged {
                partial: Box::new(Solution {
                    field: ScalarField::from_raw(grid, u),
                    report,
                }),
            });
        }
    }
    Ok(Solution {
        field: ScalarField::from_raw(grid, u),
        report: finish_report(stages),
    })
}

fn finish_report(stages: Vec<StageReport>) -> SolveReport {
    let last = stages.last().expect("at least one stage");
    SolveReport {
        final_residual: last.final_residual,
        final_energy: last.energy,
        converged: stages.iter().all(|s| s.converged),
        first_order_fallback: stages.iter().any(|s| s.first_order_steps > 0),
        stages,
    }
}

/// Energy increase tolerated as rounding noise when comparing two energy
/// evaluations.
pub fn energy_roundoff(e: f64) -> f64 {
    1e-13 * e.abs().max(1e-300)
}

/// Backtracking on the energy with an Armijo condition; writes the accepted
/// iterate to `trial` and returns its energy.
#[allow(clippy::too_many_arguments)]
fn line_search(
    grid: &Grid,
    u: &[f64],
    dir: &[f64],
    e: f64,
    slope: f64,
    density: &Density,
    cfg: &SolverConfig,
    trial: &mut [f64],
) -> Option<f64> {
    let ls = cfg.line_search;
    let slack = energy_roundoff(e);
    let mut alpha = 1.0;
    while alpha > 1e-14 {
        for ((t, &x), &d) in trial.iter_mut().zip(u).zip(dir) {
            *t = x + alpha * d;
        }
        let e_new = energy_raw(grid, trial, density, cfg.reduction);
        if e_new.is_finite() && e_new <= e + ls.armijo * alpha * slope + slack {
            return Some(e_new);
        }
        alpha *= ls.shrink;
    }
    None
}

/// Manufactured solution `u = A |x1|^a - B |x2|^b` with `a = p1/(p1-1)`,
/// `b = p2/(p2-1)` and `(A a)^(p1-1) = (B b)^(p2-1)`, so that both flux
/// divergences are constants of opposite sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableSolution {
    pub exps: ExponentPair,
    pub coef_a: f64,
    pub coef_b: f64,
    pub pow_a: f64,
    pub pow_b: f64,
}

impl SeparableSolution {
    pub fn new(exps: ExponentPair, coef_a: f64) -> Result<Self> {
        if !(coef_a > 0.0 && coef_a.is_finite()) {
            return Err(Error::param("A", format!("must be positive, got {coef_a}")));
        }
        let (p1, p2) = (exps.p1(), exps.p2());
        let pow_a = p1 / (p1 - 1.0);
        let pow_b = p2 / (p2 - 1.0);
        let coef_b = (coef_a * pow_a).powf((p1 - 1.0) / (p2 - 1.0)) / pow_b;
        Ok(SeparableSolution {
            exps,
            coef_a,
            coef_b,
            pow_a,
            pow_b,
        })
    }

    pub fn value(&self, p: Point) -> f64 {
        self.coef_a * p[0].abs().powf(self.pow_a) - self.coef_b * p[1].abs().powf(self.pow_b)
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        [
            self.coef_a * self.pow_a * p[0].abs().powf(self.pow_a - 1.0) * p[0].signum(),
            -self.coef_b * self.pow_b * p[1].abs().powf(self.pow_b - 1.0) * p[1].signum(),
        ]
    }

    /// The constant `(A a)^(p1-1)`: `div` of the first flux component, and
    /// minus that of the second.
    pub fn flux_divergence(&self) -> f64 {
        (self.coef_a * self.pow_a).powf(self.exps.p1() - 1.0)
    }

    pub fn sample(&self, grid: Grid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |p| self.value(p))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsStudyRow {
    pub eps: f64,
    /// `sum_i 2^(2-p_i) int |u^eps_xi - u^ref_xi|^p_i`
    pub lhs: f64,
    /// `(eps/2)(p2-1) int |grad u^ref|^2`
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsStudy {
    pub eps_ref: f64,
    pub rows: Vec<EpsStudyRow>,
    /// Least-squares slope of `ln lhs` against `ln eps` over rows with
    /// `lhs > 0`.
    pub slope: Option<f64>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Distance between regularized solutions and a reference solved at
/// `eps_ref` (default `min(eps_list) / 100`), against the a-priori bound.
/// The sweep is warm-started from one eps to the next.
pub fn epsilon_convergence_study(
    boundary: &ScalarField,
    exps: ExponentPair,
    eps_list: &[f64],
    eps_ref: Option<f64>,
    cfg: &SolverConfig,
) -> Result<EpsStudy> {
    if eps_list.is_empty() {
        return Err(Error::param("eps_list", "must not be empty"));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::param("eps_list", "must be positive and strictly decreasing"));
    }
    let eps_min = *eps_list.last().unwrap();
    let eps_ref = eps_ref.unwrap_or(eps_min / 100.0);
    if !(eps_ref >= 0.0 && eps_ref < eps_min) {
        return Err(Error::param("eps_ref", "must lie in [0, min(eps_list))"));
    }

    let warm = SolverConfig {
        continuation: Vec::new(),
        ..cfg.clone()
    };
    let first = solve_dirichlet(boundary, exps, RegularizationParams::eps(eps_list[0])?, cfg)?;
    let mut solutions = vec![first.field];
    for &eps in &eps_list[1..] {
        let prev = solutions.last().unwrap();
        let s = solve_dirichlet_from(prev, exps, RegularizationParams::eps(eps)?, &warm)?;
        solutions.push(s.field);
    }
    let ref_cfg = SolverConfig {
        continuation: cfg.continuation.iter().copied().filter(|&e| e < eps_min).collect(),
        ..cfg.clone()
    };
    let reference = solve_dirichlet_from(solutions.last().unwrap(), exps, RegularizationParams::eps(eps_ref)?, &ref_cfg)?.field;

    let gref = reference.gradient();
    let grad_sq = domain_integral(&gref.norm_sq());
    let rows: Vec<EpsStudyRow> = eps_list
        .iter()
        .zip(&solutions)
        .map(|(&eps, u)| {
            let g = u.gradient();
            let mut density = vec![0.0; g.grid().cell_count()];
            for axis in Axis::BOTH {
                let p = exps.get(axis);
                let w = 2f64.powf(2.0 - p);
                let a = g.component(axis);
                let b = gref.component(axis);
                for (d, (x, y)) in density.iter_mut().zip(a.values().iter().zip(b.values())) {
                    *d += w * abs_pow(x - y, p);
                }
            }
            let lhs = domain_integral(&CellField::from_raw(*g.grid(), density));
            let rhs = 0.5 * eps * (exps.p2() - 1.0) * grad_sq;
            EpsStudyRow {
                eps,
                lhs,
                rhs,
                ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
            }
        })
        .collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.lhs > 0.0)
        .map(|r| (r.eps.ln(), r.lhs.ln()))
        .unzip();
    Ok(EpsStudy {
        eps_ref,
        slope: fit_slope(&lx, &ly),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::residual;
    use approx::assert_abs_diff_eq;

    fn exps(p1: f64, p2: f64) -> ExponentPair {
        ExponentPair::new(p1, p2).unwrap()
    }

    #[test]
    fn separable_coefficients() {
        let s = SeparableSolution::new(exps(2.0, 4.0), 0.5).unwrap();
        assert_abs_diff_eq!(s.pow_a, 2.0);
        assert_abs_diff_eq!(s.pow_b, 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.coef_b, 0.75, epsilon = 1e-15);

        let s = SeparableSolution::new(exps(3.0, 3.0), 1.0).unwrap();
        assert_abs_diff_eq!(s.coef_b, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.value([0.3, 0.7]), 0.3f64.powf(1.5) - 0.7f64.powf(1.5), epsilon = 1e-15);

        let s = SeparableSolution::new(exps(2.0, 2.0), 1.0).unwrap();
        assert_abs_diff_eq!(s.value([0.4, -0.9]), 0.16 - 0.81, epsilon = 1e-15);
    }

    #[test]
    fn separable_gradient_matches_finite_differences() {
        let s = SeparableSolution::new(exps(2.5, 3.5), 0.8).unwrap();
        let p = [0.37, -0.52];
        let h = 1e-6;
        let g = s.gradient(p);
        let d1 = (s.value([p[0] + h, p[1]]) - s.value([p[0] - h, p[1]])) / (2.0 * h);
        let d2 = (s.value([p[0], p[1] + h]) - s.value([p[0], p[1] - h])) / (2.0 * h);
        assert_abs_diff_eq!(g[0], d1, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], d2, epsilon = 1e-8);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.continuation = vec![1e-2, 1e-1];
        assert!(cfg.validate().is_err());
        cfg.continuation = vec![];
        cfg.tol = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig::default();
        assert_eq!(cfg.stages(1e-3), vec![1e-1, 1e-2, 1e-3]);
        assert_eq!(cfg.stages(0.5), vec![0.5]);
        assert_eq!(cfg.stages(1e-8).len(), 8);
    }

    #[test]
    fn transfinite_blend_reproduces_bilinear_fields() {
        let g = Grid::new([0.0, -1.0], [2.0, 1.0], 9, 5).unwrap();
        let f = |p: Point| 0.3 + 1.1 * p[0] - 0.4 * p[1] + 0.7 * p[0] * p[1];
        let b = ScalarField::from_fn(g, f).unwrap();
        let blend = transfinite_blend(&b);
        assert!(blend.max_abs_diff(&b).unwrap() < 1e-14);
    }

    #[test]
    fn affine_data_is_solved_exactly() {
        let g = Grid::square(-1.0, 1.0, 17).unwrap();
        let b = ScalarField::from_fn(g, |p| 3.0 * p[0] - 2.0 * p[1] + 1.0).unwrap();
        for e in [exps(2.0, 2.0), exps(2.0, 4.0), exps(3.0, 3.0)] {
            let sol = solve_dirichlet(&b, e, RegularizationParams::eps(1e-3).unwrap(), &SolverConfig::default()).unwrap();
            assert!(sol.report.converged);
            assert!(sol.field.max_abs_diff(&b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn newton_reaches_tolerance_from_random_start() {
        let g = Grid::square(0.0, 1.0, 21).unwrap();
        let b = ScalarField::from_fn(g, |p| (2.0 * p[0]).sin() + p[1] * p[1]).unwrap();
        let cfg = SolverConfig {
            initial: InitialGuess::Random,
            seed: 3,
            continuation: vec![1e-1],
            ..SolverConfig::default()
        };
        let sol = solve_dirichlet(&b, exps(2.0, 3.0), RegularizationParams::eps(1e-2).unwrap(), &cfg).unwrap();
        let r = residual(&sol.field, exps(2.0, 3.0), RegularizationParams::eps(1e-2).unwrap());
        assert!(max_abs(r.values()) <= cfg.tol);
        for st in &sol.report.stages {
            for w in st.energy_history.windows(2) {
                assert!(w[1] <= w[0] + energy_roundoff(w[0]), "{w:?}");
            }
        }
    }

    #[test]
    fn laplace_solution_is_independent_of_eps() {
        let g = Grid::square(0.0, 1.0, 17).unwrap();
        let b = ScalarField::from_fn(g, |p| (3.0 * p[0]).cos() * p[1] + p[0] * p[0]).unwrap();
        let cfg = SolverConfig {
            tol: 1e-13,
            ..SolverConfig::default()
        };
        let e = exps(2.0, 2.0);
        let a = solve_dirichlet(&b, e, RegularizationParams::eps(1e-1).unwrap(), &cfg).unwrap();
        let c = solve_dirichlet(&b, e, RegularizationParams::eps(1e-6).unwrap(), &cfg).unwrap();
        assert!(a.field.max_abs_diff(&c.field).unwrap() < 1e-11);
    }

    #[test]
    fn first_order_fallback_at_zero_eps() {
        // Flat data: at eps = 0 and p > 2 the Newton matrix vanishes.
        let g = Grid::square(0.0, 1.0, 9).unwrap();
        let b = ScalarField::constant(g, 1.0);
        let mut start = b.clone().into_values();
        start[g.node_index(4, 4)] = 1.5;
        let start = ScalarField::new(g, start).unwrap();
        let cfg = SolverConfig {
            continuation: vec![],
            max_iters: 5,
            ..SolverConfig::default()
        };
        let out = solve_dirichlet_from(&start, exps(3.0, 3.0), RegularizationParams::NONE, &cfg);
        match out {
            Ok(s) => assert!(s.report.converged),
            Err(Error::NotConverged { partial }) => {
                assert!(!partial.report.converged);
                let st = &partial.report.stages[0];
                assert!(st.energy_history.last().unwrap() < &st.energy_history[0]);
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn non_convergence_reports_partial_state() {
        let g = Grid::square(0.0, 1.0, 17).unwrap();
        let b = ScalarField::from_fn(g, |p| (5.0 * p[0]).sin() * (4.0 * p[1]).cos()).unwrap();
        let cfg = SolverConfig {
            max_iters: 1,
            tol: 1e-14,
            ..SolverConfig::default()
        };
        match solve_dirichlet(&b, exps(2.0, 4.0), RegularizationParams::eps(1e-6).unwrap(), &cfg) {
            Err(Error::NotConverged { partial }) => {
                assert!(!partial.report.converged);
                assert_eq!(partial.report.stages[0].iterations, 1);
                assert_eq!(partial.field.grid(), &g);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn slope_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert_abs_diff_eq!(fit_slope(&x, &y).unwrap(), 2.0, epsilon = 1e-14);
        assert!(fit_slope(&[1.0], &[2.0]).is_none());
    }
}
