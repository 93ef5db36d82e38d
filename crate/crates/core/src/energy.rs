//! The discrete anisotropic energy
//!
//! ```text
//! E(u) = h^2 sum_cells [ |g1|^p1/p1 + |g2|^p2/p2
//!                        + eps (p1-1) g1^2/2 + eps (p2-1) g2^2/2
//!                        + sigma |g1|^p2/p2 ]
//! ```
//!
//! with `(g1, g2)` the cell-averaged gradient, and its exact gradient with
//! respect to the nodal values (the discrete weak residual).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, ScalarField};

/// Exponents `(p1, p2)` with `2 <= p1 <= p2 < inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    p1: f64,
    p2: f64,
}

impl ExponentPair {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(p1 >= 2.0 && p1 <= p2 && p2.is_finite()) {
            return Err(Error::InvalidExponents { p1, p2 });
        }
        Ok(ExponentPair { p1, p2 })
    }

    /// The single-exponent (orthotropic) case `p1 = p2 = p`.
    pub fn equal(p: f64) -> Result<Self> {
        ExponentPair::new(p, p)
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X1 => self.p1,
            Axis::X2 => self.p2,
        }
    }

    pub fn max(&self) -> f64 {
        self.p2
    }

    pub fn is_equal(&self) -> bool {
        self.p1 == self.p2
    }
}

/// The `eps` (uniform ellipticity) and `sigma` (extra `|g1|^p2`
/// integrability) regularization weights.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RegularizationParams {
    pub eps: f64,
    pub sigma: f64,
}

impl RegularizationParams {
    pub const NONE: RegularizationParams = RegularizationParams { eps: 0.0, sigma: 0.0 };

    pub fn new(eps: f64, sigma: f64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::param("eps", format!("must be finite and >= 0, got {eps}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        Ok(RegularizationParams { eps, sigma })
    }

    pub fn eps(eps: f64) -> Result<Self> {
        RegularizationParams::new(eps, 0.0)
    }

    pub fn with_eps(self, eps: f64) -> Result<Self> {
        RegularizationParams::new(eps, self.sigma)
    }
}

/// How cell contributions are evaluated. Both modes form per-row partial
/// sums and combine them in row order, so results are bitwise identical;
/// `Parallel` only spreads the rows over the rayon pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Sequential,
    Parallel,
}

/// `|t|^(p-2) t`, with `0` at `t = 0`.
#[inline]
pub fn p_flux(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t
    } else if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 2.0) * t
    }
}

/// `|t|^p`.
#[inline]
pub fn abs_pow(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else {
        t.abs().powf(p)
    }
}

/// Derivative of [`p_flux`]: `(p-1)|t|^(p-2)`.
#[inline]
fn p_flux_slope(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        (p - 1.0) * t.abs().powf(p - 2.0)
    }
}

/// Gap in the elementary monotonicity inequality
/// `2^(2-p) |b-a|^p <= (|b|^(p-2) b - |a|^(p-2) a)(b - a)`; nonnegative for
/// `p >= 2`.
pub fn p_inequality_gap(a: f64, b: f64, p: f64) -> f64 {
    (p_flux(b, p) - p_flux(a, p)) * (b - a) - 2f64.powf(2.0 - p) * abs_pow(b - a, p)
}

/// Per-cell energy density and its derivatives, separable in `(g1, g2)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Density {
    p1: f64,
    p2: f64,
    /// `eps (p1 - 1)`
    lin1: f64,
    /// `eps (p2 - 1)`
    lin2: f64,
    sigma: f64,
}

impl Density {
    pub(crate) fn new(exps: ExponentPair, reg: RegularizationParams) -> Self {
        Density {
            p1: exps.p1,
            p2: exps.p2,
            lin1: reg.eps * (exps.p1 - 1.0),
            lin2: reg.eps * (exps.p2 - 1.0),
            sigma: reg.sigma,
        }
    }

    #[inline]
    pub(crate) fn value(&self, g1: f64, g2: f64) -> f64 {
        let mut w = abs_pow(g1, self.p1) / self.p1
            + abs_pow(g2, self.p2) / self.p2
            + 0.5 * (self.lin1 * g1 * g1 + self.lin2 * g2 * g2);
        if self.sigma != 0.0 {
            w += self.sigma * abs_pow(g1, self.p2) / self.p2;
        }
        w
    }

    #[inline]
    pub(crate) fn flux(&self, g1: f64, g2: f64) -> (f64, f64) {
        let mut f1 = p_flux(g1, self.p1) + self.lin1 * g1;
        if self.sigma != 0.0 {
            f1 += self.sigma * p_flux(g1, self.p2);
        }
        let f2 = p_flux(g2, self.p2) + self.lin2 * g2;
        (f1, f2)
    }

    #[inline]
    pub(crate) fn curvature(&self, g1: f64, g2: f64) -> (f64, f64) {
        let mut c1 = p_flux_slope(g1, self.p1) + self.lin1;
        if self.sigma != 0.0 {
            c1 += self.sigma * p_flux_slope(g1, self.p2);
        }
        let c2 = p_flux_slope(g2, self.p2) + self.lin2;
        (c1, c2)
    }
}

#[inline]
pub(crate) fn cell_gradient(values: &[f64], nx: usize, ci: usize, cj: usize, inv2h: f64) -> (f64, f64) {
    let k = cj * nx + ci;
    let u00 = values[k];
    let u10 = values[k + 1];
    let u01 = values[k + nx];
    let u11 = values[k + nx + 1];
    ((u10 - u00 + u11 - u01) * inv2h, (u01 - u00 + u11 - u10) * inv2h)
}

fn row_energy(grid: &Grid, values: &[f64], density: &Density, cj: usize) -> f64 {
    let nx = grid.nx();
    let inv2h = 0.5 / grid.h();
    (0..grid.cells_x())
        .map(|ci| {
            let (g1, g2) = cell_gradient(values, nx, ci, cj, inv2h);
            density.value(g1, g2)
        })
        .sum()
}

pub(crate) fn energy_raw(grid: &Grid, values: &[f64], density: &Density, mode: Reduction) -> f64 {
    let h2 = grid.h() * grid.h();
    let rows: Vec<f64> = match mode {
        Reduction::Sequential => (0..grid.cells_y())
            .map(|cj| row_energy(grid, values, density, cj))
            .collect(),
        Reduction::Parallel => (0..grid.cells_y())
            .into_par_iter()
            .map(|cj| row_energy(grid, values, density, cj))
            .collect(),
    };
    h2 * rows.iter().sum::<f64>()
}

/// Per-cell fluxes `(W1'(g1), W2'(g2))`, flattened as `[f1, f2]` pairs.
fn cell_fluxes(grid: &Grid, values: &[f64], density: &Density, mode: Reduction) -> Vec<[f64; 2]> {
    let nx = grid.nx();
    let cx = grid.cells_x();
    let inv2h = 0.5 / grid.h();
    let row = |cj: usize| -> Vec<[f64; 2]> {
        (0..cx)
            .map(|ci| {
                let (g1, g2) = cell_gradient(values, nx, ci, cj, inv2h);
                let (f1, f2) = density.flux(g1, g2);
                [f1, f2]
            })
            .collect()
    };
    match mode {
        Reduction::Sequential => (0..grid.cells_y()).flat_map(row).collect(),
        Reduction::Parallel => (0..grid.cells_y())
            .into_par_iter()
            .flat_map_iter(row)
            .collect(),
    }
}

/// Gradient of the energy with respect to every nodal value, with boundary
/// entries set to zero. Each node gathers its (up to four) cells in a fixed
/// order, so the result does not depend on `mode`.
pub(crate) fn residual_raw(grid: &Grid, values: &[f64], density: &Density, mode: Reduction, out: &mut [f64]) {
    let fluxes = cell_fluxes(grid, values, density, mode);
    let (nx, ny) = (grid.nx(), grid.ny());
    let cx = grid.cells_x();
    let half_h = 0.5 * grid.h();
    // d g1 / d u = [-1, 1, -1, 1] / 2h and d g2 / d u = [-1, -1, 1, 1] / 2h
    // over corners (00, 10, 01, 11); times the h^2 cell weight.
    let node = |i: usize, j: usize| -> f64 {
        if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
            return 0.0;
        }
        let [a1, a2] = fluxes[(j - 1) * cx + (i - 1)]; // node is corner 11
        let [b1, b2] = fluxes[(j - 1) * cx + i]; // corner 01
        let [c1, c2] = fluxes[j * cx + (i - 1)]; // corner 10
        let [d1, d2] = fluxes[j * cx + i]; // corner 00
        half_h * ((a1 + a2) + (-b1 + b2) + (c1 - c2) + (-d1 - d2))
    };
    match mode {
        Reduction::Sequential => {
            for (k, r) in out.iter_mut().enumerate() {
                *r = node(k % nx, k / nx);
            }
        }
        Reduction::Parallel => {
            out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
                for (i, r) in row.iter_mut().enumerate() {
                    *r = node(i, j);
                }
            });
        }
    }
}

/// Discrete energy of `u` (sequential reference summation).
pub fn energy(u: &ScalarField, exps: ExponentPair, reg: RegularizationParams) -> f64 {
    energy_with(u, exps, reg, Reduction::Sequential)
}

pub fn energy_with(u: &ScalarField, exps: ExponentPair, reg: RegularizationParams, mode: Reduction) -> f64 {
    energy_raw(u.grid(), u.values(), &Density::new(exps, reg), mode)
}

/// Discrete Euler-Lagrange operator: the derivative of [`energy`] with
/// respect to each interior nodal value (zero on the boundary ring).
pub fn residual(u: &ScalarField, exps: ExponentPair, reg: RegularizationParams) -> ScalarField {
    residual_with(u, exps, reg, Reduction::Sequential)
}

pub fn residual_with(
    u: &ScalarField,
    exps: ExponentPair,
    reg: RegularizationParams,
    mode: Reduction,
) -> ScalarField {
    let grid = *u.grid();
    let mut out = vec![0.0; grid.node_count()];
    residual_raw(&grid, u.values(), &Density::new(exps, reg), mode, &mut out);
    ScalarField::from_raw(grid, out)
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> Grid {
        Grid::square(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(ExponentPair::new(2.0, 4.0).is_ok());
        assert!(ExponentPair::new(1.5, 4.0).is_err());
        assert!(ExponentPair::new(4.0, 3.0).is_err());
        assert!(ExponentPair::new(2.0, f64::INFINITY).is_err());
        assert!(RegularizationParams::new(-1.0, 0.0).is_err());
        assert!(RegularizationParams::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn flux_examples() {
        assert_eq!(p_flux(2.0, 3.0), 4.0);
        assert_eq!(p_flux(-2.0, 3.0), -4.0);
        assert_abs_diff_eq!(p_flux(0.5, 4.0), 0.125, epsilon = 1e-15);
        assert_eq!(p_flux(0.0, 3.3), 0.0);
        assert_eq!(p_flux(-0.7, 2.0), -0.7);
    }

    #[test]
    fn inequality_gap_examples() {
        for (a, b) in [(0.3, -1.2), (5.0, 2.0), (0.0, 0.0)] {
            assert_abs_diff_eq!(p_inequality_gap(a, b, 2.0), 0.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(p_inequality_gap(0.0, 1.0, 4.0), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn energy_examples() {
        let g = unit(9);
        let e22 = ExponentPair::new(2.0, 2.0).unwrap();
        let x1 = ScalarField::from_fn(g, |p| p[0]).unwrap();
        assert_abs_diff_eq!(energy(&x1, e22, RegularizationParams::NONE), 0.5, epsilon = 1e-14);

        let e23 = ExponentPair::new(2.0, 3.0).unwrap();
        let s = ScalarField::from_fn(g, |p| p[0] + p[1]).unwrap();
        assert_abs_diff_eq!(energy(&s, e23, RegularizationParams::NONE), 5.0 / 6.0, epsilon = 1e-14);

        let reg = RegularizationParams::eps(0.1).unwrap();
        assert_abs_diff_eq!(energy(&x1, e22, reg), 0.55, epsilon = 1e-14);
    }

    #[test]
    fn sigma_term_uses_p2_on_first_component() {
        let g = unit(5);
        let e = ExponentPair::new(2.0, 4.0).unwrap();
        let u = ScalarField::from_fn(g, |p| 2.0 * p[0]).unwrap();
        let reg = RegularizationParams::new(0.0, 0.5).unwrap();
        // 2^2/2 + 0.5 * 2^4/4
        assert_abs_diff_eq!(energy(&u, e, reg), 2.0 + 2.0, epsilon = 1e-13);
    }

    #[test]
    fn residual_vanishes_on_affine_fields() {
        let g = Grid::square(-1.0, 1.0, 11).unwrap();
        let u = ScalarField::from_fn(g, |p| 0.7 - 1.3 * p[0] + 2.1 * p[1]).unwrap();
        for (p1, p2) in [(2.0, 2.0), (2.0, 4.0), (3.0, 3.0), (2.5, 5.0)] {
            let e = ExponentPair::new(p1, p2).unwrap();
            let reg = RegularizationParams::new(0.3, 0.2).unwrap();
            let r = residual(&u, e, reg);
            assert!(max_abs(r.values()) < 1e-13, "{p1} {p2}: {}", max_abs(r.values()));
        }
    }

    #[test]
    fn residual_is_zero_on_boundary() {
        let g = unit(7);
        let u = ScalarField::from_fn(g, |p| (3.0 * p[0]).sin() * p[1] * p[1]).unwrap();
        let r = residual(&u, ExponentPair::new(2.0, 3.0).unwrap(), RegularizationParams::NONE);
        for (i, j) in g.boundary_nodes() {
            assert_eq!(r.at(i, j), 0.0);
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let g = unit(33);
        let u = ScalarField::from_fn(g, |p| (3.0 * p[0]).sin() * (2.0 * p[1]).cos()).unwrap();
        let e = ExponentPair::new(2.0, 3.5).unwrap();
        let reg = RegularizationParams::new(1e-2, 1e-3).unwrap();
        let a = energy_with(&u, e, reg, Reduction::Sequential);
        let b = energy_with(&u, e, reg, Reduction::Parallel);
        assert_eq!(a, b);
        let ra = residual_with(&u, e, reg, Reduction::Sequential);
        let rb = residual_with(&u, e, reg, Reduction::Parallel);
        assert_eq!(ra, rb);
    }
}
