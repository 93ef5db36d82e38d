//! Uniform node lattices over a rectangle, nodal and per-cell fields, and the
//! disk/circle sampling used by the oscillation and integral diagnostics.
//!
//! Nodes are indexed `(i, j)` with `i` running along `x1` and `j` along `x2`,
//! stored row-major (`j * nx + i`). Cell `(ci, cj)` has its lower-left corner
//! at node `(ci, cj)`; per-cell arrays use the same row-major layout with
//! `nx - 1` cells per row.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Coordinate axis of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::X1, Axis::X2];

    pub fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
        }
    }
}

/// Relative tolerance used for "inside the rectangle" tests, so that points
/// produced by `origin + k * h` are never rejected by rounding.
const GEOM_RTOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Point,
    extent: [f64; 2],
    n: [usize; 2],
    h: f64,
}

impl Grid {
    /// Builds a grid with `nx * ny` nodes covering `origin + [0, extent]`.
    ///
    /// The spacing must agree in both axes.
    pub fn new(origin: Point, extent: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {nx} x {ny}"
            )));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if !(extent[0] > 0.0 && extent[1] > 0.0 && extent[0].is_finite() && extent[1].is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "degenerate extent ({}, {})",
                extent[0], extent[1]
            )));
        }
        let hx = extent[0] / (nx - 1) as f64;
        let hy = extent[1] / (ny - 1) as f64;
        if (hx - hy).abs() > 1e-12 * hx.max(hy) {
            return Err(Error::InvalidGrid(format!(
                "unequal spacing: {hx} along x1 but {hy} along x2"
            )));
        }
        Ok(Grid {
            origin,
            extent,
            n: [nx, ny],
            h: hx,
        })
    }

    /// Square grid `[lo, hi]^2` with `n` nodes per axis.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Grid::new([lo, lo], [hi - lo, hi - lo], n, n)
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }

    pub fn nx(&self) -> usize {
        self.n[0]
    }

    pub fn ny(&self) -> usize {
        self.n[1]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn cells_x(&self) -> usize {
        self.n[0] - 1
    }

    pub fn cells_y(&self) -> usize {
        self.n[1] - 1
    }

    pub fn cell_count(&self) -> usize {
        self.cells_x() * self.cells_y()
    }

    /// Upper corner of the rectangle.
    pub fn upper(&self) -> Point {
        [
            self.origin[0] + self.extent[0],
            self.origin[1] + self.extent[1],
        ]
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.n[0] + i
    }

    #[inline]
    pub fn cell_index(&self, ci: usize, cj: usize) -> usize {
        cj * (self.n[0] - 1) + ci
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    #[inline]
    pub fn cell_center(&self, ci: usize, cj: usize) -> Point {
        [
            self.origin[0] + (ci as f64 + 0.5) * self.h,
            self.origin[1] + (cj as f64 + 0.5) * self.h,
        ]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n[0] || j + 1 == self.n[1]
    }

    /// Node indices `(i, j)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.n[0];
        (0..self.node_count()).map(move |k| (k % nx, k / nx))
    }

    /// Cell indices `(ci, cj)` in storage order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cx = self.cells_x();
        (0..self.cell_count()).map(move |k| (k % cx, k / cx))
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes().filter(move |&(i, j)| self.is_boundary(i, j))
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes().filter(move |&(i, j)| !self.is_boundary(i, j))
    }

    fn tol(&self) -> f64 {
        GEOM_RTOL * self.extent[0].max(self.extent[1])
    }

    pub fn contains(&self, p: Point) -> bool {
        let tol = self.tol();
        let hi = self.upper();
        p[0] >= self.origin[0] - tol
            && p[0] <= hi[0] + tol
            && p[1] >= self.origin[1] - tol
            && p[1] <= hi[1] + tol
    }

    /// Grid with the two axes exchanged.
    pub fn transposed(&self) -> Grid {
        Grid {
            origin: [self.origin[1], self.origin[0]],
            extent: [self.extent[1], self.extent[0]],
            n: [self.n[1], self.n[0]],
            h: self.h,
        }
    }

    /// Cell containing `p` and the local coordinates of `p` in it.
    fn locate(&self, p: Point) -> Result<(usize, usize, f64, f64)> {
        if !self.contains(p) {
            return Err(Error::OutsideGrid { x1: p[0], x2: p[1] });
        }
        let (ci, s) = locate_axis((p[0] - self.origin[0]) / self.h, self.cells_x());
        let (cj, t) = locate_axis((p[1] - self.origin[1]) / self.h, self.cells_y());
        Ok((ci, cj, s, t))
    }
}

/// Splits a lattice coordinate into a cell index in `0..cells` and a local
/// coordinate in `[0, 1]`, clamping to the outermost cells.
#[inline]
fn locate_axis(s: f64, cells: usize) -> (usize, f64) {
    let k = (s.floor().max(0.0) as usize).min(cells - 1);
    let t = (s - k as f64).clamp(0.0, 1.0);
    (k, t)
}

#[inline]
fn bilinear(v00: f64, v10: f64, v01: f64, v11: f64, s: f64, t: f64) -> f64 {
    (1.0 - t) * ((1.0 - s) * v00 + s * v10) + t * ((1.0 - s) * v01 + s * v11)
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::FieldMismatch(format!(
            "{what} entry {k} is not finite ({})",
            values[k]
        ))),
        None => Ok(()),
    }
}

/// Fields that can be evaluated anywhere in the grid rectangle and at cell
/// centers. Circle sampling and oscillations are written against this.
pub trait PlanarField {
    fn grid(&self) -> &Grid;

    /// Bilinear interpolation at `p`.
    fn interpolate(&self, p: Point) -> Result<f64>;

    /// Value attributed to the center of cell `(ci, cj)`.
    fn cell_value(&self, ci: usize, cj: usize) -> f64;

    /// Per-cell discrete gradient.
    fn cell_gradient(&self) -> CellGradientField;
}

/// Nodal values on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::FieldMismatch(format!(
                "expected {} nodal values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        check_finite(&values, "nodal value")?;
        Ok(ScalarField { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        ScalarField { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField::from_raw(grid, vec![c; grid.node_count()])
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = grid.nodes().map(|(i, j)| f(grid.node(i, j))).collect();
        ScalarField::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node_index(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        ScalarField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        ScalarField::from_raw(self.grid, self.values.iter().map(|v| s * v).collect())
    }

    /// Pointwise combination with another field on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::new(self.grid, values)
    }

    /// Largest absolute nodal difference.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    /// Same as [`ScalarField::max_abs_diff`] but restricted to interior nodes.
    pub fn max_abs_diff_interior(&self, other: &ScalarField) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .grid
            .interior_nodes()
            .map(|(i, j)| (self.at(i, j) - other.at(i, j)).abs())
            .fold(0.0, f64::max))
    }

    /// Field on the transposed grid, `v'(i, j) = v(j, i)`.
    pub fn transposed(&self) -> ScalarField {
        let tg = self.grid.transposed();
        let values = tg.nodes().map(|(i, j)| self.at(j, i)).collect();
        ScalarField::from_raw(tg, values)
    }

    /// Minimum and maximum over boundary nodes.
    pub fn boundary_range(&self) -> (f64, f64) {
        self.grid
            .boundary_nodes()
            .map(|(i, j)| self.at(i, j))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Cell-averaged two-difference gradient.
    pub fn gradient(&self) -> CellGradientField {
        discrete_gradient(self)
    }

    /// Average of the four corner values of every cell.
    pub fn cell_average(&self) -> CellField {
        let g = self.grid;
        let values = g
            .cells()
            .map(|(ci, cj)| {
                0.25 * (self.at(ci, cj)
                    + self.at(ci + 1, cj)
                    + self.at(ci, cj + 1)
                    + self.at(ci + 1, cj + 1))
            })
            .collect();
        CellField::from_raw(g, values)
    }
}

impl PlanarField for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn interpolate(&self, p: Point) -> Result<f64> {
        let (ci, cj, s, t) = self.grid.locate(p)?;
        Ok(bilinear(
            self.at(ci, cj),
            self.at(ci + 1, cj),
            self.at(ci, cj + 1),
            self.at(ci + 1, cj + 1),
            s,
            t,
        ))
    }

    fn cell_value(&self, ci: usize, cj: usize) -> f64 {
        0.25 * (self.at(ci, cj) + self.at(ci + 1, cj) + self.at(ci, cj + 1) + self.at(ci + 1, cj + 1))
    }

    fn cell_gradient(&self) -> CellGradientField {
        discrete_gradient(self)
    }
}

fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a != b {
        return Err(Error::FieldMismatch("fields live on different grids".into()));
    }
    Ok(())
}

/// One value per cell, attributed to the cell center.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    grid: Grid,
    values: Vec<f64>,
}

impl CellField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::FieldMismatch(format!(
                "expected {} cell values, got {}",
                grid.cell_count(),
                values.len()
            )));
        }
        check_finite(&values, "cell value")?;
        Ok(CellField { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        CellField { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        CellField::from_raw(grid, vec![c; grid.cell_count()])
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = grid
            .cells()
            .map(|(ci, cj)| f(grid.cell_center(ci, cj)))
            .collect();
        CellField::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, ci: usize, cj: usize) -> f64 {
        self.values[self.grid.cell_index(ci, cj)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        CellField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &CellField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        CellField::new(self.grid, values)
    }

    /// Nodal field obtained by averaging the cells adjacent to each node
    /// (four in the interior, two on edges, one at corners).
    pub fn to_nodes(&self) -> ScalarField {
        let g = self.grid;
        let (cx, cy) = (g.cells_x(), g.cells_y());
        let values = g
            .nodes()
            .map(|(i, j)| {
                let mut sum = 0.0;
                let mut count = 0usize;
                for cj in j.saturating_sub(1)..=j.min(cy - 1) {
                    for ci in i.saturating_sub(1)..=i.min(cx - 1) {
                        sum += self.at(ci, cj);
                        count += 1;
                    }
                }
                sum / count as f64
            })
            .collect();
        ScalarField::from_raw(g, values)
    }

    /// Gradient of a cell field: average back to the nodes, then apply the
    /// cell-averaged two-difference gradient again. Used for all second
    /// derivatives.
    pub fn gradient(&self) -> CellGradientField {
        discrete_gradient(&self.to_nodes())
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl PlanarField for CellField {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Bilinear interpolation on the lattice of cell centers; points within
    /// half a cell of the rectangle edge are clamped onto that lattice.
    fn interpolate(&self, p: Point) -> Result<f64> {
        let g = &self.grid;
        if !g.contains(p) {
            return Err(Error::OutsideGrid { x1: p[0], x2: p[1] });
        }
        let (cx, cy) = (g.cells_x(), g.cells_y());
        let sx = ((p[0] - g.origin[0]) / g.h - 0.5).clamp(0.0, (cx - 1) as f64);
        let sy = ((p[1] - g.origin[1]) / g.h - 0.5).clamp(0.0, (cy - 1) as f64);
        let (ci, s) = locate_axis(sx, cx - 1);
        let (cj, t) = locate_axis(sy, cy - 1);
        Ok(bilinear(
            self.at(ci, cj),
            self.at(ci + 1, cj),
            self.at(ci, cj + 1),
            self.at(ci + 1, cj + 1),
            s,
            t,
        ))
    }

    fn cell_value(&self, ci: usize, cj: usize) -> f64 {
        self.at(ci, cj)
    }

    fn cell_gradient(&self) -> CellGradientField {
        self.gradient()
    }
}

/// Per-cell discrete gradient `(g1, g2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellGradientField {
    grid: Grid,
    g1: Vec<f64>,
    g2: Vec<f64>,
}

impl CellGradientField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn g1(&self) -> &[f64] {
        &self.g1
    }

    pub fn g2(&self) -> &[f64] {
        &self.g2
    }

    pub fn component(&self, axis: Axis) -> CellField {
        let v = match axis {
            Axis::X1 => self.g1.clone(),
            Axis::X2 => self.g2.clone(),
        };
        CellField::from_raw(self.grid, v)
    }

    /// `|grad|^2` per cell.
    pub fn norm_sq(&self) -> CellField {
        let v = self
            .g1
            .iter()
            .zip(&self.g2)
            .map(|(a, b)| a * a + b * b)
            .collect();
        CellField::from_raw(self.grid, v)
    }
}

/// Cell-averaged two-difference gradient. For a cell with corner values
/// `u00, u10, u01, u11` (offsets along `x1`, `x2`):
/// `g1 = (u10 - u00 + u11 - u01) / 2h`, `g2 = (u01 - u00 + u11 - u10) / 2h`.
pub fn discrete_gradient(u: &ScalarField) -> CellGradientField {
    let g = u.grid;
    let inv = 0.5 / g.h;
    let mut g1 = Vec::with_capacity(g.cell_count());
    let mut g2 = Vec::with_capacity(g.cell_count());
    for (ci, cj) in g.cells() {
        let u00 = u.at(ci, cj);
        let u10 = u.at(ci + 1, cj);
        let u01 = u.at(ci, cj + 1);
        let u11 = u.at(ci + 1, cj + 1);
        g1.push((u10 - u00 + u11 - u01) * inv);
        g2.push((u01 - u00 + u11 - u10) * inv);
    }
    CellGradientField { grid: g, g1, g2 }
}

/// Closed disk used for oscillations and integrals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskSpec {
    pub center: Point,
    pub r: f64,
}

impl DiskSpec {
    pub fn new(center: Point, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param("r", format!("radius must be positive, got {r}")));
        }
        if !(center[0].is_finite() && center[1].is_finite()) {
            return Err(Error::param("center", "must be finite"));
        }
        Ok(DiskSpec { center, r })
    }

    /// Errors unless the closed disk lies inside the grid rectangle.
    pub fn check_inside(&self, grid: &Grid) -> Result<()> {
        let tol = grid.tol();
        let lo = grid.origin;
        let hi = grid.upper();
        let c = self.center;
        if c[0] - self.r < lo[0] - tol
            || c[0] + self.r > hi[0] + tol
            || c[1] - self.r < lo[1] - tol
            || c[1] + self.r > hi[1] + tol
        {
            return Err(Error::DiskOutsideGrid {
                x1: c[0],
                x2: c[1],
                r: self.r,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy <= self.r * self.r
    }

    #[inline]
    pub fn contains_strictly(&self, p: Point) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy < self.r * self.r
    }

    pub fn with_radius(&self, r: f64) -> Result<Self> {
        DiskSpec::new(self.center, r)
    }
}

/// Number of circle samples that resolves a field at grid resolution:
/// `max(64, ceil(8 * 2 pi r / h))`.
pub fn circle_sample_count(r: f64, h: f64) -> usize {
    ((8.0 * 2.0 * PI * r / h).ceil() as usize).max(64)
}

/// Field values at `m` equispaced angles (starting at angle 0) on the circle
/// bounding `disk`.
pub fn sample_circle<F: PlanarField + ?Sized>(field: &F, disk: &DiskSpec, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::param("m", "need at least one sample"));
    }
    disk.check_inside(field.grid())?;
    (0..m)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / m as f64;
            let p = [
                disk.center[0] + disk.r * theta.cos(),
                disk.center[1] + disk.r * theta.sin(),
            ];
            field.interpolate(p)
        })
        .collect()
}

/// Circle samples with the default resolution of [`circle_sample_count`].
pub fn sample_circle_default<F: PlanarField + ?Sized>(field: &F, disk: &DiskSpec) -> Result<Vec<f64>> {
    let m = circle_sample_count(disk.r, field.grid().h());
    sample_circle(field, disk, m)
}

/// Cell-center values of all cells whose center lies in the closed disk.
pub fn cells_in_disk<F: PlanarField + ?Sized>(field: &F, disk: &DiskSpec) -> Result<Vec<f64>> {
    let g = *field.grid();
    disk.check_inside(&g)?;
    Ok(g.cells()
        .filter(|&(ci, cj)| disk.contains(g.cell_center(ci, cj)))
        .map(|(ci, cj)| field.cell_value(ci, cj))
        .collect())
}

/// Midpoint quadrature over the disk: sum of `f(cell) h^2` over cells whose
/// center lies in the closed disk.
pub fn disk_integral(f: &CellField, disk: &DiskSpec) -> Result<f64> {
    let g = f.grid;
    disk.check_inside(&g)?;
    let h2 = g.h * g.h;
    let mut sum = 0.0;
    for (ci, cj) in g.cells() {
        if disk.contains(g.cell_center(ci, cj)) {
            sum += f.at(ci, cj);
        }
    }
    Ok(sum * h2)
}

/// Midpoint quadrature over the whole rectangle.
pub fn domain_integral(f: &CellField) -> f64 {
    let h = f.grid.h;
    f.values.iter().sum::<f64>() * h * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn build_grid_examples() {
        let g = Grid::new([-1.0, -1.0], [2.0, 2.0], 5, 5).unwrap();
        assert_eq!(g.h(), 0.5);
        let g = Grid::new([0.0, 0.0], [1.0, 2.0], 3, 5).unwrap();
        assert_eq!(g.h(), 0.5);
        assert!(matches!(
            Grid::new([0.0, 0.0], [1.0, 1.0], 3, 4),
            Err(Error::InvalidGrid(_))
        ));
        assert!(Grid::new([0.0, 0.0], [0.0, 1.0], 3, 3).is_err());
        assert!(Grid::new([0.0, 0.0], [1.0, 1.0], 2, 2).is_err());
    }

    #[test]
    fn boundary_and_interior_partition() {
        let g = Grid::square(0.0, 1.0, 6).unwrap();
        assert_eq!(g.boundary_nodes().count(), 20);
        assert_eq!(g.interior_nodes().count(), 16);
    }

    #[test]
    fn gradient_of_affine_and_constant() {
        let g = Grid::square(-1.0, 1.0, 9).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let grad = u.gradient();
        for (a, b) in grad.g1().iter().zip(grad.g2()) {
            assert_abs_diff_eq!(*a, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(*b, 0.0, epsilon = 1e-14);
        }
        let c = ScalarField::constant(g, 3.5).gradient();
        assert!(c.g1().iter().chain(c.g2()).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_of_bilinear_product() {
        // u = x1 x2 on the cell [0, 0.5]^2: corners 0, 0, 0, 0.25.
        let g = Grid::square(0.0, 1.0, 3).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0] * p[1]).unwrap();
        let grad = u.gradient();
        assert_abs_diff_eq!(grad.g1()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(grad.g2()[0], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn interpolation_examples() {
        let g = Grid::square(-1.0, 1.0, 11).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0]).unwrap();
        assert_abs_diff_eq!(u.interpolate([0.3141, -0.777]).unwrap(), 0.3141, epsilon = 1e-14);
        let w = ScalarField::from_fn(g, |p| p[0] * p[1] + 2.0 * p[1]).unwrap();
        assert_eq!(w.interpolate(g.node(3, 7)).unwrap(), w.at(3, 7));

        let g = Grid::square(0.0, 1.0, 5).unwrap();
        let h = g.h();
        let u = ScalarField::from_fn(g, |p| p[0] * p[1]).unwrap();
        assert_abs_diff_eq!(u.interpolate([h / 2.0, h / 2.0]).unwrap(), h * h / 4.0, epsilon = 1e-15);
        assert!(matches!(
            u.interpolate([1.5, 0.5]),
            Err(Error::OutsideGrid { .. })
        ));
    }

    #[test]
    fn circle_samples_of_x1() {
        let g = Grid::square(-2.0, 2.0, 9).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let disk = DiskSpec::new([0.0, 0.0], 1.0).unwrap();
        let s = sample_circle(&u, &disk, 4).unwrap();
        for (a, b) in s.iter().zip([1.0, 0.0, -1.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let c = ScalarField::constant(g, -0.25);
        assert!(sample_circle(&c, &disk, 37).unwrap().iter().all(|&v| v == -0.25));
        let big = DiskSpec::new([1.5, 0.0], 1.0).unwrap();
        assert!(matches!(
            sample_circle(&u, &big, 16),
            Err(Error::DiskOutsideGrid { .. })
        ));
    }

    #[test]
    fn circle_samples_of_radial_square() {
        let g = Grid::square(-1.0, 1.0, 201).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0] * p[0] + p[1] * p[1]).unwrap();
        let disk = DiskSpec::new([0.0, 0.0], 0.5).unwrap();
        let h = g.h();
        for v in sample_circle_default(&u, &disk).unwrap() {
            // bilinear interpolation error of x^2 + y^2 is at most h^2 / 2
            assert!((v - 0.25).abs() <= 0.5 * h * h + 1e-15, "{v}");
        }
    }

    #[test]
    fn disk_integral_examples() {
        let g = Grid::square(-1.0, 1.0, 401).unwrap();
        let one = CellField::constant(g, 1.0);
        let disk = DiskSpec::new([0.0, 0.0], 1.0).unwrap();
        let area = disk_integral(&one, &disk).unwrap();
        assert!((area - PI).abs() < 4.0 * g.h(), "{area}");
        assert_eq!(disk_integral(&CellField::constant(g, 0.0), &disk).unwrap(), 0.0);

        let u = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let quarter = disk_integral(&u.gradient().norm_sq(), &disk.with_radius(0.5).unwrap()).unwrap();
        assert!((quarter - PI / 4.0).abs() < 2.0 * g.h(), "{quarter}");
    }

    #[test]
    fn cell_field_round_trips_affine_through_nodes() {
        let g = Grid::square(0.0, 1.0, 9).unwrap();
        let c = CellField::from_fn(g, |p| 2.0 * p[0] - p[1] + 0.5).unwrap();
        let n = c.to_nodes();
        // interior node averages of an affine function are exact
        for (i, j) in g.interior_nodes() {
            let p = g.node(i, j);
            assert_abs_diff_eq!(n.at(i, j), 2.0 * p[0] - p[1] + 0.5, epsilon = 1e-14);
        }
        let q = [0.37, 0.61];
        assert_abs_diff_eq!(c.interpolate(q).unwrap(), 2.0 * q[0] - q[1] + 0.5, epsilon = 1e-14);
    }

    #[test]
    fn transpose_swaps_axes() {
        let g = Grid::new([0.0, 1.0], [1.0, 2.0], 3, 5).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0] + 10.0 * p[1]).unwrap();
        let t = u.transposed();
        assert_eq!(t.grid().nx(), 5);
        let p = t.grid().node(4, 1);
        assert_eq!(p, [3.0, 0.5]);
        assert_abs_diff_eq!(t.at(4, 1), 0.5 + 10.0 * 3.0, epsilon = 1e-14);
    }
}
