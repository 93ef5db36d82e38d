//! Boundary data library, selected by id.

use serde::{Deserialize, Serialize};

use crate::energy::ExponentPair;
use crate::error::{Error, Result};
use crate::grid::{Grid, Point, ScalarField};
use crate::solver::SeparableSolution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    /// `c0 + c1 x1 + c2 x2`; solves every instance of the equation.
    Affine { c0: f64, c1: f64, c2: f64 },
    /// Manufactured solution `A |x1|^a - B |x2|^b` (see [`SeparableSolution`]).
    Separable { coef_a: f64 },
    /// Lipschitz corner data `|x1 - c1| - |x2 - c2|`.
    Corner { center: Point },
    /// `sin(k x1) cos(k x2)`.
    Trig { k: f64 },
}

impl BoundaryData {
    pub fn id(&self) -> &'static str {
        match self {
            BoundaryData::Affine { .. } => "affine",
            BoundaryData::Separable { .. } => "separable",
            BoundaryData::Corner { .. } => "corner",
            BoundaryData::Trig { .. } => "trig",
        }
    }

    pub fn validate(&self, exps: ExponentPair) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be finite, got {v}")))
            }
        };
        match *self {
            BoundaryData::Affine { c0, c1, c2 } => {
                finite("c0", c0)?;
                finite("c1", c1)?;
                finite("c2", c2)
            }
            BoundaryData::Separable { coef_a } => SeparableSolution::new(exps, coef_a).map(|_| ()),
            BoundaryData::Corner { center } => {
                finite("center", center[0])?;
                finite("center", center[1])
            }
            BoundaryData::Trig { k } => finite("k", k),
        }
    }

    /// Value at a point. Separable data depends on the exponents.
    pub fn value(&self, exps: ExponentPair, p: Point) -> Result<f64> {
        Ok(match *self {
            BoundaryData::Affine { c0, c1, c2 } => c0 + c1 * p[0] + c2 * p[1],
            BoundaryData::Separable { coef_a } => SeparableSolution::new(exps, coef_a)?.value(p),
            BoundaryData::Corner { center } => (p[0] - center[0]).abs() - (p[1] - center[1]).abs(),
            BoundaryData::Trig { k } => (k * p[0]).sin() * (k * p[1]).cos(),
        })
    }

    /// The data sampled at every node; the solver reads only the boundary.
    pub fn sample(&self, grid: Grid, exps: ExponentPair) -> Result<ScalarField> {
        self.validate(exps)?;
        if let BoundaryData::Separable { coef_a } = *self {
            return SeparableSolution::new(exps, coef_a)?.sample(grid);
        }
        ScalarField::from_fn(grid, |p| self.value(exps, p).expect("validated"))
    }

    /// Closed-form solution of the unregularized problem, when known.
    pub fn exact_solution(&self, grid: Grid, exps: ExponentPair) -> Result<Option<ScalarField>> {
        match self {
            BoundaryData::Affine { .. } | BoundaryData::Separable { .. } => self.sample(grid, exps).map(Some),
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_by_id() {
        let b: BoundaryData = serde_json::from_str(r#"{"id":"corner","center":[0.0,0.5]}"#).unwrap();
        assert_eq!(b, BoundaryData::Corner { center: [0.0, 0.5] });
        assert_eq!(b.id(), "corner");
        assert!(serde_json::from_str::<BoundaryData>(r#"{"id":"trig","k":1,"extra":2}"#).is_err());
    }

    #[test]
    fn sampled_values() {
        let g = Grid::square(-1.0, 1.0, 9).unwrap();
        let e = ExponentPair::new(2.0, 4.0).unwrap();
        let corner = BoundaryData::Corner { center: [0.0, 0.0] }.sample(g, e).unwrap();
        assert_eq!(corner.at(0, 4), 1.0);
        assert_eq!(corner.at(4, 0), -1.0);
        let sep = BoundaryData::Separable { coef_a: 0.5 }.exact_solution(g, e).unwrap().unwrap();
        assert!((sep.at(8, 8) - (0.5 - 0.75)).abs() < 1e-14);
        assert!(BoundaryData::Trig { k: 2.0 }.exact_solution(g, e).unwrap().is_none());
        assert!(BoundaryData::Separable { coef_a: -1.0 }.sample(g, e).is_err());
    }
}
