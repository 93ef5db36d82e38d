use ortho_core::analysis::sigma_comparison;
use ortho_core::problems::BoundaryData;
use ortho_core::solver::{epsilon_convergence_study, InitialGuess};
use ortho_core::*;

fn grid(n: usize) -> Grid {
    Grid::square(-1.0, 1.0, n).unwrap()
}

fn trig(n: usize) -> ScalarField {
    BoundaryData::Trig { k: 2.0 }
        .sample(grid(n), ExponentPair::equal(2.0).unwrap())
        .unwrap()
}

#[test]
fn independent_random_starts_agree() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let reg = RegularizationParams::eps(1e-3).unwrap();
    let b = trig(25);
    let solve = |seed| {
        let cfg = SolverConfig {
            initial: InitialGuess::Random,
            seed,
            ..SolverConfig::default()
        };
        solve_dirichlet(&b, exps, reg, &cfg).unwrap()
    };
    let (a, c) = (solve(1), solve(2));
    let diff = a.field.max_abs_diff(&c.field).unwrap();
    assert!(diff <= 10.0 * SolverConfig::default().tol, "{diff:e}");
}

#[test]
fn energy_is_nonincreasing_within_every_stage() {
    let exps = ExponentPair::new(3.0, 5.0).unwrap();
    let b = BoundaryData::Corner { center: [0.2, -0.3] }.sample(grid(33), exps).unwrap();
    let sol = solve_dirichlet(&b, exps, RegularizationParams::eps(1e-6).unwrap(), &SolverConfig::default()).unwrap();
    assert!(sol.report.converged);
    for stage in &sol.report.stages {
        for w in stage.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-13 * w[0].abs(), "stage eps={}: {} -> {}", stage.eps, w[0], w[1]);
        }
    }
}

#[test]
fn interior_values_stay_within_boundary_range() {
    for (p1, p2) in [(2.0, 2.0), (2.0, 4.0), (4.0, 4.0)] {
        let exps = ExponentPair::new(p1, p2).unwrap();
        for data in [BoundaryData::Trig { k: 3.0 }, BoundaryData::Corner { center: [0.0, 0.0] }] {
            let b = data.sample(grid(33), exps).unwrap();
            let (lo, hi) = b.boundary_range();
            let u = solve_dirichlet(&b, exps, RegularizationParams::eps(1e-4).unwrap(), &SolverConfig::default())
                .unwrap()
                .field;
            for &v in u.values() {
                assert!(v >= lo - 1e-9 && v <= hi + 1e-9, "{v} outside [{lo}, {hi}]");
            }
        }
    }
}

#[test]
fn solution_scales_with_boundary_data() {
    let exps = ExponentPair::equal(3.0).unwrap();
    let b = trig(25);
    let cfg = SolverConfig {
        continuation: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
        ..SolverConfig::default()
    };
    let reg = RegularizationParams::NONE;
    let base = solve_dirichlet(&b, exps, reg, &cfg).unwrap().field;
    for lambda in [-2.0, 0.5, 3.0] {
        let scaled = solve_dirichlet(&b.scaled(lambda), exps, reg, &cfg).unwrap().field;
        let diff = scaled.max_abs_diff(&base.scaled(lambda)).unwrap();
        assert!(diff < 1e-6 * lambda.abs(), "lambda={lambda}: {diff:e}");
    }
}

/// `ExponentPair` keeps `p1 <= p2`, so the swap is exercised with equal
/// exponents and data without diagonal symmetry.
#[test]
fn transposed_problem_gives_transposed_solution() {
    let exps = ExponentPair::equal(4.0).unwrap();
    let g = Grid::new([-1.0, 0.0], [2.0, 1.0], 33, 17).unwrap();
    let b = ScalarField::from_fn(g, |p| (2.0 * p[0]).sin() + p[1] * p[1] * p[0]).unwrap();
    let reg = RegularizationParams::new(1e-3, 0.0).unwrap();
    let cfg = SolverConfig::default();
    let u = solve_dirichlet(&b, exps, reg, &cfg).unwrap().field;
    let ut = solve_dirichlet(&b.transposed(), exps, reg, &cfg).unwrap().field;
    assert!(ut.max_abs_diff(&u.transposed()).unwrap() < 1e-9);
}

#[test]
fn eps_study_on_laplace_problem_is_flat_zero() {
    let exps = ExponentPair::equal(2.0).unwrap();
    let study = epsilon_convergence_study(&trig(17), exps, &[1e-1, 1e-2, 1e-3], None, &SolverConfig::default()).unwrap();
    for row in &study.rows {
        assert!(row.lhs < 1e-18, "eps={} lhs={:e}", row.eps, row.lhs);
    }
}

#[test]
fn eps_study_on_manufactured_data_respects_bound() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let b = BoundaryData::Separable { coef_a: 0.5 }.sample(grid(33), exps).unwrap();
    let eps = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
    let study = epsilon_convergence_study(&b, exps, &eps, Some(1e-8), &SolverConfig::default()).unwrap();
    for row in &study.rows {
        assert!(row.ratio <= 1.0, "eps={} ratio={}", row.eps, row.ratio);
    }
    assert!(study.slope.unwrap() >= 0.8);
}

#[test]
fn sigma_regularization_minimality_and_convergence() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let b = trig(25);
    let study = sigma_comparison(&b, exps, 1e-3, &[1e-1, 1e-2, 1e-3, 1e-4, 0.0], &SolverConfig::default()).unwrap();
    for row in &study.rows {
        assert!(row.minimal, "sigma={}", row.sigma);
    }
    assert!(study.gaps_decreasing, "{:?}", study.rows.iter().map(|r| r.gap).collect::<Vec<_>>());
    let last = study.rows.last().unwrap();
    assert_eq!(last.sigma, 0.0);
    assert!(last.gap < 1e-9);
}
