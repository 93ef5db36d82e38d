use std::f64::consts::PI;

use ortho_core::analysis::*;
use ortho_core::*;

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// Quintic smoothstep cutoff written out independently of the library.
fn cutoff_profile(rho: f64, r_in: f64, r_out: f64) -> (f64, f64) {
    let w = r_out - r_in;
    let s = ((rho - r_in) / w).clamp(0.0, 1.0);
    let value = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let slope = -30.0 * s * s * (1.0 - s) * (1.0 - s) / w;
    (value, slope)
}

const R_IN: f64 = 0.3;
const R_OUT: f64 = 0.7;

/// `int xi^2` and `int xi'^2 rho^3 drho` for the cutoff above.
fn radial_integrals() -> (f64, f64) {
    let xi_sq = 2.0 * PI * simpson(|r| cutoff_profile(r, R_IN, R_OUT).0.powi(2) * r, 0.0, R_OUT, 20_000);
    let slope_moment = simpson(|r| cutoff_profile(r, R_IN, R_OUT).1.powi(2) * r.powi(3), 0.0, R_OUT, 20_000);
    (xi_sq, slope_moment)
}

fn saddle(n: usize) -> ScalarField {
    ScalarField::from_fn(Grid::square(-1.0, 1.0, n).unwrap(), |p| p[0] * p[0] - p[1] * p[1]).unwrap()
}

#[test]
fn second_lemma_matches_continuum_ratio_on_saddle() {
    let exps = ExponentPair::equal(2.0).unwrap();
    let eps = 1e-3;
    let (xi_sq, moment) = radial_integrals();
    // u_x1x1 = 2, u_x2x1 = 0, u_x1 = 2 x1; angular average of cos^2 is pi.
    let lhs = 4.0 * xi_sq;
    let rhs = 4.0 * (1.0 + eps) * 4.0 * PI * moment;
    let continuum = lhs / rhs;
    let u = saddle(257);
    let cutoff = make_cutoff(u.grid(), [0.0, 0.0], R_IN, R_OUT).unwrap();
    for nu in Axis::BOTH {
        let rep = caccioppoli_second_check(&u, exps, eps, &cutoff, nu).unwrap();
        let ratio = rep.ratio.unwrap();
        assert!((ratio / continuum - 1.0).abs() < 0.10, "{nu:?}: {ratio} vs {continuum}");
        assert!((rep.lhs / lhs - 1.0).abs() < 0.05);
    }
}

#[test]
fn corollary_matches_continuum_ratio_on_saddle() {
    let exps = ExponentPair::equal(2.0).unwrap();
    let eps = 1e-3;
    let (xi_sq, moment) = radial_integrals();
    let lhs = 8.0 * xi_sq;
    let bracket = (2.0 + eps) * 4.0 * 2.0 * PI * moment;
    let continuum = lhs / (4.0 * 4.0 * bracket);
    let u = saddle(257);
    let cutoff = make_cutoff(u.grid(), [0.0, 0.0], R_IN, R_OUT).unwrap();
    let rep = corollary_check(&u, exps, eps, &cutoff).unwrap();
    assert!((rep.ratio.unwrap() / continuum - 1.0).abs() < 0.10);
    let fitted = rep.params.values["c_fitted"];
    assert!((fitted / (lhs / bracket) - 1.0).abs() < 0.10);
}

#[test]
fn first_lemma_holds_on_saddle() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let u = saddle(129);
    let cutoff = make_cutoff(u.grid(), [0.1, 0.0], R_IN, R_OUT).unwrap();
    let rep = caccioppoli_first_check(&u, exps, 1e-3, &cutoff).unwrap();
    assert!(rep.pass && rep.ratio.unwrap() < 1.0);
}

#[test]
fn modulus_constant_bounded_for_smooth_saddle() {
    let exps = ExponentPair::equal(2.0).unwrap();
    for n in [129, 257] {
        let u = saddle(n);
        let reps = theorem1_experiment(&u, exps, [0.0, 0.0], 0.45, &dyadic_radii(0.45, 5)).unwrap();
        // osc |grad u| over B_r is 4r against a bound of order log(R/r)^(-1/2).
        for rep in &reps {
            let r = rep.params.r.unwrap();
            assert!((rep.lhs / (4.0 * r) - 1.0).abs() < 0.2, "r={r}: {}", rep.lhs);
        }
        let summary = boundedness_summary("theorem1", &reps, MAX_SPREAD).unwrap();
        assert!(summary.pass, "{summary:?}");
    }
}

#[test]
fn per_component_constants_bounded_for_manufactured_solution() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let grid = Grid::square(-1.0, 1.0, 129).unwrap();
    let u = SeparableSolution::new(exps, 0.5).unwrap().sample(grid).unwrap();
    // Centered on the axis where u_x2 is only Hoelder continuous.
    let reps = theorem2_experiment(&u, exps, [0.0, 0.0], 0.4, &dyadic_radii(0.4, 5)).unwrap();
    assert_eq!(reps.len(), 10);
    for chunk in reps.chunks(5) {
        assert!(boundedness_summary("theorem2", chunk, MAX_SPREAD).unwrap().pass);
    }
}

#[test]
fn first_derivative_of_manufactured_solution_is_monotone() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let mut previous = f64::INFINITY;
    for n in [33, 65, 129] {
        let grid = Grid::square(-1.0, 1.0, n).unwrap();
        let u = SeparableSolution::new(exps, 0.5).unwrap().sample(grid).unwrap();
        let disks = [0.2, 0.4].map(|r| DiskSpec::new([0.1, 0.1], r).unwrap());
        let rep = monotonicity_check(&u.gradient().component(Axis::X1), &disks, MONOTONICITY_FRACTION).unwrap();
        assert!(rep.pass);
        let v = rep.params.values["relative_violation"];
        assert!(v <= previous);
        previous = v;
    }
}

#[test]
fn boundary_oscillation_never_exceeds_full() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let b = ortho_core::problems::BoundaryData::Trig { k: 2.0 }
        .sample(Grid::square(-1.0, 1.0, 65).unwrap(), exps)
        .unwrap();
    let u = solve_dirichlet(&b, exps, RegularizationParams::eps(1e-3).unwrap(), &SolverConfig::default())
        .unwrap()
        .field;
    for axis in Axis::BOTH {
        let d = transformed_derivative(&u, exps, axis);
        for r in [0.1, 0.3, 0.6] {
            let disk = DiskSpec::new([0.0, 0.1], r).unwrap();
            let boundary = oscillation_on_disk(&d, &disk, OscillationMode::Boundary).unwrap();
            let full = oscillation_on_disk(&d, &disk, OscillationMode::Full).unwrap();
            assert!(boundary <= full);
            // solved derivatives are monotone, so the two agree closely
            assert!(full - boundary <= 0.02 * full, "{axis:?} r={r}: {boundary} vs {full}");
        }
    }
}

#[test]
fn synthetic_field_breaks_second_lemma() {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let grid = Grid::square(-1.0, 1.0, 129).unwrap();
    let u = ScalarField::from_fn(grid, |p| (8.0 * p[0]).sin() * (8.0 * p[1]).sin()).unwrap();
    let cutoff = make_cutoff(&grid, [0.05, -0.1], 0.25, 0.6).unwrap();
    let rep = caccioppoli_second_check(&u, exps, 1e-3, &cutoff, Axis::X1).unwrap();
    assert!(!rep.pass, "{:?}", rep.ratio);
}
