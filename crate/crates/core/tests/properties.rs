use ortho_core::grid::{disk_integral, sample_circle};
use ortho_core::*;
use proptest::prelude::*;

fn unit_grid() -> Grid {
    Grid::square(-1.0, 1.0, 9).unwrap()
}

fn field_strategy(grid: Grid) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-2.0f64..2.0, grid.node_count()).prop_map(move |v| ScalarField::new(grid, v).unwrap())
}

fn exps_strategy() -> impl Strategy<Value = ExponentPair> {
    (2.0f64..6.0, 0.0f64..3.0).prop_map(|(p1, d)| ExponentPair::new(p1, p1 + d).unwrap())
}

proptest! {
    #[test]
    fn p_inequality_gap_is_nonnegative(a in -10.0f64..10.0, b in -10.0f64..10.0, p in 2.0f64..8.0) {
        let gap = p_inequality_gap(a, b, p);
        let scale = 1.0 + a.abs().max(b.abs()).powf(p);
        prop_assert!(gap >= -1e-12 * scale, "gap {gap} at a={a} b={b} p={p}");
    }

    #[test]
    fn p_flux_is_odd_and_increasing(t in -5.0f64..5.0, dt in 1e-6f64..1.0, p in 2.0f64..7.0) {
        prop_assert_eq!(p_flux(-t, p), -p_flux(t, p));
        prop_assert!(p_flux(t + dt, p) > p_flux(t, p));
        prop_assert_eq!(p_flux(t, 2.0), t);
    }

    #[test]
    fn energy_is_convex(
        u in field_strategy(unit_grid()),
        v in field_strategy(unit_grid()),
        theta in 0.0f64..1.0,
        exps in exps_strategy(),
        eps in 0.0f64..0.5,
        sigma in 0.0f64..0.5,
    ) {
        let reg = RegularizationParams::new(eps, sigma).unwrap();
        let w = u.zip_with(&v, |a, b| theta * a + (1.0 - theta) * b).unwrap();
        let lhs = energy(&w, exps, reg);
        let rhs = theta * energy(&u, exps, reg) + (1.0 - theta) * energy(&v, exps, reg);
        prop_assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn energy_is_homogeneous(u in field_strategy(unit_grid()), lambda in -3.0f64..3.0, p in 2.0f64..6.0) {
        let exps = ExponentPair::equal(p).unwrap();
        let e = energy(&u, exps, RegularizationParams::NONE);
        let scaled = energy(&u.scaled(lambda), exps, RegularizationParams::NONE);
        let expected = lambda.abs().powf(p) * e;
        prop_assert!((scaled - expected).abs() <= 1e-10 * expected.max(1e-300).max(1.0));
    }

    #[test]
    fn gradient_is_linear(u in field_strategy(unit_grid()), v in field_strategy(unit_grid()), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let w = u.zip_with(&v, |x, y| a * x + b * y).unwrap();
        let (gu, gv, gw) = (u.gradient(), v.gradient(), w.gradient());
        for k in 0..gw.g1().len() {
            prop_assert!((gw.g1()[k] - a * gu.g1()[k] - b * gv.g1()[k]).abs() < 1e-12);
            prop_assert!((gw.g2()[k] - a * gu.g2()[k] - b * gv.g2()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_bilinear_fields(
        c in prop::array::uniform4(-2.0f64..2.0),
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
    ) {
        let f = |p: Point| c[0] + c[1] * p[0] + c[2] * p[1] + c[3] * p[0] * p[1];
        let u = ScalarField::from_fn(unit_grid(), f).unwrap();
        prop_assert!((u.interpolate([x, y]).unwrap() - f([x, y])).abs() < 1e-12);
    }

    #[test]
    fn disk_integral_is_monotone_in_radius(
        vals in prop::collection::vec(0.0f64..3.0, 32 * 32),
        r in 0.05f64..0.45,
        dr in 0.0f64..0.4,
    ) {
        let g = Grid::square(-1.0, 1.0, 33).unwrap();
        let f = CellField::new(g, vals).unwrap();
        let small = disk_integral(&f, &DiskSpec::new([0.1, 0.0], r).unwrap()).unwrap();
        let big = disk_integral(&f, &DiskSpec::new([0.1, 0.0], (r + dr).min(0.85)).unwrap()).unwrap();
        prop_assert!(small <= big);
    }

    #[test]
    fn circle_samples_of_constant_are_constant(c in -5.0f64..5.0, m in 1usize..300, r in 0.1f64..0.9) {
        let u = ScalarField::constant(unit_grid(), c);
        let s = sample_circle(&u, &DiskSpec::new([0.0, 0.0], r).unwrap(), m).unwrap();
        prop_assert_eq!(s.len(), m);
        prop_assert!(s.iter().all(|&v| (v - c).abs() < 1e-12));
    }
}
