use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ortho_core::energy::{energy_with, residual_with};
use ortho_core::problems::BoundaryData;
use ortho_core::{solve_dirichlet, ExponentPair, Grid, Reduction, RegularizationParams, ScalarField, SolverConfig};

fn field(n: usize) -> ScalarField {
    let grid = Grid::square(-1.0, 1.0, n).unwrap();
    ScalarField::from_fn(grid, |p| (1.5 * p[0]).sin() * (1.5 * p[1]).cosh()).unwrap()
}

fn evaluation(c: &mut Criterion) {
    let exps = ExponentPair::new(2.0, 4.0).unwrap();
    let reg = RegularizationParams::new(1e-3, 1e-4).unwrap();
    let mut group = c.benchmark_group("evaluate");
    for n in [65, 257] {
        let u = field(n);
        for mode in [Reduction::Sequential, Reduction::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("energy/{mode:?}"), n), &u, |b, u| {
                b.iter(|| energy_with(u, exps, reg, mode))
            });
            group.bench_with_input(BenchmarkId::new(format!("residual/{mode:?}"), n), &u, |b, u| {
                b.iter(|| residual_with(u, exps, reg, mode))
            });
        }
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (p1, p2) in [(2.0, 4.0), (4.0, 4.0)] {
        let exps = ExponentPair::new(p1, p2).unwrap();
        for n in [33, 65] {
            let grid = Grid::square(-1.0, 1.0, n).unwrap();
            let boundary = BoundaryData::Trig { k: 1.5 }.sample(grid, exps).unwrap();
            let reg = RegularizationParams::eps(1e-3).unwrap();
            let cfg = SolverConfig::default();
            group.bench_with_input(BenchmarkId::new(format!("trig_p{p1}_{p2}"), n), &boundary, |b, bd| {
                b.iter(|| solve_dirichlet(bd, exps, reg, &cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, evaluation, solve);
criterion_main!(benches);
