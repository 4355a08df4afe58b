//! Sequential vs rayon lanes for the three hot loops: operator assembly,
//! PSOR sweeps, and blow-up resampling.  Run with
//! `cargo bench --bench parallel`; the parallel lane follows the thread count
//! of the default rayon pool.

use criterion::{criterion_group, criterion_main, Criterion};
use signorini::assembly::{
    assemble_lcp, assemble_operator_par, assemble_operator_seq, EllipticCoefficients, ProblemSpec,
};
use signorini::blowup::{exact_signorini_2d, rescale_fill_par, rescale_fill_seq};
use signorini::manifold::ThinManifold;
use signorini::solver::{psor_solve_par, psor_solve_seq, SolverConfig};
use signorini::{Grid, GridFunction, Point};
use std::sync::Arc;

fn variable_coefficients() -> EllipticCoefficients {
    let matrix = Arc::new(|x: Point| {
        let (s1, s2) = (x[0].sin(), x[1].sin());
        [
            [1.0 + 0.1 * s1 * s1, 0.1 * s1 * s2, 0.0],
            [0.1 * s1 * s2, 1.0 + 0.1 * s2 * s2, 0.0],
            [0.0, 0.0, 1.0],
        ]
    });
    EllipticCoefficients::new(matrix, 1.0, 1.2).unwrap()
}

fn bench_assembly(c: &mut Criterion) {
    let grid = Grid::new(2, 1.0, 257).unwrap();
    let coeffs = variable_coefficients();
    let mut g = c.benchmark_group("assemble_operator_257");
    g.bench_function("seq", |b| b.iter(|| assemble_operator_seq(&grid, &coeffs).unwrap()));
    g.bench_function("par", |b| b.iter(|| assemble_operator_par(&grid, &coeffs).unwrap()));
    g.finish();
}

fn bench_psor(c: &mut Criterion) {
    let oracle = exact_signorini_2d();
    let trace = oracle.clone();
    let spec = ProblemSpec::new(
        Grid::new(2, 1.0, 129).unwrap(),
        EllipticCoefficients::identity(),
        Arc::new(|_| 0.0),
        ThinManifold::flat(1.0),
        Arc::new(|_| 0.0),
        Arc::new(move |x: Point| trace.value(x)),
    )
    .unwrap();
    let sys = assemble_lcp(&spec).unwrap();
    // Fixed sweep budget, no early exit: measures sweep cost, not accuracy.
    let cfg = SolverConfig {
        omega: 1.9,
        max_sweeps: 60,
        check_every: 1_000_000,
        ..Default::default()
    };
    let mut g = c.benchmark_group("psor_60_sweeps_129");
    g.bench_function("seq", |b| b.iter(|| psor_solve_seq(&sys, &cfg, None).unwrap()));
    g.bench_function("par", |b| b.iter(|| psor_solve_par(&sys, &cfg, None).unwrap()));
    g.finish();
}

fn bench_rescale(c: &mut Criterion) {
    let oracle = exact_signorini_2d();
    let grid = Grid::new(2, 1.0, 257).unwrap();
    let u = GridFunction::sample(grid, |x: Point| oracle.value(x)).unwrap();
    let target = Grid::new(2, 1.25, 257).unwrap();
    let mut g = c.benchmark_group("rescale_fill_257");
    g.bench_function("seq", |b| b.iter(|| rescale_fill_seq(&u, &target, 0.4).unwrap()));
    g.bench_function("par", |b| b.iter(|| rescale_fill_par(&u, &target, 0.4).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_assembly, bench_psor, bench_rescale);
criterion_main!(benches);
