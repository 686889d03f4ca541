use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use thermosig_core::regression::{best_beta, grid_fit, integrate, Axis, Basis, GridSpec, Spacing};
use thermosig_core::{assemble, interpolate_passengers, simulate, HvacMode, Scenario};

fn reference_system() -> thermosig_core::RegressionSystem {
    let scenario = Scenario::default();
    let run = simulate(&scenario).expect("default scenario simulates");
    integrate(
        assemble(&run.truth, &scenario.constants, &[HvacMode::Refrigerator])
            .expect("refrigerator frames"),
    )
}

fn inner_solve(c: &mut Criterion) {
    let sys = reference_system();
    c.bench_function("best_beta/integrated", |b| {
        b.iter(|| best_beta(black_box(100.0), black_box(5000.0), &sys, Basis::Integrated))
    });
}

fn grid(c: &mut Criterion) {
    let sys = reference_system();
    let mut group = c.benchmark_group("grid_fit");
    group.sample_size(10);
    for cells in [25usize, 50, 100] {
        let spec = GridSpec {
            c_p: Axis {
                lo: 0.0,
                hi: 1000.0,
                cells,
            },
            alpha: Axis {
                lo: 0.0,
                hi: 10_000.0,
                cells,
            },
            spacing: Spacing::Linear,
            refinement_passes: 2,
        };
        group.bench_with_input(BenchmarkId::from_parameter(cells), &spec, |b, spec| {
            b.iter(|| grid_fit(&sys, spec, Basis::Integrated))
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let scenario = Scenario::default();
    let mut group = c.benchmark_group("synth");
    group.sample_size(20);
    group.bench_function("simulate/3-day", |b| {
        b.iter(|| simulate(black_box(&scenario)))
    });
    let run = simulate(&scenario).expect("default scenario simulates");
    let grid = run.truth.timestamps();
    group.bench_function("interpolate_passengers/3-day", |b| {
        b.iter(|| interpolate_passengers(black_box(&run.anchors), &grid, 60))
    });
    group.finish();
}

criterion_group!(benches, inner_solve, grid, simulation);
criterion_main!(benches);
