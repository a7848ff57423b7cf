//! Parallel helpers against a plain sequential loop over the same work.
//! Under `--no-default-features` both arms run sequentially, which gives the
//! fallback's cost directly.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use platoon_core::dde_sim::{random_state, simulate, DelaySpec, SimParams, SimSystem};
use platoon_core::robustness::{self, FrequencyGrid};
use platoon_core::{par, spectral, Dynamics, GroundedSystem};
use std::hint::black_box;

fn instances(count: usize) -> Vec<GroundedSystem> {
    (0..count)
        .map(|i| {
            let n = 20 + (i * 7) % 40;
            let k = 1 + i % 6;
            let refs: Vec<usize> = (1..=n).filter(|j| (j * 31 + i) % 9 == 0).collect();
            let refs = if refs.is_empty() { vec![1] } else { refs };
            GroundedSystem::from_parts(n, k, refs).unwrap()
        })
        .collect()
}

fn check(gs: &GroundedSystem) -> f64 {
    let spec = spectral::lg_spectrum(gs).unwrap();
    let c = spectral::certify_lambda_min(gs, &spec);
    robustness::hinf_formation(&spec).unwrap() + c.witnessed
}

fn bench_instances(c: &mut Criterion) {
    let cases = instances(200);
    let mut g = c.benchmark_group("instance_checks");
    g.bench_function("par", |b| b.iter(|| black_box(par::map(&cases, check))));
    g.bench_function("seq", |b| b.iter(|| black_box(cases.iter().map(check).collect::<Vec<_>>())));
    g.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let gs = GroundedSystem::from_parts(120, 4, [1, 40, 80, 120]).unwrap();
    let spec = spectral::lg_spectrum(&gs).unwrap();
    let mut g = c.benchmark_group("frequency_sweep");
    for points in [4_000, 40_000] {
        let grid = FrequencyGrid::logspace(1e-4, 1e3, points).unwrap();
        g.bench_with_input(BenchmarkId::new("par", points), &grid, |b, grid| {
            b.iter(|| black_box(robustness::sweep_hinf_spectrum(&spec, Dynamics::Formation, grid).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("seq", points), &grid, |b, grid| {
            b.iter(|| {
                let peak = grid
                    .omegas()
                    .iter()
                    .map(|&w| {
                        spec.values()
                            .iter()
                            .map(|&l| robustness::modal_gain(Dynamics::Formation, l, w))
                            .fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max);
                black_box(peak)
            })
        });
    }
    g.finish();
}

fn bench_delay_grid(c: &mut Criterion) {
    let gs = GroundedSystem::from_parts(36, 4, [5, 14, 23, 32]).unwrap();
    let sys = SimSystem::velocity(&gs);
    let x0 = random_state(sys.state_dim(), 1);
    let taus: Vec<f64> = (1..=8).map(|i| 0.02 * i as f64).collect();
    let run = |&tau: &f64| {
        simulate(&sys, DelaySpec::full(tau), &x0, &SimParams::new(10.0, 1e-3), None)
            .unwrap()
            .final_time
    };
    let mut g = c.benchmark_group("delay_grid");
    g.sample_size(10);
    g.bench_function("par", |b| b.iter(|| black_box(par::map(&taus, run))));
    g.bench_function("seq", |b| b.iter(|| black_box(taus.iter().map(run).collect::<Vec<_>>())));
    g.finish();
}

criterion_group!(benches, bench_instances, bench_sweep, bench_delay_grid);
criterion_main!(benches);
