use std::f64::consts::FRAC_PI_2;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use etapair_bench::{clean_ring, parts, vacuum_sector};
use etapair_core::evolve::{evolve_trajectories, krylov_advance};
use etapair_core::projected::toy_qubit;
use etapair_core::superop::steady_state_reduced;
use etapair_core::{SteadyStateOptions, TrajectoryConfig, C64};

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assemble_reachable");
    for n in [3, 4] {
        let model = clean_ring(n);
        let (basis, p) = parts(&model);
        let seeds = etapair_core::DensityState::vacuum(basis.dim).support();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| black_box(p.assemble_reachable(&seeds))));
    }
    g.finish();
}

fn matvec(c: &mut Criterion) {
    let (red, vac) = vacuum_sector(&clean_ring(4));
    let x = red.restrict(&vac.vec);
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    c.bench_function("generator_matvec/4", |b| b.iter(|| red.matrix.apply_into(black_box(&x), &mut y)));
}

fn steady(c: &mut Criterion) {
    let mut g = c.benchmark_group("steady_state_lu");
    g.sample_size(10);
    for n in [3, 4] {
        let (red, vac) = vacuum_sector(&clean_ring(n));
        let opts = SteadyStateOptions::default();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| black_box(steady_state_reduced(&red, &vac, &opts).expect("steady state")))
        });
    }
    g.finish();
}

fn krylov(c: &mut Criterion) {
    let (red, vac) = vacuum_sector(&clean_ring(4));
    let x0 = red.restrict(&vac.vec);
    let mut g = c.benchmark_group("krylov_step");
    g.sample_size(20);
    g.bench_function("4/dt=1", |b| {
        b.iter(|| {
            let mut x = x0.clone();
            black_box(krylov_advance(&red.matrix, &mut x, 1.0, 30, 1e-10).expect("krylov"))
        })
    });
    g.finish();
}

fn trajectories(c: &mut Criterion) {
    let q = toy_qubit(FRAC_PI_2, 1.0).expect("qubit");
    let times: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5).collect();
    let psi0 = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    let obs = [q.sz.clone()];
    let mut g = c.benchmark_group("trajectories");
    g.sample_size(10);
    g.bench_function("qubit/M=200", |b| {
        b.iter(|| {
            black_box(
                evolve_trajectories(&q.hamiltonian, std::slice::from_ref(&q.jump), &psi0, &TrajectoryConfig::new(200, 3), &times, &obs)
                    .expect("trajectories"),
            )
        })
    });
    g.finish();
}

criterion_group!(benches, assembly, matvec, steady, krylov, trajectories);
criterion_main!(benches);
