use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mni_bench::{fixtures, largest};
use mni_core::lp::{basis_pursuit, dual_inf_norm_lp};
use mni_core::mni::{solve_mni_hilbert, solve_mni_l1, solve_mni_lp_space};
use mni_core::reg::solve_reg_l1;
use mni_core::{IterationConfig, LossKind, LossSpec, RegProblem, Regularizer, SpaceTag};

fn l1_interpolation(c: &mut Criterion) {
    let cfg = IterationConfig::default();
    let inst = largest(20);
    let mut g = c.benchmark_group("l1_interpolation");
    g.bench_function("simplex_basis_pursuit", |b| {
        b.iter(|| basis_pursuit(black_box(&inst.op), &inst.y))
    });
    g.bench_function("simplex_dual", |b| {
        b.iter(|| dual_inf_norm_lp(black_box(&inst.op), &inst.y))
    });
    g.bench_function("primal_dual", |b| {
        b.iter(|| solve_mni_l1(black_box(&inst.op), &inst.y, &cfg))
    });
    g.finish();
}

fn lp_newton(c: &mut Criterion) {
    let cfg = IterationConfig::default();
    let inst = largest(20);
    let mut g = c.benchmark_group("lp_newton");
    for p in [1.5, 3.0, 4.0] {
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| solve_mni_lp_space(black_box(&inst.op), &inst.y, p, &cfg))
        });
    }
    g.finish();
}

fn hilbert_batch(c: &mut Criterion) {
    let batch = fixtures(50);
    c.bench_function("hilbert_gram_batch_50", |b| {
        b.iter(|| {
            batch
                .iter()
                .map(|i| solve_mni_hilbert(&i.op, &i.y).map(|r| r.objective))
                .collect::<Vec<_>>()
        })
    });
}

fn lasso(c: &mut Criterion) {
    let inst = largest(20);
    let problem = RegProblem::new(
        inst.op.clone(),
        SpaceTag::L1,
        LossSpec::new(LossKind::Square, inst.y.clone()).unwrap(),
        Regularizer::Identity,
        0.3,
    )
    .unwrap();
    let cfg = IterationConfig::default();
    c.bench_function("lasso_accelerated", |b| {
        b.iter(|| solve_reg_l1(black_box(&problem), &cfg))
    });
}

criterion_group!(benches, l1_interpolation, lp_newton, hilbert_batch, lasso);
criterion_main!(benches);
