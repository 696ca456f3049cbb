//! Microbenchmarks for the hot numerical kernels: operator evaluation,
//! closed-form 2x2 eigensystems, a full flow step, and a small Legendre
//! transform.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lagflow_core::{
    build_grid, legendre_transform, quadratic_initial, ConvexDomain, Flow, FlowParams,
    ForcingFunction, SymMatrix2, Tau,
};

fn bench_operator(c: &mut Criterion) {
    let ops: Vec<Tau> = [0.4, std::f64::consts::FRAC_PI_4, 1.1, std::f64::consts::FRAC_PI_2]
        .iter()
        .map(|&t| Tau::new(t).unwrap())
        .collect();
    let spectra: Vec<[f64; 2]> = (0..512)
        .map(|i| {
            let x = (i as f64 + 1.0) / 64.0;
            [x, 2.5 * x + 0.1]
        })
        .collect();
    c.bench_function("operator_eval_512x4", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for op in &ops {
                for s in &spectra {
                    acc += op.phi(s[0]) + op.phi(s[1]) + op.dphi(s[0]);
                }
            }
            black_box(acc)
        })
    });
}

fn bench_eigen(c: &mut Criterion) {
    let mats: Vec<SymMatrix2> = (0..512)
        .map(|i| {
            let x = i as f64 * 0.013;
            SymMatrix2::new(1.0 + x.sin().abs(), 0.3 * x.cos(), 1.5 + 0.5 * (2.0 * x).sin())
        })
        .collect();
    c.bench_function("eigen2x2_512", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for m in &mats {
                let (l1, l2) = m.eigenvalues();
                acc += l1 + l2;
            }
            black_box(acc)
        })
    });
}

fn bench_flow_step(c: &mut Criterion) {
    let grid = build_grid(ConvexDomain::disc([0.0, 0.0], 1.0).unwrap(), 1.0 / 64.0).unwrap();
    let op = Tau::new(std::f64::consts::FRAC_PI_2).unwrap();
    let target = ConvexDomain::disc([0.0, 0.0], 1.0).unwrap();
    c.bench_function("flow_step_disc_64", |b| {
        let mut flow =
            Flow::new(&grid, op, target, ForcingFunction::Zero, FlowParams::default()).unwrap();
        let mut state = lagflow_core::FlowState::from_fn(&grid, |p| {
            0.5 * (p[0] * p[0] + p[1] * p[1]) + 0.01 * (3.0 * p[0]).sin()
        });
        b.iter(|| {
            let rep = flow.step(&mut state).unwrap();
            black_box(rep.c_estimate)
        })
    });
    let _ = quadratic_initial(&grid, &target);
}

fn bench_legendre(c: &mut Criterion) {
    let src = build_grid(ConvexDomain::disc([0.0, 0.0], 1.0).unwrap(), 1.0 / 16.0).unwrap();
    let dst = build_grid(ConvexDomain::disc([0.0, 0.0], 1.0).unwrap(), 1.0 / 16.0).unwrap();
    let state = lagflow_core::FlowState::from_fn(&src, |p| 0.5 * (p[0] * p[0] + p[1] * p[1]));
    c.bench_function("legendre_disc_16", |b| {
        b.iter(|| black_box(legendre_transform(&src, &state.u, &dst, 0.0).values[40]))
    });
}

criterion_group!(benches, bench_operator, bench_eigen, bench_flow_step, bench_legendre);
criterion_main!(benches);
