use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use gffpin_core::gaussian::killed_green_center;
use gffpin_core::mcmc::{ChainState, DisorderField, PinningModel};
use gffpin_core::rng::{stream, Purpose};
use gffpin_core::scalar::{optimal_density, DisorderLaw};
use gffpin_core::{BoxRegion, CovarianceSolver, Domain};

fn cube(n: i64) -> Domain {
    Domain::box_interior(&BoxRegion::cube(&[0, 0, 0], n).unwrap()).unwrap()
}

fn heat_bath_sweep(c: &mut Criterion) {
    for n in [16, 24] {
        let dom = Arc::new(cube(n));
        let dis = DisorderField::generate(DisorderLaw::Normal, 1, 0, dom.len());
        let (model, _) = PinningModel::quenched(dom, 0.0, 0.0, 1.0, 0.05, &dis).unwrap();
        let mut chain = ChainState::flat(&model, 1.5, stream(1, Purpose::Chain, 0, 0));
        c.bench_function(&format!("sweep N={n}"), |b| b.iter(|| chain.sweep()));
    }
}

fn cholesky(c: &mut Criterion) {
    let mut g = c.benchmark_group("cholesky");
    g.sample_size(10);
    for n in [16, 32] {
        g.bench_function(format!("factor N={n}"), |b| {
            b.iter(|| CovarianceSolver::new(black_box(cube(n))).unwrap())
        });
    }
    let solver = CovarianceSolver::new(cube(32)).unwrap();
    let mut rng = stream(2, Purpose::Field, 0, 0);
    g.bench_function("sample N=32", |b| b.iter(|| solver.sample_centered(&mut rng)));
    g.finish();
}

fn green_oracle(c: &mut Criterion) {
    c.bench_function("killed green centre N=32", |b| {
        b.iter(|| killed_green_center(3, black_box(32), &[0, 0, 0]).unwrap())
    });
}

fn p_star(c: &mut Criterion) {
    for law in [DisorderLaw::Normal, DisorderLaw::Rademacher] {
        c.bench_function(&format!("p* {}", law.name()), |b| {
            b.iter(|| optimal_density(&law, 1.0, black_box(1e-3)).unwrap())
        });
    }
}

criterion_group!(benches, heat_bath_sweep, cholesky, green_oracle, p_star);
criterion_main!(benches);
