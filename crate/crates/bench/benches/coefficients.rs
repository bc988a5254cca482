use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fracstep::{build_graded_mesh, build_soe, coeff_pair, fast_coeff_pair, CoeffMode, Thresholds};

fn history_row(c: &mut Criterion) {
    let alpha = 0.6;
    let mesh = build_graded_mesh(2000, (3.0 - alpha) / alpha, 1.0).unwrap();
    let thr = Thresholds::default();
    let mut group = c.benchmark_group("history_row_k2000");
    for mode in [CoeffMode::Direct, CoeffMode::Tcte, CoeffMode::gauss_kronrod()] {
        group.bench_function(BenchmarkId::from_parameter(mode.name()), |b| {
            b.iter(|| {
                let mut s = 0.0;
                for j in 1..2000 {
                    s += coeff_pair(&mesh, j, 2000, alpha, &thr, mode).unwrap().c_tilde;
                }
                black_box(s)
            })
        });
    }
    group.finish();
}

fn fast_step(c: &mut Criterion) {
    let alpha = 0.6;
    let mesh = build_graded_mesh(8000, (3.0 - alpha) / alpha, 10.0).unwrap();
    let soe = build_soe(alpha, 1e-12, mesh.tau(2), 10.0).unwrap();
    let thr = Thresholds::default();
    c.bench_function("fast_pairs_one_step", |b| {
        b.iter(|| {
            let mut s = 0.0;
            for &node in soe.nodes() {
                s += fast_coeff_pair(&mesh, 4000, node, &thr, CoeffMode::Tcte).unwrap().a;
            }
            black_box(s)
        })
    });
}

fn soe_construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_soe");
    for eps in [1e-8, 1e-12, 1e-14] {
        group.bench_with_input(BenchmarkId::from_parameter(eps), &eps, |b, &eps| {
            b.iter(|| build_soe(0.5, eps, black_box(1e-6), 1000.0).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = history_row, fast_step, soe_construction
}
criterion_main!(benches);
