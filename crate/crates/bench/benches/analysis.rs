use barrier_lab_bench::{clf_cbf, safety_filter, v2};
use barrier_lab_core::equilibria::analyze;
use barrier_lab_core::qp::solve_small_qp;
use barrier_lab_core::sim::{integrate, SimOptions};
use barrier_lab_core::spectral::{eigen_and_classify, jacobian_safety_filter_boundary};
use barrier_lab_core::EquilibriumSearch;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn controllers(c: &mut Criterion) {
    let sf = safety_filter(true, 1.0);
    let qp = clf_cbf();
    let x_sf = v2(3.2, 0.4);
    let x_qp = v2(0.5, 5.0);
    c.bench_function("safety_filter_field", |b| b.iter(|| sf.field(black_box(&x_sf)).unwrap()));
    c.bench_function("clf_cbf_field", |b| b.iter(|| qp.field(black_box(&x_qp)).unwrap()));
    c.bench_function("active_set_clf_cbf", |b| {
        b.iter(|| solve_small_qp(qp.problem(), black_box(&x_qp)).unwrap())
    });
}

fn analysis(c: &mut Criterion) {
    let sf = safety_filter(false, 1.0);
    let search = EquilibriumSearch::default_for(2);
    c.bench_function("equilibria_safety_filter", |b| b.iter(|| analyze(black_box(&sf), &search).unwrap()));
    let x = v2(2.5, 3f64.sqrt() / 2.0);
    let j = jacobian_safety_filter_boundary(sf.model(), &sf.cbfs()[0], sf.weight(), &x).unwrap();
    c.bench_function("boundary_jacobian", |b| {
        b.iter(|| jacobian_safety_filter_boundary(sf.model(), &sf.cbfs()[0], sf.weight(), black_box(&x)).unwrap())
    });
    c.bench_function("eigen_and_classify", |b| b.iter(|| eigen_and_classify(black_box(&j), Some(1.0)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let sf = safety_filter(false, 1.0);
    let opts = SimOptions {
        dt: 1e-3,
        horizon: 1.0,
        record_stride: usize::MAX,
        ..SimOptions::default()
    };
    c.bench_function("rk4_1000_steps", |b| b.iter(|| integrate(&sf, black_box(&v2(5.0, 0.2)), &opts).unwrap()));
}

criterion_group!(benches, controllers, analysis, simulation);
criterion_main!(benches);
