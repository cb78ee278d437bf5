use criterion::{criterion_group, criterion_main, Criterion};
use fepls::cond_extremes::{functional_curve, projection_grid, relative_error_curve, Functional};
use fepls::synth::default_index;
use fepls::{FeplsPath, TestFunction};
use fepls_bench::dataset;

fn curves(c: &mut Criterion) {
    let data = dataset(340, 101);
    let x = default_index(data.grid()).unwrap();
    let dir = FeplsPath::new(&data, TestFunction::new(-2.0).unwrap())
        .unwrap()
        .direction(20)
        .unwrap();
    let s = projection_grid(&data, &x, 201).unwrap();
    let mut g = c.benchmark_group("conditional");
    g.sample_size(20);
    g.bench_function("functional_quantile_curve", |b| {
        b.iter(|| functional_curve(&data, &x, &s, 0.95, Functional::Quantile))
    });
    g.bench_function("relative_error_tail_index", |b| {
        b.iter(|| relative_error_curve(&data, &x, &dir, 0.7, Functional::TailIndex { big_j: 9 }, 201).unwrap())
    });
    g.finish();
}

criterion_group!(benches, curves);
criterion_main!(benches);
