use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlwave::*;
use std::hint::black_box;

fn rhs_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    for n in [64usize, 256, 1024] {
        let grid = Grid::new(30.0 / n as f64, n).unwrap();
        let system = build_system(&bbm_kernel(), grid, Nonlinearity::bbm(1), 1e12).unwrap();
        let v = restrict(|x| 1.2 / (x / 3.0).cosh().powi(2), &grid).unwrap();
        for path in [ConvolutionPath::Direct, ConvolutionPath::Fast] {
            let sys = system.clone().with_path(path);
            group.bench_with_input(BenchmarkId::new(format!("{path:?}"), n), &v, |b, v| {
                b.iter(|| sys.rhs(black_box(v)).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, rhs_paths);
criterion_main!(benches);
