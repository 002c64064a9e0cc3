//! Parallel against sequential sweeps. Build with `--no-default-features`
//! to confirm the sequential fallback matches the `parallel = false` timing.

use criterion::{criterion_group, criterion_main, Criterion};
use nlwave::experiments::{run_h_refinement, run_truncation_study, Problem, StudyOptions};
use nlwave::SolitaryWave;

fn sweeps(c: &mut Criterion) {
    let problem = Problem::solitary(SolitaryWave::generalized_bbm(1, 1.8, -10.0).unwrap());
    let hs = [0.4, 0.2, 0.1, 0.05];
    let ns: Vec<usize> = (160..=300).step_by(20).collect();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for parallel in [false, true] {
        let options = StudyOptions {
            parallel,
            ..StudyOptions::default()
        };
        let tag = if parallel { "parallel" } else { "sequential" };
        group.bench_function(format!("h_refinement/{tag}"), |b| {
            b.iter(|| run_h_refinement(&problem, 20.0, &hs, 5.0, &options).unwrap())
        });
        group.bench_function(format!("truncation/{tag}"), |b| {
            b.iter(|| run_truncation_study(&problem, 0.1, &ns, 5.0, &options).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
