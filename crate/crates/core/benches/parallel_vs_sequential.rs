//! Monte-Carlo batches and a tiny sweep, run through the thread pool and on
//! one thread.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use iscc_core::algorithms::SolverKind;
use iscc_core::bench::{run_sweep, SweepParam, SweepSpec};
use iscc_core::mcval::{angle_grid, validate_extended, validate_point, ArrayShape, EchoSetup};
use iscc_core::par::Execution;
use iscc_core::scenario::SystemConfig;
use iscc_core::{CMat, C64};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn setup(m: usize) -> EchoSetup {
    EchoSetup {
        shape: ArrayShape {
            m_tx: m,
            m_rx: m,
            spacing: 0.5,
        },
        theta: 0.0,
        alpha: C64::new(1.0, 0.0),
        r_s: CMat::identity(m, m) * C64::new(1.0 / m as f64, 0.0),
        n_symbols: 64,
        noise: 1e-2,
    }
}

fn monte_carlo(c: &mut Criterion) {
    let s = setup(4);
    let grid = angle_grid(-0.5, 0.5, 0.1f64.to_radians());
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("extended_ls", name), &exec, |b, &e| {
            b.iter(|| black_box(validate_extended(&s, 500, 7, e).unwrap().mse))
        });
        g.bench_with_input(BenchmarkId::new("point_mle", name), &exec, |b, &e| {
            b.iter(|| black_box(validate_point(&s, 100, 7, &grid, 1e-5, e).unwrap().mse))
        });
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut spec = SweepSpec::new(
            SystemConfig::default(),
            SweepParam::NUsers,
            vec![1.0, 2.0],
            vec![SolverKind::PointAo],
            vec![0, 1],
        );
        spec.exec = exec;
        g.bench_function(BenchmarkId::new("point_ao", name), |b| b.iter(|| black_box(run_sweep(&spec).unwrap().cells.len())));
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, sweep);
criterion_main!(benches);
