use criterion::{criterion_group, criterion_main, Criterion};
use onebit_sync::experiment::{run, ExperimentKind, ExperimentSpec};
use onebit_sync::par::Execution;
use onebit_sync::SystemConfig;

fn sync_trials(c: &mut Criterion) {
    let cfg = SystemConfig {
        antennas: 16,
        users: 2,
        fft_size: 128,
        cp_len: 12,
        taps: 4,
        used: onebit_sync::config::centered_subcarriers(128, 80),
        trials: 16,
        ..SystemConfig::desk()
    };
    let spec = ExperimentSpec {
        snr_db: vec![0.0, 10.0, 20.0],
        ..ExperimentSpec::default_for(ExperimentKind::SyncRmse)
    };
    let mut g = c.benchmark_group("sync_rmse_16_trials");
    g.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        g.bench_function(name, |b| b.iter(|| run(&spec, &cfg, exec).unwrap()));
    }
    g.finish();
}

fn sindr_trials(c: &mut Criterion) {
    let cfg = SystemConfig {
        antennas: 32,
        users: 4,
        trials: 8,
        ..SystemConfig::flat_reference()
    };
    let spec = ExperimentSpec {
        dtau: (-20..=20).step_by(4).collect(),
        deps: vec![0.0, 0.01],
        ..ExperimentSpec::default_for(ExperimentKind::SindrSweep)
    };
    let mut g = c.benchmark_group("sindr_sweep_8_trials");
    g.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        g.bench_function(name, |b| b.iter(|| run(&spec, &cfg, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, sync_trials, sindr_trials);
criterion_main!(benches);
