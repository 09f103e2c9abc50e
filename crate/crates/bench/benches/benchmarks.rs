//! Throughput benchmarks: raw emulation, instrumented runs, a whole
//! small campaign, and the analysis numerics.

use criterion::{black_box, criterion_group, criterion_main, Criterion, Throughput};

use faultlab_core::analysis::{gaussianize, inv_phi, pca, z_normalize, Matrix};
use faultlab_core::benchmarks::{build_benchmark, BenchmarkName};
use faultlab_core::campaign::{
    execute_run, run_campaign, CampaignConfig, LocationClass, RunParams, SplitMix64,
};
use faultlab_core::uarch::EventKind;
use faultlab_core::vm::{Machine, MachineConfig};
use std::collections::BTreeSet;

fn bench_vm_step(c: &mut Criterion) {
    let spec = build_benchmark(BenchmarkName::Qsort);
    // instructions retired by one clean qsort run, for per-instruction throughput
    let instructions = {
        let mut m = Machine::load(&spec.image, &MachineConfig::default()).unwrap();
        m.pmu.configure(0, EventKind::InstrRetired).unwrap();
        m.pmu.enable();
        m.run_until(&BTreeSet::new(), u64::MAX);
        m.pmu.read(0).unwrap()
    };
    let mut group = c.benchmark_group("vm");
    group.throughput(Throughput::Elements(instructions));
    group.bench_function("qsort_to_halt", |b| {
        b.iter(|| {
            let mut m = Machine::load(&spec.image, &MachineConfig::default()).unwrap();
            let stop = m.run_until(&BTreeSet::new(), u64::MAX);
            black_box(stop)
        })
    });
    group.finish();
}

fn bench_instrumented_run(c: &mut Criterion) {
    let spec = build_benchmark(BenchmarkName::Hash);
    c.bench_function("harnessed_hash_run", |b| {
        b.iter(|| {
            let run = execute_run(RunParams {
                spec: &spec,
                slots: &EventKind::ALL[..6],
                hpc_slots: 6,
                cycle_budget: 10_000_000,
                fault: None,
                trace: false,
            })
            .unwrap();
            black_box(run.cycles)
        })
    });
}

fn bench_campaign(c: &mut Criterion) {
    let config = CampaignConfig::new(BenchmarkName::Hash, LocationClass::Registers, 50, 3);
    c.bench_function("campaign_hash_registers_50", |b| {
        b.iter(|| {
            let report = run_campaign(&config, 1).unwrap();
            black_box(report.records.len())
        })
    });
}

fn bench_analysis(c: &mut Criterion) {
    let mut rng = SplitMix64::new(1);
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| (0..12).map(|_| rng.next_below(1_000_000) as f64).collect())
        .collect();
    let matrix = Matrix::from_rows(&rows);
    c.bench_function("znorm_gauss_pca_500x12", |b| {
        b.iter(|| {
            let z = z_normalize(&matrix).unwrap();
            let g = gaussianize(&z.matrix).unwrap();
            black_box(pca(&g, 2).unwrap().explained_variance)
        })
    });
    c.bench_function("inv_phi", |b| {
        let mut p = 0.001;
        b.iter(|| {
            p = if p > 0.998 { 0.001 } else { p + 0.001 };
            black_box(inv_phi(black_box(p)))
        })
    });
}

criterion_group!(
    benches,
    bench_vm_step,
    bench_instrumented_run,
    bench_campaign,
    bench_analysis
);
criterion_main!(benches);
