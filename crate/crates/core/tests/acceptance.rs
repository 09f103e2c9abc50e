//! Acceptance suite. Each test pins one criterion at its stated
//! tolerance and prints a `acceptance N (<name>): PASS` line; run with
//! `cargo test --test acceptance -- --nocapture` to see them.

use std::time::Instant;

use faultlab_core::analysis::{self, gaussianize, histogram, inv_phi, pca, z_normalize, Matrix};
use faultlab_core::benchmarks::{build_benchmark, BenchmarkName, BenchmarkSpec};
use faultlab_core::campaign::persist::records_to_jsonl;
use faultlab_core::campaign::{
    classify, execute_run, generate_fault_list, golden_run, required_repetitions, run_campaign,
    run_fault, sha256_hex, CampaignConfig, LocationClass, OtherReason, Outcome, OutcomeClass,
    RunParams, SplitMix64, StopKind,
};
use faultlab_core::debug::{Fault, FaultLocation, FaultTarget};
use faultlab_core::uarch::{EventCounts, EventKind};
use faultlab_core::vm::TrapKind;

fn pass(n: u32, name: &str, detail: &str) {
    println!("acceptance {n} ({name}): PASS  [{detail}]");
}

// -------------------------------------------------------------------------
// 1. Determinism / repeatability
// -------------------------------------------------------------------------

#[test]
fn acceptance_1_determinism_and_repeatability() {
    let mut faults_checked = 0u32;
    for benchmark in BenchmarkName::ALL {
        for class in LocationClass::ALL {
            let config = CampaignConfig::new(benchmark, class, 50, 2024);
            let spec = build_benchmark(benchmark);
            let golden = golden_run(&spec, &config).unwrap();
            let budget = (golden.golden_cycles as f64 * config.timeout_multiplier).ceil() as u64;
            let rotation = config.slot_rotation();
            assert_eq!(rotation.len(), 2);
            let faults = generate_fault_list(&config, &spec, &golden).unwrap();

            // every fault: both repetitions agree on stop, cycles, digest
            for fault in &faults {
                let runs: Vec<_> = rotation
                    .iter()
                    .map(|slots| {
                        execute_run(RunParams {
                            spec: &spec,
                            slots,
                            hpc_slots: config.hpc_slots,
                            cycle_budget: budget,
                            fault: Some(fault),
                            trace: false,
                        })
                        .unwrap()
                    })
                    .collect();
                assert_eq!(
                    runs[0].stop, runs[1].stop,
                    "{benchmark} {class:?} fault {}",
                    fault.id
                );
                assert_eq!(runs[0].cycles, runs[1].cycles);
                assert_eq!(sha256_hex(&runs[0].output), sha256_hex(&runs[1].output));
                faults_checked += 1;
            }

            // whole-campaign rerun with the same seed is byte-identical
            let a = run_campaign(&config, 1).unwrap();
            let b = run_campaign(&config, 1).unwrap();
            assert_eq!(records_to_jsonl(&a.records), records_to_jsonl(&b.records));
        }
    }
    pass(
        1,
        "determinism/repeatability",
        &format!("{faults_checked} faults x 2 repetitions, 9 campaigns re-run byte-identical"),
    );
}

// -------------------------------------------------------------------------
// 2. Multiplexing equals the unlimited-counter oracle
// -------------------------------------------------------------------------

#[test]
fn acceptance_2_multiplexing_matches_oracle() {
    let started = Instant::now();
    let config = CampaignConfig::new(BenchmarkName::Qsort, LocationClass::Registers, 100, 77);
    assert_eq!(
        required_repetitions(config.events.len(), config.hpc_slots),
        2
    );
    let spec = build_benchmark(config.benchmark);
    let golden = golden_run(&spec, &config).unwrap();
    let budget = (golden.golden_cycles as f64 * config.timeout_multiplier).ceil() as u64;
    let report = run_campaign(&config, 1).unwrap();
    assert_eq!(report.records.len(), 100);

    for record in &report.records {
        assert_eq!(record.repetitions.len(), 2, "ceil(12/6) repetitions");
        let oracle = execute_run(RunParams {
            spec: &spec,
            slots: &EventKind::ALL,
            hpc_slots: EventKind::ALL.len(),
            cycle_budget: budget,
            fault: Some(&record.fault),
            trace: false,
        })
        .unwrap();
        let oracle_counts: EventCounts = oracle.readings.unwrap_or_default().into_iter().collect();
        assert_eq!(
            record.events, oracle_counts,
            "fault {} assembled vector != oracle",
            record.fault.id
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "runtime target: {elapsed:.1}s >= 30s");
    pass(
        2,
        "multiplexing == oracle",
        &format!("100 faults, 2 reps each, exact match, {elapsed:.2}s"),
    );
}

// -------------------------------------------------------------------------
// 3. PC low-bit benignity
// -------------------------------------------------------------------------

#[test]
fn acceptance_3_pc_low_bits_benign() {
    let mut total = 0u32;
    for benchmark in BenchmarkName::ALL {
        let config = CampaignConfig::new(benchmark, LocationClass::Pc, 1, 0);
        let spec = build_benchmark(benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let budget = (golden.golden_cycles as f64 * config.timeout_multiplier).ceil() as u64;
        for (i, &trigger) in golden.dynamic_trace.iter().step_by(5).enumerate() {
            for bit in [0u8, 1] {
                let fault = Fault {
                    id: i as u64,
                    benchmark: spec.name.clone(),
                    target: FaultTarget {
                        location: FaultLocation::ProgramCounter,
                        bits: vec![bit],
                    },
                    trigger,
                };
                let record = run_fault(&fault, &spec, &config, &golden, budget).unwrap();
                assert_eq!(
                    record.outcome,
                    OutcomeClass::Benign,
                    "{benchmark} pc bit {bit} at {trigger:#x}"
                );
                total += 1;
            }
        }
    }
    pass(
        3,
        "pc low-bit benignity",
        &format!("{total}/{total} bit-0/1 pc faults benign"),
    );
}

// -------------------------------------------------------------------------
// 4. Qualitative outcome trends over the full grid
// -------------------------------------------------------------------------

#[test]
fn acceptance_4_grid_outcome_trends() {
    let started = Instant::now();
    for benchmark in BenchmarkName::ALL {
        for class in LocationClass::ALL {
            let config = CampaignConfig::new(benchmark, class, 1000, 42);
            let report = run_campaign(&config, 1).unwrap();
            let breakdown = analysis::summarize(&report.records).unwrap();
            let row = &breakdown.rows[0];
            let (modal_pct, modal_name) = [
                (row.benign_pct, "benign"),
                (row.sdc_pct, "sdc"),
                (row.other_pct, "other"),
            ]
            .into_iter()
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
            let expected_modal = match class {
                LocationClass::Pc => "other",
                LocationClass::Registers | LocationClass::Memory => "benign",
            };
            assert_eq!(
                modal_name, expected_modal,
                "{benchmark}/{class:?}: benign {:.1} sdc {:.1} other {:.1}",
                row.benign_pct, row.sdc_pct, row.other_pct
            );
            assert!(
                modal_pct >= 60.0,
                "{benchmark}/{class:?}: modal class only {modal_pct:.1}%"
            );
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < 300.0,
        "runtime target: {elapsed:.1}s >= 300s single-threaded"
    );
    pass(
        4,
        "grid outcome trends",
        &format!("9 campaigns x 1000 faults, modal classes as expected, {elapsed:.1}s"),
    );
}

// -------------------------------------------------------------------------
// 5. Exhaustive single-register campaign vs a reference interpreter
// -------------------------------------------------------------------------

/// 30-instruction target program. R1 is set to `region` right before
/// the trigger point and afterwards feeds a masked OUT, two loads, and
/// a spin gate, so single-bit flips cover Benign, SDC, and every Other
/// category.
const ORACLE_PROGRAM: &str = "
MOVI R1, 1
SHL R14, R1, 20
__task_start:
MOVI R1, region
tp: MOVI R2, 0
MOVI R3, 0xFF00
AND R4, R1, R3
OUT R4
LOADW R5, [R1]
OUT R5
MOVI R6, 12
AND R7, R1, R6
MOVI R6, 4
CMP R7, R6
BNE nospin
spin: JMP spin
nospin: MOVI R8, 100
ADD R9, R1, R8
LOADW R10, [R9]
OUT R10
MOVI R11, 5
MUL R12, R11, R11
OUT R12
NOP
NOP
NOP
NOP
NOP
NOP
NOP
__final_bp: HALT
.data
pad: .space 8
region: .space 256
";

/// Minimal independent interpretation of ORACLE_PROGRAM: straight-line
/// semantics over a 1 MiB address space holding the loaded image
/// (zeros elsewhere), with the fault applied to R1 just before the
/// `tp` instruction executes.
mod reference {
    pub const MEM_SIZE: u64 = 1 << 20;

    #[derive(Debug, PartialEq, Eq, Clone, Copy)]
    pub enum End {
        Done,
        Misaligned,
        OutOfBounds,
        Spin,
    }

    pub struct Result {
        pub end: End,
        pub outputs: Vec<u32>,
    }

    /// `region` is the byte address of the zeroed probe region and
    /// `initial_mem` the loaded image bytes starting at address 0.
    pub fn run(region: u32, initial_mem: &[u8], flip_bit: Option<u8>) -> Result {
        let mut out = Vec::new();
        let mut r1 = region;
        if let Some(bit) = flip_bit {
            r1 ^= 1 << bit;
        }
        let load = |addr: u64| -> std::result::Result<u32, End> {
            if addr % 4 != 0 {
                return Err(End::Misaligned);
            }
            if addr + 4 > MEM_SIZE {
                return Err(End::OutOfBounds);
            }
            let at = addr as usize;
            let byte = |i: usize| -> u32 { initial_mem.get(i).copied().unwrap_or(0) as u32 };
            Ok(byte(at) | byte(at + 1) << 8 | byte(at + 2) << 16 | byte(at + 3) << 24)
        };
        out.push(r1 & 0xFF00);
        match load(r1 as u64) {
            Ok(v) => out.push(v),
            Err(end) => return Result { end, outputs: out },
        }
        if r1 & 12 == 4 {
            return Result {
                end: End::Spin,
                outputs: out,
            };
        }
        match load(r1 as u64 + 100) {
            Ok(v) => out.push(v),
            Err(end) => return Result { end, outputs: out },
        }
        out.push(25);
        Result {
            end: End::Done,
            outputs: out,
        }
    }
}

#[test]
fn acceptance_5_exhaustive_r1_flips_match_reference_interpreter() {
    // golden via the reference side
    let spec_probe = BenchmarkSpec::from_source("oracle30", ORACLE_PROGRAM, vec![]).unwrap();
    assert_eq!(
        spec_probe.image.code.len(),
        30,
        "program is 30 instructions"
    );
    let region = spec_probe.image.symbol("region").unwrap();
    assert_eq!(region % 16, 0, "spin gate expects a 16-aligned region");
    let mut initial_mem = vec![0u8; spec_probe.image.extent() as usize];
    for (i, word) in spec_probe.image.code.iter().enumerate() {
        initial_mem[i * 4..i * 4 + 4].copy_from_slice(&word.to_le_bytes());
    }
    let data_base = spec_probe.image.data_base as usize;
    initial_mem[data_base..data_base + spec_probe.image.data.len()]
        .copy_from_slice(&spec_probe.image.data);
    let golden_ref = reference::run(region, &initial_mem, None);
    assert_eq!(golden_ref.end, reference::End::Done);
    let expected: Vec<u8> = golden_ref
        .outputs
        .iter()
        .flat_map(|w| w.to_le_bytes())
        .collect();

    let spec = BenchmarkSpec::from_source("oracle30", ORACLE_PROGRAM, expected).unwrap();
    let config = CampaignConfig::new(BenchmarkName::Qsort, LocationClass::Registers, 1, 0);
    let golden = golden_run(&spec, &config).unwrap();
    let budget = (golden.golden_cycles as f64 * config.timeout_multiplier).ceil() as u64;
    let trigger = spec.image.symbol("tp").unwrap();

    let mut agreements = 0;
    for bit in 0u8..32 {
        let fault = Fault {
            id: bit as u64,
            benchmark: spec.name.clone(),
            target: FaultTarget {
                location: FaultLocation::Register { index: 1 },
                bits: vec![bit],
            },
            trigger,
        };
        let record = run_fault(&fault, &spec, &config, &golden, budget).unwrap();
        assert!(record.injected);

        let reference = reference::run(region, &initial_mem, Some(bit));
        let ref_outcome = match reference.end {
            reference::End::Misaligned => {
                Outcome::Other(OtherReason::Trap(TrapKind::MisalignedAccess))
            }
            reference::End::OutOfBounds => {
                Outcome::Other(OtherReason::Trap(TrapKind::MemOutOfBounds))
            }
            reference::End::Spin => Outcome::Other(OtherReason::Timeout),
            reference::End::Done => {
                let bytes: Vec<u8> = reference
                    .outputs
                    .iter()
                    .flat_map(|w| w.to_le_bytes())
                    .collect();
                classify(StopKind::FinalBreakpoint, &bytes, &golden.output)
            }
        };
        assert_eq!(record.outcome, ref_outcome.class(), "bit {bit}");
        assert_eq!(record.reason, ref_outcome.reason(), "bit {bit}");
        agreements += 1;
    }
    pass(
        5,
        "exhaustive R1 oracle",
        &format!("{agreements}/32 classifications agree"),
    );
}

// -------------------------------------------------------------------------
// 6. Analysis numerics
// -------------------------------------------------------------------------

/// Power iteration with Gram-Schmidt deflation: the brute-force
/// eigendecomposition oracle.
fn brute_force_eigen(cov: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = cov.len();
    let mut values = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for comp in 0..k {
        let mut v: Vec<f64> = (0..d)
            .map(|i| 1.0 + ((i + comp * 3) as f64) * 0.137)
            .collect();
        for _ in 0..50_000 {
            // w = C v
            let mut w = vec![0.0; d];
            for (i, wi) in w.iter_mut().enumerate() {
                for j in 0..d {
                    *wi += cov[i][j] * v[j];
                }
            }
            // deflate against found eigenvectors
            for prev in &vectors {
                let dot: f64 = (0..d).map(|i| w[i] * prev[i]).sum();
                for i in 0..d {
                    w[i] -= dot * prev[i];
                }
            }
            let norm = (w.iter().map(|x| x * x).sum::<f64>()).sqrt();
            if norm < 1e-280 {
                break;
            }
            for x in w.iter_mut() {
                *x /= norm;
            }
            v = w;
        }
        let mut cv = vec![0.0; d];
        for (i, ci) in cv.iter_mut().enumerate() {
            for j in 0..d {
                *ci += cov[i][j] * v[j];
            }
        }
        let lambda: f64 = (0..d).map(|i| v[i] * cv[i]).sum();
        values.push(lambda);
        vectors.push(v);
    }
    (values, vectors)
}

#[test]
fn acceptance_6_analysis_numerics() {
    // z-norm moments
    let mut rng = SplitMix64::new(99);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            (0..6)
                .map(|_| rng.next_below(100_000) as f64 / 97.0)
                .collect()
        })
        .collect();
    let m = Matrix::from_rows(&rows);
    let z = z_normalize(&m).unwrap().matrix;
    for c in 0..z.cols() {
        let col = z.column(c);
        let mu = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / col.len() as f64).sqrt();
        assert!(mu.abs() < 1e-9, "column {c} mean {mu}");
        assert!((sd - 1.0).abs() < 1e-9, "column {c} std {sd}");
    }

    // gaussianize frozen example
    let g = gaussianize(&Matrix::from_rows(&[vec![10.0], vec![20.0], vec![30.0]])).unwrap();
    assert!((g.get(0, 0) - (-0.6744897501960817)).abs() < 1e-7);
    assert!(g.get(1, 0).abs() < 1e-12);
    assert!((g.get(2, 0) - 0.6744897501960817).abs() < 1e-7);
    assert!((inv_phi(0.25) + 0.6744897501960817).abs() < 1e-9);

    // PCA vs brute force on random 6x4 matrices, and orthonormality
    for seed in [3u64, 17, 2718] {
        let mut rng = SplitMix64::new(seed);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4).map(|_| rng.next_below(1000) as f64 / 7.0).collect())
            .collect();
        let m = Matrix::from_rows(&rows);
        let p = pca(&m, 4).unwrap();

        // orthonormal within 1e-9
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..4)
                    .map(|i| p.components.get(i, a) * p.components.get(i, b))
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!(
                    (dot - expect).abs() < 1e-9,
                    "seed {seed} dot({a},{b})={dot}"
                );
            }
        }

        // covariance for the oracle
        let n = 6;
        let means: Vec<f64> = (0..4)
            .map(|c| m.column(c).iter().sum::<f64>() / n as f64)
            .collect();
        let mut cov = vec![vec![0.0; 4]; 4];
        for (a, row) in cov.iter_mut().enumerate() {
            for b in 0..4 {
                let mut s = 0.0;
                for r in 0..n {
                    s += (m.get(r, a) - means[a]) * (m.get(r, b) - means[b]);
                }
                row[b] = s / n as f64;
            }
        }
        let (brute_values, brute_vectors) = brute_force_eigen(&cov, 4);
        for j in 0..4 {
            assert!(
                (p.eigenvalues[j] - brute_values[j]).abs() <= 1e-6 * brute_values[0].max(1.0),
                "seed {seed} eigenvalue {j}: {} vs {}",
                p.eigenvalues[j],
                brute_values[j]
            );
            // agreement up to sign
            let dot: f64 = (0..4)
                .map(|i| p.components.get(i, j) * brute_vectors[j][i])
                .sum();
            assert!(
                (dot.abs() - 1.0).abs() < 1e-6,
                "seed {seed} component {j}: |dot| = {}",
                dot.abs()
            );
        }
    }

    // histogram sanity used by the cycle plots
    let h = histogram(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
    assert_eq!(h.counts.iter().sum::<u64>(), 4);

    pass(
        6,
        "analysis numerics",
        "z-norm 1e-9, gaussianize 1e-7, pca vs brute force 1e-6",
    );
}

// -------------------------------------------------------------------------
// 7. PMU counting window excludes the init phase
// -------------------------------------------------------------------------

#[test]
fn acceptance_7_pmu_window_excludes_init() {
    let body = "
__task_start:
MOVI R2, 0
MOVI R3, 25
sum: CMP R2, R3
BGE done
ADD R4, R4, R2
MOVI R5, 1
ADD R2, R2, R5
JMP sum
done: OUT R4
NOP
__final_bp: HALT
.data
w: .word 0
";
    let short_init = format!("MOVI R1, 1\nSHL R14, R1, 20\n{body}");
    let mut long_init = String::from("MOVI R1, 1\nSHL R14, R1, 20\n");
    for _ in 0..37 {
        long_init.push_str("NOP\n");
    }
    long_init.push_str(body);

    let run_one = |source: &str| {
        let spec = BenchmarkSpec::from_source("window", source, Vec::new()).unwrap();
        let run = execute_run(RunParams {
            spec: &spec,
            slots: &EventKind::ALL,
            hpc_slots: EventKind::ALL.len(),
            cycle_budget: 1_000_000,
            fault: None,
            trace: false,
        })
        .unwrap();
        assert_eq!(run.stop, StopKind::FinalBreakpoint);
        let counts: EventCounts = run.readings.unwrap().into_iter().collect();
        (counts, run.cycles)
    };
    let (short_counts, short_cycles) = run_one(&short_init);
    let (long_counts, long_cycles) = run_one(&long_init);

    assert!(long_cycles > short_cycles, "init padding does run");
    assert_eq!(
        short_counts.get(EventKind::InstrRetired),
        long_counts.get(EventKind::InstrRetired),
        "window INSTR_RETIRED must ignore init length"
    );
    assert_eq!(
        short_counts, long_counts,
        "whole window vector is init-invariant"
    );
    pass(
        7,
        "pmu window",
        &format!(
            "INSTR_RETIRED {} with and without 37 extra init instructions",
            short_counts.get(EventKind::InstrRetired).unwrap()
        ),
    );
}

// -------------------------------------------------------------------------
// 8. Event vector identities on every recorded run
// -------------------------------------------------------------------------

#[test]
fn acceptance_8_event_vector_identities() {
    let mut complete = 0u32;
    let mut records_total = 0u32;
    for benchmark in BenchmarkName::ALL {
        for class in LocationClass::ALL {
            let config = CampaignConfig::new(benchmark, class, 100, 5);
            let report = run_campaign(&config, 1).unwrap();
            let golden_vector = report
                .golden
                .events
                .to_vector()
                .expect("golden is complete");
            golden_vector.check_identities().unwrap();
            for record in &report.records {
                records_total += 1;
                if record.events_complete {
                    let vector = record.events.to_vector().unwrap();
                    vector
                        .check_identities()
                        .unwrap_or_else(|e| panic!("fault {}: {e}", record.fault.id));
                    complete += 1;
                } else {
                    assert_eq!(record.outcome, OutcomeClass::Other);
                    assert!(record.events.is_empty());
                }
            }
        }
    }
    pass(
        8,
        "event vector identities",
        &format!("{complete} complete vectors of {records_total} records all satisfy identities"),
    );
}
