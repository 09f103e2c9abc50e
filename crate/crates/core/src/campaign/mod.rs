//! The fault-injection engine: fault-list generation, golden runs, the
//! injection loop with HPC multiplexing, and outcome classification.
//!
//! A campaign runs each fault `ceil(E/H)` times with rotated counter
//! assignments: the runs are deterministic, so the per-repetition slot
//! readings assemble into one per-fault count map as if the bank had
//! had a counter for every event.

pub mod persist;
mod rng;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::benchmarks::{build_benchmark, BenchmarkError, BenchmarkName, BenchmarkSpec};
use crate::debug::{DebugSession, Fault, FaultLocation, FaultTarget};
use crate::uarch::{EventCounts, EventKind, PmuBank};
use crate::vm::{LoadError, Machine, MachineConfig, StopReason, TrapKind, DEFAULT_MEM_SIZE};

pub use rng::SplitMix64;

/// Bytes at the top of memory counted as the stack region for memory
/// fault targeting.
pub const STACK_REGION_BYTES: u32 = 4096;

/// Cycle cap for golden runs; a benchmark that cannot finish under this
/// is broken.
const GOLDEN_CYCLE_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    Registers,
    Pc,
    Memory,
}

impl LocationClass {
    pub const ALL: [LocationClass; 3] = [
        LocationClass::Registers,
        LocationClass::Pc,
        LocationClass::Memory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LocationClass::Registers => "registers",
            LocationClass::Pc => "pc",
            LocationClass::Memory => "memory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultModel {
    #[default]
    Sbu,
    /// Multi-bit upset flipping this many distinct bits at once.
    Mbu(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerSampling {
    /// Triggers drawn from the golden run's executed addresses; every
    /// fault actually injects.
    #[default]
    DynamicTrace,
    /// Triggers drawn from the whole code space; unreached triggers
    /// complete uninjected.
    StaticCodeSpace,
}

fn full_catalog() -> Vec<EventKind> {
    EventKind::ALL.to_vec()
}

fn default_hpc_slots() -> usize {
    crate::uarch::pmu::DEFAULT_HPC_SLOTS
}

fn default_timeout_multiplier() -> f64 {
    10.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub benchmark: BenchmarkName,
    pub location_class: LocationClass,
    pub num_faults: u64,
    pub seed: u64,
    #[serde(default = "full_catalog")]
    pub events: Vec<EventKind>,
    #[serde(default = "default_hpc_slots")]
    pub hpc_slots: usize,
    #[serde(default = "default_timeout_multiplier")]
    pub timeout_multiplier: f64,
    #[serde(default)]
    pub fault_model: FaultModel,
    #[serde(default)]
    pub trigger_sampling: TriggerSampling,
}

impl CampaignConfig {
    pub fn new(
        benchmark: BenchmarkName,
        location_class: LocationClass,
        num_faults: u64,
        seed: u64,
    ) -> Self {
        Self {
            benchmark,
            location_class,
            num_faults,
            seed,
            events: full_catalog(),
            hpc_slots: default_hpc_slots(),
            timeout_multiplier: default_timeout_multiplier(),
            fault_model: FaultModel::default(),
            trigger_sampling: TriggerSampling::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.num_faults < 1 {
            return Err(CampaignError::InvalidConfig(
                "num_faults must be >= 1".into(),
            ));
        }
        if self.hpc_slots < 1 {
            return Err(CampaignError::InvalidConfig(
                "hpc_slots must be >= 1".into(),
            ));
        }
        if self.timeout_multiplier.is_nan() || self.timeout_multiplier <= 1.0 {
            return Err(CampaignError::InvalidConfig(
                "timeout_multiplier must be > 1".into(),
            ));
        }
        if self.events.is_empty() {
            return Err(CampaignError::InvalidConfig(
                "events must be non-empty".into(),
            ));
        }
        for (i, e) in self.events.iter().enumerate() {
            if self.events[..i].contains(e) {
                return Err(CampaignError::InvalidConfig(format!("duplicate event {e}")));
            }
        }
        if let FaultModel::Mbu(k) = self.fault_model {
            if k < 1 || k > 32 {
                return Err(CampaignError::InvalidConfig(
                    "MBU width must be 1..=32".into(),
                ));
            }
        }
        Ok(())
    }

    /// Events chunked into per-repetition slot assignments, in the
    /// fixed configured order.
    pub fn slot_rotation(&self) -> Vec<Vec<EventKind>> {
        self.events
            .chunks(self.hpc_slots)
            .map(|c| c.to_vec())
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("golden run trapped: {0:?}")]
    GoldenTrapped(TrapKind),
    #[error("golden run exceeded the cycle budget")]
    GoldenTimeout,
    #[error("golden run halted without reaching the final breakpoint")]
    GoldenIllegalFlow,
    #[error("golden output does not match the benchmark's expected output")]
    GoldenOutputMismatch,
    #[error("trigger pool is empty")]
    EmptyTrace,
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Load(#[from] LoadError),
}

/// `ceil(num_events / num_slots)`: deterministic re-executions needed
/// to cover every event with a limited counter bank.
pub fn required_repetitions(num_events: usize, num_slots: usize) -> usize {
    assert!(num_events >= 1 && num_slots >= 1);
    num_events.div_ceil(num_slots)
}

/// Fault-free reference: output, cycle count, assembled event counts,
/// and the set of executed code addresses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenReference {
    pub benchmark: String,
    #[serde(with = "persist::hex_bytes")]
    pub output: Vec<u8>,
    pub golden_cycles: u64,
    pub events: EventCounts,
    #[serde(with = "persist::hex_words")]
    pub dynamic_trace: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Benign,
    Sdc,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtherReason {
    Timeout,
    Trap(TrapKind),
    /// Halted without reaching the final breakpoint.
    IllegalFlow,
}

/// Classified outcome of one fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Benign,
    Sdc,
    Other(OtherReason),
}

impl Outcome {
    pub fn class(self) -> OutcomeClass {
        match self {
            Outcome::Benign => OutcomeClass::Benign,
            Outcome::Sdc => OutcomeClass::Sdc,
            Outcome::Other(_) => OutcomeClass::Other,
        }
    }

    pub fn reason(self) -> Option<OtherReason> {
        match self {
            Outcome::Other(r) => Some(r),
            _ => None,
        }
    }
}

/// How one repetition ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopKind {
    FinalBreakpoint,
    Halted,
    Trap(TrapKind),
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionMeta {
    pub slots: Vec<EventKind>,
    pub stop: StopKind,
    pub cycles: u64,
}

/// One line of records.jsonl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub fault: Fault,
    pub outcome: OutcomeClass,
    pub reason: Option<OtherReason>,
    pub injected: bool,
    /// SHA-256 of the faulty output bytes, hex.
    pub output_digest: String,
    /// True when `events` covers the whole catalog.
    pub events_complete: bool,
    pub events: EventCounts,
    pub repetitions: Vec<RepetitionMeta>,
}

/// Everything a campaign produces. `timings_ms` is wall-clock and
/// deliberately kept out of the deterministic record stream.
#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub golden: GoldenReference,
    pub records: Vec<CampaignRecord>,
    pub timings_ms: Vec<f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

// ---------------------------------------------------------------------------
// Single-run harness
// ---------------------------------------------------------------------------

/// Parameters for one instrumented execution.
pub struct RunParams<'a> {
    pub spec: &'a BenchmarkSpec,
    /// Events assigned to counter slots for this repetition.
    pub slots: &'a [EventKind],
    /// Counter slots available in the bank.
    pub hpc_slots: usize,
    pub cycle_budget: u64,
    pub fault: Option<&'a Fault>,
    pub trace: bool,
}

/// What one execution yielded.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stop: StopKind,
    pub cycles: u64,
    pub output: Vec<u8>,
    /// Slot readings, present only when the run reached `__final_bp`.
    pub readings: Option<Vec<(EventKind, u64)>>,
    pub injected: bool,
    pub trace: Vec<u32>,
}

/// Run a benchmark to its final breakpoint (or death), enabling the
/// PMU at `__task_start` and injecting `fault` at its trigger address,
/// first arrival only.
pub fn execute_run(params: RunParams<'_>) -> Result<RunOutput, CampaignError> {
    assert!(
        params.slots.len() <= params.hpc_slots,
        "slot assignment exceeds the bank"
    );
    let config = MachineConfig {
        hpc_slots: params.hpc_slots,
        ..Default::default()
    };
    let mut machine = Machine::load(&params.spec.image, &config)?;
    machine.trace_enabled = params.trace;
    let mut session = DebugSession::new(machine);
    // benchmark symbols are validated at build time; the trigger at
    // fault-list generation time
    session
        .set_breakpoint(params.spec.task_start)
        .expect("task_start breakpoint");
    session
        .set_breakpoint(params.spec.final_bp)
        .expect("final_bp breakpoint");
    if let Some(fault) = params.fault {
        session
            .set_breakpoint(fault.trigger)
            .expect("trigger breakpoint");
    }

    let mut pmu_on = false;
    let mut injected = false;
    loop {
        match session.run(params.cycle_budget) {
            StopReason::Breakpoint(addr) => {
                if addr == params.spec.task_start && !pmu_on {
                    let machine = session.machine_mut();
                    for (slot, kind) in params.slots.iter().enumerate() {
                        machine
                            .pmu
                            .configure(slot, *kind)
                            .expect("slot within bank");
                    }
                    machine.pmu.enable();
                    pmu_on = true;
                }
                if let Some(fault) = params.fault {
                    if addr == fault.trigger && !injected {
                        session
                            .flip_bits(&fault.target)
                            .expect("validated fault target");
                        injected = true;
                    }
                }
                if addr == params.spec.final_bp {
                    let machine = session.machine_mut();
                    machine.pmu.disable();
                    // a fault can reroute execution past __task_start;
                    // never-started counters read as reset
                    let readings = if pmu_on {
                        read_slots(&machine.pmu, params.slots)
                    } else {
                        params.slots.iter().map(|kind| (*kind, 0)).collect()
                    };
                    return Ok(RunOutput {
                        stop: StopKind::FinalBreakpoint,
                        cycles: machine.cycle,
                        output: machine.output().to_vec(),
                        readings: Some(readings),
                        injected,
                        trace: machine.trace.iter().copied().collect(),
                    });
                }
                // one-shot roles consumed; only the final breakpoint stays armed
                session.remove_breakpoint(addr);
            }
            reason => {
                let stop = match reason {
                    StopReason::Halted => StopKind::Halted,
                    StopReason::Trapped(kind) => StopKind::Trap(kind),
                    StopReason::BudgetExceeded => StopKind::BudgetExceeded,
                    StopReason::Breakpoint(_) => unreachable!(),
                };
                let machine = session.machine();
                return Ok(RunOutput {
                    stop,
                    cycles: machine.cycle,
                    output: machine.output().to_vec(),
                    readings: None,
                    injected,
                    trace: machine.trace.iter().copied().collect(),
                });
            }
        }
    }
}

fn read_slots(pmu: &PmuBank, slots: &[EventKind]) -> Vec<(EventKind, u64)> {
    slots
        .iter()
        .enumerate()
        .map(|(i, kind)| (*kind, pmu.read(i).expect("configured slot")))
        .collect()
}

// ---------------------------------------------------------------------------
// Golden run
// ---------------------------------------------------------------------------

/// Execute `ceil(E/H)` unfaulted runs with rotated slot assignments and
/// merge the readings. Validates output against the benchmark's
/// expected bytes and records the executed-address trace.
pub fn golden_run(
    spec: &BenchmarkSpec,
    config: &CampaignConfig,
) -> Result<GoldenReference, CampaignError> {
    let rotation = config.slot_rotation();
    let mut events = EventCounts::default();
    let mut golden_cycles = None;
    let mut output = Vec::new();
    let mut trace = Vec::new();

    for (rep, slots) in rotation.iter().enumerate() {
        let run = execute_run(RunParams {
            spec,
            slots,
            hpc_slots: config.hpc_slots,
            cycle_budget: GOLDEN_CYCLE_BUDGET,
            fault: None,
            trace: rep == 0,
        })?;
        match run.stop {
            StopKind::FinalBreakpoint => {}
            StopKind::Trap(kind) => return Err(CampaignError::GoldenTrapped(kind)),
            StopKind::BudgetExceeded => return Err(CampaignError::GoldenTimeout),
            StopKind::Halted => return Err(CampaignError::GoldenIllegalFlow),
        }
        if run.output != spec.expected_output {
            return Err(CampaignError::GoldenOutputMismatch);
        }
        debug_assert!(golden_cycles.map(|c| c == run.cycles).unwrap_or(true));
        golden_cycles = Some(run.cycles);
        output = run.output;
        for (kind, count) in run.readings.expect("final breakpoint readings") {
            events.insert(kind, count);
        }
        if rep == 0 {
            trace = run.trace;
        }
    }

    Ok(GoldenReference {
        benchmark: spec.name.clone(),
        output,
        golden_cycles: golden_cycles.expect("at least one repetition"),
        events,
        dynamic_trace: trace,
    })
}

// ---------------------------------------------------------------------------
// Fault list
// ---------------------------------------------------------------------------

/// Draw `num_faults` faults from the seeded PRNG. Register faults pick
/// a register 0..16 (the pc lives outside the file and has its own
/// class); memory faults pick an aligned word in the image footprint or
/// the stack region; triggers come from the dynamic trace or the whole
/// code space.
pub fn generate_fault_list(
    config: &CampaignConfig,
    spec: &BenchmarkSpec,
    golden: &GoldenReference,
) -> Result<Vec<Fault>, CampaignError> {
    let triggers: Vec<u32> = match config.trigger_sampling {
        TriggerSampling::DynamicTrace => golden.dynamic_trace.clone(),
        TriggerSampling::StaticCodeSpace => {
            let (lo, hi) = spec.image.code_range();
            (lo..hi).step_by(4).collect()
        }
    };
    if triggers.is_empty() {
        return Err(CampaignError::EmptyTrace);
    }
    let memory_pool = memory_fault_pool(spec);
    let bit_count = match config.fault_model {
        FaultModel::Sbu => 1,
        FaultModel::Mbu(k) => k as usize,
    };

    let mut rng = SplitMix64::new(config.seed);
    let mut faults = Vec::with_capacity(config.num_faults as usize);
    for id in 0..config.num_faults {
        let location = match config.location_class {
            LocationClass::Registers => FaultLocation::Register {
                index: rng.next_below(16) as u8,
            },
            LocationClass::Pc => FaultLocation::ProgramCounter,
            LocationClass::Memory => {
                let idx = rng.next_below(memory_pool.len() as u64) as usize;
                FaultLocation::Memory {
                    addr: memory_pool[idx],
                }
            }
        };
        let bits = draw_bits(&mut rng, bit_count);
        let trigger = triggers[rng.next_below(triggers.len() as u64) as usize];
        faults.push(Fault {
            id,
            benchmark: spec.name.clone(),
            target: FaultTarget { location, bits },
            trigger,
        });
    }
    Ok(faults)
}

/// Aligned word addresses in the image footprint plus the stack region.
pub fn memory_fault_pool(spec: &BenchmarkSpec) -> Vec<u32> {
    let mut pool = Vec::new();
    for (start, len) in spec.image.footprint() {
        let mut addr = (start + 3) & !3;
        while addr + 4 <= start + len {
            pool.push(addr);
            addr += 4;
        }
    }
    let mem_size = DEFAULT_MEM_SIZE as u32;
    let mut addr = mem_size - STACK_REGION_BYTES;
    while addr < mem_size {
        pool.push(addr);
        addr += 4;
    }
    // an image reaching into the stack region must not double-weight it
    pool.sort_unstable();
    pool.dedup();
    pool
}

fn draw_bits(rng: &mut SplitMix64, count: usize) -> Vec<u8> {
    debug_assert!((1..=32).contains(&count));
    let mut pool: Vec<u8> = (0..32).collect();
    for i in 0..count {
        let j = i + rng.next_below((32 - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut bits = pool[..count].to_vec();
    bits.sort_unstable();
    bits
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Pure mapping from (stop reason, output, golden output) to an
/// outcome class.
pub fn classify(stop: StopKind, output: &[u8], golden_output: &[u8]) -> Outcome {
    match stop {
        StopKind::FinalBreakpoint => {
            if output == golden_output {
                Outcome::Benign
            } else {
                Outcome::Sdc
            }
        }
        StopKind::Trap(kind) => Outcome::Other(OtherReason::Trap(kind)),
        StopKind::BudgetExceeded => Outcome::Other(OtherReason::Timeout),
        StopKind::Halted => Outcome::Other(OtherReason::IllegalFlow),
    }
}

// ---------------------------------------------------------------------------
// Campaign engine
// ---------------------------------------------------------------------------

/// Execute all repetitions of one fault and assemble its record.
pub fn run_fault(
    fault: &Fault,
    spec: &BenchmarkSpec,
    config: &CampaignConfig,
    golden: &GoldenReference,
    cycle_budget: u64,
) -> Result<CampaignRecord, CampaignError> {
    let rotation = config.slot_rotation();
    let mut repetitions = Vec::with_capacity(rotation.len());
    let mut events = EventCounts::default();
    let mut final_output: Option<Vec<u8>> = None;
    let mut stop = StopKind::FinalBreakpoint;
    let mut injected = false;
    let mut complete = true;

    for slots in &rotation {
        let run = execute_run(RunParams {
            spec,
            slots,
            hpc_slots: config.hpc_slots,
            cycle_budget,
            fault: Some(fault),
            trace: false,
        })?;
        // repeatability: every repetition of a fault stops the same way
        debug_assert!(final_output
            .as_ref()
            .map(|o| *o == run.output)
            .unwrap_or(true));
        repetitions.push(RepetitionMeta {
            slots: slots.clone(),
            stop: run.stop,
            cycles: run.cycles,
        });
        stop = run.stop;
        injected = run.injected;
        match run.readings {
            Some(readings) => {
                for (kind, count) in readings {
                    events.insert(kind, count);
                }
            }
            None => complete = false,
        }
        final_output = Some(run.output);
    }

    let output = final_output.expect("at least one repetition");
    let outcome = classify(stop, &output, &golden.output);
    Ok(CampaignRecord {
        fault: fault.clone(),
        outcome: outcome.class(),
        reason: outcome.reason(),
        injected,
        output_digest: sha256_hex(&output),
        events_complete: complete && events.is_complete(),
        events,
        repetitions,
    })
}

/// Run a whole campaign: golden runs, fault list, every fault with
/// rotated slot assignments, classification. `jobs > 1` executes
/// faults on a thread pool; records keep fault-id order either way.
pub fn run_campaign(config: &CampaignConfig, jobs: usize) -> Result<CampaignReport, CampaignError> {
    config.validate()?;
    let spec = build_benchmark(config.benchmark);
    let golden = golden_run(&spec, config)?;
    let faults = generate_fault_list(config, &spec, &golden)?;
    let cycle_budget = (golden.golden_cycles as f64 * config.timeout_multiplier).ceil() as u64;

    let work = |fault: &Fault| -> Result<(CampaignRecord, f64), CampaignError> {
        let started = Instant::now();
        let record = run_fault(fault, &spec, config, &golden, cycle_budget)?;
        Ok((record, started.elapsed().as_secs_f64() * 1e3))
    };

    let results: Result<Vec<(CampaignRecord, f64)>, CampaignError> = if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| faults.par_iter().map(work).collect())
    } else {
        faults.iter().map(work).collect()
    };

    let (records, timings_ms) = results?.into_iter().unzip();
    Ok(CampaignReport {
        config: config.clone(),
        golden,
        records,
        timings_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(class: LocationClass) -> CampaignConfig {
        CampaignConfig::new(BenchmarkName::Hash, class, 20, 0xC0FFEE)
    }

    #[test]
    fn repetition_formula() {
        assert_eq!(required_repetitions(12, 6), 2);
        assert_eq!(required_repetitions(6, 6), 1);
        // 7 events six-at-a-time leave one event for a second batch
        assert_eq!(required_repetitions(7, 6), 2);
    }

    #[test]
    fn slot_rotation_covers_catalog_in_order() {
        let config = small_config(LocationClass::Registers);
        let rotation = config.slot_rotation();
        assert_eq!(rotation.len(), 2);
        let flat: Vec<EventKind> = rotation.into_iter().flatten().collect();
        assert_eq!(flat, EventKind::ALL.to_vec());
    }

    #[test]
    fn golden_run_matches_oracle_observer() {
        // merged multiplexed readings == one run with a 12-slot bank
        let config = small_config(LocationClass::Registers);
        let spec = build_benchmark(config.benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let oracle = execute_run(RunParams {
            spec: &spec,
            slots: &EventKind::ALL,
            hpc_slots: 12,
            cycle_budget: GOLDEN_CYCLE_BUDGET,
            fault: None,
            trace: false,
        })
        .unwrap();
        assert_eq!(oracle.stop, StopKind::FinalBreakpoint);
        let oracle_counts: EventCounts = oracle.readings.unwrap().into_iter().collect();
        assert_eq!(golden.events, oracle_counts);
        assert!(golden.events.is_complete());
        golden
            .events
            .to_vector()
            .unwrap()
            .check_identities()
            .unwrap();
    }

    #[test]
    fn fault_list_is_deterministic_and_sized() {
        let config = small_config(LocationClass::Memory);
        let spec = build_benchmark(config.benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let a = generate_fault_list(&config, &spec, &golden).unwrap();
        let b = generate_fault_list(&config, &spec, &golden).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
    }

    #[test]
    fn register_faults_never_target_pc() {
        let config = small_config(LocationClass::Registers);
        let spec = build_benchmark(config.benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let faults = generate_fault_list(&config, &spec, &golden).unwrap();
        for f in &faults {
            assert!(matches!(f.target.location, FaultLocation::Register { index } if index < 16));
        }
    }

    #[test]
    fn memory_pool_is_footprint_plus_stack() {
        let spec = build_benchmark(BenchmarkName::Hash);
        let pool = memory_fault_pool(&spec);
        assert!(pool.iter().all(|a| a % 4 == 0));
        let mem = DEFAULT_MEM_SIZE as u32;
        assert!(pool.contains(&(mem - 4)));
        assert!(pool.contains(&(mem - STACK_REGION_BYTES)));
        assert!(!pool.contains(&(mem - STACK_REGION_BYTES - 4)));
        let (lo, hi) = spec.image.code_range();
        assert!(pool.contains(&lo) && pool.contains(&(hi - 4)));
    }

    #[test]
    fn mbu_draws_distinct_sorted_bits() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..100 {
            let bits = draw_bits(&mut rng, 3);
            assert_eq!(bits.len(), 3);
            assert!(bits.windows(2).all(|w| w[0] < w[1]));
            assert!(bits.iter().all(|&b| b < 32));
        }
    }

    #[test]
    fn classify_rules() {
        let golden = vec![1u8, 2, 3];
        assert_eq!(
            classify(StopKind::FinalBreakpoint, &[1, 2, 3], &golden),
            Outcome::Benign
        );
        assert_eq!(
            classify(StopKind::FinalBreakpoint, &[1, 2, 4], &golden),
            Outcome::Sdc
        );
        assert_eq!(
            classify(StopKind::Trap(TrapKind::IllegalOpcode), &[], &golden),
            Outcome::Other(OtherReason::Trap(TrapKind::IllegalOpcode))
        );
        assert_eq!(
            classify(StopKind::BudgetExceeded, &[], &golden),
            Outcome::Other(OtherReason::Timeout)
        );
        assert_eq!(
            classify(StopKind::Halted, &[1, 2, 3], &golden),
            Outcome::Other(OtherReason::IllegalFlow)
        );
    }

    #[test]
    fn pc_low_bit_faults_are_benign() {
        let config = small_config(LocationClass::Pc);
        let spec = build_benchmark(config.benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let budget = golden.golden_cycles * 10;
        for (i, &trigger) in golden.dynamic_trace.iter().step_by(7).enumerate() {
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
                    "trigger {trigger:#x} bit {bit}"
                );
                assert!(record.injected);
            }
        }
    }

    #[test]
    fn pc_bit31_fault_fetches_out_of_bounds() {
        let config = small_config(LocationClass::Pc);
        let spec = build_benchmark(config.benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let trigger = golden.dynamic_trace[golden.dynamic_trace.len() / 2];
        let fault = Fault {
            id: 0,
            benchmark: spec.name.clone(),
            target: FaultTarget {
                location: FaultLocation::ProgramCounter,
                bits: vec![31],
            },
            trigger,
        };
        let record = run_fault(&fault, &spec, &config, &golden, golden.golden_cycles * 10).unwrap();
        assert_eq!(record.outcome, OutcomeClass::Other);
        assert_eq!(
            record.reason,
            Some(OtherReason::Trap(TrapKind::FetchOutOfBounds))
        );
        assert!(!record.events_complete);
        assert!(record.events.is_empty());
    }

    #[test]
    fn unreached_static_trigger_completes_uninjected() {
        // the shipped benchmarks execute every code address, so build a
        // program with a provably dead block
        let src = "
MOVI R1, 1
SHL R14, R1, 20
__task_start:
MOVI R2, 42
JMP skip
dead: MOVI R2, 99
skip: OUT R2
NOP
__final_bp: HALT
";
        let spec = BenchmarkSpec::from_source("custom", src, 42u32.to_le_bytes().to_vec()).unwrap();
        let mut config = small_config(LocationClass::Registers);
        config.trigger_sampling = TriggerSampling::StaticCodeSpace;
        let golden = golden_run(&spec, &config).unwrap();
        let dead = spec.image.symbol("dead").unwrap();
        assert!(!golden.dynamic_trace.contains(&dead));
        let fault = Fault {
            id: 9,
            benchmark: spec.name.clone(),
            target: FaultTarget {
                location: FaultLocation::Register { index: 2 },
                bits: vec![5],
            },
            trigger: dead,
        };
        let record = run_fault(&fault, &spec, &config, &golden, golden.golden_cycles * 10).unwrap();
        assert!(!record.injected);
        assert_eq!(record.outcome, OutcomeClass::Benign);
        assert_eq!(record.output_digest, sha256_hex(&golden.output));
    }

    #[test]
    fn campaign_runs_and_is_deterministic() {
        let config = small_config(LocationClass::Registers);
        let a = run_campaign(&config, 1).unwrap();
        let b = run_campaign(&config, 1).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 20);
        // every record: repetitions agree on stop and cycles
        for r in &a.records {
            assert_eq!(r.repetitions.len(), 2);
            assert!(r.repetitions.windows(2).all(|w| w[0].stop == w[1].stop));
            assert!(r.repetitions.windows(2).all(|w| w[0].cycles == w[1].cycles));
        }
    }

    #[test]
    fn trigger_on_task_start_enables_counters_and_injects() {
        let config = small_config(LocationClass::Registers);
        let spec = build_benchmark(config.benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let fault = Fault {
            id: 0,
            benchmark: spec.name.clone(),
            // R13 is dead in every workload: injection must still happen
            target: FaultTarget {
                location: FaultLocation::Register { index: 13 },
                bits: vec![9],
            },
            trigger: spec.task_start,
        };
        let record = run_fault(&fault, &spec, &config, &golden, golden.golden_cycles * 10).unwrap();
        assert!(record.injected);
        assert_eq!(record.outcome, OutcomeClass::Benign);
        assert!(record.events_complete, "counters still enabled at the shared stop");
        assert_eq!(record.events.to_vector(), golden.events.to_vector());
    }

    #[test]
    fn trigger_on_final_breakpoint_injects_then_finalizes() {
        let config = small_config(LocationClass::Registers);
        let spec = build_benchmark(config.benchmark);
        let golden = golden_run(&spec, &config).unwrap();
        let fault = Fault {
            id: 0,
            benchmark: spec.name.clone(),
            target: FaultTarget {
                location: FaultLocation::Register { index: 2 },
                bits: vec![31],
            },
            trigger: spec.final_bp,
        };
        let record = run_fault(&fault, &spec, &config, &golden, golden.golden_cycles * 10).unwrap();
        // output is already emitted when the flip lands
        assert!(record.injected);
        assert_eq!(record.outcome, OutcomeClass::Benign);
    }

    #[test]
    fn restricted_event_list_runs_with_fewer_repetitions() {
        let mut config = small_config(LocationClass::Registers);
        config.events = EventKind::ALL[..6].to_vec();
        config.num_faults = 5;
        let report = run_campaign(&config, 1).unwrap();
        assert_eq!(config.slot_rotation().len(), 1);
        for record in &report.records {
            assert_eq!(record.repetitions.len(), 1);
            // six tracked events can never cover the catalog
            assert!(!record.events_complete);
            if record.outcome != OutcomeClass::Other {
                assert_eq!(record.events.len(), 6);
            }
        }
        assert_eq!(report.golden.events.len(), 6);
    }

    #[test]
    fn parallel_execution_matches_serial() {
        let config = small_config(LocationClass::Pc);
        let serial = run_campaign(&config, 1).unwrap();
        let parallel = run_campaign(&config, 4).unwrap();
        assert_eq!(serial.records, parallel.records);
    }

    #[test]
    fn config_validation_errors() {
        let mut c = small_config(LocationClass::Registers);
        c.num_faults = 0;
        assert!(matches!(c.validate(), Err(CampaignError::InvalidConfig(_))));
        let mut c = small_config(LocationClass::Registers);
        c.timeout_multiplier = 1.0;
        assert!(c.validate().is_err());
        let mut c = small_config(LocationClass::Registers);
        c.events = vec![EventKind::Cycles, EventKind::Cycles];
        assert!(c.validate().is_err());
        let mut c = small_config(LocationClass::Registers);
        c.fault_model = FaultModel::Mbu(33);
        assert!(c.validate().is_err());
    }
}
