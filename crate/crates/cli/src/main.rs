//! Host-side orchestration front end: assemble and run programs, drive
//! fault-injection campaigns, and post-process campaign records.
//!
//! Exit codes: 0 success, 1 usage/validation (bad flags, bad config,
//! assembly errors), 2 golden-run failure, 3 I/O.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use faultlab_core::analysis::{self, DEFAULT_HIST_BINS};
use faultlab_core::benchmarks::{benchmark_source, BenchmarkName};
use faultlab_core::campaign::persist::{self, RECORDS_FILE, TIMINGS_FILE};
use faultlab_core::campaign::{
    self, run_campaign, CampaignConfig, CampaignError, CampaignRecord, CampaignReport,
    LocationClass, TriggerSampling,
};
use faultlab_core::uarch::EventKind;
use faultlab_core::vm::image::{SYM_FINAL_BP, SYM_TASK_START};
use faultlab_core::vm::{assemble, Machine, MachineConfig, StopReason};

#[derive(Parser)]
#[command(
    name = "faultlab",
    version,
    about = "Deterministic soft-error injection lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a program and print its layout and symbols
    Asm {
        /// Assembly source file, or a shipped benchmark name
        program: String,
        /// Print each encoded instruction word
        #[arg(long)]
        list: bool,
    },
    /// Assemble and run a program fault-free, printing output bytes,
    /// cycles and the full event vector
    Run {
        /// Assembly source file, or a shipped benchmark name
        program: String,
        /// Cycle budget before the run is declared hung
        #[arg(long, default_value_t = 1_000_000_000)]
        budget: u64,
    },
    /// Run one fault-injection campaign, or the full benchmark x
    /// location grid with --grid
    Campaign(CampaignArgs),
    /// Emit pca_scatter.csv, cycles_hist.csv and breakdown.csv for a
    /// campaign directory
    Analyze {
        dir: PathBuf,
        /// Histogram bin count
        #[arg(long, default_value_t = DEFAULT_HIST_BINS)]
        bins: usize,
    },
    /// Print the outcome breakdown and timing summary for a campaign
    /// directory (or a directory of campaign directories)
    Report { dir: PathBuf },
}

#[derive(Args)]
struct CampaignArgs {
    /// Campaign config (JSON); flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (per-campaign subdirectories under --grid)
    #[arg(long)]
    out: PathBuf,
    /// Run all 9 benchmark x location campaigns
    #[arg(long)]
    grid: bool,
    #[arg(long)]
    benchmark: Option<String>,
    /// registers | pc | memory
    #[arg(long)]
    location: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    faults: Option<u64>,
    /// Comma-separated event names to track
    #[arg(long)]
    events: Option<String>,
    /// Counter slots in the PMU bank
    #[arg(long)]
    hpc: Option<usize>,
    #[arg(long = "timeout-mult")]
    timeout_mult: Option<f64>,
    /// Parallel fault executions
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// dynamic | static
    #[arg(long = "trigger-mode")]
    trigger_mode: Option<String>,
}

enum AppError {
    Usage(String),
    Golden(String),
    Io(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Golden(_) => 2,
            AppError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Usage(m) | AppError::Golden(m) | AppError::Io(m) => m,
        }
    }
}

impl From<CampaignError> for AppError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::GoldenTrapped(_)
            | CampaignError::GoldenTimeout
            | CampaignError::GoldenIllegalFlow
            | CampaignError::GoldenOutputMismatch => AppError::Golden(e.to_string()),
            other => AppError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<persist::PersistError> for AppError {
    fn from(e: persist::PersistError) -> Self {
        AppError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    // die quietly when the output pipe closes (`faultlab asm x | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Asm { program, list } => cmd_asm(&program, list),
        Command::Run { program, budget } => cmd_run(&program, budget),
        Command::Campaign(args) => cmd_campaign(args),
        Command::Analyze { dir, bins } => cmd_analyze(&dir, bins),
        Command::Report { dir } => cmd_report(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Treat `program` as a shipped benchmark name first, then as a path.
fn load_source(program: &str) -> Result<String, AppError> {
    if let Ok(name) = BenchmarkName::from_str(program) {
        return Ok(benchmark_source(name).to_string());
    }
    fs::read_to_string(program).map_err(|e| AppError::Io(format!("cannot read `{program}`: {e}")))
}

fn cmd_asm(program: &str, list: bool) -> Result<(), AppError> {
    let source = load_source(program)?;
    let image = assemble(&source).map_err(|e| AppError::Usage(e.to_string()))?;
    println!(
        "code:  {} instructions at {:#010x}",
        image.code.len(),
        image.code_base
    );
    println!(
        "data:  {} bytes at {:#010x}",
        image.data.len(),
        image.data_base
    );
    println!("entry: {:#010x}", image.entry);
    if !image.symbols.is_empty() {
        println!("symbols:");
        for (name, addr) in &image.symbols {
            println!("  {addr:#010x}  {name}");
        }
    }
    if list {
        println!("listing:");
        for (i, word) in image.code.iter().enumerate() {
            println!("  {:#010x}: {word:08x}", image.code_base + 4 * i as u32);
        }
    }
    Ok(())
}

fn cmd_run(program: &str, budget: u64) -> Result<(), AppError> {
    let source = load_source(program)?;
    let image = assemble(&source).map_err(|e| AppError::Usage(e.to_string()))?;
    let config = MachineConfig {
        hpc_slots: EventKind::ALL.len(),
        ..Default::default()
    };
    let mut machine = Machine::load(&image, &config).map_err(|e| AppError::Usage(e.to_string()))?;

    let enable_all = |machine: &mut Machine| {
        for (slot, kind) in EventKind::ALL.iter().enumerate() {
            machine
                .pmu
                .configure(slot, *kind)
                .expect("oracle bank slot");
        }
        machine.pmu.enable();
    };

    // harness behavior: count from __task_start when present, stop at
    // __final_bp when present
    if let Some(task_start) = image.symbol(SYM_TASK_START) {
        let stop = machine.run_until(&BTreeSet::from([task_start]), budget);
        if stop != StopReason::Breakpoint(task_start) {
            return Err(AppError::Usage(format!("init phase ended early: {stop:?}")));
        }
        enable_all(&mut machine);
    } else {
        enable_all(&mut machine);
    }
    let breakpoints = match image.symbol(SYM_FINAL_BP) {
        Some(addr) => BTreeSet::from([addr]),
        None => BTreeSet::new(),
    };
    let stop = machine.run_until(&breakpoints, budget);
    let clean = matches!(stop, StopReason::Halted | StopReason::Breakpoint(_));

    println!("stop:   {stop:?}");
    println!("cycles: {}", machine.cycle);
    let output = machine.output();
    print!("output: {} bytes", output.len());
    if output.is_empty() {
        println!();
    } else {
        let hex: String = output.iter().map(|b| format!("{b:02x}")).collect();
        println!("  {hex}");
    }
    println!("events:");
    for (slot, kind) in EventKind::ALL.iter().enumerate() {
        println!(
            "  {:>13}  {}",
            kind.name(),
            machine.pmu.read(slot).expect("configured")
        );
    }
    if clean {
        Ok(())
    } else {
        Err(AppError::Usage(format!(
            "run did not complete cleanly: {stop:?}"
        )))
    }
}

fn parse_location(s: &str) -> Result<LocationClass, AppError> {
    match s {
        "registers" => Ok(LocationClass::Registers),
        "pc" => Ok(LocationClass::Pc),
        "memory" => Ok(LocationClass::Memory),
        other => Err(AppError::Usage(format!(
            "unknown location class `{other}` (expected registers|pc|memory)"
        ))),
    }
}

fn parse_events(s: &str) -> Result<Vec<EventKind>, AppError> {
    s.split(',')
        .map(|name| {
            EventKind::from_name(name.trim())
                .ok_or_else(|| AppError::Usage(format!("unknown event `{}`", name.trim())))
        })
        .collect()
}

/// Base config from --config JSON, else from the --benchmark/--location
/// flags; flag overrides apply either way.
fn build_config(args: &CampaignArgs) -> Result<CampaignConfig, AppError> {
    let mut config =
        match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| AppError::Io(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str::<CampaignConfig>(&text)
                    .map_err(|e| AppError::Usage(format!("bad config {}: {e}", path.display())))?
            }
            None => {
                let benchmark = args.benchmark.as_deref().ok_or_else(|| {
                    AppError::Usage("--benchmark (or --config) is required".into())
                })?;
                let benchmark = BenchmarkName::from_str(benchmark)
                    .map_err(|e| AppError::Usage(e.to_string()))?;
                let location = args.location.as_deref().ok_or_else(|| {
                    AppError::Usage("--location (or --config) is required".into())
                })?;
                CampaignConfig::new(benchmark, parse_location(location)?, 100, 1)
            }
        };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(faults) = args.faults {
        config.num_faults = faults;
    }
    if let Some(events) = &args.events {
        config.events = parse_events(events)?;
    }
    if let Some(hpc) = args.hpc {
        config.hpc_slots = hpc;
    }
    if let Some(mult) = args.timeout_mult {
        config.timeout_multiplier = mult;
    }
    if let Some(mode) = &args.trigger_mode {
        config.trigger_sampling = match mode.as_str() {
            "dynamic" => TriggerSampling::DynamicTrace,
            "static" => TriggerSampling::StaticCodeSpace,
            other => {
                return Err(AppError::Usage(format!(
                    "unknown trigger mode `{other}` (expected dynamic|static)"
                )))
            }
        };
    }
    config
        .validate()
        .map_err(|e| AppError::Usage(e.to_string()))?;
    Ok(config)
}

fn cmd_campaign(args: CampaignArgs) -> Result<(), AppError> {
    if args.grid {
        let mut summaries = Vec::new();
        for benchmark in BenchmarkName::ALL {
            for location in LocationClass::ALL {
                let mut config = build_grid_config(&args, benchmark, location)?;
                config.benchmark = benchmark;
                config.location_class = location;
                config
                    .validate()
                    .map_err(|e| AppError::Usage(e.to_string()))?;
                let dir = args
                    .out
                    .join(format!("{}_{}", benchmark, location.as_str()));
                let summary = run_one_campaign(&config, args.jobs, &dir)?;
                summaries.push(summary);
            }
        }
        println!();
        println!("grid summary:");
        print_summaries(&summaries);
        return Ok(());
    }
    let config = build_config(&args)?;
    let summary = run_one_campaign(&config, args.jobs, &args.out)?;
    print_summaries(&[summary]);
    Ok(())
}

/// Grid mode reuses the flag overrides but not the benchmark/location
/// selection.
fn build_grid_config(
    args: &CampaignArgs,
    benchmark: BenchmarkName,
    location: LocationClass,
) -> Result<CampaignConfig, AppError> {
    if args.config.is_some() {
        let mut config = build_config(args)?;
        config.benchmark = benchmark;
        config.location_class = location;
        return Ok(config);
    }
    let mut config = CampaignConfig::new(benchmark, location, 100, 1);
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(faults) = args.faults {
        config.num_faults = faults;
    }
    if let Some(events) = &args.events {
        config.events = parse_events(events)?;
    }
    if let Some(hpc) = args.hpc {
        config.hpc_slots = hpc;
    }
    if let Some(mult) = args.timeout_mult {
        config.timeout_multiplier = mult;
    }
    if let Some(mode) = &args.trigger_mode {
        config.trigger_sampling = match mode.as_str() {
            "dynamic" => TriggerSampling::DynamicTrace,
            "static" => TriggerSampling::StaticCodeSpace,
            other => return Err(AppError::Usage(format!("unknown trigger mode `{other}`"))),
        };
    }
    Ok(config)
}

struct CampaignSummary {
    benchmark: String,
    location: String,
    faults: u64,
    executions: u64,
    mean_wall_ms: f64,
    benign_pct: f64,
    sdc_pct: f64,
    other_pct: f64,
}

fn run_one_campaign(
    config: &CampaignConfig,
    jobs: usize,
    dir: &Path,
) -> Result<CampaignSummary, AppError> {
    let started = Instant::now();
    let report = run_campaign(config, jobs)?;
    persist::write_campaign_dir(dir, &report)?;
    let elapsed = started.elapsed().as_secs_f64();
    let summary = summarize_report(&report);
    println!(
        "{}/{}: {} faults, {} executions, {:.1}s wall, mean {:.3} ms/fault -> {}",
        summary.benchmark,
        summary.location,
        summary.faults,
        summary.executions,
        elapsed,
        summary.mean_wall_ms,
        dir.display()
    );
    Ok(summary)
}

fn summarize_report(report: &CampaignReport) -> CampaignSummary {
    let reps = campaign::required_repetitions(report.config.events.len(), report.config.hpc_slots);
    let breakdown = analysis::summarize(&report.records).expect("records non-empty");
    let row = &breakdown.rows[0];
    let mean_wall_ms = if report.timings_ms.is_empty() {
        0.0
    } else {
        report.timings_ms.iter().sum::<f64>() / report.timings_ms.len() as f64
    };
    CampaignSummary {
        benchmark: report.config.benchmark.to_string(),
        location: report.config.location_class.as_str().to_string(),
        faults: report.records.len() as u64,
        executions: report.records.len() as u64 * reps as u64,
        mean_wall_ms,
        benign_pct: row.benign_pct,
        sdc_pct: row.sdc_pct,
        other_pct: row.other_pct,
    }
}

fn print_summaries(summaries: &[CampaignSummary]) {
    println!(
        "{:<10} {:<10} {:>7} {:>10} {:>12} {:>8} {:>7} {:>7}",
        "benchmark", "location", "faults", "execs", "mean ms", "benign%", "sdc%", "other%"
    );
    for s in summaries {
        println!(
            "{:<10} {:<10} {:>7} {:>10} {:>12.3} {:>8.1} {:>7.1} {:>7.1}",
            s.benchmark,
            s.location,
            s.faults,
            s.executions,
            s.mean_wall_ms,
            s.benign_pct,
            s.sdc_pct,
            s.other_pct
        );
    }
}

fn cmd_analyze(dir: &Path, bins: usize) -> Result<(), AppError> {
    let records_path = dir.join(RECORDS_FILE);
    if !records_path.exists() {
        return Err(AppError::Io(format!(
            "{} not found",
            records_path.display()
        )));
    }
    let records = persist::read_records(&records_path)?;
    if records.is_empty() {
        return Err(AppError::Usage("records.jsonl is empty".into()));
    }
    let outputs =
        analysis::analyze_records(&records, bins).map_err(|e| AppError::Usage(e.to_string()))?;
    for w in &outputs.warnings {
        eprintln!("warning: {w}");
    }
    fs::write(dir.join("pca_scatter.csv"), &outputs.pca_scatter)?;
    fs::write(dir.join("cycles_hist.csv"), &outputs.cycles_hist)?;
    fs::write(dir.join("breakdown.csv"), &outputs.breakdown)?;
    println!(
        "wrote pca_scatter.csv, cycles_hist.csv, breakdown.csv to {}",
        dir.display()
    );
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<(), AppError> {
    let mut campaign_dirs = Vec::new();
    if dir.join(RECORDS_FILE).exists() {
        campaign_dirs.push(dir.to_path_buf());
    } else {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(RECORDS_FILE).exists())
            .collect();
        entries.sort();
        campaign_dirs = entries;
    }
    if campaign_dirs.is_empty() {
        return Err(AppError::Io(format!(
            "no {RECORDS_FILE} under {}",
            dir.display()
        )));
    }

    let mut all_records: Vec<CampaignRecord> = Vec::new();
    let mut wall: Vec<(String, f64, u64)> = Vec::new();
    for cdir in &campaign_dirs {
        let records = persist::read_records(&cdir.join(RECORDS_FILE))?;
        let label = cdir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(mean) = read_mean_timing(&cdir.join(TIMINGS_FILE)) {
            wall.push((label, mean, records.len() as u64));
        }
        all_records.extend(records);
    }
    let breakdown =
        analysis::summarize(&all_records).map_err(|e| AppError::Usage(e.to_string()))?;

    println!(
        "{:<10} {:<10} {:>7} {:>8} {:>7} {:>7}  {:>14} {:>14}",
        "benchmark", "location", "faults", "benign%", "sdc%", "other%", "benign cyc", "sdc cyc"
    );
    for row in &breakdown.rows {
        let fmt_cycles = |s: &Option<analysis::CycleStats>| match s {
            Some(cs) => format!("{:.0}±{:.0}", cs.mean, cs.std),
            None => "-".to_string(),
        };
        println!(
            "{:<10} {:<10} {:>7} {:>8.1} {:>7.1} {:>7.1}  {:>14} {:>14}",
            row.benchmark,
            row.location,
            row.total,
            row.benign_pct,
            row.sdc_pct,
            row.other_pct,
            fmt_cycles(&row.benign_cycles),
            fmt_cycles(&row.sdc_cycles),
        );
    }
    if !wall.is_empty() {
        println!();
        println!("{:<24} {:>7} {:>14}", "campaign", "faults", "mean wall ms");
        for (label, mean, count) in &wall {
            println!("{label:<24} {count:>7} {mean:>14.3}");
        }
    }
    Ok(())
}

fn read_mean_timing(path: &Path) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for line in text.lines().skip(1) {
        let ms: f64 = line.split(',').nth(1)?.parse().ok()?;
        sum += ms;
        count += 1;
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}
