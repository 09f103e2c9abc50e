//! Deterministic soft-error injection lab for an emulated 32-bit
//! embedded target.
//!
//! The crate provides, bottom to top:
//!
//! - [`vm`]: a deterministic register-machine emulator with an
//!   assembler and trap semantics;
//! - [`uarch`]: data-cache / branch-predictor / cycle-cost models and a
//!   counter-limited PMU over a 12-event catalog;
//! - [`debug`]: halt-mode debug sessions (breakpoints, state access,
//!   bit flips);
//! - [`benchmarks`]: three instrumented workloads with golden outputs;
//! - [`campaign`]: fault-list generation, golden runs, the injection
//!   loop with HPC multiplexing, and outcome classification;
//! - [`analysis`]: z-normalization, rank-based Gaussianization, PCA,
//!   histograms and outcome breakdowns over campaign records.

pub mod analysis;
pub mod benchmarks;
pub mod campaign;
pub mod debug;
pub mod uarch;
pub mod vm;

pub use debug::{DebugSession, Fault, FaultLocation, FaultTarget};
pub use uarch::{EventKind, EventVector, PmuBank};
pub use vm::{assemble, Machine, MachineConfig, StopReason, TrapKind};
