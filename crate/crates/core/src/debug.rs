//! Debug-unit abstraction over one machine: breakpoints, run control,
//! register/memory access, and the bit-flip primitive.
//!
//! Access follows halt-mode debugging: state reads and writes are legal
//! only before the first resume or while stopped at a breakpoint. None
//! of the operations advance the cycle counter or perturb the cache,
//! predictor, or PMU counts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vm::{Machine, Status, StopReason};

/// Where a fault lands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultLocation {
    Register {
        index: u8,
    },
    ProgramCounter,
    /// 4-byte-aligned word address.
    Memory {
        addr: u32,
    },
}

impl FaultLocation {
    /// Short class name used in CSV output and breakdown grouping.
    pub fn class_name(&self) -> &'static str {
        match self {
            FaultLocation::Register { .. } => "registers",
            FaultLocation::ProgramCounter => "pc",
            FaultLocation::Memory { .. } => "memory",
        }
    }
}

/// One injection target: a location plus the set of bits to flip
/// (a singleton for an SBU).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultTarget {
    #[serde(flatten)]
    pub location: FaultLocation,
    pub bits: Vec<u8>,
}

impl FaultTarget {
    /// XOR mask formed by the bit set.
    pub fn mask(&self) -> u32 {
        self.bits
            .iter()
            .fold(0u32, |m, &b| m | (1 << (b as u32 % 32)))
    }
}

/// A fully specified fault: what to flip and at which code address to
/// trigger the injection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub id: u64,
    pub benchmark: String,
    pub target: FaultTarget,
    /// Trigger instruction address (4-byte aligned, in the code region).
    pub trigger: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DebugError {
    #[error("machine is not halted at a breakpoint")]
    NotHalted,
    #[error("register index {0} out of range")]
    BadIndex(u8),
    #[error("address {addr:#x} is not a valid breakpoint target")]
    BadAddress { addr: u32 },
    #[error("memory range {addr:#x}+{len} out of bounds")]
    OutOfBounds { addr: u32, len: u32 },
    #[error("memory fault target {addr:#x} must be 4-byte aligned and in bounds")]
    BadFaultAddress { addr: u32 },
    #[error("fault bit set must be non-empty distinct indices 0..32")]
    BadBitSet,
}

/// Old and new value of the word a flip touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipResult {
    pub old: u32,
    pub new: u32,
}

/// A debug session wrapping one machine instance.
pub struct DebugSession {
    machine: Machine,
    breakpoints: BTreeSet<u32>,
    /// True before the first resume and at breakpoint stops.
    debuggable: bool,
}

impl DebugSession {
    pub fn new(machine: Machine) -> Self {
        Self {
            machine,
            breakpoints: BTreeSet::new(),
            debuggable: true,
        }
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    /// Escape hatch for harness-level PMU control at stops.
    pub fn machine_mut(&mut self) -> &mut Machine {
        &mut self.machine
    }

    pub fn into_machine(self) -> Machine {
        self.machine
    }

    pub fn breakpoints(&self) -> &BTreeSet<u32> {
        &self.breakpoints
    }

    fn check_halted(&self) -> Result<(), DebugError> {
        if self.debuggable {
            Ok(())
        } else {
            Err(DebugError::NotHalted)
        }
    }

    /// Arm a breakpoint. Idempotent. The address must be word-aligned
    /// and inside the code region.
    pub fn set_breakpoint(&mut self, addr: u32) -> Result<(), DebugError> {
        let (lo, hi) = self.machine.code_range();
        if addr % 4 != 0 || addr < lo || addr >= hi {
            return Err(DebugError::BadAddress { addr });
        }
        self.breakpoints.insert(addr);
        Ok(())
    }

    pub fn remove_breakpoint(&mut self, addr: u32) {
        self.breakpoints.remove(&addr);
    }

    /// Resume execution until the next stop. Register/memory access is
    /// legal again only if the stop is a breakpoint.
    pub fn run(&mut self, cycle_budget: u64) -> StopReason {
        self.debuggable = false;
        let reason = self.machine.run_until(&self.breakpoints, cycle_budget);
        if matches!(reason, StopReason::Breakpoint(_)) {
            self.debuggable = true;
        }
        reason
    }

    pub fn read_register(&self, idx: u8) -> Result<u32, DebugError> {
        self.check_halted()?;
        if idx >= 16 {
            return Err(DebugError::BadIndex(idx));
        }
        Ok(self.machine.regs[idx as usize])
    }

    pub fn write_register(&mut self, idx: u8, value: u32) -> Result<(), DebugError> {
        self.check_halted()?;
        if idx >= 16 {
            return Err(DebugError::BadIndex(idx));
        }
        self.machine.regs[idx as usize] = value;
        Ok(())
    }

    pub fn read_pc(&self) -> Result<u32, DebugError> {
        self.check_halted()?;
        Ok(self.machine.pc)
    }

    pub fn read_memory(&self, addr: u32, len: u32) -> Result<Vec<u8>, DebugError> {
        self.check_halted()?;
        let end = addr as u64 + len as u64;
        if end > self.machine.mem.len() as u64 {
            return Err(DebugError::OutOfBounds { addr, len });
        }
        Ok(self.machine.mem[addr as usize..end as usize].to_vec())
    }

    pub fn write_memory(&mut self, addr: u32, bytes: &[u8]) -> Result<(), DebugError> {
        self.check_halted()?;
        let end = addr as u64 + bytes.len() as u64;
        if end > self.machine.mem.len() as u64 {
            return Err(DebugError::OutOfBounds {
                addr,
                len: bytes.len() as u32,
            });
        }
        self.machine.mem[addr as usize..end as usize].copy_from_slice(bytes);
        Ok(())
    }

    /// XOR the target word with the mask formed by the bit set. Flips
    /// to the pc apply to the held pc; low-bit masking happens later,
    /// at fetch. Applying the same flip twice restores the old value.
    pub fn flip_bits(&mut self, target: &FaultTarget) -> Result<FlipResult, DebugError> {
        self.check_halted()?;
        if target.bits.is_empty()
            || target.bits.iter().any(|&b| b >= 32)
            || (1..target.bits.len()).any(|i| target.bits[i..].contains(&target.bits[i - 1]))
        {
            return Err(DebugError::BadBitSet);
        }
        let mask = target.mask();
        match &target.location {
            FaultLocation::Register { index } => {
                if *index >= 16 {
                    return Err(DebugError::BadIndex(*index));
                }
                let old = self.machine.regs[*index as usize];
                let new = old ^ mask;
                self.machine.regs[*index as usize] = new;
                Ok(FlipResult { old, new })
            }
            FaultLocation::ProgramCounter => {
                let old = self.machine.pc;
                let new = old ^ mask;
                self.machine.pc = new;
                Ok(FlipResult { old, new })
            }
            FaultLocation::Memory { addr } => {
                let addr = *addr;
                if addr % 4 != 0 || (addr as u64) + 4 > self.machine.mem.len() as u64 {
                    return Err(DebugError::BadFaultAddress { addr });
                }
                let at = addr as usize;
                let old = u32::from_le_bytes(self.machine.mem[at..at + 4].try_into().unwrap());
                let new = old ^ mask;
                self.machine.mem[at..at + 4].copy_from_slice(&new.to_le_bytes());
                Ok(FlipResult { old, new })
            }
        }
    }

    /// True once the underlying machine has halted or trapped.
    pub fn is_dead(&self) -> bool {
        !matches!(self.machine.status, Status::Running)
    }
}
