//! Deterministic 32-bit register-machine emulator.
//!
//! Sixteen general registers (R14 is the stack pointer by convention,
//! R15 the link register), a pc held outside the register file, byte
//! memory, an append-only output buffer, and embedded micro-architecture
//! state (D-cache, branch predictor, PMU bank). Two executions of the
//! same program are bit-for-bit identical in final state, output, cycle
//! count and event counts.

pub mod asm;
pub mod image;
pub mod isa;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::uarch::{
    instruction_cost, BranchPredictor, BranchResolution, CacheAccess, DataCache, EventKind, PmuBank,
};
use image::ProgramImage;
use isa::{AluOp, Cond, Instr, ShiftOp};

pub use asm::{assemble, AsmError};

/// Register index of the stack pointer.
pub const REG_SP: usize = 14;
/// Register index of the link register.
pub const REG_LR: usize = 15;

/// Why an instruction could not complete. A trapped machine stays
/// trapped; there are no handlers.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum TrapKind {
    IllegalOpcode,
    FetchOutOfBounds,
    MemOutOfBounds,
    MisalignedAccess,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted,
    Trapped(TrapKind),
}

/// Why `run_until` returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Stopped before executing the instruction at this (masked) address.
    Breakpoint(u32),
    Halted,
    Trapped(TrapKind),
    BudgetExceeded,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LoadError {
    #[error("image needs {needed} bytes but memory is {mem_size}")]
    ImageTooLarge { needed: u32, mem_size: u32 },
}

/// Construction parameters for a machine instance.
#[derive(Debug, Clone)]
pub struct MachineConfig {
    pub mem_size: usize,
    pub hpc_slots: usize,
    pub cache_lines: usize,
    pub cache_line_size: u32,
    pub predictor_entries: usize,
}

pub const DEFAULT_MEM_SIZE: usize = 1 << 20;

impl Default for MachineConfig {
    fn default() -> Self {
        Self {
            mem_size: DEFAULT_MEM_SIZE,
            hpc_slots: crate::uarch::pmu::DEFAULT_HPC_SLOTS,
            cache_lines: 256,
            cache_line_size: 16,
            predictor_entries: 64,
        }
    }
}

/// Comparison flags set by CMP (signed compare).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Flags {
    eq: bool,
    lt: bool,
}

/// One emulated target instance. Exclusively owned by its execution
/// context; instances are independent and freely movable.
#[derive(Debug, Clone)]
pub struct Machine {
    pub regs: [u32; 16],
    pub pc: u32,
    flags: Flags,
    pub mem: Vec<u8>,
    pub cycle: u64,
    output: Vec<u8>,
    pub status: Status,
    pub cache: DataCache,
    pub predictor: BranchPredictor,
    pub pmu: PmuBank,
    code_range: (u32, u32),
    /// When true, every executed (masked) pc is recorded.
    pub trace_enabled: bool,
    pub trace: BTreeSet<u32>,
}

impl Machine {
    /// Load an image: memory zero-filled around the copied sections,
    /// registers zero except SP at top of memory, pc at the entry point.
    pub fn load(image: &ProgramImage, config: &MachineConfig) -> Result<Machine, LoadError> {
        let needed = image.extent();
        if needed as usize > config.mem_size {
            return Err(LoadError::ImageTooLarge {
                needed,
                mem_size: config.mem_size as u32,
            });
        }
        let mut mem = vec![0u8; config.mem_size];
        for (i, word) in image.code.iter().enumerate() {
            let at = image.code_base as usize + i * 4;
            mem[at..at + 4].copy_from_slice(&word.to_le_bytes());
        }
        let at = image.data_base as usize;
        mem[at..at + image.data.len()].copy_from_slice(&image.data);

        let mut regs = [0u32; 16];
        regs[REG_SP] = config.mem_size as u32;
        Ok(Machine {
            regs,
            pc: image.entry,
            flags: Flags::default(),
            mem,
            cycle: 0,
            output: Vec::new(),
            status: Status::Running,
            cache: DataCache::new(config.cache_lines, config.cache_line_size),
            predictor: BranchPredictor::new(config.predictor_entries),
            pmu: PmuBank::new(config.hpc_slots),
            code_range: image.code_range(),
            trace_enabled: false,
            trace: BTreeSet::new(),
        })
    }

    /// Bytes appended by OUT instructions, in execution order.
    pub fn output(&self) -> &[u8] {
        &self.output
    }

    /// Half-open byte range holding code, from the loaded image.
    pub fn code_range(&self) -> (u32, u32) {
        self.code_range
    }

    fn trap(&mut self, kind: TrapKind) {
        self.status = Status::Trapped(kind);
        self.cycle += 1;
        self.pmu.record(EventKind::Cycles, 1);
        self.pmu.record(EventKind::Traps, 1);
    }

    fn read_word(&self, addr: u32) -> u32 {
        let at = addr as usize;
        u32::from_le_bytes(self.mem[at..at + 4].try_into().unwrap())
    }

    fn write_word(&mut self, addr: u32, value: u32) {
        let at = addr as usize;
        self.mem[at..at + 4].copy_from_slice(&value.to_le_bytes());
    }

    /// Validate a data address, returning None after raising the trap.
    fn check_data_addr(&mut self, addr: u32) -> Option<u32> {
        if addr % 4 != 0 {
            self.trap(TrapKind::MisalignedAccess);
            return None;
        }
        if (addr as u64) + 4 > self.mem.len() as u64 {
            self.trap(TrapKind::MemOutOfBounds);
            return None;
        }
        Some(addr)
    }

    /// Cache lookup plus the read/write event pair for a validated
    /// data access.
    fn data_access(&mut self, addr: u32, kind: crate::uarch::AccessKind) -> CacheAccess {
        let res = self.cache.access(addr);
        match kind {
            crate::uarch::AccessKind::Read => self.pmu.record(EventKind::MemRead, 1),
            crate::uarch::AccessKind::Write => self.pmu.record(EventKind::MemWrite, 1),
        }
        match res {
            CacheAccess::Hit => self.pmu.record(EventKind::L1dHit, 1),
            CacheAccess::Miss => self.pmu.record(EventKind::L1dMiss, 1),
        }
        res
    }

    fn retire(&mut self, dcache: Option<CacheAccess>, branch: Option<BranchResolution>) {
        let cost = instruction_cost(dcache, branch);
        self.cycle += cost;
        self.pmu.record(EventKind::Cycles, cost);
        self.pmu.record(EventKind::InstrRetired, 1);
    }

    /// Execute one instruction. Fetch happens at `pc & !3`; the low pc
    /// bits never influence control flow.
    pub fn step(&mut self) {
        debug_assert_eq!(self.status, Status::Running);
        let fpc = self.pc & !3;
        if (fpc as u64) + 4 > self.mem.len() as u64 {
            self.trap(TrapKind::FetchOutOfBounds);
            return;
        }
        if self.trace_enabled {
            self.trace.insert(fpc);
        }
        let word = self.read_word(fpc);
        let Ok(instr) = isa::decode(word) else {
            self.trap(TrapKind::IllegalOpcode);
            return;
        };
        let mut next_pc = fpc.wrapping_add(4);
        let mut dcache = None;
        let mut branch = None;

        match instr {
            Instr::Nop => {}
            Instr::Halt => {
                self.status = Status::Halted;
            }
            Instr::Movi { rd, imm } => {
                self.regs[rd as usize] = imm as u32;
            }
            Instr::Mov { rd, rs1 } => {
                self.regs[rd as usize] = self.regs[rs1 as usize];
            }
            Instr::Alu { op, rd, rs1, rs2 } => {
                let a = self.regs[rs1 as usize];
                let b = self.regs[rs2 as usize];
                self.regs[rd as usize] = match op {
                    AluOp::Add => a.wrapping_add(b),
                    AluOp::Sub => a.wrapping_sub(b),
                    AluOp::Mul => a.wrapping_mul(b),
                    AluOp::And => a & b,
                    AluOp::Or => a | b,
                    AluOp::Xor => a ^ b,
                };
                self.pmu.record(EventKind::AluOps, 1);
            }
            Instr::Shift {
                op,
                rd,
                rs1,
                amount,
            } => {
                let a = self.regs[rs1 as usize];
                self.regs[rd as usize] = match op {
                    ShiftOp::Shl => a << amount,
                    ShiftOp::Shr => a >> amount,
                };
                self.pmu.record(EventKind::AluOps, 1);
            }
            Instr::Loadw { rd, base, offset } => {
                let addr = self.regs[base as usize].wrapping_add(offset as i32 as u32);
                let Some(addr) = self.check_data_addr(addr) else {
                    return;
                };
                dcache = Some(self.data_access(addr, crate::uarch::AccessKind::Read));
                self.regs[rd as usize] = self.read_word(addr);
            }
            Instr::Storew { src, base, offset } => {
                let addr = self.regs[base as usize].wrapping_add(offset as i32 as u32);
                let Some(addr) = self.check_data_addr(addr) else {
                    return;
                };
                dcache = Some(self.data_access(addr, crate::uarch::AccessKind::Write));
                let v = self.regs[src as usize];
                self.write_word(addr, v);
            }
            Instr::Cmp { rs1, rs2 } => {
                let a = self.regs[rs1 as usize] as i32;
                let b = self.regs[rs2 as usize] as i32;
                self.flags = Flags {
                    eq: a == b,
                    lt: a < b,
                };
                self.pmu.record(EventKind::AluOps, 1);
            }
            Instr::Branch { cond, offset } => {
                let taken = match cond {
                    Cond::Eq => self.flags.eq,
                    Cond::Ne => !self.flags.eq,
                    Cond::Lt => self.flags.lt,
                    Cond::Ge => !self.flags.lt,
                };
                let res = self.predictor.predict_and_resolve(fpc, taken);
                self.pmu.record(EventKind::BrExec, 1);
                if taken {
                    self.pmu.record(EventKind::BrTaken, 1);
                    next_pc = branch_target(fpc, offset);
                }
                if res.mispredicted {
                    self.pmu.record(EventKind::BrMispred, 1);
                }
                branch = Some(res);
            }
            Instr::Jmp { offset } => {
                next_pc = branch_target(fpc, offset);
                self.pmu.record(EventKind::JumpExec, 1);
            }
            Instr::Call { offset } => {
                self.regs[REG_LR] = fpc.wrapping_add(4);
                next_pc = branch_target(fpc, offset);
                self.pmu.record(EventKind::JumpExec, 1);
            }
            Instr::Ret => {
                next_pc = self.regs[REG_LR];
                self.pmu.record(EventKind::JumpExec, 1);
            }
            Instr::Push { rd } => {
                let addr = self.regs[REG_SP].wrapping_sub(4);
                let Some(addr) = self.check_data_addr(addr) else {
                    return;
                };
                dcache = Some(self.data_access(addr, crate::uarch::AccessKind::Write));
                let v = self.regs[rd as usize];
                self.write_word(addr, v);
                self.regs[REG_SP] = addr;
            }
            Instr::Pop { rd } => {
                let addr = self.regs[REG_SP];
                let Some(addr) = self.check_data_addr(addr) else {
                    return;
                };
                dcache = Some(self.data_access(addr, crate::uarch::AccessKind::Read));
                self.regs[rd as usize] = self.read_word(addr);
                self.regs[REG_SP] = addr.wrapping_add(4);
            }
            Instr::Out { rs1 } => {
                let v = self.regs[rs1 as usize];
                self.output.extend_from_slice(&v.to_le_bytes());
            }
        }

        self.pc = next_pc;
        self.retire(dcache, branch);
    }

    /// Run until a breakpoint, halt, trap, or the cycle budget is
    /// exceeded. The breakpoint check happens before fetch, so the
    /// instruction at a breakpoint address does not execute.
    pub fn run_until(&mut self, breakpoints: &BTreeSet<u32>, cycle_budget: u64) -> StopReason {
        loop {
            match self.status {
                Status::Running => {}
                Status::Halted => return StopReason::Halted,
                Status::Trapped(kind) => return StopReason::Trapped(kind),
            }
            let fpc = self.pc & !3;
            if breakpoints.contains(&fpc) {
                return StopReason::Breakpoint(fpc);
            }
            self.step();
            if self.cycle > cycle_budget {
                return StopReason::BudgetExceeded;
            }
            match self.status {
                Status::Running => {}
                Status::Halted => return StopReason::Halted,
                Status::Trapped(kind) => return StopReason::Trapped(kind),
            }
        }
    }
}

#[inline]
fn branch_target(fpc: u32, offset: i16) -> u32 {
    fpc.wrapping_add(4)
        .wrapping_add((offset as i32 as u32).wrapping_mul(4))
}
