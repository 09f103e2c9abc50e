//! Assembled program images: code, data, entry point and symbols.

use std::collections::BTreeMap;

/// Reserved symbol marking the first instruction of the task body. The
/// run harness turns the PMU on when execution first arrives here.
pub const SYM_TASK_START: &str = "__task_start";
/// Reserved symbol for the end-of-task stop point. Campaign runs place a
/// breakpoint here; the instruction at this address never executes in a
/// normal run.
pub const SYM_FINAL_BP: &str = "__final_bp";

/// An assembled program ready to load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramImage {
    /// Encoded instruction words.
    pub code: Vec<u32>,
    /// Byte address the code is loaded at (4-byte aligned).
    pub code_base: u32,
    /// Initialized data bytes.
    pub data: Vec<u8>,
    /// Byte address the data is loaded at.
    pub data_base: u32,
    /// Initial pc.
    pub entry: u32,
    /// Label name -> byte address.
    pub symbols: BTreeMap<String, u32>,
}

impl ProgramImage {
    /// Half-open byte range occupied by code.
    pub fn code_range(&self) -> (u32, u32) {
        (
            self.code_base,
            self.code_base + (self.code.len() as u32) * 4,
        )
    }

    /// Used address ranges (start, len), disjoint by construction.
    pub fn footprint(&self) -> Vec<(u32, u32)> {
        let mut ranges = Vec::new();
        if !self.code.is_empty() {
            ranges.push((self.code_base, self.code.len() as u32 * 4));
        }
        if !self.data.is_empty() {
            ranges.push((self.data_base, self.data.len() as u32));
        }
        ranges
    }

    /// Total bytes needed to hold the image.
    pub fn extent(&self) -> u32 {
        self.footprint()
            .iter()
            .map(|(start, len)| start + len)
            .max()
            .unwrap_or(0)
    }

    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols.get(name).copied()
    }
}
