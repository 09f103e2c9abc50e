//! Micro-architectural models: direct-mapped data cache, 2-bit branch
//! predictor, and the per-instruction cycle cost model.
//!
//! These structures keep working whether or not the PMU is counting;
//! only the counters are gated, the way real hardware behaves.

pub mod pmu;

pub use pmu::{EventCounts, EventKind, EventVector, PmuBank, PmuError, NUM_EVENTS};

/// Result of one data-cache lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheAccess {
    Hit,
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

/// Direct-mapped, write-allocate data cache. Default geometry is
/// 256 lines of 16 bytes (4 KiB); no write-back modeling.
#[derive(Debug, Clone)]
pub struct DataCache {
    line_size: u32,
    tags: Vec<Option<u32>>,
}

impl DataCache {
    pub fn new(lines: usize, line_size: u32) -> Self {
        assert!(lines > 0 && line_size.is_power_of_two());
        Self {
            line_size,
            tags: vec![None; lines],
        }
    }

    /// Look up `addr`; install the line on a miss.
    pub fn access(&mut self, addr: u32) -> CacheAccess {
        let block = addr / self.line_size;
        let index = (block as usize) % self.tags.len();
        let tag = block / self.tags.len() as u32;
        if self.tags[index] == Some(tag) {
            CacheAccess::Hit
        } else {
            self.tags[index] = Some(tag);
            CacheAccess::Miss
        }
    }
}

impl Default for DataCache {
    fn default() -> Self {
        Self::new(256, 16)
    }
}

/// Table of 2-bit saturating counters indexed by (pc/4) mod entries.
/// All entries start weakly-not-taken (01); predict taken at >= 10.
#[derive(Debug, Clone)]
pub struct BranchPredictor {
    counters: Vec<u8>,
}

/// Outcome of one conditional-branch prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BranchResolution {
    pub predicted_taken: bool,
    pub mispredicted: bool,
}

impl BranchPredictor {
    pub fn new(entries: usize) -> Self {
        assert!(entries > 0);
        Self {
            counters: vec![0b01; entries],
        }
    }

    /// Predict from the current counter, then update it toward `taken`.
    pub fn predict_and_resolve(&mut self, pc: u32, taken: bool) -> BranchResolution {
        let index = ((pc / 4) as usize) % self.counters.len();
        let state = self.counters[index];
        let predicted_taken = state >= 0b10;
        self.counters[index] = if taken {
            (state + 1).min(0b11)
        } else {
            state.saturating_sub(1)
        };
        BranchResolution {
            predicted_taken,
            mispredicted: predicted_taken != taken,
        }
    }
}

impl Default for BranchPredictor {
    fn default() -> Self {
        Self::new(64)
    }
}

/// Cycle cost of one instruction: base 1, +1 D-cache hit, +10 D-cache
/// miss, +2 branch misprediction.
pub fn instruction_cost(dcache: Option<CacheAccess>, branch: Option<BranchResolution>) -> u64 {
    let mut cost = 1;
    match dcache {
        Some(CacheAccess::Hit) => cost += 1,
        Some(CacheAccess::Miss) => cost += 10,
        None => {}
    }
    if let Some(b) = branch {
        if b.mispredicted {
            cost += 2;
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cold_cache_misses_then_hits() {
        let mut c = DataCache::default();
        assert_eq!(c.access(0x40), CacheAccess::Miss);
        assert_eq!(c.access(0x40), CacheAccess::Hit);
        assert_eq!(c.access(0x44), CacheAccess::Hit); // same 16-byte line
    }

    #[test]
    fn conflicting_lines_evict() {
        // 0x0000 and 0x1000 are 4 KiB apart: same index, different tag
        let mut c = DataCache::default();
        assert_eq!(c.access(0x0000), CacheAccess::Miss);
        assert_eq!(c.access(0x1000), CacheAccess::Miss);
        assert_eq!(c.access(0x0000), CacheAccess::Miss);
    }

    #[test]
    fn predictor_warms_toward_taken() {
        let mut p = BranchPredictor::default();
        // weakly-not-taken start: first taken branch mispredicts
        let r1 = p.predict_and_resolve(0x100, true);
        assert!(!r1.predicted_taken && r1.mispredicted);
        // 01 -> 10: second occurrence predicted taken
        let r2 = p.predict_and_resolve(0x100, true);
        assert!(r2.predicted_taken && !r2.mispredicted);
        let r3 = p.predict_and_resolve(0x100, true);
        assert!(r3.predicted_taken && !r3.mispredicted);
    }

    #[test]
    fn alternating_pattern_always_mispredicts() {
        let mut p = BranchPredictor::default();
        let mut taken = true;
        for _ in 0..32 {
            let r = p.predict_and_resolve(0x200, taken);
            assert!(r.mispredicted); // oscillates 01 <-> 10
            taken = !taken;
        }
    }

    #[test]
    fn cost_model() {
        assert_eq!(instruction_cost(None, None), 1);
        assert_eq!(instruction_cost(Some(CacheAccess::Hit), None), 2);
        assert_eq!(instruction_cost(Some(CacheAccess::Miss), None), 11);
        let mispred = BranchResolution {
            predicted_taken: false,
            mispredicted: true,
        };
        assert_eq!(instruction_cost(None, Some(mispred)), 3);
    }
}
