//! Performance monitoring unit: a bank of H configurable counter slots
//! over a fixed 12-event catalog.
//!
//! A slot counts one selected event while the bank is enabled. Covering
//! more events than slots takes repeated deterministic runs with
//! rotated slot assignments; `EventVector` is the assembled per-run
//! count map over the whole catalog.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of events in the catalog.
pub const NUM_EVENTS: usize = 12;

/// Default number of counter slots in a bank.
pub const DEFAULT_HPC_SLOTS: usize = 6;

/// The countable event catalog. Ids and names are serialized in
/// campaign manifests and must stay stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum EventKind {
    Cycles = 0,
    InstrRetired = 1,
    MemRead = 2,
    MemWrite = 3,
    L1dHit = 4,
    L1dMiss = 5,
    BrExec = 6,
    BrTaken = 7,
    BrMispred = 8,
    JumpExec = 9,
    AluOps = 10,
    Traps = 11,
}

impl EventKind {
    pub const ALL: [EventKind; NUM_EVENTS] = [
        EventKind::Cycles,
        EventKind::InstrRetired,
        EventKind::MemRead,
        EventKind::MemWrite,
        EventKind::L1dHit,
        EventKind::L1dMiss,
        EventKind::BrExec,
        EventKind::BrTaken,
        EventKind::BrMispred,
        EventKind::JumpExec,
        EventKind::AluOps,
        EventKind::Traps,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Cycles => "CYCLES",
            EventKind::InstrRetired => "INSTR_RETIRED",
            EventKind::MemRead => "MEM_READ",
            EventKind::MemWrite => "MEM_WRITE",
            EventKind::L1dHit => "L1D_HIT",
            EventKind::L1dMiss => "L1D_MISS",
            EventKind::BrExec => "BR_EXEC",
            EventKind::BrTaken => "BR_TAKEN",
            EventKind::BrMispred => "BR_MISPRED",
            EventKind::JumpExec => "JUMP_EXEC",
            EventKind::AluOps => "ALU_OPS",
            EventKind::Traps => "TRAPS",
        }
    }

    pub fn from_name(name: &str) -> Option<EventKind> {
        EventKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        EventKind::from_name(&name)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown event `{name}`")))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PmuError {
    #[error("slot {0} out of range")]
    SlotOutOfRange(usize),
    #[error("bank must be disabled to reconfigure")]
    BankEnabled,
    #[error("slot {0} has no event selected")]
    SlotUnconfigured(usize),
}

#[derive(Debug, Clone, Copy, Default)]
struct Slot {
    selected: Option<EventKind>,
    count: u64,
}

/// A bank of H hardware performance counters.
#[derive(Debug, Clone)]
pub struct PmuBank {
    slots: Vec<Slot>,
    enabled: bool,
    // event id -> counting slot, rebuilt on enable; None while disabled
    route: [Option<u8>; NUM_EVENTS],
}

impl PmuBank {
    pub fn new(num_slots: usize) -> Self {
        assert!(num_slots >= 1);
        Self {
            slots: vec![Slot::default(); num_slots],
            enabled: false,
            route: [None; NUM_EVENTS],
        }
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    /// Select `event` on `slot` and zero its count. The bank must be
    /// disabled.
    pub fn configure(&mut self, slot: usize, event: EventKind) -> Result<(), PmuError> {
        if self.enabled {
            return Err(PmuError::BankEnabled);
        }
        let s = self
            .slots
            .get_mut(slot)
            .ok_or(PmuError::SlotOutOfRange(slot))?;
        s.selected = Some(event);
        s.count = 0;
        Ok(())
    }

    pub fn enable(&mut self) {
        // later slots win a duplicate selection; assignments are normally distinct
        self.route = [None; NUM_EVENTS];
        for (i, s) in self.slots.iter().enumerate() {
            if let Some(kind) = s.selected {
                self.route[kind as usize] = Some(i as u8);
            }
        }
        self.enabled = true;
    }

    pub fn disable(&mut self) {
        self.enabled = false;
        self.route = [None; NUM_EVENTS];
    }

    /// Non-destructive read of a configured slot.
    pub fn read(&self, slot: usize) -> Result<u64, PmuError> {
        let s = self.slots.get(slot).ok_or(PmuError::SlotOutOfRange(slot))?;
        if s.selected.is_none() {
            return Err(PmuError::SlotUnconfigured(slot));
        }
        Ok(s.count)
    }

    /// Event selected on a slot, if any.
    pub fn selected(&self, slot: usize) -> Option<EventKind> {
        self.slots.get(slot).and_then(|s| s.selected)
    }

    /// Count `n` occurrences of `kind`; no-op while disabled.
    #[inline]
    pub fn record(&mut self, kind: EventKind, n: u64) {
        if !self.enabled {
            return;
        }
        if let Some(slot) = self.route[kind as usize] {
            self.slots[slot as usize].count += n;
        }
    }
}

impl Default for PmuBank {
    fn default() -> Self {
        Self::new(DEFAULT_HPC_SLOTS)
    }
}

/// Complete per-run count map over the whole catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventVector {
    counts: [u64; NUM_EVENTS],
}

impl EventVector {
    pub fn get(&self, kind: EventKind) -> u64 {
        self.counts[kind as usize]
    }

    pub fn set(&mut self, kind: EventKind, count: u64) {
        self.counts[kind as usize] = count;
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventKind, u64)> + '_ {
        EventKind::ALL
            .iter()
            .map(move |&k| (k, self.counts[k as usize]))
    }

    /// Check the structural identities every run must satisfy.
    pub fn check_identities(&self) -> Result<(), String> {
        let g = |k: EventKind| self.get(k);
        if g(EventKind::L1dHit) + g(EventKind::L1dMiss)
            != g(EventKind::MemRead) + g(EventKind::MemWrite)
        {
            return Err("L1D_HIT + L1D_MISS != MEM_READ + MEM_WRITE".into());
        }
        if g(EventKind::BrTaken) > g(EventKind::BrExec) {
            return Err("BR_TAKEN > BR_EXEC".into());
        }
        if g(EventKind::BrMispred) > g(EventKind::BrExec) {
            return Err("BR_MISPRED > BR_EXEC".into());
        }
        if g(EventKind::InstrRetired) > g(EventKind::Cycles) {
            return Err("INSTR_RETIRED > CYCLES".into());
        }
        if g(EventKind::Traps) > 1 {
            return Err("TRAPS > 1".into());
        }
        Ok(())
    }
}

/// Measured counts for a subset of the catalog, kept in catalog-id
/// order. This is what a run actually yields: complete when the
/// configured event list covers the catalog, partial (or empty, for
/// runs that died before readout) otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventCounts(Vec<(EventKind, u64)>);

impl EventCounts {
    pub fn insert(&mut self, kind: EventKind, count: u64) {
        match self.0.binary_search_by_key(&kind.id(), |(k, _)| k.id()) {
            Ok(i) => self.0[i].1 = count,
            Err(i) => self.0.insert(i, (kind, count)),
        }
    }

    pub fn get(&self, kind: EventKind) -> Option<u64> {
        self.0
            .binary_search_by_key(&kind.id(), |(k, _)| k.id())
            .ok()
            .map(|i| self.0[i].1)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventKind, u64)> + '_ {
        self.0.iter().copied()
    }

    /// True when every catalog event has a count.
    pub fn is_complete(&self) -> bool {
        self.0.len() == NUM_EVENTS
    }

    pub fn to_vector(&self) -> Option<EventVector> {
        if !self.is_complete() {
            return None;
        }
        let mut v = EventVector::default();
        for &(kind, count) in &self.0 {
            v.set(kind, count);
        }
        Some(v)
    }
}

impl FromIterator<(EventKind, u64)> for EventCounts {
    fn from_iter<T: IntoIterator<Item = (EventKind, u64)>>(iter: T) -> Self {
        let mut out = EventCounts::default();
        for (kind, count) in iter {
            out.insert(kind, count);
        }
        out
    }
}

impl Serialize for EventCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (kind, count) in self.iter() {
            map.serialize_entry(kind.name(), &count)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EventCounts {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CountsVisitor;
        impl<'de> Visitor<'de> for CountsVisitor {
            type Value = EventCounts;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of event names to counts")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = EventCounts::default();
                while let Some((name, count)) = access.next_entry::<String, u64>()? {
                    let kind = EventKind::from_name(&name).ok_or_else(|| {
                        serde::de::Error::custom(format!("unknown event `{name}`"))
                    })?;
                    out.insert(kind, count);
                }
                Ok(out)
            }
        }
        deserializer.deserialize_map(CountsVisitor)
    }
}

// Serialized as an object keyed by event name, in catalog-id order, so
// emitted JSON is byte-stable.
impl Serialize for EventVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(NUM_EVENTS))?;
        for (kind, count) in self.iter() {
            map.serialize_entry(kind.name(), &count)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for EventVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct VecVisitor;
        impl<'de> Visitor<'de> for VecVisitor {
            type Value = EventVector;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of all 12 event names to counts")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut seen = [false; NUM_EVENTS];
                let mut out = EventVector::default();
                while let Some((name, count)) = access.next_entry::<String, u64>()? {
                    let kind = EventKind::from_name(&name).ok_or_else(|| {
                        serde::de::Error::custom(format!("unknown event `{name}`"))
                    })?;
                    seen[kind as usize] = true;
                    out.set(kind, count);
                }
                if seen.iter().all(|&s| s) {
                    Ok(out)
                } else {
                    Err(serde::de::Error::custom(
                        "event vector is missing catalog keys",
                    ))
                }
            }
        }
        deserializer.deserialize_map(VecVisitor)
    }
}
