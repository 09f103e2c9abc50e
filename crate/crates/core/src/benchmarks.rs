//! The three instrumented workloads: a memory-intense quicksort, a
//! shortest-path solver, and an ALU-intense iterated mix digest.
//!
//! Each image follows the same layout: an init phase (set SP, zero
//! scratch, copy constants), the `__task_start` label opening the task
//! body, the task, a read-staging NOP, and `__final_bp` on the closing
//! HALT. Expected outputs are recomputed here by plain Rust reference
//! implementations of the same algorithms over the same embedded
//! inputs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vm::image::{ProgramImage, SYM_FINAL_BP, SYM_TASK_START};
use crate::vm::{assemble, AsmError};

const QSORT_ASM: &str = include_str!("../benchmarks/qsort.asm");
const DIJKSTRA_ASM: &str = include_str!("../benchmarks/dijkstra.asm");
const HASH_ASM: &str = include_str!("../benchmarks/hash.asm");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkName {
    Qsort,
    Dijkstra,
    Hash,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 3] = [
        BenchmarkName::Qsort,
        BenchmarkName::Dijkstra,
        BenchmarkName::Hash,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Qsort => "qsort",
            BenchmarkName::Dijkstra => "dijkstra",
            BenchmarkName::Hash => "hash",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qsort" => Ok(BenchmarkName::Qsort),
            "dijkstra" => Ok(BenchmarkName::Dijkstra),
            "hash" => Ok(BenchmarkName::Hash),
            other => Err(BenchmarkError::UnknownBenchmark(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),
    #[error("benchmark failed to assemble: {0}")]
    Assemble(#[from] AsmError),
    #[error("benchmark image is missing the `{0}` symbol")]
    MissingSymbol(&'static str),
}

/// An assembled, instrumented workload with its expected golden output.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub name: String,
    pub image: ProgramImage,
    pub expected_output: Vec<u8>,
    /// First task-body instruction; the harness enables the PMU here.
    pub task_start: u32,
    /// End-of-task stop address; never executed in a clean run.
    pub final_bp: u32,
}

impl BenchmarkSpec {
    /// (first task instruction, final breakpoint address)
    pub fn task_window(&self) -> (u32, u32) {
        (self.task_start, self.final_bp)
    }

    /// Assemble `source` into a campaign-ready spec. The source must
    /// export `__task_start` and `__final_bp`.
    pub fn from_source(
        name: &str,
        source: &str,
        expected_output: Vec<u8>,
    ) -> Result<BenchmarkSpec, BenchmarkError> {
        let image = assemble(source)?;
        let task_start = image
            .symbol(SYM_TASK_START)
            .ok_or(BenchmarkError::MissingSymbol(SYM_TASK_START))?;
        let final_bp = image
            .symbol(SYM_FINAL_BP)
            .ok_or(BenchmarkError::MissingSymbol(SYM_FINAL_BP))?;
        Ok(BenchmarkSpec {
            name: name.to_string(),
            image,
            expected_output,
            task_start,
            final_bp,
        })
    }
}

/// Build one of the three shipped benchmarks.
pub fn build_benchmark(name: BenchmarkName) -> BenchmarkSpec {
    let (source, expected) = match name {
        BenchmarkName::Qsort => (QSORT_ASM, reference_qsort_output()),
        BenchmarkName::Dijkstra => (DIJKSTRA_ASM, reference_dijkstra_output()),
        BenchmarkName::Hash => (HASH_ASM, reference_hash_output()),
    };
    // shipped sources always carry the required symbols and assemble
    BenchmarkSpec::from_source(name.as_str(), source, expected)
        .expect("shipped benchmark must build")
}

pub fn benchmark_source(name: BenchmarkName) -> &'static str {
    match name {
        BenchmarkName::Qsort => QSORT_ASM,
        BenchmarkName::Dijkstra => DIJKSTRA_ASM,
        BenchmarkName::Hash => HASH_ASM,
    }
}

// ---------------------------------------------------------------------------
// Embedded inputs, mirrored from the .data sections of the assembly
// sources. Divergence between the two copies fails the golden tests.
// ---------------------------------------------------------------------------

pub const QSORT_INPUT: [u32; 64] = [
    0x30F008B9, 0x44934CDD, 0x56CBE05B, 0x7ED0B1DB, 0x73587556, 0x29D76683, 0x0DA654EA, 0x1092F809,
    0x51204719, 0x2651C69D, 0x645F1BD3, 0x61381F1C, 0x40202AFB, 0x76243D3E, 0x14E3A1FD, 0x37DF4E4B,
    0x4AC31217, 0x19CB077E, 0x71E5841F, 0x51A1EFE4, 0x0D36AD7D, 0x4250273B, 0x6A89F9F4, 0x72F78E9F,
    0x06B99DC9, 0x457F9988, 0x44584CF6, 0x015BBB65, 0x5C99B220, 0x7B92F98E, 0x1A00B1CF, 0x29F19EAD,
    0x16F72EDC, 0x40C46D1F, 0x4BA2AFE9, 0x18DDEAAB, 0x53B70CA8, 0x50490689, 0x1AA14864, 0x2385D736,
    0x758538E7, 0x4C50364C, 0x55AA7EB1, 0x432A3ADA, 0x442E641D, 0x4A8FF2C7, 0x05B57E20, 0x5E1516FF,
    0x341CD1F3, 0x14946BEB, 0x1A714EBA, 0x3EF7BBEE, 0x1DD6A7E2, 0x20781057, 0x20BB677D, 0x55D76F7A,
    0x3E22FD24, 0x2563BEE4, 0x7763CD57, 0x53222028, 0x3404B1A3, 0x26B902AB, 0x375D8DDE, 0x7C00C03C,
];

/// "No edge" weight in the adjacency matrix; sums of two of these stay
/// below 2^31 so the in-VM signed compares are safe.
pub const DIJKSTRA_INF: u32 = 0x3FFF_FFFF;

#[rustfmt::skip]
pub const DIJKSTRA_ADJACENCY: [[u32; 16]; 16] = {
    const X: u32 = DIJKSTRA_INF;
    [
        [0, 4, X, X, 17, 1, X, X, X, X, X, 6, X, X, X, 17],
        [4, 0, 2, X, X, X, X, X, 17, X, X, X, X, X, X, X],
        [X, 2, 0, 15, X, X, X, X, X, 1, X, X, X, X, X, X],
        [X, X, 15, 0, 2, 1, X, X, X, X, X, 5, 16, X, 11, 5],
        [17, X, X, 2, 0, 3, X, X, 7, X, X, 18, X, X, X, X],
        [1, X, X, 1, 3, 0, 19, X, X, X, X, 7, X, 10, X, X],
        [X, X, X, X, X, 19, 0, 13, X, X, X, 19, X, X, X, X],
        [X, X, X, X, X, X, 13, 0, 12, X, X, 3, X, X, X, X],
        [X, 17, X, X, 7, X, X, 12, 0, 11, 16, 3, 14, X, 7, X],
        [X, X, 1, X, X, X, X, X, 11, 0, 4, X, 8, 13, X, X],
        [X, X, X, X, X, X, X, X, 16, 4, 0, 11, X, X, X, 16],
        [6, X, X, 5, 18, 7, 19, 3, 3, X, 11, 0, 7, 6, X, X],
        [X, X, X, 16, X, X, X, X, 14, 8, X, 7, 0, 14, X, X],
        [X, X, X, X, X, 10, X, X, X, 13, X, 6, 14, 0, 10, X],
        [X, X, X, 11, X, X, X, X, 7, X, X, X, X, 10, 0, 1],
        [17, X, X, 5, X, X, X, X, X, X, 16, X, X, X, 1, 0],
    ]
};

pub const HASH_IV: [u32; 4] = [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344];
pub const HASH_MULT: [u32; 4] = [0x9E3779B1, 0x85EBCA77, 0xC2B2AE3D, 0x27D4EB2F];

pub const HASH_MESSAGE: [u32; 64] = [
    0x42C6B79E, 0x78010C2D, 0x56FD0104, 0x91DEFD80, 0x8DE756ED, 0x0DB459E5, 0x95299A75, 0x250C80CC,
    0x83ED1AD8, 0xE908C1DC, 0x7F017CD0, 0x946B6802, 0x00FE5DBC, 0x2ADC7C2C, 0x7548FAE8, 0xFD914EC7,
    0xAD2F338E, 0xDA5F9E2C, 0x3C4D1AE9, 0xA2C29F0E, 0x3BB5ECA1, 0xBBC0811C, 0x1E834676, 0x2481E1DA,
    0x4BF4A1C7, 0x0B6D55F8, 0xCF61342B, 0x9F028953, 0x208C2D38, 0x8E3377AC, 0x2922AE67, 0xB52B9F14,
    0x1D5C0B6D, 0x8E42BF51, 0xF32897F7, 0xC24A5F14, 0x9B6222EF, 0xFB0342BC, 0xFDB63A46, 0x6B18E28C,
    0x0C906166, 0x71DF2D0A, 0xE25C0829, 0x41DBC2E1, 0x4022889E, 0x5A974C92, 0xC7C4F9A3, 0x94F2A217,
    0x2001BEFD, 0xD51383D9, 0xA97603B7, 0x7E0F54AE, 0x19648B7F, 0x30D380D8, 0x1B893016, 0xF51BB4F9,
    0x7BC5FA36, 0xD0EB1844, 0x34401429, 0x17D09116, 0xEFFA2DE5, 0xECE6094C, 0x0CBBD18E, 0xE3B86AC7,
];

fn words_le(words: &[u32]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

fn reference_qsort_output() -> Vec<u8> {
    let mut v = QSORT_INPUT;
    v.sort_unstable();
    words_le(&v)
}

fn reference_dijkstra_output() -> Vec<u8> {
    words_le(&reference_dijkstra_distances())
}

pub fn reference_dijkstra_distances() -> [u32; 16] {
    let mut dist = [DIJKSTRA_INF; 16];
    let mut vis = [false; 16];
    dist[0] = 0;
    for _ in 0..16 {
        let mut u = 0;
        let mut best = u32::MAX;
        for (v, &d) in dist.iter().enumerate() {
            if !vis[v] && d < best {
                best = d;
                u = v;
            }
        }
        vis[u] = true;
        for v in 0..16 {
            let alt = dist[u] + DIJKSTRA_ADJACENCY[u][v];
            if alt < dist[v] {
                dist[v] = alt;
            }
        }
    }
    dist
}

/// Reference implementation of the round function used by the hash
/// benchmark.
pub fn mix_digest(msg: &[u32]) -> [u32; 4] {
    let [k0, k1, k2, k3] = HASH_MULT;
    let mut s = HASH_IV;
    for &m in msg {
        s[0] = (s[0] ^ m).rotate_left(13).wrapping_mul(k0);
        s[1] = (s[1] ^ s[0]).rotate_left(7).wrapping_mul(k1);
        s[2] = (s[2] ^ s[1]).rotate_left(17).wrapping_mul(k2);
        s[3] = (s[3] ^ s[2]).rotate_left(5).wrapping_mul(k3);
    }
    s
}

fn reference_hash_output() -> Vec<u8> {
    words_le(&mix_digest(&HASH_MESSAGE))
}
