//! Campaign directory layout and file formats.
//!
//! A campaign directory holds:
//!
//! - `manifest.json` — config echo, seed, event catalog, golden digest,
//!   tool version; together with the seed it regenerates `faults.csv`
//!   and `records.jsonl` bit-identically;
//! - `faults.csv` — fault_id, location_class, target_index_or_address
//!   (hex for addresses), bits (`;`-separated), trigger (hex);
//! - `records.jsonl` — one [`CampaignRecord`] per line, deterministic;
//! - `golden.json` — the golden reference;
//! - `timings.csv` — per-fault wall-clock milliseconds (the one
//!   nondeterministic artifact, kept out of records.jsonl on purpose).

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CampaignConfig, CampaignRecord, CampaignReport, GoldenReference};
use crate::debug::FaultLocation;
use crate::uarch::EventKind;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FAULTS_FILE: &str = "faults.csv";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const GOLDEN_FILE: &str = "golden.json";
pub const TIMINGS_FILE: &str = "timings.csv";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed {file}: {source}")]
    Malformed {
        file: String,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: u8,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub seed: u64,
    pub config: CampaignConfig,
    pub event_catalog: Vec<CatalogEntry>,
    pub golden_output_digest: String,
    pub golden_cycles: u64,
}

impl Manifest {
    pub fn for_report(report: &CampaignReport) -> Manifest {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: report.config.seed,
            config: report.config.clone(),
            event_catalog: EventKind::ALL
                .iter()
                .map(|k| CatalogEntry {
                    id: k.id(),
                    name: k.name().to_string(),
                })
                .collect(),
            golden_output_digest: super::sha256_hex(&report.golden.output),
            golden_cycles: report.golden.golden_cycles,
        }
    }
}

/// Serialize records as JSON Lines, one record per line, stable field
/// and key order.
pub fn records_to_jsonl(records: &[CampaignRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn faults_to_csv(records: &[CampaignRecord]) -> String {
    let mut out = String::from("fault_id,location_class,target_index_or_address,bits,trigger\n");
    for record in records {
        let fault = &record.fault;
        let target = match fault.target.location {
            FaultLocation::Register { index } => index.to_string(),
            FaultLocation::ProgramCounter => "-".to_string(),
            FaultLocation::Memory { addr } => format!("{addr:#010x}"),
        };
        let bits = fault
            .target
            .bits
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{},{},{},{},{:#010x}\n",
            fault.id,
            fault.target.location.class_name(),
            target,
            bits,
            fault.trigger
        ));
    }
    out
}

fn timings_to_csv(timings_ms: &[f64]) -> String {
    let mut out = String::from("fault_id,wall_ms\n");
    for (id, ms) in timings_ms.iter().enumerate() {
        out.push_str(&format!("{id},{ms:.3}\n"));
    }
    out
}

/// Write every campaign artifact into `dir`, creating it if needed.
pub fn write_campaign_dir(dir: &Path, report: &CampaignReport) -> Result<(), PersistError> {
    fs::create_dir_all(dir)?;
    let manifest = Manifest::for_report(report);
    write_atomic(&dir.join(MANIFEST_FILE), &to_json_pretty(&manifest))?;
    write_atomic(&dir.join(GOLDEN_FILE), &to_json_pretty(&report.golden))?;
    write_atomic(
        &dir.join(FAULTS_FILE),
        faults_to_csv(&report.records).as_bytes(),
    )?;
    write_atomic(&dir.join(RECORDS_FILE), &records_to_jsonl(&report.records))?;
    write_atomic(
        &dir.join(TIMINGS_FILE),
        timings_to_csv(&report.timings_ms).as_bytes(),
    )?;
    Ok(())
}

fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializes");
    out.push(b'\n');
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, PersistError> {
    read_json(&dir.join(MANIFEST_FILE))
}

pub fn read_golden(dir: &Path) -> Result<GoldenReference, PersistError> {
    read_json(&dir.join(GOLDEN_FILE))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PersistError> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|source| PersistError::Malformed {
        file: path.display().to_string(),
        source,
    })
}

/// Read records.jsonl back, one record per non-empty line.
pub fn read_records(path: &Path) -> Result<Vec<CampaignRecord>, PersistError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(line).map_err(|source| PersistError::Malformed {
                file: path.display().to_string(),
                source,
            })?,
        );
    }
    Ok(records)
}

/// Hex-string serialization for output byte buffers.
pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = String::with_capacity(bytes.len() * 2);
        for b in bytes {
            s.push_str(&format!("{b:02x}"));
        }
        serializer.serialize_str(&s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s.len() % 2 != 0 {
            return Err(serde::de::Error::custom("odd-length hex string"));
        }
        (0..s.len())
            .step_by(2)
            .map(|i| {
                u8::from_str_radix(&s[i..i + 2], 16)
                    .map_err(|_| serde::de::Error::custom("bad hex byte"))
            })
            .collect()
    }
}

/// Hex-string-list serialization for address lists.
pub mod hex_words {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(words: &[u32], serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(words.iter().map(|w| format!("{w:#010x}")))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u32>, D::Error> {
        let strings = Vec::<String>::deserialize(deserializer)?;
        strings
            .into_iter()
            .map(|s| {
                let digits = s.strip_prefix("0x").unwrap_or(&s);
                u32::from_str_radix(digits, 16)
                    .map_err(|_| serde::de::Error::custom("bad hex word"))
            })
            .collect()
    }
}
