//! Trace files: one CSV record per slot plus a JSON sidecar carrying the
//! simulation config (including the seed) needed to reproduce the trace.
//!
//! CSV columns: `t`, `user_channels` (semicolon-joined indices),
//! `jammer_channels` (semicolon-joined indices), `label` (integer 0-4).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::sim::{ChannelSet, PolicyKind, SimConfig, SlotRecord};

pub const TRACE_FORMAT: &str = "jamrec-trace";
pub const TRACE_VERSION: u32 = 1;

/// JSON sidecar written next to every trace CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub format: String,
    pub version: u32,
    pub config: SimConfig,
}

impl TraceSidecar {
    pub fn new(config: SimConfig) -> Self {
        TraceSidecar {
            format: TRACE_FORMAT.to_string(),
            version: TRACE_VERSION,
            config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != TRACE_FORMAT {
            return Err(Error::Parse(format!(
                "expected sidecar format {TRACE_FORMAT:?}, found {:?}",
                self.format
            )));
        }
        if self.version != TRACE_VERSION {
            return Err(Error::Parse(format!(
                "unsupported trace version {} (supported: {TRACE_VERSION})",
                self.version
            )));
        }
        Ok(())
    }
}

fn join_channels(set: &ChannelSet) -> String {
    set.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

fn parse_channels(field: &str) -> Result<ChannelSet> {
    if field.is_empty() {
        return Ok(ChannelSet::default());
    }
    let mut channels = Vec::new();
    for piece in field.split(';') {
        let c: u16 = piece
            .parse()
            .map_err(|_| Error::Parse(format!("bad channel index {piece:?}")))?;
        channels.push(c);
    }
    Ok(ChannelSet::from_indices(channels))
}

/// Serialize a trace to CSV bytes.
pub fn trace_to_csv(trace: &[SlotRecord]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["t", "user_channels", "jammer_channels", "label"])?;
    for rec in trace {
        writer.write_record([
            rec.t.to_string(),
            join_channels(&rec.user_channels),
            join_channels(&rec.jammer_channels),
            rec.label.code().to_string(),
        ])?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Parse(format!("csv flush failed: {e}")))
}

/// Parse a trace from CSV bytes.
pub fn trace_from_csv(bytes: &[u8]) -> Result<Vec<SlotRecord>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut trace = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse(format!("bad trace row: {e}")))?;
        if row.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 trace columns, found {}",
                row.len()
            )));
        }
        let t: usize = row[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad slot index {:?}", &row[0])))?;
        let label_code: u8 = row[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad label {:?}", &row[3])))?;
        trace.push(SlotRecord {
            t,
            user_channels: parse_channels(&row[1])?,
            jammer_channels: parse_channels(&row[2])?,
            label: PolicyKind::from_code(label_code)?,
        });
    }
    Ok(trace)
}

/// Write a trace CSV and its JSON sidecar; both writes are atomic.
pub fn write_trace(
    csv_path: &Path,
    sidecar_path: &Path,
    trace: &[SlotRecord],
    config: &SimConfig,
) -> Result<()> {
    write_atomic(csv_path, &trace_to_csv(trace)?)?;
    let sidecar = TraceSidecar::new(config.clone());
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    write_atomic(sidecar_path, json.as_bytes())
}

pub fn read_trace(csv_path: &Path) -> Result<Vec<SlotRecord>> {
    trace_from_csv(&std::fs::read(csv_path)?)
}

pub fn read_sidecar(path: &Path) -> Result<TraceSidecar> {
    let sidecar: TraceSidecar = serde_json::from_slice(&std::fs::read(path)?)
        .map_err(|e| Error::Parse(format!("bad trace sidecar: {e}")))?;
    sidecar.validate()?;
    Ok(sidecar)
}
