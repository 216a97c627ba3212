//! Occupancy encoding: slot records become binary vectors of length
//! `2L + 1` (first `L` elements: user occupancy, next `L`: jammer occupancy,
//! last element: the policy label code), which are then grouped into
//! fixed-length training chunks and sliding test windows.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::sim::{ChannelSet, PolicyKind, SimConfig, SlotRecord};

/// One encoded slot: `2L` occupancy bits followed by the label code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotVector {
    pub values: Vec<u8>,
}

impl SlotVector {
    /// The occupancy bits without the trailing label, as network inputs.
    pub fn inputs(&self) -> Vec<f64> {
        let n = self.values.len() - 1;
        self.values[..n].iter().map(|&v| v as f64).collect()
    }

    pub fn label_code(&self) -> u8 {
        *self.values.last().expect("slot vector is never empty")
    }
}

/// `chunk_len` consecutive encoded slots with their per-step labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingChunk {
    /// `chunk_len` rows of `2L` occupancy bits.
    pub inputs: Vec<Vec<f64>>,
    /// One label code per row.
    pub targets: Vec<u8>,
}

/// The last `window_len` encoded slots up to and including the current one,
/// labels stripped.
#[derive(Debug, Clone, PartialEq)]
pub struct TestWindow {
    pub inputs: Vec<Vec<f64>>,
}

/// Encode one slot record into its occupancy vector.
pub fn encode_slot(record: &SlotRecord, n_channels: usize) -> Result<SlotVector> {
    record.user_channels.validate(n_channels)?;
    record.jammer_channels.validate(n_channels)?;
    let mut values = vec![0u8; 2 * n_channels + 1];
    for c in record.user_channels.iter() {
        values[c as usize] = 1;
    }
    for c in record.jammer_channels.iter() {
        values[n_channels + c as usize] = 1;
    }
    values[2 * n_channels] = record.label.code();
    Ok(SlotVector { values })
}

/// Invert [`encode_slot`]. The slot index is not part of the vector, so the
/// caller supplies it.
pub fn decode_slot(vector: &SlotVector, n_channels: usize, t: usize) -> Result<SlotRecord> {
    if vector.values.len() != 2 * n_channels + 1 {
        return Err(Error::Encoding(format!(
            "slot vector has length {}, expected {}",
            vector.values.len(),
            2 * n_channels + 1
        )));
    }
    let bit = |v: u8, pos: usize| -> Result<bool> {
        match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Encoding(format!(
                "occupancy element {pos} holds {other}, expected 0 or 1"
            ))),
        }
    };
    let mut user = Vec::new();
    let mut jammer = Vec::new();
    for i in 0..n_channels {
        if bit(vector.values[i], i)? {
            user.push(i as u16);
        }
        if bit(vector.values[n_channels + i], n_channels + i)? {
            jammer.push(i as u16);
        }
    }
    Ok(SlotRecord {
        t,
        user_channels: ChannelSet::from_indices(user),
        jammer_channels: ChannelSet::from_indices(jammer),
        label: PolicyKind::from_code(vector.label_code())?,
    })
}

/// Partition a trace into `floor(T / chunk_len)` non-overlapping consecutive
/// chunks; trailing slots that do not fill a chunk are dropped.
pub fn make_training_chunks(
    trace: &[SlotRecord],
    n_channels: usize,
    chunk_len: usize,
) -> Result<Vec<TrainingChunk>> {
    if chunk_len == 0 {
        return Err(Error::InvalidArgument("chunk_len must be positive".into()));
    }
    if chunk_len > trace.len() {
        return Err(Error::InvalidArgument(format!(
            "chunk_len {} exceeds trace length {}",
            chunk_len,
            trace.len()
        )));
    }
    let mut chunks = Vec::with_capacity(trace.len() / chunk_len);
    for slots in trace.chunks_exact(chunk_len) {
        let mut inputs = Vec::with_capacity(chunk_len);
        let mut targets = Vec::with_capacity(chunk_len);
        for rec in slots {
            let vector = encode_slot(rec, n_channels)?;
            inputs.push(vector.inputs());
            targets.push(vector.label_code());
        }
        chunks.push(TrainingChunk { inputs, targets });
    }
    Ok(chunks)
}

/// The sliding window of slots `t - window_len + 1 ..= t`, labels stripped.
pub fn test_window(
    trace: &[SlotRecord],
    t: usize,
    n_channels: usize,
    window_len: usize,
) -> Result<TestWindow> {
    if window_len == 0 {
        return Err(Error::InvalidArgument("window_len must be positive".into()));
    }
    if t + 1 < window_len {
        return Err(Error::InsufficientHistory { t, window: window_len });
    }
    if t >= trace.len() {
        return Err(Error::InvalidArgument(format!(
            "slot {t} out of range for trace of {} slots",
            trace.len()
        )));
    }
    let inputs = trace[t + 1 - window_len..=t]
        .iter()
        .map(|rec| encode_slot(rec, n_channels).map(|v| v.inputs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TestWindow { inputs })
}

pub const DATASET_FORMAT: &str = "jamrec-dataset";
pub const DATASET_VERSION: u32 = 1;

/// JSON header written next to a dataset CSV, recording the encoding shape
/// and the provenance of the source trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub n_channels: usize,
    pub n_users: usize,
    pub chunk_len: usize,
    pub n_chunks: usize,
    pub source_seed: u64,
    pub config_sha256: String,
}

impl DatasetHeader {
    pub fn new(config: &SimConfig, chunk_len: usize, n_chunks: usize) -> Result<Self> {
        Ok(DatasetHeader {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            n_channels: config.n_channels,
            n_users: config.n_users,
            chunk_len,
            n_chunks,
            source_seed: config.seed,
            config_sha256: config_hash(config)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != DATASET_FORMAT {
            return Err(Error::Parse(format!(
                "expected dataset format {DATASET_FORMAT:?}, found {:?}",
                self.format
            )));
        }
        if self.version != DATASET_VERSION {
            return Err(Error::Parse(format!(
                "unsupported dataset version {} (supported: {DATASET_VERSION})",
                self.version
            )));
        }
        Ok(())
    }
}

/// SHA-256 of the canonical JSON form of a simulation config.
pub fn config_hash(config: &SimConfig) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// Write encoded chunks as CSV (columns `chunk`, `step`, `inputs`
/// semicolon-joined, `target`) plus the JSON header; both writes are atomic.
pub fn write_dataset(
    csv_path: &Path,
    header_path: &Path,
    chunks: &[TrainingChunk],
    header: &DatasetHeader,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["chunk", "step", "inputs", "target"])?;
    for (ci, chunk) in chunks.iter().enumerate() {
        for (si, (row, &target)) in chunk.inputs.iter().zip(&chunk.targets).enumerate() {
            let joined = row
                .iter()
                .map(|&v| ((v != 0.0) as u8).to_string())
                .collect::<Vec<_>>()
                .join(";");
            writer.write_record([ci.to_string(), si.to_string(), joined, target.to_string()])?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Parse(format!("csv flush failed: {e}")))?;
    write_atomic(csv_path, &bytes)?;
    let mut json = serde_json::to_string_pretty(header)?;
    json.push('\n');
    write_atomic(header_path, json.as_bytes())
}

pub fn read_dataset_header(path: &Path) -> Result<DatasetHeader> {
    let header: DatasetHeader = serde_json::from_slice(&std::fs::read(path)?)
        .map_err(|e| Error::Parse(format!("bad dataset header: {e}")))?;
    header.validate()?;
    Ok(header)
}

/// Read a dataset CSV back into chunks, validated against its header.
pub fn read_dataset(csv_path: &Path, header: &DatasetHeader) -> Result<Vec<TrainingChunk>> {
    let bytes = std::fs::read(csv_path)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let mut chunks: Vec<TrainingChunk> = Vec::with_capacity(header.n_chunks);
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse(format!("bad dataset row: {e}")))?;
        if row.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 dataset columns, found {}",
                row.len()
            )));
        }
        let chunk_idx: usize = row[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad chunk index {:?}", &row[0])))?;
        let step_idx: usize = row[1]
            .parse()
            .map_err(|_| Error::Parse(format!("bad step index {:?}", &row[1])))?;
        let target: u8 = row[3]
            .parse()
            .map_err(|_| Error::Parse(format!("bad target {:?}", &row[3])))?;
        let inputs: Vec<f64> = row[2]
            .split(';')
            .map(|piece| match piece {
                "0" => Ok(0.0),
                "1" => Ok(1.0),
                other => Err(Error::Parse(format!("bad occupancy bit {other:?}"))),
            })
            .collect::<Result<_>>()?;
        if inputs.len() != 2 * header.n_channels {
            return Err(Error::Parse(format!(
                "row has {} inputs, expected {}",
                inputs.len(),
                2 * header.n_channels
            )));
        }
        if chunk_idx == chunks.len() && step_idx == 0 {
            chunks.push(TrainingChunk { inputs: Vec::new(), targets: Vec::new() });
        }
        if chunk_idx + 1 != chunks.len() {
            return Err(Error::Parse(format!(
                "dataset rows out of order at chunk {chunk_idx}"
            )));
        }
        let current = chunks.last_mut().expect("chunk list is non-empty here");
        if step_idx != current.inputs.len() {
            return Err(Error::Parse(format!(
                "dataset rows out of order at chunk {chunk_idx} step {step_idx}"
            )));
        }
        current.inputs.push(inputs);
        current.targets.push(target);
    }
    if chunks.len() != header.n_chunks {
        return Err(Error::Parse(format!(
            "dataset holds {} chunks, header says {}",
            chunks.len(),
            header.n_chunks
        )));
    }
    if let Some(bad) = chunks.iter().find(|c| c.inputs.len() != header.chunk_len) {
        return Err(Error::Parse(format!(
            "chunk of {} steps does not match header chunk_len {}",
            bad.inputs.len(),
            header.chunk_len
        )));
    }
    Ok(chunks)
}
