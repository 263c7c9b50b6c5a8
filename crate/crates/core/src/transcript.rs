//! Line-delimited JSON log of calibration rounds.
//!
//! One record per line: `{"t":..,"distribution":[..],"sampled":..,"y":..}`,
//! optionally with the routed `bucket` and the `raw` forecast when written by
//! the recalibration harness.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub t: u64,
    pub distribution: Vec<f64>,
    pub sampled: usize,
    pub y: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<f64>,
}

pub fn write_transcript<W: Write>(mut out: W, records: &[TranscriptRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_transcript<R: BufRead>(input: R) -> Result<Vec<TranscriptRecord>> {
    let mut records = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: k + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}
