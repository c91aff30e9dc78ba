//! Snapshot files carrying distribution data.
//!
//! Layout: a version line, a JSON header line, then the body. The body is
//! either raw little-endian f64 in row-major (x, v1, v2, v3, I) order or one
//! decimal value per line; the header's `encoding` field says which. Text
//! values are written in shortest round-trip form, so write -> read is
//! bit-identical for both encodings.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use polykin_core::GridSpec;

use crate::{CliError, CliResult};

pub const SNAPSHOT_VERSION: &str = "polykin-snap-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Binary,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub grid: GridSpec,
    /// Number of spatial cells for slab snapshots; absent for homogeneous.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_cells: Option<usize>,
    pub encoding: Encoding,
}

impl SnapshotHeader {
    pub fn expected_len(&self) -> usize {
        self.grid.node_count() * self.x_cells.unwrap_or(1)
    }
}

pub fn write_snapshot(path: &Path, header: &SnapshotHeader, values: &[f64]) -> CliResult<()> {
    if values.len() != header.expected_len() {
        return Err(CliError::Malformed(format!(
            "snapshot body has {} values, header implies {}",
            values.len(),
            header.expected_len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{SNAPSHOT_VERSION}")?;
    serde_json::to_writer(&mut w, header)?;
    writeln!(w)?;
    match header.encoding {
        Encoding::Binary => {
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Encoding::Csv => {
            for v in values {
                writeln!(w, "{v}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> CliResult<(SnapshotHeader, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut version = String::new();
    r.read_line(&mut version)?;
    if version.trim_end() != SNAPSHOT_VERSION {
        return Err(CliError::Malformed(format!(
            "unsupported snapshot version {:?}, expected {SNAPSHOT_VERSION:?}",
            version.trim_end()
        )));
    }
    let mut header_line = String::new();
    r.read_line(&mut header_line)?;
    let header: SnapshotHeader = serde_json::from_str(header_line.trim_end())?;
    header
        .grid
        .validate()
        .map_err(|e| CliError::Malformed(format!("snapshot grid: {e}")))?;
    let expected = header.expected_len();

    let values = match header.encoding {
        Encoding::Binary => {
            let mut body = Vec::new();
            r.read_to_end(&mut body)?;
            if body.len() != expected * 8 {
                return Err(CliError::Malformed(format!(
                    "snapshot body truncated: {} bytes, expected {}",
                    body.len(),
                    expected * 8
                )));
            }
            body.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
                .collect()
        }
        Encoding::Csv => {
            let mut values = Vec::with_capacity(expected);
            for line in r.lines() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                values.push(line.trim().parse::<f64>().map_err(|e| {
                    CliError::Malformed(format!("bad value {line:?}: {e}"))
                })?);
            }
            if values.len() != expected {
                return Err(CliError::Malformed(format!(
                    "snapshot body has {} values, header implies {expected}",
                    values.len()
                )));
            }
            values
        }
    };
    Ok((header, values))
}
