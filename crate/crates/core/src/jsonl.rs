//! Line-delimited JSON files whose first line is a header object.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Header {
    pub fn new(format: &str, version: u32) -> Header {
        Header { format: format.into(), version, extra: Default::default() }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Header {
        self.extra.insert(key.into(), serde_json::to_value(value).expect("serializable header field"));
        self
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        self.extra.get(key).and_then(|v| serde_json::from_value(v.clone()).ok())
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, header: &Header, rows: &[T]) -> Result<(), CoreError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`write_jsonl`], checking the format name and
/// that the version is not newer than `max_version`.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, format: &str, max_version: u32) -> Result<(Header, Vec<T>), CoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| CoreError::FileFormat(format!("{}: empty file", path.display())))??;
    let header: Header = serde_json::from_str(&first)
        .map_err(|e| CoreError::FileFormat(format!("{}: bad header: {e}", path.display())))?;
    if header.format != format {
        return Err(CoreError::FileFormat(format!("{}: expected {format}, found {}", path.display(), header.format)));
    }
    if header.version > max_version {
        return Err(CoreError::FileFormat(format!("{}: version {} is newer than {max_version}", path.display(), header.version)));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| CoreError::FileFormat(format!("{}: line {}: {e}", path.display(), i + 2)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
