//! A simulated blockchain: an append-only, hash-chained record log plus the
//! state materialized from it.
//!
//! On disk each record is one line:
//!
//! ```text
//! <seq> <KIND> <prev_hash hex> <this_hash hex> <payload base64>
//! ```
//!
//! `this_hash = SHA-256(seq || kind || 0x1F || len(payload) || payload || prev_hash)`
//! and the first record links to 32 zero bytes.

mod state;

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use sha2::{Digest, Sha256};

pub use state::{IndexDelta, Ledger};

use crate::crypto::SEPARATOR;
use crate::error::{Error, Result};

pub const GENESIS_HASH: [u8; 32] = [0; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecordKind {
    IndexAppend,
    ChainAppend,
    SearchTranscript,
    VerifyReport,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::IndexAppend => "INDEX_APPEND",
            RecordKind::ChainAppend => "CHAIN_APPEND",
            RecordKind::SearchTranscript => "SEARCH_TRANSCRIPT",
            RecordKind::VerifyReport => "VERIFY_REPORT",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "INDEX_APPEND" => Ok(RecordKind::IndexAppend),
            "CHAIN_APPEND" => Ok(RecordKind::ChainAppend),
            "SEARCH_TRANSCRIPT" => Ok(RecordKind::SearchTranscript),
            "VERIFY_REPORT" => Ok(RecordKind::VerifyReport),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerRecord {
    pub seq: u64,
    pub kind: RecordKind,
    pub payload: Vec<u8>,
    pub prev_hash: [u8; 32],
    pub this_hash: [u8; 32],
}

pub fn record_hash(seq: u64, kind: RecordKind, payload: &[u8], prev_hash: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seq.to_be_bytes());
    h.update(kind.as_str().as_bytes());
    h.update([SEPARATOR]);
    h.update((payload.len() as u64).to_be_bytes());
    h.update(payload);
    h.update(prev_hash);
    h.finalize().into()
}

impl LedgerRecord {
    fn seal(seq: u64, kind: RecordKind, payload: Vec<u8>, prev_hash: [u8; 32]) -> Self {
        let this_hash = record_hash(seq, kind, &payload, &prev_hash);
        Self {
            seq,
            kind,
            payload,
            prev_hash,
            this_hash,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {}\n",
            self.seq,
            self.kind,
            hex::encode(self.prev_hash),
            hex::encode(self.this_hash),
            STANDARD.encode(&self.payload)
        )
    }

    /// Payload as text; every payload this crate writes is ASCII.
    pub fn payload_text(&self) -> Option<&str> {
        std::str::from_utf8(&self.payload).ok()
    }

    /// Parses one line (without its newline) and checks it is the record
    /// expected at `seq` following `prev_hash`.
    fn parse(line: &[u8], seq: u64, prev_hash: &[u8; 32]) -> Result<Self> {
        let corrupt = |reason: &str| Error::LedgerCorrupt {
            seq,
            reason: reason.to_string(),
        };
        let line = std::str::from_utf8(line).map_err(|_| corrupt("non-UTF-8 bytes"))?;
        let fields: Vec<&str> = line.split(' ').collect();
        let [s, kind, prev, this, payload] = fields[..] else {
            return Err(corrupt("expected five fields"));
        };
        if s != seq.to_string() {
            return Err(corrupt("sequence number out of order"));
        }
        let kind: RecordKind = kind.parse().map_err(|_| corrupt("unknown record kind"))?;
        let hash_field = |text: &str| -> Option<[u8; 32]> {
            let bytes: [u8; 32] = hex::decode(text).ok()?.try_into().ok()?;
            (hex::encode(bytes) == text).then_some(bytes)
        };
        let prev = hash_field(prev).ok_or_else(|| corrupt("malformed prev_hash"))?;
        let this = hash_field(this).ok_or_else(|| corrupt("malformed this_hash"))?;
        if &prev != prev_hash {
            return Err(corrupt("prev_hash does not link to the previous record"));
        }
        let payload = STANDARD
            .decode(payload)
            .map_err(|_| corrupt("payload is not canonical base64"))?;
        let record = LedgerRecord::seal(seq, kind, payload, prev);
        if record.this_hash != this {
            return Err(corrupt("this_hash does not match record contents"));
        }
        Ok(record)
    }
}

impl fmt::Display for LedgerRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seq       {}", self.seq)?;
        writeln!(f, "kind      {}", self.kind)?;
        writeln!(f, "prev_hash {}", hex::encode(self.prev_hash))?;
        writeln!(f, "this_hash {}", hex::encode(self.this_hash))?;
        match self.payload_text() {
            Some(text) => write!(f, "payload\n{text}"),
            None => write!(f, "payload   {} bytes (binary)", self.payload.len()),
        }
    }
}

/// The append-only record log, optionally backed by a file.
#[derive(Debug)]
pub struct Log {
    records: Vec<LedgerRecord>,
    file: Option<(PathBuf, File)>,
}

impl Log {
    pub fn in_memory() -> Self {
        Self {
            records: Vec::new(),
            file: None,
        }
    }

    /// Opens (or creates) a log file and validates the whole chain.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let records = Self::parse_all(&bytes)?;
        Ok(Self {
            records,
            file: Some((path.to_path_buf(), file)),
        })
    }

    /// An in-memory copy of the sealed records, detached from any file.
    pub fn detached(&self) -> Self {
        Self {
            records: self.records.clone(),
            file: None,
        }
    }

    /// Validates an on-disk log without keeping it open.
    pub fn validate_file(path: impl AsRef<Path>) -> Result<usize> {
        let bytes = std::fs::read(path)?;
        Ok(Self::parse_all(&bytes)?.len())
    }

    pub fn parse_all(bytes: &[u8]) -> Result<Vec<LedgerRecord>> {
        let mut records: Vec<LedgerRecord> = Vec::new();
        let mut rest = bytes;
        while !rest.is_empty() {
            let seq = records.len() as u64;
            let Some(end) = rest.iter().position(|&b| b == b'\n') else {
                return Err(Error::LedgerCorrupt {
                    seq,
                    reason: "truncated record (no trailing newline)".into(),
                });
            };
            let prev = records.last().map_or(GENESIS_HASH, |r| r.this_hash);
            records.push(LedgerRecord::parse(&rest[..end], seq, &prev)?);
            rest = &rest[end + 1..];
        }
        Ok(records)
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn get(&self, seq: u64) -> Option<&LedgerRecord> {
        self.records.get(usize::try_from(seq).ok()?)
    }

    pub fn head_hash(&self) -> [u8; 32] {
        self.records.last().map_or(GENESIS_HASH, |r| r.this_hash)
    }

    /// Seals and durably writes one record. On failure nothing is appended.
    pub fn append(&mut self, kind: RecordKind, payload: Vec<u8>) -> Result<u64> {
        let seq = self.records.len() as u64;
        let record = LedgerRecord::seal(seq, kind, payload, self.head_hash());
        if let Some((_, file)) = &mut self.file {
            let before = file.metadata()?.len();
            let written = file
                .write_all(record.to_line().as_bytes())
                .and_then(|()| file.sync_data());
            if let Err(e) = written {
                let _ = file.set_len(before);
                return Err(e.into());
            }
        }
        self.records.push(record);
        Ok(seq)
    }
}
