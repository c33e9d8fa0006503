//! Ledger-held state and the two contracts that run over it.

use std::path::Path;

use super::{LedgerRecord, Log, RecordKind};
use crate::crypto::{Ciphertext, MasterKey, PrfOutput};
use crate::error::{Error, Result};
use crate::index::{EncryptedIndex, Height, IndexKey, PathCode, TreeTag};
use crate::search::{search, SearchTranscript, Trapdoor};
use crate::verify::{verify, VerifyInput, VerifyReport};
use crate::version::{ChainRecord, ChainRepo};

const ERROR_MARKER: &str = "ERROR ";

/// One batch of index mutations, sealed as a single `INDEX_APPEND`.
///
/// ```text
/// L <levels>
/// E|B <128 hex>
/// D <path> <64 hex>
/// ```
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexDelta {
    pub height: Height,
    pub entries: Vec<(TreeTag, IndexKey)>,
    pub digests: Vec<(PathCode, PrfOutput)>,
}

impl IndexDelta {
    pub fn new(height: Height) -> Self {
        Self {
            height,
            entries: Vec::new(),
            digests: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.digests.is_empty()
    }

    pub fn to_payload(&self) -> Vec<u8> {
        let mut out = format!("L {}\n", self.height.levels());
        for (tree, key) in &self.entries {
            let marker = match tree {
                TreeTag::Main => 'E',
                TreeTag::Delete => 'B',
            };
            out.push_str(&format!("{marker} {}\n", key.to_hex()));
        }
        for (leaf, digest) in &self.digests {
            out.push_str(&format!("D {} {}\n", leaf.to_token(), digest.to_hex()));
        }
        out.into_bytes()
    }

    pub fn from_payload(payload: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(payload).map_err(|_| Error::format(0, "non-UTF-8 payload"))?;
        let mut lines = text.lines().enumerate();
        let height = match lines.next().map(|(_, l)| l.split_once(' ')) {
            Some(Some(("L", levels))) => levels
                .parse()
                .ok()
                .and_then(|l| Height::new(l).ok())
                .ok_or_else(|| Error::format(1, "bad height"))?,
            _ => return Err(Error::format(1, "missing height line")),
        };
        let mut delta = Self::new(height);
        for (i, line) in lines {
            let lineno = i + 1;
            match line.split(' ').collect::<Vec<_>>()[..] {
                [marker @ ("E" | "B"), hex] => {
                    let key = IndexKey::from_hex(hex)
                        .ok_or_else(|| Error::format(lineno, "entry must be 128 hex chars"))?;
                    let tree = if marker == "E" {
                        TreeTag::Main
                    } else {
                        TreeTag::Delete
                    };
                    delta.entries.push((tree, key));
                }
                ["D", path, hex] => {
                    let leaf = PathCode::from_token(path)
                        .map_err(|_| Error::format(lineno, "bad leaf path"))?;
                    let digest = PrfOutput::from_hex(hex)
                        .ok_or_else(|| Error::format(lineno, "digest must be 64 hex chars"))?;
                    delta.digests.push((leaf, digest));
                }
                _ => return Err(Error::format(lineno, format!("unrecognised record {line:?}"))),
            }
        }
        Ok(delta)
    }

    fn check(&self, height: Height) -> Result<()> {
        if self.height != height {
            return Err(Error::ContractViolation(format!(
                "delta built for height {}, ledger index has height {}",
                self.height.levels(),
                height.levels()
            )));
        }
        if let Some((leaf, _)) = self.digests.iter().find(|(p, _)| !p.is_leaf(height)) {
            return Err(Error::ContractViolation(format!("{leaf} is not a leaf")));
        }
        Ok(())
    }

    fn apply(&self, index: &mut EncryptedIndex) -> Result<()> {
        self.check(index.height())?;
        for (tree, key) in &self.entries {
            index.insert_key(*tree, *key);
        }
        for (leaf, digest) in &self.digests {
            index.set_digest(*leaf, *digest)?;
        }
        Ok(())
    }
}

fn chain_payload(record: &ChainRecord) -> Vec<u8> {
    format!("{} {}\n", record.lookup.to_hex(), record.payload.to_hex()).into_bytes()
}

fn parse_chain_payload(payload: &[u8]) -> Option<ChainRecord> {
    let text = std::str::from_utf8(payload).ok()?;
    let (lookup, rest) = text.strip_suffix('\n')?.split_once(' ')?;
    Some(ChainRecord {
        lookup: PrfOutput::from_hex(lookup)?,
        payload: PrfOutput::from_hex(rest)?,
    })
}

/// The simulated blockchain: the record log plus the index and chained
/// trapdoor repository materialized from it.
#[derive(Debug)]
pub struct Ledger {
    log: Log,
    index: EncryptedIndex,
    chain: ChainRepo,
}

impl Ledger {
    pub fn in_memory(height: Height) -> Self {
        Self {
            log: Log::in_memory(),
            index: EncryptedIndex::new(height),
            chain: ChainRepo::new(),
        }
    }

    /// Opens a ledger file, validates its chain and replays it from genesis.
    pub fn open(path: impl AsRef<Path>, height: Height) -> Result<Self> {
        let log = Log::open(path)?;
        let (index, chain) = Self::replay(log.records(), height)?;
        Ok(Self { log, index, chain })
    }

    /// Rebuilds index and chain repository from a validated record sequence.
    pub fn replay(records: &[LedgerRecord], height: Height) -> Result<(EncryptedIndex, ChainRepo)> {
        let mut index = EncryptedIndex::new(height);
        let mut chain = ChainRepo::new();
        for record in records {
            let corrupt = |reason: String| Error::LedgerCorrupt {
                seq: record.seq,
                reason,
            };
            match record.kind {
                RecordKind::IndexAppend => {
                    let delta = IndexDelta::from_payload(&record.payload)
                        .map_err(|e| corrupt(e.to_string()))?;
                    if delta.height != height {
                        return Err(Error::Config(format!(
                            "ledger was built with height {}, configuration says {}",
                            delta.height.levels(),
                            height.levels()
                        )));
                    }
                    delta.apply(&mut index).map_err(|e| corrupt(e.to_string()))?;
                }
                RecordKind::ChainAppend => {
                    let link = parse_chain_payload(&record.payload)
                        .ok_or_else(|| corrupt("malformed chain record".into()))?;
                    chain.append(link);
                }
                RecordKind::SearchTranscript | RecordKind::VerifyReport => {}
            }
        }
        Ok((index, chain))
    }

    /// An in-memory copy of the ledger; appends to it never reach disk.
    pub fn detached(&self) -> Self {
        Self {
            log: self.log.detached(),
            index: self.index.clone(),
            chain: self.chain.clone(),
        }
    }

    pub fn log(&self) -> &Log {
        &self.log
    }

    pub fn index(&self) -> &EncryptedIndex {
        &self.index
    }

    /// Read access for audits and replay checks.
    pub fn chain(&self) -> &ChainRepo {
        &self.chain
    }

    pub fn height(&self) -> Height {
        self.index.height()
    }

    pub fn submit_index(&mut self, delta: &IndexDelta) -> Result<u64> {
        delta.check(self.index.height())?;
        let seq = self.log.append(RecordKind::IndexAppend, delta.to_payload())?;
        delta.apply(&mut self.index)?;
        Ok(seq)
    }

    pub fn submit_chain(&mut self, record: ChainRecord) -> Result<u64> {
        let seq = self.log.append(RecordKind::ChainAppend, chain_payload(&record))?;
        self.chain.append(record);
        Ok(seq)
    }

    /// The search contract: resolves histories, walks both trees and seals
    /// the transcript. Failures are sealed too, with an error marker.
    pub fn invoke_search(&mut self, trapdoor: &Trapdoor) -> Result<(u64, SearchTranscript)> {
        match search(&self.index, &self.chain, trapdoor) {
            Ok(transcript) => {
                let seq = self
                    .log
                    .append(RecordKind::SearchTranscript, transcript.to_text().into_bytes())?;
                Ok((seq, transcript))
            }
            Err(e) => {
                self.log.append(
                    RecordKind::SearchTranscript,
                    format!("{ERROR_MARKER}{e}\n").into_bytes(),
                )?;
                Err(e)
            }
        }
    }

    /// The verify contract over a caller-supplied transcript.
    pub fn invoke_verify(&mut self, key: &MasterKey, input: &VerifyInput) -> Result<(u64, VerifyReport)> {
        self.seal_report(key, input, None)
    }

    /// The verify contract over a transcript already sealed at `transcript_seq`.
    pub fn invoke_verify_recorded(
        &mut self,
        key: &MasterKey,
        transcript_seq: u64,
        ciphertexts: Vec<Ciphertext>,
    ) -> Result<(u64, VerifyReport)> {
        let transcript = match self.transcript(transcript_seq) {
            Ok(t) => t,
            Err(e) => {
                self.log.append(
                    RecordKind::VerifyReport,
                    format!("TRANSCRIPT {transcript_seq}\n{ERROR_MARKER}{e}\n").into_bytes(),
                )?;
                return Err(e);
            }
        };
        let input = VerifyInput {
            transcript,
            ciphertexts,
        };
        self.seal_report(key, &input, Some(transcript_seq))
    }

    fn seal_report(
        &mut self,
        key: &MasterKey,
        input: &VerifyInput,
        transcript_seq: Option<u64>,
    ) -> Result<(u64, VerifyReport)> {
        let report = verify(key, input);
        let source = transcript_seq.map_or_else(|| "-".to_string(), |s| s.to_string());
        let payload = format!("TRANSCRIPT {source}\n{report}\n");
        let seq = self.log.append(RecordKind::VerifyReport, payload.into_bytes())?;
        Ok((seq, report))
    }

    /// Fetches a sealed search transcript.
    pub fn transcript(&self, seq: u64) -> Result<SearchTranscript> {
        let record = self
            .log
            .get(seq)
            .ok_or_else(|| Error::ContractViolation(format!("no ledger record {seq}")))?;
        if record.kind != RecordKind::SearchTranscript {
            return Err(Error::ContractViolation(format!(
                "record {seq} is {}, not a search transcript",
                record.kind
            )));
        }
        if record.payload.starts_with(ERROR_MARKER.as_bytes()) {
            return Err(Error::ContractViolation(format!("search {seq} failed")));
        }
        SearchTranscript::read_from(&record.payload[..])
    }

    /// Seq of the most recent record of `kind`, if any.
    pub fn last_of(&self, kind: RecordKind) -> Option<u64> {
        self.log.records().iter().rev().find(|r| r.kind == kind).map(|r| r.seq)
    }
}
