//! Forward-private updates.
//!
//! The client keeps a local repository (`LR`) with one entry per keyword
//! bucket. Tokens carry the keyword version; the version is bumped lazily on
//! the first add after a query, and the ledger-side chain repository (`BR`)
//! receives an XOR-masked link from the new token back to the previous one:
//!
//! ```text
//! lookup  = H2(tk_{v+1})
//! payload = H3(tk_{v+1}) ^ tk_v
//! ```
//!
//! Tokens issued before a bump therefore never match entries written after
//! it, while the search contract can still walk the chain backwards from the
//! newest token.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};

use crate::crypto::{chain_lookup, chain_mask, prf, tag, MasterKey, PrfOutput, SEPARATOR};
use crate::error::{Error, Result};
use crate::fuzzy::BucketString;
use crate::index::{insert_value, nodes_on_path, path_of, Height, IndexKey, TreeTag};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LocalRepoEntry {
    /// Queried since the last version bump.
    pub queried: bool,
    pub version: u64,
    pub last_added: Option<u64>,
    pub last_deleted: Option<u64>,
}

/// Client-side keyword state, keyed by bucket string.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LocalRepo {
    entries: BTreeMap<BucketString, LocalRepoEntry>,
}

impl LocalRepo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, bucket: &BucketString) -> Option<&LocalRepoEntry> {
        self.entries.get(bucket)
    }

    pub fn entry_mut(&mut self, bucket: &BucketString) -> &mut LocalRepoEntry {
        self.entries.entry(bucket.clone()).or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BucketString, &LocalRepoEntry)> {
        self.entries.iter()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
        for (bucket, e) in &self.entries {
            writeln!(
                out,
                "LR {bucket} {} {} {} {}",
                e.queried,
                e.version,
                opt(e.last_added),
                opt(e.last_deleted)
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut repo = LocalRepo::new();
        for (i, line) in input.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            let ["LR", bucket, queried, version, added, deleted] = fields[..] else {
                return Err(Error::format(lineno, "expected `LR <bucket> <b> <v> <n_add> <n_del>`"));
            };
            let opt = |s: &str| -> Result<Option<u64>> {
                if s == "-" {
                    Ok(None)
                } else {
                    s.parse()
                        .map(Some)
                        .map_err(|_| Error::format(lineno, format!("bad document id {s:?}")))
                }
            };
            let entry = LocalRepoEntry {
                queried: queried
                    .parse()
                    .map_err(|_| Error::format(lineno, "flag must be true/false"))?,
                version: version
                    .parse()
                    .map_err(|_| Error::format(lineno, "bad version"))?,
                last_added: opt(added)?,
                last_deleted: opt(deleted)?,
            };
            let bucket: BucketString = bucket
                .parse()
                .map_err(|_| Error::format(lineno, "bad bucket string"))?;
            repo.entries.insert(bucket, entry);
        }
        Ok(repo)
    }
}

/// `F_K(S || v)`: the token for a keyword bucket at one version.
pub fn versioned_token(key: &MasterKey, bucket: &BucketString, version: u64) -> PrfOutput {
    let mut message = Vec::with_capacity(bucket.as_str().len() + 21);
    message.extend_from_slice(bucket.as_str().as_bytes());
    message.push(SEPARATOR);
    message.extend_from_slice(version.to_string().as_bytes());
    prf(key, tag::TOKEN, &message)
}

/// One `BR` record linking a token to its predecessor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChainRecord {
    pub lookup: PrfOutput,
    pub payload: PrfOutput,
}

impl ChainRecord {
    pub fn link(current: &PrfOutput, previous: &PrfOutput) -> Self {
        Self {
            lookup: chain_lookup(current),
            payload: chain_mask(current).xor(previous),
        }
    }
}

/// Ledger-side historical trapdoor repository.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainRepo {
    records: HashMap<PrfOutput, PrfOutput>,
}

impl ChainRepo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, record: ChainRecord) {
        self.records.insert(record.lookup, record.payload);
    }

    pub fn payload(&self, lookup: &PrfOutput) -> Option<PrfOutput> {
        self.records.get(lookup).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Test hook for corruption experiments.
    pub fn payload_mut(&mut self, lookup: &PrfOutput) -> Option<&mut PrfOutput> {
        self.records.get_mut(lookup)
    }
}

/// Walks `BR` back from `current`: newest first, stopping at the first miss.
pub fn resolve_history(br: &ChainRepo, current: PrfOutput) -> Vec<PrfOutput> {
    let mut history = vec![current];
    let mut last = current;
    while history.len() <= br.len() {
        let Some(payload) = br.payload(&chain_lookup(&last)) else {
            break;
        };
        last = payload.xor(&chain_mask(&last));
        history.push(last);
    }
    history
}

/// What the client submits to the ledger for one keyword addition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateToken {
    /// Exactly `L` keys, real entries and random padding shuffled together.
    pub add_entries: Vec<IndexKey>,
    pub chain_record: Option<ChainRecord>,
}

/// Client-side bookkeeping for one addition; never sent to the server.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AddReport {
    pub hash_evals: usize,
    pub real_entries: usize,
    pub padding: usize,
    pub bumped: bool,
    pub version: u64,
}

/// Builds the update token for adding keyword `bucket` to `doc_id` and
/// advances the local repository.
pub fn add_keyword<R: RngCore + CryptoRng>(
    lr: &mut LocalRepo,
    key: &MasterKey,
    bucket: &BucketString,
    doc_id: u64,
    height: Height,
    rng: &mut R,
) -> Result<(UpdateToken, AddReport)> {
    let leaf = path_of(doc_id, height)?;
    let nodes = nodes_on_path(leaf, height)?;
    let state = *lr.get(bucket).unwrap_or(&LocalRepoEntry::default());

    let (version, chain_record, shared) = if state.queried {
        let next = state.version + 1;
        let record = ChainRecord::link(
            &versioned_token(key, bucket, next),
            &versioned_token(key, bucket, state.version),
        );
        (next, Some(record), 0)
    } else {
        // T_up1 = WD(w, m) - WD(w, n_add): same version, so the entries on
        // the shared prefix of the two leaf paths already exist.
        let shared = match state.last_added {
            Some(prev) => {
                let prev_leaf = path_of(prev, height)?;
                leaf.common_prefix_len(prev_leaf) as usize + 1
            }
            None => 0,
        };
        (state.version, None, shared)
    };

    let token = versioned_token(key, bucket, version);
    let full: Vec<IndexKey> = nodes
        .iter()
        .map(|&node| insert_value(TreeTag::Main, node, &token))
        .collect();
    let hash_evals = full.len();
    let mut add_entries: Vec<IndexKey> = full.into_iter().skip(shared).collect();
    let real_entries = add_entries.len();
    while add_entries.len() < nodes.len() {
        let mut pad = [0u8; 64];
        rng.fill_bytes(&mut pad);
        add_entries.push(IndexKey(pad));
    }
    add_entries.shuffle(rng);

    let entry = lr.entry_mut(bucket);
    entry.version = version;
    entry.queried = false;
    entry.last_added = Some(doc_id);

    Ok((
        UpdateToken {
            add_entries,
            chain_record,
        },
        AddReport {
            hash_evals,
            real_entries,
            padding: nodes.len() - real_entries,
            bumped: chain_record.is_some(),
            version,
        },
    ))
}

/// Deletion-tree entries for removing keyword `bucket` from `doc_id`: every
/// node on the leaf path, under every version the keyword has had.
///
/// The keyword is also flagged so the next addition takes a fresh version;
/// otherwise a later re-add would be shadowed by these entries.
pub fn delete_keyword(
    lr: &mut LocalRepo,
    key: &MasterKey,
    bucket: &BucketString,
    doc_id: u64,
    height: Height,
) -> Result<Vec<IndexKey>> {
    let leaf = path_of(doc_id, height)?;
    let nodes = nodes_on_path(leaf, height)?;
    let entry = lr.entry_mut(bucket);
    let mut keys = Vec::with_capacity(nodes.len() * (entry.version as usize + 1));
    for version in 0..=entry.version {
        let token = versioned_token(key, bucket, version);
        keys.extend(
            nodes
                .iter()
                .map(|&node| insert_value(TreeTag::Delete, node, &token)),
        );
    }
    entry.last_deleted = Some(doc_id);
    entry.queried = true;
    Ok(keys)
}
