//! One process playing data owner, cloud server and ledger.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::config::Config;
use super::docstore::DocumentStore;
use super::keywords::extract_keywords;
use crate::crypto::{decrypt_doc, encrypt_doc, Ciphertext, MasterKey};
use crate::error::{Error, Result};
use crate::fuzzy::{lsh_bucket, stem, vectorize, BucketString, LshFamily};
use crate::index::{leaf_digest, path_of, Height, Journal, JournalEntry, TreeTag};
use crate::ledger::{IndexDelta, Ledger};
use crate::search::{search, trapgen, SearchTranscript, Trapdoor};
use crate::verify::{VerifyInput, VerifyReport};
use crate::version::{add_keyword, delete_keyword, versioned_token, LocalRepo};

/// Counters for one document addition.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AddOutcome {
    pub doc_id: u64,
    /// Distinct stems extracted from the text.
    pub stems: usize,
    /// Distinct LSH buckets, i.e. keywords written to the index.
    pub keywords: usize,
    pub hash_evals: usize,
    pub real_entries: usize,
    pub padding: usize,
    pub bumps: usize,
}

impl AddOutcome {
    fn absorb(&mut self, report: &crate::version::AddReport) {
        self.keywords += 1;
        self.hash_evals += report.hash_evals;
        self.real_entries += report.real_entries;
        self.padding += report.padding;
        self.bumps += usize::from(report.bumped);
    }
}

#[derive(Clone, Debug)]
pub struct QueryOutcome {
    pub transcript_seq: u64,
    pub transcript: SearchTranscript,
    pub ciphertexts: Vec<Ciphertext>,
    pub report_seq: u64,
    pub report: VerifyReport,
}

#[derive(Clone, Debug, Default)]
pub struct IngestReport {
    pub indexed: Vec<AddOutcome>,
    pub skipped: Vec<(PathBuf, String)>,
}

#[derive(Clone, Debug)]
struct StatePaths {
    index: PathBuf,
    local_repo: PathBuf,
    journal: PathBuf,
}

pub struct System {
    key: MasterKey,
    family: LshFamily,
    lr: LocalRepo,
    ledger: Ledger,
    store: DocumentStore,
    journal: Option<Journal>,
    rng: ChaCha20Rng,
    paths: Option<StatePaths>,
}

impl System {
    /// Everything in memory; `seed` fixes nonces and padding.
    pub fn in_memory(key: MasterKey, family: LshFamily, height: Height, seed: u64) -> Self {
        Self {
            key,
            family,
            lr: LocalRepo::new(),
            ledger: Ledger::in_memory(height),
            store: DocumentStore::in_memory(),
            journal: Some(Journal::new()),
            rng: ChaCha20Rng::seed_from_u64(seed),
            paths: None,
        }
    }

    /// In-memory system with keys and parameters taken from `config`.
    pub fn in_memory_from(config: &Config, seed: u64) -> Result<Self> {
        Ok(Self::in_memory(
            config.master_key.clone(),
            config.family()?,
            config.height,
            seed,
        ))
    }

    /// Opens file-backed state; missing files start empty.
    pub fn open(config: &Config) -> Result<Self> {
        let ledger = Ledger::open(&config.ledger_path, config.height)?;
        let lr = if config.local_repo_path.exists() {
            LocalRepo::read_from(BufReader::new(File::open(&config.local_repo_path)?))?
        } else {
            LocalRepo::new()
        };
        let journal = match (config.debug_journal, config.journal_path.exists()) {
            (false, _) => None,
            (true, true) => Some(Journal::read_from(BufReader::new(File::open(&config.journal_path)?))?),
            (true, false) => Some(Journal::new()),
        };
        Ok(Self {
            key: config.master_key.clone(),
            family: config.family()?,
            lr,
            ledger,
            store: DocumentStore::open(&config.doc_store_path)?,
            journal,
            rng: ChaCha20Rng::from_os_rng(),
            paths: Some(StatePaths {
                index: config.index_path.clone(),
                local_repo: config.local_repo_path.clone(),
                journal: config.journal_path.clone(),
            }),
        })
    }

    /// Writes the client state and an index snapshot. The ledger and the
    /// document store persist on every write already.
    pub fn save(&self) -> Result<()> {
        let Some(paths) = &self.paths else {
            return Ok(());
        };
        for p in [&paths.index, &paths.local_repo, &paths.journal] {
            if let Some(dir) = p.parent() {
                fs::create_dir_all(dir)?;
            }
        }
        self.ledger.index().persist(&paths.index)?;
        self.lr.write_to(BufWriter::new(File::create(&paths.local_repo)?))?;
        if let Some(journal) = &self.journal {
            journal.write_to(BufWriter::new(File::create(&paths.journal)?))?;
        }
        Ok(())
    }

    /// A fully in-memory copy, for exploring alternative futures.
    pub fn snapshot(&self) -> Result<Self> {
        Ok(Self {
            key: self.key.clone(),
            family: self.family.clone(),
            lr: self.lr.clone(),
            ledger: self.ledger.detached(),
            store: self.store.snapshot()?,
            journal: self.journal.clone(),
            rng: self.rng.clone(),
            paths: None,
        })
    }

    pub fn key(&self) -> &MasterKey {
        &self.key
    }

    pub fn family(&self) -> &LshFamily {
        &self.family
    }

    pub fn height(&self) -> Height {
        self.ledger.height()
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut Ledger {
        &mut self.ledger
    }

    pub fn store(&self) -> &DocumentStore {
        &self.store
    }

    pub fn local_repo(&self) -> &LocalRepo {
        &self.lr
    }

    pub fn journal(&self) -> Option<&Journal> {
        self.journal.as_ref()
    }

    pub fn bucket_of(&self, word: &str) -> Result<BucketString> {
        Ok(lsh_bucket(&self.family, &vectorize(&stem(word)?)?))
    }

    fn require_document(&self, doc_id: u64) -> Result<()> {
        let leaf = path_of(doc_id, self.height())?;
        if self.ledger.index().digest(leaf).is_none() {
            return Err(Error::UnknownDocument(doc_id));
        }
        Ok(())
    }

    fn journal_add(&mut self, doc_id: u64, stem: String, bucket: BucketString, version: u64) {
        if let Some(j) = &mut self.journal {
            j.record(JournalEntry {
                tree: TreeTag::Main,
                doc_id,
                stem,
                bucket,
                version,
            });
        }
    }

    /// Extracts keywords, encrypts, stores the ciphertext and submits one
    /// chain record per version bump plus one index append.
    pub fn add_document(&mut self, doc_id: Option<u64>, text: &str) -> Result<AddOutcome> {
        let height = self.height();
        let doc_id = doc_id.unwrap_or_else(|| self.store.next_id());
        let leaf = path_of(doc_id, height)?;
        if self.store.contains(doc_id) || self.ledger.index().digest(leaf).is_some() {
            return Err(Error::DuplicateDocument(doc_id));
        }
        let stems = extract_keywords(text);
        if stems.is_empty() {
            return Err(Error::EmptyTokens);
        }
        let mut by_bucket: BTreeMap<BucketString, Vec<String>> = BTreeMap::new();
        for s in &stems {
            let bucket = lsh_bucket(&self.family, &vectorize(s)?);
            by_bucket.entry(bucket).or_default().push(s.clone());
        }

        let ciphertext = encrypt_doc(&self.key, doc_id, text.as_bytes(), &mut self.rng)?;
        let mut delta = IndexDelta::new(height);
        let mut outcome = AddOutcome {
            doc_id,
            stems: stems.len(),
            ..AddOutcome::default()
        };
        let mut journal = Vec::new();
        for (bucket, words) in by_bucket {
            let (token, report) = add_keyword(&mut self.lr, &self.key, &bucket, doc_id, height, &mut self.rng)?;
            if let Some(record) = token.chain_record {
                self.ledger.submit_chain(record)?;
            }
            delta
                .entries
                .extend(token.add_entries.into_iter().map(|k| (TreeTag::Main, k)));
            outcome.absorb(&report);
            journal.extend(words.into_iter().map(|w| (w, bucket.clone(), report.version)));
        }
        delta.digests.push((leaf, leaf_digest(&self.key, leaf, &ciphertext)));
        self.store.put(&ciphertext)?;
        self.ledger.submit_index(&delta)?;
        for (stem, bucket, version) in journal {
            self.journal_add(doc_id, stem, bucket, version);
        }
        Ok(outcome)
    }

    /// Indexes every regular file of `dir` in name order. Unreadable or
    /// keyword-free files are skipped and reported.
    pub fn ingest(&mut self, dir: &Path) -> Result<IngestReport> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut report = IngestReport::default();
        for path in files {
            let outcome = fs::read_to_string(&path)
                .map_err(Error::from)
                .and_then(|text| self.add_document(None, &text));
            match outcome {
                Ok(added) => report.indexed.push(added),
                Err(e) => report.skipped.push((path, e.to_string())),
            }
        }
        Ok(report)
    }

    /// Adds one keyword to an existing document.
    pub fn add_keyword(&mut self, doc_id: u64, word: &str) -> Result<AddOutcome> {
        self.require_document(doc_id)?;
        let height = self.height();
        let stemmed = stem(word)?;
        let bucket = self.bucket_of(&stemmed)?;
        let (token, report) = add_keyword(&mut self.lr, &self.key, &bucket, doc_id, height, &mut self.rng)?;
        if let Some(record) = token.chain_record {
            self.ledger.submit_chain(record)?;
        }
        let mut delta = IndexDelta::new(height);
        delta
            .entries
            .extend(token.add_entries.into_iter().map(|k| (TreeTag::Main, k)));
        self.ledger.submit_index(&delta)?;
        self.journal_add(doc_id, stemmed, bucket, report.version);
        let mut outcome = AddOutcome {
            doc_id,
            stems: 1,
            ..AddOutcome::default()
        };
        outcome.absorb(&report);
        Ok(outcome)
    }

    /// Removes one keyword from a document via the deletion tree. Returns the
    /// number of deletion-tree entries written.
    pub fn delete_keyword(&mut self, doc_id: u64, word: &str) -> Result<usize> {
        self.require_document(doc_id)?;
        let height = self.height();
        let stemmed = stem(word)?;
        let bucket = self.bucket_of(&stemmed)?;
        let keys = delete_keyword(&mut self.lr, &self.key, &bucket, doc_id, height)?;
        let mut delta = IndexDelta::new(height);
        delta.entries.extend(keys.iter().map(|&k| (TreeTag::Delete, k)));
        self.ledger.submit_index(&delta)?;
        let version = self.lr.get(&bucket).map_or(0, |e| e.version);
        if let Some(j) = &mut self.journal {
            j.record(JournalEntry {
                tree: TreeTag::Delete,
                doc_id,
                stem: stemmed,
                bucket,
                version,
            });
        }
        Ok(keys.len())
    }

    /// Re-encrypts a document with new content; its keywords are unchanged.
    /// The ledger receives the new leaf digest.
    pub fn update_document(&mut self, doc_id: u64, text: &str) -> Result<Ciphertext> {
        self.require_document(doc_id)?;
        let height = self.height();
        let leaf = path_of(doc_id, height)?;
        let ciphertext = encrypt_doc(&self.key, doc_id, text.as_bytes(), &mut self.rng)?;
        let mut delta = IndexDelta::new(height);
        delta.digests.push((leaf, leaf_digest(&self.key, leaf, &ciphertext)));
        self.store.put(&ciphertext)?;
        self.ledger.submit_index(&delta)?;
        Ok(ciphertext)
    }

    pub fn trapdoor(&mut self, words: &[impl AsRef<str>]) -> Result<Trapdoor> {
        trapgen(&mut self.lr, &self.key, &self.family, words)
    }

    /// Runs the search contract only.
    pub fn search(&mut self, words: &[impl AsRef<str>]) -> Result<(u64, SearchTranscript)> {
        let trapdoor = self.trapdoor(words)?;
        self.ledger.invoke_search(&trapdoor)
    }

    /// Search, fetch `E` from the cloud store, and run the verify contract on
    /// the sealed transcript.
    pub fn query(&mut self, words: &[impl AsRef<str>]) -> Result<QueryOutcome> {
        let (transcript_seq, transcript) = self.search(words)?;
        let ciphertexts = self.store.fetch_all(transcript.results.iter().copied())?;
        let (report_seq, report) =
            self.ledger
                .invoke_verify_recorded(&self.key, transcript_seq, ciphertexts.clone())?;
        Ok(QueryOutcome {
            transcript_seq,
            transcript,
            ciphertexts,
            report_seq,
            report,
        })
    }

    /// Runs the verify contract over a caller-supplied transcript and `E`.
    pub fn verify(&mut self, input: &VerifyInput) -> Result<(u64, VerifyReport)> {
        self.ledger.invoke_verify(&self.key, input)
    }

    /// Search results without touching the local repository or the ledger.
    pub fn peek(&self, words: &[impl AsRef<str>]) -> Result<BTreeSet<u64>> {
        if words.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let tokens = words
            .iter()
            .map(|w| {
                let bucket = self.bucket_of(w.as_ref())?;
                let version = self.lr.get(&bucket).map_or(0, |e| e.version);
                Ok(versioned_token(&self.key, &bucket, version))
            })
            .collect::<Result<Vec<_>>>()?;
        let transcript = search(self.ledger.index(), self.ledger.chain(), &Trapdoor { tokens })?;
        Ok(transcript.results)
    }

    /// Plaintext oracle over the debug journal.
    pub fn oracle(&self, words: &[impl AsRef<str>]) -> Result<BTreeSet<u64>> {
        let journal = self
            .journal
            .as_ref()
            .ok_or_else(|| Error::Config("debug_journal is off".into()))?;
        let stems = words.iter().map(|w| stem(w.as_ref())).collect::<Result<Vec<_>>>()?;
        Ok(journal.docs_with_all_stems(&stems))
    }

    pub fn decrypt(&self, doc_id: u64) -> Result<Vec<u8>> {
        decrypt_doc(&self.key, &self.store.fetch(doc_id)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzy::LshSeed;
    use crate::verify::FailureKind;

    fn small_system(levels: u8) -> System {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        System::in_memory(
            MasterKey::generate(&mut rng),
            LshFamily::with_defaults(LshSeed([3; 32])),
            Height::new(levels).unwrap(),
            5,
        )
    }

    #[test]
    fn add_query_verify() {
        let mut s = small_system(6);
        s.add_document(None, "Routing tables and packet filters.").unwrap();
        s.add_document(None, "Packet capture on the gateway.").unwrap();
        s.add_document(None, "A garden of tulips.").unwrap();
        let q = s.query(&["packets"]).unwrap();
        assert_eq!(q.transcript.results, BTreeSet::from([0, 1]));
        assert!(q.report.passed(), "{}", q.report);
        assert_eq!(s.oracle(&["packet"]).unwrap(), BTreeSet::from([0, 1]));
        assert_eq!(s.decrypt(2).unwrap(), b"A garden of tulips.");
        assert_eq!(s.peek(&["packet", "gateway"]).unwrap(), BTreeSet::from([1]));
    }

    #[test]
    fn add_costs_one_path_per_keyword() {
        let mut s = small_system(8);
        let out = s.add_document(None, "alpha beta gamma delta").unwrap();
        assert_eq!(out.keywords, 4);
        assert_eq!(out.hash_evals, 4 * 8);
        assert_eq!(out.real_entries + out.padding, 4 * 8);
        let delta = s.ledger().log().records().last().unwrap();
        let parsed = IndexDelta::from_payload(&delta.payload).unwrap();
        assert_eq!(parsed.entries.len(), 4 * 8);
    }

    #[test]
    fn delete_then_readd() {
        let mut s = small_system(4);
        s.add_document(None, "cobalt nickel").unwrap();
        s.add_document(None, "cobalt copper").unwrap();
        s.delete_keyword(0, "cobalt").unwrap();
        assert_eq!(s.peek(&["cobalt"]).unwrap(), BTreeSet::from([1]));
        assert_eq!(s.query(&["cobalt"]).unwrap().transcript.results, BTreeSet::from([1]));
        s.add_keyword(0, "cobalt").unwrap();
        assert_eq!(s.peek(&["cobalt"]).unwrap(), BTreeSet::from([0, 1]));
        assert_eq!(s.oracle(&["cobalt"]).unwrap(), BTreeSet::from([0, 1]));
    }

    #[test]
    fn stale_document_fails_verification() {
        let mut s = small_system(4);
        s.add_document(None, "ledger audit").unwrap();
        let old = s.store().fetch(0).unwrap();
        s.update_document(0, "ledger audit, revised").unwrap();
        let (seq, t) = s.search(&["audit"]).unwrap();
        let key = s.key().clone();
        let (_, report) = s.ledger_mut().invoke_verify_recorded(&key, seq, vec![old]).unwrap();
        assert_eq!(t.results, BTreeSet::from([0]));
        assert_eq!(report.failure_kind, FailureKind::DigestMismatch);
    }

    #[test]
    fn rejects_bad_documents() {
        let mut s = small_system(2);
        assert!(matches!(s.add_document(None, "the of and"), Err(Error::EmptyTokens)));
        s.add_document(Some(1), "zinc").unwrap();
        assert!(matches!(s.add_document(Some(1), "iron"), Err(Error::DuplicateDocument(1))));
        assert!(matches!(s.add_document(Some(2), "iron"), Err(Error::Capacity { .. })));
        assert!(matches!(s.add_keyword(0, "iron"), Err(Error::UnknownDocument(0))));
    }

    #[test]
    fn file_backed_state_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = Config::generate(dir.path(), &mut ChaCha20Rng::seed_from_u64(3));
        config.height = Height::new(8).unwrap();
        config.debug_journal = true;
        {
            let mut s = System::open(&config).unwrap();
            s.add_document(None, "quartz granite").unwrap();
            s.add_document(None, "granite marble").unwrap();
            s.query(&["granite"]).unwrap();
            s.save().unwrap();
        }
        let mut s = System::open(&config).unwrap();
        assert_eq!(s.store().len(), 2);
        assert_eq!(s.journal().unwrap().events().len(), 4);
        let q = s.query(&["granite"]).unwrap();
        assert_eq!(q.transcript.results, BTreeSet::from([0, 1]));
        assert!(q.report.passed());
        let snapshot = crate::index::EncryptedIndex::load(&config.index_path).unwrap();
        assert_eq!(snapshot.doc_count(), 2);
    }
}
