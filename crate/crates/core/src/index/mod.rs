//! The encrypted virtual binary tree (EVBTree).
//!
//! The tree exists only logically. Each `(node, token)` pair the owner wants
//! the server to recognise becomes one `H_1` output in a flat set, and a leaf
//! digest map binds each document's leaf to its ciphertext. A second,
//! disjointly tagged key space holds the deletion shadow tree.

mod journal;
mod path;
mod persist;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

pub use journal::{Journal, JournalEntry};
pub use path::{nodes_on_path, path_of, Height, PathCode, MAX_HEIGHT};

use crate::crypto::{frame, hash_h1, prf, tag, Ciphertext, MasterKey, PrfOutput, SEPARATOR};
use crate::error::{Error, Result};

/// Which logical tree an entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeTag {
    Main,
    Delete,
}

impl TreeTag {
    pub fn tag_byte(self) -> u8 {
        match self {
            TreeTag::Main => b'M',
            TreeTag::Delete => b'B',
        }
    }
}

/// A 64-byte `H_1` output; membership is the only thing it encodes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexKey(pub [u8; 64]);

impl IndexKey {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Option<Self> {
        let bytes = hex::decode(text).ok()?;
        Some(Self(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for IndexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IndexKey({}..)", &self.to_hex()[..16])
    }
}

/// `H_1(tag || path || 0x1F || token)`.
pub fn insert_value(tree: TreeTag, node: PathCode, token: &PrfOutput) -> IndexKey {
    let bits = node.to_bit_string();
    let mut input = Vec::with_capacity(2 + bits.len() + 32);
    input.push(tree.tag_byte());
    input.extend_from_slice(bits.as_bytes());
    input.push(SEPARATOR);
    input.extend_from_slice(token.as_bytes());
    IndexKey(hash_h1(&input))
}

/// `F_K(path(leaf) || c)`: binds a leaf to its ciphertext body.
pub fn leaf_digest(key: &MasterKey, leaf: PathCode, ciphertext: &Ciphertext) -> PrfOutput {
    let bits = leaf.to_bit_string();
    prf(key, tag::DIGEST, &frame(&[bits.as_bytes(), &ciphertext.body]))
}

/// Operation counters used by the complexity checks.
#[derive(Debug, Default)]
pub struct Counters {
    hash_evals: AtomicU64,
    probes: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CounterSnapshot {
    pub hash_evals: u64,
    pub probes: u64,
}

impl CounterSnapshot {
    pub fn since(self, earlier: CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            hash_evals: self.hash_evals - earlier.hash_evals,
            probes: self.probes - earlier.probes,
        }
    }
}

impl Clone for Counters {
    fn clone(&self) -> Self {
        Counters {
            hash_evals: AtomicU64::new(self.hash_evals.load(Ordering::Relaxed)),
            probes: AtomicU64::new(self.probes.load(Ordering::Relaxed)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EncryptedIndex {
    height: Height,
    entries: HashSet<IndexKey>,
    delete_entries: HashSet<IndexKey>,
    digests: BTreeMap<PathCode, PrfOutput>,
    entry_count: u64,
    counters: Counters,
}

impl EncryptedIndex {
    pub fn new(height: Height) -> Self {
        Self {
            height,
            entries: HashSet::new(),
            delete_entries: HashSet::new(),
            digests: BTreeMap::new(),
            entry_count: 0,
            counters: Counters::default(),
        }
    }

    pub fn height(&self) -> Height {
        self.height
    }

    /// `M`: tracked number of entries across both trees.
    pub fn entry_count(&self) -> u64 {
        self.entry_count
    }

    /// `M` recomputed from the stored sets.
    pub fn recount(&self) -> u64 {
        (self.entries.len() + self.delete_entries.len()) as u64
    }

    pub fn tree_len(&self, tree: TreeTag) -> usize {
        self.set(tree).len()
    }

    /// `n`: number of documents with a leaf digest.
    pub fn doc_count(&self) -> usize {
        self.digests.len()
    }

    pub fn counters(&self) -> CounterSnapshot {
        CounterSnapshot {
            hash_evals: self.counters.hash_evals.load(Ordering::Relaxed),
            probes: self.counters.probes.load(Ordering::Relaxed),
        }
    }

    fn set(&self, tree: TreeTag) -> &HashSet<IndexKey> {
        match tree {
            TreeTag::Main => &self.entries,
            TreeTag::Delete => &self.delete_entries,
        }
    }

    /// Counted `insert_value`.
    pub fn key_for(&self, tree: TreeTag, node: PathCode, token: &PrfOutput) -> IndexKey {
        self.counters.hash_evals.fetch_add(1, Ordering::Relaxed);
        insert_value(tree, node, token)
    }

    /// Inserts a precomputed key. Returns whether it was new.
    pub fn insert_key(&mut self, tree: TreeTag, key: IndexKey) -> bool {
        let fresh = match tree {
            TreeTag::Main => self.entries.insert(key),
            TreeTag::Delete => self.delete_entries.insert(key),
        };
        if fresh {
            self.entry_count += 1;
        }
        fresh
    }

    /// IndexGen for one document: `|tokens| * L` entries plus the leaf digest.
    pub fn insert_doc(
        &mut self,
        key: &MasterKey,
        doc_id: u64,
        tokens: &[PrfOutput],
        ciphertext: &Ciphertext,
    ) -> Result<()> {
        let leaf = path_of(doc_id, self.height)?;
        if self.digests.contains_key(&leaf) {
            return Err(Error::DuplicateDocument(doc_id));
        }
        if tokens.is_empty() {
            return Err(Error::EmptyTokens);
        }
        let nodes = nodes_on_path(leaf, self.height)?;
        for token in tokens {
            for &node in &nodes {
                let entry = self.key_for(TreeTag::Main, node, token);
                self.insert_key(TreeTag::Main, entry);
            }
        }
        self.digests.insert(leaf, leaf_digest(key, leaf, ciphertext));
        Ok(())
    }

    /// Records or replaces the digest of a leaf.
    pub fn set_digest(&mut self, leaf: PathCode, digest: PrfOutput) -> Result<()> {
        if !leaf.is_leaf(self.height) {
            return Err(Error::ContractViolation(format!("{leaf} is not a leaf")));
        }
        self.digests.insert(leaf, digest);
        Ok(())
    }

    pub fn digest(&self, leaf: PathCode) -> Option<PrfOutput> {
        self.digests.get(&leaf).copied()
    }

    pub fn digests(&self) -> impl Iterator<Item = (PathCode, PrfOutput)> + '_ {
        self.digests.iter().map(|(p, d)| (*p, *d))
    }

    /// `ContainsKey(H_1(path || token))` in the chosen tree. Counts as one probe.
    pub fn contains(&self, tree: TreeTag, node: PathCode, token: &PrfOutput) -> bool {
        self.counters.probes.fetch_add(1, Ordering::Relaxed);
        let entry = self.key_for(tree, node, token);
        self.set(tree).contains(&entry)
    }

    /// Raw membership of a precomputed key; not counted.
    pub fn contains_key(&self, tree: TreeTag, key: &IndexKey) -> bool {
        self.set(tree).contains(key)
    }

    pub fn keys(&self, tree: TreeTag) -> impl Iterator<Item = &IndexKey> {
        self.set(tree).iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::encrypt_doc;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (MasterKey, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        (MasterKey::generate(&mut rng), rng)
    }

    fn token(key: &MasterKey, word: &str) -> PrfOutput {
        prf(key, tag::TOKEN, word.as_bytes())
    }

    fn random_token(rng: &mut ChaCha20Rng) -> PrfOutput {
        let mut t = [0u8; 32];
        rng.fill_bytes(&mut t);
        PrfOutput(t)
    }

    #[test]
    fn insert_values_depend_on_path_and_tree() {
        let (key, _) = setup();
        let t = token(&key, "c");
        let root = insert_value(TreeTag::Main, PathCode::ROOT, &t);
        assert_eq!(root, insert_value(TreeTag::Main, PathCode::ROOT, &t));
        assert_ne!(root, insert_value(TreeTag::Main, "0".parse().unwrap(), &t));
        assert_ne!(root, insert_value(TreeTag::Delete, PathCode::ROOT, &t));
    }

    #[test]
    fn worked_layout_for_one_keyword() {
        // keyword "c" in doc 1 of a height-3 tree lands on "", "0", "01"
        let (key, mut rng) = setup();
        let height = Height::new(3).unwrap();
        let mut index = EncryptedIndex::new(height);
        let c = token(&key, "c");
        let ct = encrypt_doc(&key, 1, b"doc one", &mut rng).unwrap();
        index.insert_doc(&key, 1, &[c], &ct).unwrap();
        for node in ["", "0", "01"] {
            let node = node.parse().unwrap();
            assert!(index.contains_key(TreeTag::Main, &insert_value(TreeTag::Main, node, &c)));
        }
        for node in ["1", "00", "10", "11"] {
            assert!(!index.contains(TreeTag::Main, node.parse().unwrap(), &c));
        }
        assert_eq!(index.entry_count(), 3);
    }

    #[test]
    fn insert_doc_counts_and_union() {
        let (key, mut rng) = setup();
        let height = Height::new(3).unwrap();
        let mut index = EncryptedIndex::new(height);
        let (a, c) = (token(&key, "a"), token(&key, "c"));
        let ct = encrypt_doc(&key, 2, b"doc two", &mut rng).unwrap();
        let before = index.counters();
        index.insert_doc(&key, 2, &[a, c], &ct).unwrap();
        assert_eq!(index.counters().since(before).hash_evals, 2 * 3);
        assert_eq!(index.entry_count(), 6);
        assert_eq!(index.recount(), 6);
        assert_eq!(index.doc_count(), 1);
        let leaf = path_of(2, height).unwrap();
        assert_eq!(index.digest(leaf), Some(leaf_digest(&key, leaf, &ct)));
        for t in [a, c] {
            for node in nodes_on_path(leaf, height).unwrap() {
                assert!(index.contains(TreeTag::Main, node, &t));
            }
        }
    }

    #[test]
    fn insert_doc_rejections() {
        let (key, mut rng) = setup();
        let mut index = EncryptedIndex::new(Height::new(3).unwrap());
        let ct = encrypt_doc(&key, 0, b"x", &mut rng).unwrap();
        assert!(matches!(
            index.insert_doc(&key, 0, &[], &ct),
            Err(Error::EmptyTokens)
        ));
        assert!(matches!(
            index.insert_doc(&key, 4, &[token(&key, "a")], &ct),
            Err(Error::Capacity { .. })
        ));
        index.insert_doc(&key, 0, &[token(&key, "a")], &ct).unwrap();
        assert!(matches!(
            index.insert_doc(&key, 0, &[token(&key, "b")], &ct),
            Err(Error::DuplicateDocument(0))
        ));
    }

    #[test]
    fn random_probes_miss_and_trees_are_disjoint() {
        let (key, mut rng) = setup();
        let height = Height::new(5).unwrap();
        let mut index = EncryptedIndex::new(height);
        let t = token(&key, "w");
        let leaf = path_of(3, height).unwrap();
        for node in nodes_on_path(leaf, height).unwrap() {
            let k = index.key_for(TreeTag::Delete, node, &t);
            index.insert_key(TreeTag::Delete, k);
        }
        assert!(index.contains(TreeTag::Delete, PathCode::ROOT, &t));
        assert!(!index.contains(TreeTag::Main, PathCode::ROOT, &t));
        for _ in 0..1000 {
            assert!(!index.contains(TreeTag::Delete, PathCode::ROOT, &random_token(&mut rng)));
        }
    }
}
