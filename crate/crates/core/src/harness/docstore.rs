//! The cloud server's ciphertext store: one `<doc_id>.ct` file per document,
//! or a plain map when running in memory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::crypto::Ciphertext;
use crate::error::{Error, Result};

const EXTENSION: &str = "ct";

#[derive(Clone, Debug)]
pub struct DocumentStore {
    dir: Option<PathBuf>,
    /// Sizes of every stored document; the bodies themselves live on disk
    /// when `dir` is set.
    sizes: BTreeMap<u64, usize>,
    memory: BTreeMap<u64, Vec<u8>>,
}

impl DocumentStore {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            sizes: BTreeMap::new(),
            memory: BTreeMap::new(),
        }
    }

    /// Opens (creating if needed) a store directory and indexes its files.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut sizes = BTreeMap::new();
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some(EXTENSION) {
                continue;
            }
            let Some(doc_id) = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse::<u64>().ok())
            else {
                continue;
            };
            sizes.insert(doc_id, entry.metadata()?.len() as usize);
        }
        Ok(Self {
            dir: Some(dir),
            sizes,
            memory: BTreeMap::new(),
        })
    }

    fn file(&self, doc_id: u64) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{doc_id}.{EXTENSION}")))
    }

    pub fn put(&mut self, ciphertext: &Ciphertext) -> Result<()> {
        match self.file(ciphertext.doc_id) {
            Some(path) => fs::write(path, &ciphertext.body)?,
            None => {
                self.memory.insert(ciphertext.doc_id, ciphertext.body.clone());
            }
        }
        self.sizes.insert(ciphertext.doc_id, ciphertext.body.len());
        Ok(())
    }

    pub fn fetch(&self, doc_id: u64) -> Result<Ciphertext> {
        if !self.sizes.contains_key(&doc_id) {
            return Err(Error::UnknownDocument(doc_id));
        }
        let body = match self.file(doc_id) {
            Some(path) => fs::read(path)?,
            None => self.memory[&doc_id].clone(),
        };
        Ok(Ciphertext { doc_id, body })
    }

    pub fn fetch_all(&self, ids: impl IntoIterator<Item = u64>) -> Result<Vec<Ciphertext>> {
        ids.into_iter().map(|id| self.fetch(id)).collect()
    }

    pub fn contains(&self, doc_id: u64) -> bool {
        self.sizes.contains_key(&doc_id)
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &BTreeMap<u64, usize> {
        &self.sizes
    }

    pub fn next_id(&self) -> u64 {
        self.sizes.keys().next_back().map_or(0, |&d| d + 1)
    }

    /// A detached in-memory copy of every stored document.
    pub fn snapshot(&self) -> Result<Self> {
        let mut copy = Self::in_memory();
        for &doc_id in self.sizes.keys() {
            copy.put(&self.fetch(doc_id)?)?;
        }
        Ok(copy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ct(doc_id: u64, body: &[u8]) -> Ciphertext {
        Ciphertext {
            doc_id,
            body: body.to_vec(),
        }
    }

    #[test]
    fn directory_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = DocumentStore::open(dir.path()).unwrap();
        store.put(&ct(3, b"\x00\x01binary")).unwrap();
        store.put(&ct(10, b"second")).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

        let reopened = DocumentStore::open(dir.path()).unwrap();
        assert_eq!(reopened.len(), 2);
        assert_eq!(reopened.fetch(3).unwrap(), ct(3, b"\x00\x01binary"));
        assert_eq!(reopened.sizes()[&10], 6);
        assert_eq!(reopened.next_id(), 11);
        assert!(matches!(reopened.fetch(4), Err(Error::UnknownDocument(4))));
        assert_eq!(reopened.snapshot().unwrap().fetch(10).unwrap(), ct(10, b"second"));
    }

    #[test]
    fn memory_store() {
        let mut store = DocumentStore::in_memory();
        assert_eq!(store.next_id(), 0);
        store.put(&ct(0, b"x")).unwrap();
        store.put(&ct(0, b"yy")).unwrap();
        assert_eq!(store.fetch(0).unwrap().body, b"yy");
        assert_eq!(store.sizes()[&0], 2);
    }
}
