use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use super::TreeTag;
use crate::error::{Error, Result};
use crate::fuzzy::BucketString;

/// One plaintext record of a keyword written into (or deleted from) a document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JournalEntry {
    pub tree: TreeTag,
    pub doc_id: u64,
    pub stem: String,
    pub bucket: BucketString,
    pub version: u64,
}

/// Debug-only plaintext journal kept beside the index.
///
/// The encrypted index answers membership queries only; the journal is what
/// lets tests rebuild ancestors, run brute-force oracles and audit recall.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Journal {
    events: Vec<JournalEntry>,
    live: BTreeMap<u64, BTreeMap<String, BucketString>>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, entry: JournalEntry) {
        match entry.tree {
            TreeTag::Main => {
                self.live
                    .entry(entry.doc_id)
                    .or_default()
                    .insert(entry.stem.clone(), entry.bucket.clone());
            }
            TreeTag::Delete => {
                if let Some(words) = self.live.get_mut(&entry.doc_id) {
                    words.remove(&entry.stem);
                }
            }
        }
        self.events.push(entry);
    }

    pub fn events(&self) -> &[JournalEntry] {
        &self.events
    }

    /// Current stems of every document that ever received one.
    pub fn live(&self) -> &BTreeMap<u64, BTreeMap<String, BucketString>> {
        &self.live
    }

    pub fn stems_of(&self, doc_id: u64) -> BTreeSet<String> {
        self.live
            .get(&doc_id)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Plaintext conjunctive oracle: documents holding every stem.
    pub fn docs_with_all_stems(&self, stems: &[String]) -> BTreeSet<u64> {
        self.live
            .iter()
            .filter(|(_, words)| stems.iter().all(|s| words.contains_key(s)))
            .map(|(&doc, _)| doc)
            .collect()
    }

    /// Same, at the granularity of LSH buckets.
    pub fn docs_with_all_buckets(&self, buckets: &[BucketString]) -> BTreeSet<u64> {
        self.live
            .iter()
            .filter(|(_, words)| buckets.iter().all(|b| words.values().any(|w| w == b)))
            .map(|(&doc, _)| doc)
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.events {
            let kind = match e.tree {
                TreeTag::Main => 'A',
                TreeTag::Delete => 'X',
            };
            writeln!(out, "{kind} {} {} {} {}", e.doc_id, e.stem, e.bucket, e.version)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut journal = Journal::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let fields: Vec<&str> = line.split(' ').collect();
            let [kind, doc, stem, bucket, version] = fields[..] else {
                return Err(Error::format(lineno, "expected 5 fields"));
            };
            let tree = match kind {
                "A" => TreeTag::Main,
                "X" => TreeTag::Delete,
                _ => return Err(Error::format(lineno, format!("unknown record {kind:?}"))),
            };
            let parse_u64 = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| Error::format(lineno, format!("bad integer {s:?}")))
            };
            journal.record(JournalEntry {
                tree,
                doc_id: parse_u64(doc)?,
                stem: stem.to_string(),
                bucket: bucket
                    .parse()
                    .map_err(|_| Error::format(lineno, "bad bucket string"))?,
                version: parse_u64(version)?,
            });
        }
        Ok(journal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(tree: TreeTag, doc_id: u64, stem: &str, bucket: &str) -> JournalEntry {
        JournalEntry {
            tree,
            doc_id,
            stem: stem.into(),
            bucket: bucket.parse().unwrap(),
            version: 0,
        }
    }

    #[test]
    fn oracle_tracks_adds_and_deletes() {
        let mut j = Journal::new();
        j.record(entry(TreeTag::Main, 1, "a", "1|2"));
        j.record(entry(TreeTag::Main, 1, "b", "3|4"));
        j.record(entry(TreeTag::Main, 2, "a", "1|2"));
        j.record(entry(TreeTag::Delete, 2, "a", "1|2"));
        assert_eq!(j.docs_with_all_stems(&["a".into()]), BTreeSet::from([1]));
        assert_eq!(
            j.docs_with_all_buckets(&["1|2".parse().unwrap(), "3|4".parse().unwrap()]),
            BTreeSet::from([1])
        );
        let mut buf = Vec::new();
        j.write_to(&mut buf).unwrap();
        assert_eq!(Journal::read_from(&buf[..]).unwrap(), j);
        assert!(Journal::read_from(&b"A 1 a\n"[..]).is_err());
    }
}
