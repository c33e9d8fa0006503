//! Trapdoor generation and the pruned top-down conjunctive search.
//!
//! The search walks the logical tree from the root. At every node each query
//! keyword keeps the part of its version history that may still occur below:
//! tokens are probed newest-first, absent ones are dropped, and probing stops
//! at the first present token. A keyword whose list empties prunes the node.
//! Surviving lists are copied into each child call, so pruning in one
//! subtree never affects its sibling.
//!
//! The deletion tree is searched the same way but a node survives while *any*
//! keyword survives: a document leaves the result set if any one of the query
//! keywords has been deleted from it at a version at least as new as the one
//! that matched in the main tree.

mod transcript;

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};

pub use transcript::{ProofNode, SearchTranscript, TreeTranscript};

use crate::crypto::{MasterKey, PrfOutput};
use crate::error::{Error, Result};
use crate::fuzzy::{fuzzify, LshFamily};
use crate::index::{EncryptedIndex, PathCode, TreeTag};
use crate::version::{resolve_history, versioned_token, ChainRepo, LocalRepo};

/// One current-version token per query keyword.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trapdoor {
    pub tokens: Vec<PrfOutput>,
}

/// Per-keyword token histories, newest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistorySet {
    pub histories: Vec<Vec<PrfOutput>>,
}

impl HistorySet {
    pub fn resolve(br: &ChainRepo, trapdoor: &Trapdoor) -> Self {
        Self {
            histories: trapdoor
                .tokens
                .iter()
                .map(|&t| resolve_history(br, t))
                .collect(),
        }
    }

    pub fn total_tokens(&self) -> usize {
        self.histories.iter().map(Vec::len).sum()
    }
}

/// Builds the trapdoor and marks every queried keyword in the local repository.
pub fn trapgen(
    lr: &mut LocalRepo,
    key: &MasterKey,
    family: &LshFamily,
    query: &[impl AsRef<str>],
) -> Result<Trapdoor> {
    if query.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let buckets = query
        .iter()
        .map(|w| fuzzify(family, w.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let tokens = buckets
        .iter()
        .map(|bucket| {
            let entry = lr.entry_mut(bucket);
            entry.queried = true;
            versioned_token(key, bucket, entry.version)
        })
        .collect();
    Ok(Trapdoor { tokens })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Combine {
    All,
    Any,
}

struct Walker<'a> {
    index: &'a EncryptedIndex,
    tree: TreeTag,
    combine: Combine,
    histories: &'a [Vec<PrfOutput>],
    probes: Cell<u64>,
}

impl Walker<'_> {
    fn run(&self) -> Result<TreeTranscript> {
        let mut out = TreeTranscript::default();
        let start: Vec<Vec<u32>> = self
            .histories
            .iter()
            .map(|h| (0..h.len() as u32).collect())
            .collect();
        self.visit(PathCode::ROOT, &start, &mut out)?;
        Ok(out)
    }

    fn probe(&self, node: PathCode, keyword: usize, version_slot: u32) -> bool {
        self.probes.set(self.probes.get() + 1);
        self.index
            .contains(self.tree, node, &self.histories[keyword][version_slot as usize])
    }

    fn visit(&self, node: PathCode, surviving: &[Vec<u32>], out: &mut TreeTranscript) -> Result<()> {
        let mut next = Vec::with_capacity(surviving.len());
        for (keyword, slots) in surviving.iter().enumerate() {
            let first_hit = slots
                .iter()
                .position(|&slot| self.probe(node, keyword, slot));
            let kept = first_hit.map_or_else(Vec::new, |pos| slots[pos..].to_vec());
            if kept.is_empty() && self.combine == Combine::All {
                out.proofs.push(ProofNode::new(node, false));
                return Ok(());
            }
            next.push(kept);
        }
        if self.combine == Combine::Any && next.iter().all(Vec::is_empty) {
            out.proofs.push(ProofNode::new(node, false));
            return Ok(());
        }
        out.proofs.push(ProofNode::new(node, true));

        if node.is_leaf(self.index.height()) {
            let doc_id = node.value();
            out.results.insert(doc_id);
            out.ranks
                .insert(doc_id, next.iter().map(|s| s.first().copied()).collect());
            if self.tree == TreeTag::Main {
                let digest = self.index.digest(node).ok_or_else(|| {
                    Error::IndexCorruption(format!("matched leaf {node} has no digest"))
                })?;
                out.digests.push((node, digest));
            }
            return Ok(());
        }
        for child in node.children() {
            self.visit(child, &next, out)?;
        }
        Ok(())
    }
}

/// Documents to subtract: some query keyword was deleted from the document
/// at a version no older than the one that matched in the main tree.
pub fn deleted_results(main: &TreeTranscript, deleted: &TreeTranscript) -> BTreeSet<u64> {
    main.ranks
        .iter()
        .filter(|(doc, main_ranks)| {
            deleted.ranks.get(doc).is_some_and(|del_ranks| {
                main_ranks
                    .iter()
                    .zip(del_ranks)
                    .any(|(m, d)| matches!((m, d), (Some(m), Some(d)) if d <= m))
            })
        })
        .map(|(&doc, _)| doc)
        .collect()
}

/// The search contract.
pub fn search(index: &EncryptedIndex, br: &ChainRepo, trapdoor: &Trapdoor) -> Result<SearchTranscript> {
    if trapdoor.tokens.is_empty() {
        return Err(Error::EmptyQuery);
    }
    let history = HistorySet::resolve(br, trapdoor);
    search_with_history(index, &history)
}

/// Search with an explicit history set (the contract resolves it from `BR`).
pub fn search_with_history(index: &EncryptedIndex, history: &HistorySet) -> Result<SearchTranscript> {
    if history.histories.is_empty() || history.histories.iter().any(Vec::is_empty) {
        return Err(Error::EmptyQuery);
    }
    let walk = |tree, combine| {
        let walker = Walker {
            index,
            tree,
            combine,
            histories: &history.histories,
            probes: Cell::new(0),
        };
        walker.run().map(|t| (t, walker.probes.get()))
    };
    let (main, main_probes) = walk(TreeTag::Main, Combine::All)?;
    let (deleted, delete_probes) = walk(TreeTag::Delete, Combine::Any)?;
    let removed = deleted_results(&main, &deleted);
    let results = main.results.difference(&removed).copied().collect();
    Ok(SearchTranscript {
        height: index.height(),
        keywords: history.histories.len(),
        main,
        deleted,
        results,
        probes: main_probes + delete_probes,
    })
}

/// Newest matching version slot per keyword for each result, for callers
/// that want to inspect version provenance.
pub fn result_ranks(transcript: &SearchTranscript) -> BTreeMap<u64, Vec<Option<u32>>> {
    transcript
        .main
        .ranks
        .iter()
        .filter(|(doc, _)| transcript.results.contains(doc))
        .map(|(&d, r)| (d, r.clone()))
        .collect()
}
