//! The verify contract.
//!
//! Completeness rebuilds the visited tree from the auxiliary proof list and
//! checks, per tree:
//!
//! - (a) the root comes first and paths are in strict pre-order within height;
//! - (b) every matched inner node has both children in the proof;
//! - (c) every non-root node hangs off a matched parent;
//! - (d) matched leaves, raw results, digests and rank records agree;
//!
//! and finally that `R = R_main \ R_treeB`. Correctness recomputes the leaf
//! digest of every returned ciphertext and compares it with `D`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::crypto::{Ciphertext, MasterKey};
use crate::index::{leaf_digest, path_of, Height, PathCode, TreeTag};
use crate::search::{deleted_results, SearchTranscript, TreeTranscript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FailureKind {
    None,
    /// A returned ciphertext does not match its ledger-held digest.
    DigestMismatch,
    /// Proof list missing its root, out of order, duplicated or too deep.
    TreeMalformed,
    /// A matched node or leaf whose children or result are missing.
    MissingBranch,
    /// Results, ciphertexts or digests disagree with the proof.
    ResultSetMismatch,
    /// The proof claims nodes beneath a pruned (or absent) parent.
    CoverageGap,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::None => "none",
            FailureKind::DigestMismatch => "digest-mismatch",
            FailureKind::TreeMalformed => "tree-malformed",
            FailureKind::MissingBranch => "missing-branch",
            FailureKind::ResultSetMismatch => "result-set-mismatch",
            FailureKind::CoverageGap => "coverage-gap",
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Offending {
    Path(TreeTag, PathCode),
    Doc(u64),
}

impl fmt::Display for Offending {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offending::Path(TreeTag::Main, p) => write!(f, "M:{}", p.to_token()),
            Offending::Path(TreeTag::Delete, p) => write!(f, "B:{}", p.to_token()),
            Offending::Doc(d) => write!(f, "doc:{d}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Failure {
    pub kind: FailureKind,
    pub offending: Offending,
}

fn fail<T>(kind: FailureKind, offending: Offending) -> Result<T, Failure> {
    Err(Failure { kind, offending })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub verdict: u8,
    pub failure_kind: FailureKind,
    pub offending: Option<Offending>,
    /// Leaf digests recomputed during correctness checking.
    pub digest_recomputations: u64,
    /// Proof entries examined during completeness checking.
    pub structural_checks: u64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.verdict == 1
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let offending = self
            .offending
            .map_or_else(|| "-".to_string(), |o| o.to_string());
        write!(
            f,
            "verdict={} failure={} offending={} digests={} checks={}",
            self.verdict,
            self.failure_kind,
            offending,
            self.digest_recomputations,
            self.structural_checks
        )
    }
}

/// What the cloud hands back: the ledger transcript plus ciphertexts `E`.
#[derive(Clone, Debug)]
pub struct VerifyInput {
    pub transcript: SearchTranscript,
    pub ciphertexts: Vec<Ciphertext>,
}

fn check_tree(
    t: &TreeTranscript,
    height: Height,
    tree: TreeTag,
    keywords: usize,
) -> Result<u64, Failure> {
    let at = |p: PathCode| Offending::Path(tree, p);

    // (a)
    let Some(first) = t.proofs.first() else {
        return fail(FailureKind::TreeMalformed, at(PathCode::ROOT));
    };
    if !first.path.is_root() {
        return fail(FailureKind::TreeMalformed, at(first.path));
    }
    for pair in t.proofs.windows(2) {
        if pair[0].path >= pair[1].path {
            return fail(FailureKind::TreeMalformed, at(pair[1].path));
        }
    }
    if let Some(p) = t.proofs.iter().find(|p| p.path.len() > height.leaf_depth()) {
        return fail(FailureKind::TreeMalformed, at(p.path));
    }
    let nodes: HashMap<PathCode, bool> = t.proofs.iter().map(|p| (p.path, p.matched)).collect();

    // (b)
    for p in t.proofs.iter().filter(|p| p.matched && !p.path.is_leaf(height)) {
        if let Some(child) = p.path.children().into_iter().find(|c| !nodes.contains_key(c)) {
            return fail(FailureKind::MissingBranch, at(child));
        }
    }

    // (c)
    for p in &t.proofs {
        if let Some(parent) = p.path.parent() {
            if nodes.get(&parent) != Some(&true) {
                return fail(FailureKind::CoverageGap, at(p.path));
            }
        }
    }

    // (d)
    let leaves: BTreeSet<u64> = t
        .proofs
        .iter()
        .filter(|p| p.matched && p.path.is_leaf(height))
        .map(|p| p.path.value())
        .collect();
    if let Some(&doc) = leaves.difference(&t.results).next() {
        return fail(FailureKind::MissingBranch, Offending::Doc(doc));
    }
    if let Some(&doc) = t.results.difference(&leaves).next() {
        return fail(FailureKind::ResultSetMismatch, Offending::Doc(doc));
    }
    let ranked: BTreeSet<u64> = t.ranks.keys().copied().collect();
    if let Some(&doc) = leaves.symmetric_difference(&ranked).next() {
        return fail(FailureKind::ResultSetMismatch, Offending::Doc(doc));
    }
    for (&doc, ranks) in &t.ranks {
        let complete = ranks.len() == keywords
            && match tree {
                TreeTag::Main => ranks.iter().all(Option::is_some),
                TreeTag::Delete => ranks.iter().any(Option::is_some),
            };
        if !complete {
            return fail(FailureKind::ResultSetMismatch, Offending::Doc(doc));
        }
    }
    if tree == TreeTag::Main {
        let digest_leaves: Vec<u64> = t.digests.iter().map(|(p, _)| p.value()).collect();
        let expected: Vec<u64> = leaves.iter().copied().collect();
        if digest_leaves != expected {
            let missing = expected.iter().find(|d| !digest_leaves.contains(d));
            return match missing {
                Some(&doc) => fail(FailureKind::MissingBranch, Offending::Doc(doc)),
                None => {
                    let doc = digest_leaves
                        .iter()
                        .zip(expected.iter().map(Some).chain(std::iter::repeat(None)))
                        .find(|(d, e)| Some(*d) != *e)
                        .map_or(0, |(d, _)| *d);
                    fail(FailureKind::ResultSetMismatch, Offending::Doc(doc))
                }
            };
        }
        if let Some((p, _)) = t.digests.iter().find(|(p, _)| !p.is_leaf(height)) {
            return fail(FailureKind::TreeMalformed, at(*p));
        }
    } else if !t.digests.is_empty() {
        return fail(FailureKind::TreeMalformed, at(t.digests[0].0));
    }
    Ok(t.proofs.len() as u64)
}

/// Completeness: returns the number of proof entries examined.
pub fn verify_completeness(transcript: &SearchTranscript) -> Result<u64, Failure> {
    let mut checks = 0;
    for tree in [TreeTag::Main, TreeTag::Delete] {
        checks += check_tree(
            transcript.tree(tree),
            transcript.height,
            tree,
            transcript.keywords,
        )?;
    }
    // (e)
    let removed = deleted_results(&transcript.main, &transcript.deleted);
    let expected: BTreeSet<u64> = transcript.main.results.difference(&removed).copied().collect();
    if let Some(&doc) = expected.symmetric_difference(&transcript.results).next() {
        return fail(FailureKind::ResultSetMismatch, Offending::Doc(doc));
    }
    Ok(checks)
}

/// Correctness: returns the number of digests recomputed.
pub fn verify_correctness(
    key: &MasterKey,
    transcript: &SearchTranscript,
    ciphertexts: &[Ciphertext],
) -> Result<u64, Failure> {
    let mut by_doc: BTreeMap<u64, &Ciphertext> = BTreeMap::new();
    for ct in ciphertexts {
        if by_doc.insert(ct.doc_id, ct).is_some() {
            return fail(FailureKind::ResultSetMismatch, Offending::Doc(ct.doc_id));
        }
    }
    let returned: BTreeSet<u64> = by_doc.keys().copied().collect();
    if let Some(&doc) = transcript.results.symmetric_difference(&returned).next() {
        return fail(FailureKind::ResultSetMismatch, Offending::Doc(doc));
    }
    let digests: HashMap<PathCode, _> = transcript.main.digests.iter().copied().collect();
    let mut recomputed = 0;
    for (&doc, ct) in &by_doc {
        let Ok(leaf) = path_of(doc, transcript.height) else {
            return fail(FailureKind::ResultSetMismatch, Offending::Doc(doc));
        };
        let Some(expected) = digests.get(&leaf) else {
            return fail(FailureKind::DigestMismatch, Offending::Doc(doc));
        };
        recomputed += 1;
        if leaf_digest(key, leaf, ct) != *expected {
            return fail(FailureKind::DigestMismatch, Offending::Doc(doc));
        }
    }
    Ok(recomputed)
}

/// Completeness first, then correctness.
pub fn verify(key: &MasterKey, input: &VerifyInput) -> VerifyReport {
    let mut report = VerifyReport {
        verdict: 0,
        failure_kind: FailureKind::None,
        offending: None,
        digest_recomputations: 0,
        structural_checks: 0,
    };
    let outcome = verify_completeness(&input.transcript).and_then(|checks| {
        report.structural_checks = checks;
        verify_correctness(key, &input.transcript, &input.ciphertexts)
    });
    match outcome {
        Ok(recomputed) => {
            report.verdict = 1;
            report.digest_recomputations = recomputed;
        }
        Err(failure) => {
            report.failure_kind = failure.kind;
            report.offending = Some(failure.offending);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{encrypt_doc, prf, tag, PrfOutput};
    use crate::index::EncryptedIndex;
    use crate::search::{search, ProofNode, Trapdoor};
    use crate::version::ChainRepo;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Fig4 {
        key: MasterKey,
        transcript: SearchTranscript,
        ciphertexts: BTreeMap<u64, Ciphertext>,
    }

    /// Eight documents, only doc 1 holds both query keywords.
    fn fig4() -> Fig4 {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let key = MasterKey::generate(&mut rng);
        let mut index = EncryptedIndex::new(Height::new(4).unwrap());
        let tk = |w: &str| prf(&key, tag::TOKEN, w.as_bytes());
        let layout: [&[&str]; 8] = [
            &["w1"],
            &["w1", "w2"],
            &["w2"],
            &["x"],
            &["w2"],
            &["x"],
            &["w2", "x"],
            &["x"],
        ];
        let mut ciphertexts = BTreeMap::new();
        for (doc, words) in layout.iter().enumerate() {
            let doc = doc as u64;
            let ct = encrypt_doc(&key, doc, format!("document {doc}").as_bytes(), &mut rng).unwrap();
            let tokens: Vec<PrfOutput> = words.iter().map(|w| tk(w)).collect();
            index.insert_doc(&key, doc, &tokens, &ct).unwrap();
            ciphertexts.insert(doc, ct);
        }
        let transcript = search(
            &index,
            &ChainRepo::new(),
            &Trapdoor {
                tokens: vec![tk("w1"), tk("w2")],
            },
        )
        .unwrap();
        Fig4 {
            key,
            transcript,
            ciphertexts,
        }
    }

    fn returned(f: &Fig4, t: &SearchTranscript) -> Vec<Ciphertext> {
        t.results.iter().map(|d| f.ciphertexts[d].clone()).collect()
    }

    fn run(f: &Fig4, t: SearchTranscript) -> VerifyReport {
        let ciphertexts = returned(f, &t);
        verify(&f.key, &VerifyInput { transcript: t, ciphertexts })
    }

    fn p(s: &str) -> PathCode {
        s.parse().unwrap()
    }

    #[test]
    fn honest_transcript_passes() {
        let f = fig4();
        let report = run(&f, f.transcript.clone());
        assert!(report.passed(), "{report}");
        assert_eq!(report.failure_kind, FailureKind::None);
        assert_eq!(report.digest_recomputations, 1);
        assert_eq!(report.structural_checks, f.transcript.proof_len() as u64);
    }

    #[test]
    fn dropping_matched_leaf_breaks_parent() {
        let f = fig4();
        let mut t = f.transcript.clone();
        t.main.proofs.retain(|n| n.path != p("001"));
        t.main.results.remove(&1);
        t.main.ranks.remove(&1);
        t.main.digests.clear();
        t.results.remove(&1);
        let report = run(&f, t);
        assert_eq!(report.verdict, 0);
        assert_eq!(report.failure_kind, FailureKind::MissingBranch);
        assert_eq!(report.offending, Some(Offending::Path(TreeTag::Main, p("001"))));
    }

    #[test]
    fn grafting_under_pruned_node_is_a_gap() {
        let f = fig4();
        let mut t = f.transcript.clone();
        let at = t.main.proofs.iter().position(|n| n.path == p("1")).unwrap();
        t.main.proofs.insert(at + 1, ProofNode::new(p("10"), false));
        let report = run(&f, t);
        assert_eq!(report.failure_kind, FailureKind::CoverageGap);
    }

    #[test]
    fn suppressed_result_with_intact_proof() {
        let f = fig4();
        let mut t = f.transcript.clone();
        t.results.clear();
        t.main.results.clear();
        t.main.digests.clear();
        let report = run(&f, t);
        assert_eq!(report.failure_kind, FailureKind::MissingBranch);
        assert_eq!(report.offending, Some(Offending::Doc(1)));
    }

    #[test]
    fn tampered_ciphertext_is_identified() {
        let f = fig4();
        let mut ciphertexts = returned(&f, &f.transcript);
        ciphertexts[0].body[20] ^= 1;
        let report = verify(
            &f.key,
            &VerifyInput {
                transcript: f.transcript.clone(),
                ciphertexts,
            },
        );
        assert_eq!(report.failure_kind, FailureKind::DigestMismatch);
        assert_eq!(report.offending, Some(Offending::Doc(1)));
    }

    #[test]
    fn replaced_digest_fails() {
        let f = fig4();
        let mut t = f.transcript.clone();
        t.main.digests[0].1 = PrfOutput([0xAB; 32]);
        assert_eq!(run(&f, t).failure_kind, FailureKind::DigestMismatch);
    }

    #[test]
    fn ciphertext_set_must_match_results() {
        let f = fig4();
        let report = verify(
            &f.key,
            &VerifyInput {
                transcript: f.transcript.clone(),
                ciphertexts: vec![],
            },
        );
        assert_eq!(report.failure_kind, FailureKind::ResultSetMismatch);
        let mut extra = returned(&f, &f.transcript);
        extra.push(f.ciphertexts[&5].clone());
        let report = verify(
            &f.key,
            &VerifyInput {
                transcript: f.transcript.clone(),
                ciphertexts: extra,
            },
        );
        assert_eq!(report.failure_kind, FailureKind::ResultSetMismatch);
        assert_eq!(report.offending, Some(Offending::Doc(5)));
    }

    #[test]
    fn structural_clauses() {
        let f = fig4();
        let mut no_root = f.transcript.clone();
        no_root.main.proofs.remove(0);
        assert_eq!(run(&f, no_root).failure_kind, FailureKind::TreeMalformed);

        let mut swapped = f.transcript.clone();
        swapped.main.proofs.swap(1, 2);
        assert_eq!(run(&f, swapped).failure_kind, FailureKind::TreeMalformed);

        let mut duplicated = f.transcript.clone();
        let dup = duplicated.main.proofs[1];
        duplicated.main.proofs.insert(1, dup);
        assert_eq!(run(&f, duplicated).failure_kind, FailureKind::TreeMalformed);

        let mut invented = f.transcript.clone();
        invented.results.insert(6);
        invented.main.results.insert(6);
        assert_eq!(run(&f, invented).failure_kind, FailureKind::ResultSetMismatch);

        let mut unsubtracted = f.transcript.clone();
        unsubtracted.deleted.results.insert(1);
        assert_eq!(run(&f, unsubtracted).failure_kind, FailureKind::ResultSetMismatch);
    }

    #[test]
    fn report_line() {
        let f = fig4();
        let line = run(&f, f.transcript.clone()).to_string();
        assert!(line.starts_with("verdict=1 failure=none offending=- digests=1 checks="));
    }
}
