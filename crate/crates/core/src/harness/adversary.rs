//! A misbehaving cloud server, for exercising the verifier end to end.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::corpus::{generate, CorpusSpec};
use super::keywords::extract_keywords;
use super::system::System;
use crate::crypto::MasterKey;
use crate::error::{Error, Result};
use crate::fuzzy::{LshFamily, LshSeed};
use crate::verify::{VerifyInput, VerifyReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryMode {
    /// Serve everything honestly.
    None,
    /// Flip one byte of one returned ciphertext.
    TamperDoc,
    /// Withhold one matching document and its result and digest records.
    DropResult,
    /// Serve the previous version of a document the owner has since updated.
    StaleDoc,
}

impl AdversaryMode {
    pub const ALL: [AdversaryMode; 4] = [
        AdversaryMode::None,
        AdversaryMode::TamperDoc,
        AdversaryMode::DropResult,
        AdversaryMode::StaleDoc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdversaryMode::None => "none",
            AdversaryMode::TamperDoc => "tamper-doc",
            AdversaryMode::DropResult => "drop-result",
            AdversaryMode::StaleDoc => "stale-doc",
        }
    }
}

impl fmt::Display for AdversaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdversaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AdversaryMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown adversary mode {s:?} (expected none, tamper-doc, drop-result or stale-doc)"
                ))
            })
    }
}

#[derive(Clone, Debug)]
pub struct AdversaryOutcome {
    pub mode: AdversaryMode,
    pub query: String,
    /// The document the adversary interfered with (or would have).
    pub target: u64,
    pub report: VerifyReport,
}

/// An in-memory system over a synthetic corpus, for adversarial runs.
pub fn synthetic_system(documents: usize, seed: u64) -> Result<System> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let key = MasterKey::generate(&mut rng);
    let family = LshFamily::with_defaults(LshSeed(rng.random()));
    let height = super::bench::height_for(documents)?;
    let mut system = System::in_memory(key, family, height, rng.random());
    let mut spec = CorpusSpec::new(documents, rng.random());
    spec.min_keywords = 10;
    spec.max_keywords = 20;
    for doc in generate(&spec)? {
        system.add_document(Some(doc.doc_id), &doc.text)?;
    }
    Ok(system)
}

/// Picks a keyword of a random stored document, queries it, interferes
/// according to `mode` at the document-store boundary, and verifies.
pub fn run_adversary(system: &mut System, mode: AdversaryMode, seed: u64) -> Result<AdversaryOutcome> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ids: Vec<u64> = system.store().sizes().keys().copied().collect();
    let &target = ids
        .choose(&mut rng)
        .ok_or_else(|| Error::ContractViolation("the document store is empty".into()))?;
    let plaintext = system.decrypt(target)?;
    let text = String::from_utf8_lossy(&plaintext).into_owned();
    let keywords: Vec<String> = extract_keywords(&text).into_iter().collect();
    let query = keywords
        .choose(&mut rng)
        .ok_or_else(|| Error::ContractViolation(format!("document {target} has no keywords")))?
        .clone();

    if mode == AdversaryMode::StaleDoc {
        let stale = system.store().fetch(target)?;
        system.update_document(target, &format!("{text}\nrevised"))?;
        let (seq, transcript) = system.search(&[&query])?;
        let mut served = system.store().fetch_all(transcript.results.iter().copied())?;
        for ct in &mut served {
            if ct.doc_id == target {
                *ct = stale.clone();
            }
        }
        let key = system.key().clone();
        let (_, report) = system.ledger_mut().invoke_verify_recorded(&key, seq, served)?;
        return Ok(AdversaryOutcome {
            mode,
            query,
            target,
            report,
        });
    }

    let (seq, transcript) = system.search(&[&query])?;
    if !transcript.results.contains(&target) {
        return Err(Error::IndexCorruption(format!(
            "document {target} missing from results for {query:?}"
        )));
    }
    let mut served = system.store().fetch_all(transcript.results.iter().copied())?;
    let key = system.key().clone();
    let report = match mode {
        AdversaryMode::None => system.ledger_mut().invoke_verify_recorded(&key, seq, served)?.1,
        AdversaryMode::TamperDoc => {
            let ct = served
                .iter_mut()
                .find(|c| c.doc_id == target)
                .expect("target is in the result set");
            let i = rng.random_range(0..ct.body.len());
            ct.body[i] ^= rng.random_range(1..=255u8);
            system.ledger_mut().invoke_verify_recorded(&key, seq, served)?.1
        }
        AdversaryMode::DropResult => {
            let mut forged = transcript;
            forged.results.remove(&target);
            forged.main.results.remove(&target);
            forged.main.ranks.remove(&target);
            forged.main.digests.retain(|(leaf, _)| leaf.value() != target);
            served.retain(|c| c.doc_id != target);
            system
                .verify(&VerifyInput {
                    transcript: forged,
                    ciphertexts: served,
                })?
                .1
        }
        AdversaryMode::StaleDoc => unreachable!("handled above"),
    };
    Ok(AdversaryOutcome {
        mode,
        query,
        target,
        report,
    })
}
