//! Synthetic corpora drawn from the bundled dictionary with Zipf-distributed
//! keyword frequencies.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Zipf};

use super::keywords::{dictionary, stopwords};
use crate::error::{Error, Result};
use crate::fuzzy::stem;

#[derive(Clone, Debug)]
pub struct CorpusSpec {
    pub documents: usize,
    pub min_keywords: usize,
    pub max_keywords: usize,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(documents: usize, seed: u64) -> Self {
        Self {
            documents,
            min_keywords: 45,
            max_keywords: 92,
            zipf_exponent: 1.0,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticDoc {
    pub doc_id: u64,
    /// Dictionary words placed in the text, in order of first appearance.
    pub words: Vec<&'static str>,
    pub text: String,
}

impl SyntheticDoc {
    pub fn stems(&self) -> BTreeSet<String> {
        self.words.iter().map(|w| stem(w).expect("dictionary word")).collect()
    }
}

pub fn generate(spec: &CorpusSpec) -> Result<Vec<SyntheticDoc>> {
    let dict = dictionary();
    if spec.min_keywords == 0 || spec.min_keywords > spec.max_keywords || spec.max_keywords > dict.len() / 2 {
        return Err(Error::Config(format!(
            "keywords per document must satisfy 1 <= {} <= {} <= {}",
            spec.min_keywords,
            spec.max_keywords,
            dict.len() / 2
        )));
    }
    let zipf = Zipf::new(dict.len() as f64, spec.zipf_exponent)
        .map_err(|e| Error::Config(format!("zipf: {e}")))?;
    let fillers: Vec<&str> = {
        let mut v: Vec<&str> = stopwords().iter().copied().collect();
        v.sort_unstable();
        v
    };
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::with_capacity(spec.documents);
    for doc_id in 0..spec.documents as u64 {
        let count = rng.random_range(spec.min_keywords..=spec.max_keywords);
        let mut chosen = BTreeSet::new();
        let mut words = Vec::with_capacity(count);
        while words.len() < count {
            let rank = zipf.sample(&mut rng) as usize - 1;
            if chosen.insert(rank) {
                words.push(dict[rank]);
            }
        }
        let mut text = String::new();
        for sentence in words.chunks(7) {
            let mut parts: Vec<&str> = Vec::new();
            for w in sentence {
                if rng.random_bool(0.4) {
                    parts.push(fillers.choose(&mut rng).expect("stopwords"));
                }
                parts.push(w);
            }
            let mut line = parts.join(" ");
            if let Some(first) = line.get(..1) {
                line.replace_range(..1, &first.to_ascii_uppercase());
            }
            text.push_str(&line);
            text.push_str(". ");
        }
        text.pop();
        text.push('\n');
        docs.push(SyntheticDoc { doc_id, words, text });
    }
    Ok(docs)
}

/// Writes `doc_<id>.txt` files; ids are zero-padded so name order is id order.
pub fn write_corpus(dir: &Path, docs: &[SyntheticDoc]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for doc in docs {
        fs::write(dir.join(format!("doc_{:06}.txt", doc.doc_id)), &doc.text)?;
    }
    Ok(())
}
