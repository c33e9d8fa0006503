//! Keyword fuzzification: stemming, uni-gram vectorization and p-stable LSH.
//!
//! `fuzzify(w) = lsh_bucket(vectorize(stem(w)))`. Inflections are folded by
//! the stemmer; spelling errors are absorbed (probabilistically) by the LSH
//! buckets.

mod lsh;
mod porter;
mod vector;

pub use lsh::{
    lsh_bucket, BucketString, LshFamily, LshSeed, PStableHash, DEFAULT_FUNCTIONS, DEFAULT_WINDOW,
};
pub use porter::porter_stem;
pub use vector::{slot_index, vectorize, UnigramVector, DIMENSIONS};

use crate::error::{Error, Result};

/// Lowercases and validates a raw keyword.
pub fn normalize(word: &str) -> Result<String> {
    let lowered = word.trim().to_ascii_lowercase();
    if lowered.is_empty() {
        return Err(Error::RejectedKeyword {
            word: word.into(),
            reason: "empty after normalization",
        });
    }
    if !lowered.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit()) {
        return Err(Error::RejectedKeyword {
            word: word.into(),
            reason: "characters must be ASCII letters or digits",
        });
    }
    Ok(lowered)
}

/// Porter stem of the normalized word, iterated to a fixed point so that
/// `stem(stem(w)) == stem(w)` holds for every input.
pub fn stem(word: &str) -> Result<String> {
    let mut current = normalize(word)?;
    // Each pass either shortens the word or leaves it unchanged.
    loop {
        let next = porter_stem(&current);
        if next == current {
            return Ok(current);
        }
        current = next;
    }
}

pub fn fuzzify(family: &LshFamily, raw_word: &str) -> Result<BucketString> {
    let stemmed = stem(raw_word)?;
    Ok(lsh_bucket(family, &vectorize(&stemmed)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family() -> LshFamily {
        LshFamily::with_defaults(LshSeed([3; 32]))
    }

    #[test]
    fn stems_fold_inflections() {
        assert_eq!(stem("encrypting").unwrap(), "encrypt");
        assert_eq!(stem("Encrypts").unwrap(), "encrypt");
        assert_eq!(stem("walk").unwrap(), "walk");
        assert_eq!(stem("walking").unwrap(), stem("walked").unwrap());
    }

    #[test]
    fn stem_is_idempotent_where_single_pass_is_not() {
        assert_eq!(porter_stem("agreed"), "agre");
        assert_eq!(porter_stem("agre"), "agr");
        let once = stem("agreed").unwrap();
        assert_eq!(stem(&once).unwrap(), once);
    }

    #[test]
    fn stem_rejects_empty_and_symbols() {
        assert!(matches!(stem("   "), Err(Error::RejectedKeyword { .. })));
        assert!(matches!(stem("e-mail"), Err(Error::RejectedKeyword { .. })));
    }

    #[test]
    fn fuzzify_matches_composition() {
        let fam = family();
        let direct = lsh_bucket(&fam, &vectorize(&stem("Encrypting").unwrap()).unwrap());
        assert_eq!(fuzzify(&fam, "Encrypting").unwrap(), direct);
        assert_eq!(
            fuzzify(&fam, "Encrypting").unwrap(),
            fuzzify(&fam, "encrypts").unwrap()
        );
        // Transpositions keep the character multiset.
        assert_eq!(
            fuzzify(&fam, "secure").unwrap(),
            fuzzify(&fam, "secrue").unwrap()
        );
    }
}
