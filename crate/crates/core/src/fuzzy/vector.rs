use std::fmt;

use crate::error::{Error, Result};

pub const LETTER_SLOTS: usize = 5;
pub const DIGIT_SLOTS: usize = 3;
pub const DIMENSIONS: usize = 26 * LETTER_SLOTS + 10 * DIGIT_SLOTS;

/// Uni-gram occurrence vector.
///
/// Letters own 5 slots each and digits 3; slot `(ch, j)` is set iff `ch`
/// occurs at least `j` times. Occurrences past the cap are ignored, so two
/// words with the same capped character multiset (anagrams, for instance)
/// map to the same vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct UnigramVector([u8; DIMENSIONS]);

impl UnigramVector {
    pub fn from_slots(slots: [u8; DIMENSIONS]) -> Result<Self> {
        if slots.iter().any(|&s| s > 1) {
            return Err(Error::ContractViolation(
                "uni-gram slots must be 0 or 1".into(),
            ));
        }
        Ok(Self(slots))
    }

    pub fn slots(&self) -> &[u8; DIMENSIONS] {
        &self.0
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&s| s == 1).count()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        self.0.iter().zip(other.0.iter()).filter(|(a, b)| a != b).count()
    }

    /// Euclidean distance; for 0/1 vectors this is `sqrt(hamming)`.
    pub fn distance(&self, other: &Self) -> f64 {
        (self.hamming(other) as f64).sqrt()
    }
}

impl fmt::Debug for UnigramVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let set: Vec<usize> = (0..DIMENSIONS).filter(|&i| self.0[i] == 1).collect();
        write!(f, "UnigramVector{set:?}")
    }
}

/// Index of slot `(ch, occurrence)`, occurrence counted from 1.
pub fn slot_index(ch: char, occurrence: usize) -> Option<usize> {
    match ch {
        'a'..='z' if (1..=LETTER_SLOTS).contains(&occurrence) => {
            Some((ch as usize - 'a' as usize) * LETTER_SLOTS + occurrence - 1)
        }
        '0'..='9' if (1..=DIGIT_SLOTS).contains(&occurrence) => {
            Some(26 * LETTER_SLOTS + (ch as usize - '0' as usize) * DIGIT_SLOTS + occurrence - 1)
        }
        _ => None,
    }
}

pub fn vectorize(word: &str) -> Result<UnigramVector> {
    if word.is_empty() {
        return Err(Error::RejectedKeyword {
            word: word.into(),
            reason: "empty keyword",
        });
    }
    let mut counts = [0usize; 36];
    for ch in word.chars() {
        let idx = match ch {
            'a'..='z' => ch as usize - 'a' as usize,
            '0'..='9' => 26 + ch as usize - '0' as usize,
            _ => {
                return Err(Error::RejectedKeyword {
                    word: word.into(),
                    reason: "characters must be in [a-z0-9]",
                })
            }
        };
        counts[idx] += 1;
    }
    let mut slots = [0u8; DIMENSIONS];
    for (idx, &count) in counts.iter().enumerate() {
        let ch = if idx < 26 {
            (b'a' + idx as u8) as char
        } else {
            (b'0' + (idx - 26) as u8) as char
        };
        for occurrence in 1..=count {
            match slot_index(ch, occurrence) {
                Some(slot) => slots[slot] = 1,
                None => break,
            }
        }
    }
    Ok(UnigramVector(slots))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_fills_160_dimensions() {
        assert_eq!(DIMENSIONS, 160);
        assert_eq!(slot_index('a', 1), Some(0));
        assert_eq!(slot_index('z', 5), Some(129));
        assert_eq!(slot_index('0', 1), Some(130));
        assert_eq!(slot_index('9', 3), Some(159));
        assert_eq!(slot_index('a', 6), None);
    }

    #[test]
    fn aab_sets_three_slots() {
        let v = vectorize("aab").unwrap();
        let mut expected = [0u8; DIMENSIONS];
        expected[slot_index('a', 1).unwrap()] = 1;
        expected[slot_index('a', 2).unwrap()] = 1;
        expected[slot_index('b', 1).unwrap()] = 1;
        assert_eq!(v.slots(), &expected);
    }

    #[test]
    fn substitution_toggles_two_slots() {
        let a = vectorize("secure").unwrap();
        let b = vectorize("secare").unwrap();
        assert_eq!(a.hamming(&b), 2);
        assert!((a.distance(&b) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn caps_and_anagrams() {
        assert_eq!(vectorize("aaaaaa").unwrap().ones(), 5);
        assert_eq!(vectorize("1111").unwrap().ones(), 3);
        assert_eq!(vectorize("listen").unwrap(), vectorize("silent").unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(vectorize("").is_err());
        assert!(vectorize("Abc").is_err());
        assert!(vectorize("a-b").is_err());
    }
}
