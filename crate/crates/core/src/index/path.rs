use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported tree height. Leaves sit at depth `L - 1`.
pub const MAX_HEIGHT: u8 = 32;

/// Tree height `L`: root at level 0, leaves at depth `L - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Height(u8);

impl Height {
    pub fn new(levels: u8) -> Result<Self> {
        if !(1..=MAX_HEIGHT).contains(&levels) {
            return Err(Error::Config(format!(
                "tree height must be in 1..={MAX_HEIGHT}, got {levels}"
            )));
        }
        Ok(Self(levels))
    }

    pub fn levels(self) -> u8 {
        self.0
    }

    pub fn leaf_depth(self) -> u8 {
        self.0 - 1
    }

    /// Number of leaves, `2^(L-1)`.
    pub fn capacity(self) -> u64 {
        1u64 << self.leaf_depth()
    }

    /// Smallest height whose leaves can address `docs` documents.
    pub fn for_documents(docs: u64) -> Self {
        let mut levels = 1u8;
        while (1u64 << (levels - 1)) < docs.max(1) {
            levels += 1;
        }
        Self(levels.min(MAX_HEIGHT))
    }
}

impl Default for Height {
    fn default() -> Self {
        Self(MAX_HEIGHT)
    }
}

impl fmt::Display for Height {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Root-to-node path: `'0'` steps left, `'1'` steps right.
///
/// Stored as the path bits right-aligned in `bits`, with `len` of them used.
/// Ordering is lexicographic on the bit string, which is exactly pre-order
/// with the left child first.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathCode {
    bits: u32,
    len: u8,
}

impl PathCode {
    pub const ROOT: PathCode = PathCode { bits: 0, len: 0 };

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> u8 {
        self.len
    }

    pub fn is_root(self) -> bool {
        self.len == 0
    }

    pub fn child(self, bit: u8) -> PathCode {
        debug_assert!(bit <= 1 && self.len < 31);
        PathCode {
            bits: (self.bits << 1) | bit as u32,
            len: self.len + 1,
        }
    }

    pub fn children(self) -> [PathCode; 2] {
        [self.child(0), self.child(1)]
    }

    pub fn parent(self) -> Option<PathCode> {
        (self.len > 0).then(|| PathCode {
            bits: self.bits >> 1,
            len: self.len - 1,
        })
    }

    pub fn bit(self, depth: u8) -> u8 {
        debug_assert!(depth < self.len);
        ((self.bits >> (self.len - 1 - depth)) & 1) as u8
    }

    pub fn prefix(self, len: u8) -> PathCode {
        debug_assert!(len <= self.len);
        PathCode {
            bits: if len == 0 { 0 } else { self.bits >> (self.len - len) },
            len,
        }
    }

    pub fn is_strict_prefix_of(self, other: PathCode) -> bool {
        self.len < other.len && other.prefix(self.len) == self
    }

    /// Length of the longest common prefix.
    pub fn common_prefix_len(self, other: PathCode) -> u8 {
        let n = self.len.min(other.len);
        (0..n).take_while(|&d| self.bit(d) == other.bit(d)).count() as u8
    }

    pub fn is_leaf(self, height: Height) -> bool {
        self.len == height.leaf_depth()
    }

    /// Numeric value of the bits; the document id for a leaf.
    pub fn value(self) -> u64 {
        self.bits as u64
    }

    pub fn to_bit_string(self) -> String {
        (0..self.len)
            .map(|d| if self.bit(d) == 1 { '1' } else { '0' })
            .collect()
    }

    /// On-disk/wire form: the bit string, or `-` for the root.
    pub fn to_token(self) -> String {
        if self.is_root() {
            "-".into()
        } else {
            self.to_bit_string()
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        if token == "-" {
            Ok(Self::ROOT)
        } else {
            token.parse()
        }
    }
}

impl FromStr for PathCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() > 31 {
            return Err(Error::format(0, format!("path too long: {} bits", s.len())));
        }
        let mut path = PathCode::ROOT;
        for ch in s.chars() {
            path = match ch {
                '0' => path.child(0),
                '1' => path.child(1),
                _ => return Err(Error::format(0, format!("invalid path character {ch:?}"))),
            };
        }
        Ok(path)
    }
}

impl Ord for PathCode {
    fn cmp(&self, other: &Self) -> Ordering {
        let n = self.len.min(other.len);
        self.prefix(n)
            .bits
            .cmp(&other.prefix(n).bits)
            .then(self.len.cmp(&other.len))
    }
}

impl PartialOrd for PathCode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PathCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"", self.to_bit_string())
    }
}

impl fmt::Debug for PathCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Leaf path of a document: its id in binary, zero-padded to `L - 1` bits.
pub fn path_of(doc_id: u64, height: Height) -> Result<PathCode> {
    if doc_id >= height.capacity() {
        return Err(Error::Capacity {
            doc_id,
            height: height.levels(),
        });
    }
    Ok(PathCode {
        bits: doc_id as u32,
        len: height.leaf_depth(),
    })
}

/// Every node from the root down to and including `leaf`.
pub fn nodes_on_path(leaf: PathCode, height: Height) -> Result<Vec<PathCode>> {
    if !leaf.is_leaf(height) {
        return Err(Error::ContractViolation(format!(
            "{leaf} is not a leaf of a height-{height} tree"
        )));
    }
    Ok((0..=leaf.len()).map(|len| leaf.prefix(len)).collect())
}
