use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::vector::{UnigramVector, DIMENSIONS};
use crate::error::{Error, Result};

pub const DEFAULT_FUNCTIONS: usize = 8;
pub const DEFAULT_WINDOW: f64 = 4.0;

/// Seed for the LSH projection geometry. Kept apart from the master key.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LshSeed(pub [u8; 32]);

impl LshSeed {
    pub fn from_hex(text: &str) -> Result<Self> {
        let bytes = hex::decode(text.trim())
            .map_err(|_| Error::Config("LSH seed must be hex".into()))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| Error::Config("LSH seed must be 64 hex characters".into()))?;
        Ok(Self(arr))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// One p-stable function `h(v) = floor((a . v + b) / c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PStableHash {
    pub a: Vec<f64>,
    pub b: f64,
}

impl PStableHash {
    pub fn eval(&self, v: &UnigramVector, window: f64) -> i64 {
        let dot: f64 = self
            .a
            .iter()
            .zip(v.slots().iter())
            .filter(|(_, &s)| s == 1)
            .map(|(a, _)| a)
            .sum();
        ((dot + self.b) / window).floor() as i64
    }
}

/// `k` Gaussian (2-stable) projections with a shared window `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct LshFamily {
    seed: LshSeed,
    window: f64,
    functions: Vec<PStableHash>,
}

impl LshFamily {
    pub fn new(seed: LshSeed, k: usize, window: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("LSH family needs at least one function".into()));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::Config("LSH window must be positive".into()));
        }
        let mut rng = ChaCha20Rng::from_seed(seed.0);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let offset = Uniform::new(0.0, window).expect("non-empty range");
        let functions = (0..k)
            .map(|_| PStableHash {
                a: (0..DIMENSIONS).map(|_| normal.sample(&mut rng)).collect(),
                b: offset.sample(&mut rng),
            })
            .collect();
        Ok(Self {
            seed,
            window,
            functions,
        })
    }

    pub fn with_defaults(seed: LshSeed) -> Self {
        Self::new(seed, DEFAULT_FUNCTIONS, DEFAULT_WINDOW).expect("defaults are valid")
    }

    pub fn k(&self) -> usize {
        self.functions.len()
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn seed(&self) -> LshSeed {
        self.seed
    }

    pub fn functions(&self) -> &[PStableHash] {
        &self.functions
    }

    pub fn hash_values(&self, v: &UnigramVector) -> Vec<i64> {
        self.functions
            .iter()
            .map(|h| h.eval(v, self.window))
            .collect()
    }
}

/// `k` bucket ids joined by `'|'`: the fuzzified identity of a keyword.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct BucketString(String);

impl BucketString {
    pub fn from_values(values: &[i64]) -> Self {
        let text = values
            .iter()
            .map(i64::to_string)
            .collect::<Vec<_>>()
            .join("|");
        Self(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn values(&self) -> Vec<i64> {
        self.0
            .split('|')
            .map(|p| p.parse().expect("validated on construction"))
            .collect()
    }
}

impl fmt::Display for BucketString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for BucketString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() || s.split('|').any(|p| p.parse::<i64>().is_err()) {
            return Err(Error::format(0, format!("invalid bucket string {s:?}")));
        }
        Ok(Self(s.to_string()))
    }
}

pub fn lsh_bucket(family: &LshFamily, v: &UnigramVector) -> BucketString {
    BucketString::from_values(&family.hash_values(v))
}
