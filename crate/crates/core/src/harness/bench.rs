//! Experiments: fuzzy accuracy per error type, search scaling, and LSH
//! collision calibration.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::keywords::dictionary;
use super::system::System;
use crate::crypto::MasterKey;
use crate::error::{Error, Result};
use crate::fuzzy::{fuzzify, stem, LshFamily, UnigramVector, DIMENSIONS};
use crate::index::Height;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorType {
    /// No mutation at all.
    Identity,
    /// One letter replaced by a different one.
    Substitution,
    /// One letter dropped or one inserted.
    OmissionOrAddition,
    /// Two adjacent, different letters exchanged.
    Swap,
    /// A regular inflectional suffix added to the base word.
    Inflection,
}

impl ErrorType {
    pub const ALL: [ErrorType; 5] = [
        ErrorType::Identity,
        ErrorType::Substitution,
        ErrorType::OmissionOrAddition,
        ErrorType::Swap,
        ErrorType::Inflection,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorType::Identity => "T0",
            ErrorType::Substitution => "T1",
            ErrorType::OmissionOrAddition => "T2",
            ErrorType::Swap => "T3",
            ErrorType::Inflection => "T4",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ErrorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ErrorType::ALL
            .into_iter()
            .find(|e| e.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown error type {s:?} (expected T0..T4)")))
    }
}

fn random_letter<R: Rng>(rng: &mut R) -> u8 {
    b'a' + rng.random_range(0..26u8)
}

/// English-style regular inflection: plural/3rd person, past, progressive.
pub fn inflect<R: Rng>(word: &str, rng: &mut R) -> String {
    let b = word.as_bytes();
    let last = b[b.len() - 1];
    let before = b.len().checked_sub(2).map(|i| b[i]);
    let vowel = |c: u8| b"aeiou".contains(&c);
    match rng.random_range(0..3) {
        0 => {
            if word.ends_with('s') || word.ends_with('x') || word.ends_with("sh") || word.ends_with("ch") {
                format!("{word}es")
            } else if last == b'y' && before.is_some_and(|c| !vowel(c)) {
                format!("{}ies", &word[..word.len() - 1])
            } else {
                format!("{word}s")
            }
        }
        1 => {
            if last == b'e' {
                format!("{word}d")
            } else if last == b'y' && before.is_some_and(|c| !vowel(c)) {
                format!("{}ied", &word[..word.len() - 1])
            } else {
                format!("{word}ed")
            }
        }
        _ => {
            if last == b'e' && word.len() > 2 && !word.ends_with("ee") {
                format!("{}ing", &word[..word.len() - 1])
            } else {
                format!("{word}ing")
            }
        }
    }
}

/// Applies one error of the given type. The input must be lowercase ASCII.
pub fn mutate<R: Rng>(error: ErrorType, word: &str, rng: &mut R) -> String {
    let mut b = word.as_bytes().to_vec();
    match error {
        ErrorType::Identity => {}
        ErrorType::Substitution => {
            let i = rng.random_range(0..b.len());
            let mut c = random_letter(rng);
            while c == b[i] {
                c = random_letter(rng);
            }
            b[i] = c;
        }
        ErrorType::OmissionOrAddition => {
            if b.len() > 1 && rng.random_bool(0.5) {
                b.remove(rng.random_range(0..b.len()));
            } else {
                let c = random_letter(rng);
                b.insert(rng.random_range(0..=b.len()), c);
            }
        }
        ErrorType::Swap => {
            let candidates: Vec<usize> = (0..b.len().saturating_sub(1)).filter(|&i| b[i] != b[i + 1]).collect();
            if let Some(&i) = candidates.choose(rng) {
                b.swap(i, i + 1);
            }
        }
        ErrorType::Inflection => return inflect(word, rng),
    }
    String::from_utf8(b).expect("ASCII")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyRow {
    pub error: ErrorType,
    pub preserved: usize,
    pub total: usize,
}

impl AccuracyRow {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.preserved as f64 / self.total as f64
        }
    }
}

/// For each error type, the share of sampled keywords whose bucket string
/// survives the mutation. Spelling errors are applied to the stem; the
/// inflection test starts from the dictionary word.
pub fn bench_accuracy(
    family: &LshFamily,
    sample_size: usize,
    errors: &[ErrorType],
    seed: u64,
) -> Result<Vec<AccuracyRow>> {
    let dict = dictionary();
    if sample_size == 0 || sample_size > dict.len() {
        return Err(Error::Config(format!(
            "sample size {sample_size} outside 1..={} dictionary stems",
            dict.len()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sample: Vec<&str> = index::sample(&mut rng, dict.len(), sample_size)
        .into_iter()
        .map(|i| dict[i])
        .collect();
    errors
        .iter()
        .map(|&error| {
            let mut preserved = 0;
            for word in &sample {
                let base = match error {
                    ErrorType::Inflection => word.to_string(),
                    _ => stem(word)?,
                };
                let mutated = mutate(error, &base, &mut rng);
                if fuzzify(family, &base)? == fuzzify(family, &mutated)? {
                    preserved += 1;
                }
            }
            Ok(AccuracyRow {
                error,
                preserved,
                total: sample.len(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub levels: u8,
    pub ap_len: usize,
    pub probes: u64,
    pub results: usize,
    pub digest_recomputations: u64,
    pub structural_checks: u64,
    pub search_time: Duration,
    pub verify_time: Duration,
    /// Keywords, hash evaluations and padding entries for one more document.
    pub add_keywords: usize,
    pub add_hash_evals: usize,
    pub add_padding: usize,
}

/// Query keywords for the scaling corpus; they occur only in the targets.
pub const SCALING_QUERY: [&str; 2] = ["needle", "haystack"];
/// Number of documents holding the query keywords, at every corpus size.
pub const SCALING_MATCHES: usize = 4;
const SCALING_FILLERS: usize = 6;

/// Tree height for `n` documents plus one: `ceil(log2(n + 1)) + 1`.
pub fn height_for(n: usize) -> Result<Height> {
    let leaves = (n + 1).next_power_of_two();
    Height::new((leaves.trailing_zeros() + 1).clamp(2, 32) as u8)
}

/// The documents holding the query keywords: spread evenly over `0..n`.
pub fn scaling_targets(n: usize) -> Vec<u64> {
    (0..SCALING_MATCHES)
        .map(|i| ((2 * i + 1) * n / (2 * SCALING_MATCHES)) as u64)
        .collect()
}

/// Builds one corpus per `n` (each with its own tree height), queries the
/// two scaling keywords, verifies, and adds one more document.
pub fn bench_scaling(key: &MasterKey, family: &LshFamily, counts: &[usize], seed: u64) -> Result<Vec<ScalingRow>> {
    let dict = dictionary();
    let query_buckets: Vec<_> = SCALING_QUERY
        .iter()
        .map(|w| fuzzify(family, w))
        .collect::<Result<_>>()?;
    let fillers: Vec<&str> = dict
        .iter()
        .copied()
        .filter(|w| fuzzify(family, w).is_ok_and(|b| !query_buckets.contains(&b)))
        .collect();
    let mut rows = Vec::with_capacity(counts.len());
    for &n in counts {
        if n < SCALING_MATCHES {
            return Err(Error::Config(format!("corpus size {n} below {SCALING_MATCHES}")));
        }
        let height = height_for(n)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ n as u64);
        let mut system = System::in_memory(key.clone(), family.clone(), height, rng.random());
        let targets = scaling_targets(n);
        let filler_text = |rng: &mut ChaCha20Rng| {
            let words: Vec<&str> = fillers.choose_multiple(rng, SCALING_FILLERS).copied().collect();
            words.join(" ")
        };
        for doc in 0..n as u64 {
            let mut text = filler_text(&mut rng);
            if targets.contains(&doc) {
                text = format!("{text} {}", SCALING_QUERY.join(" "));
            }
            system.add_document(Some(doc), &text)?;
        }

        let started = Instant::now();
        let (seq, transcript) = system.search(&SCALING_QUERY)?;
        let search_time = started.elapsed();
        let ciphertexts = system.store().fetch_all(transcript.results.iter().copied())?;
        let key = system.key().clone();
        let started = Instant::now();
        let (_, report) = system
            .ledger_mut()
            .invoke_verify_recorded(&key, seq, ciphertexts)?;
        let verify_time = started.elapsed();
        if !report.passed() {
            return Err(Error::IndexCorruption(format!("honest verification failed at n={n}: {report}")));
        }
        let added = system.add_document(Some(n as u64), &filler_text(&mut rng))?;

        rows.push(ScalingRow {
            n,
            levels: height.levels(),
            ap_len: transcript.proof_len(),
            probes: transcript.probes,
            results: transcript.results.len(),
            digest_recomputations: report.digest_recomputations,
            structural_checks: report.structural_checks,
            search_time,
            verify_time,
            add_keywords: added.keywords,
            add_hash_evals: added.hash_evals,
            add_padding: added.padding,
        });
    }
    Ok(rows)
}

/// Least-squares fits of `y` against `log2 n` and against `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogFit {
    pub c1: f64,
    pub c2: f64,
    pub max_relative_residual: f64,
    pub ssr_log: f64,
    pub ssr_linear: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (my - slope * mx, slope)
}

fn ssr(xs: &[f64], ys: &[f64], (a, b): (f64, f64)) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum()
}

pub fn fit_log(points: &[(usize, f64)]) -> LogFit {
    let ns: Vec<f64> = points.iter().map(|&(n, _)| n as f64).collect();
    let logs: Vec<f64> = ns.iter().map(|n| n.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let (c1, c2) = least_squares(&logs, &ys);
    let max_relative_residual = logs
        .iter()
        .zip(&ys)
        .map(|(x, y)| ((y - c1 - c2 * x) / y).abs())
        .fold(0.0, f64::max);
    LogFit {
        c1,
        c2,
        max_relative_residual,
        ssr_log: ssr(&logs, &ys, (c1, c2)),
        ssr_linear: ssr(&ns, &ys, least_squares(&ns, &ys)),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub pairs: usize,
    /// Collision rate of each function over pairs at distance at most sqrt(3).
    pub near_rates: Vec<f64>,
    /// Collision rate of each function over pairs at distance at least 2.
    pub far_rates: Vec<f64>,
    /// Mean rates at exactly sqrt(3) and exactly 2, for reference.
    pub boundary_near_rate: f64,
    pub boundary_far_rate: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl CalibrationReport {
    pub fn near_rate(&self) -> f64 {
        mean(&self.near_rates)
    }

    pub fn far_rate(&self) -> f64 {
        mean(&self.far_rates)
    }

    pub fn min_near_rate(&self) -> f64 {
        self.near_rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_far_rate(&self) -> f64 {
        self.far_rates.iter().copied().fold(0.0, f64::max)
    }
}

fn random_vector<R: Rng>(rng: &mut R) -> [u8; DIMENSIONS] {
    let mut slots = [0u8; DIMENSIONS];
    for s in &mut slots {
        *s = u8::from(rng.random_bool(0.5));
    }
    slots
}

fn flipped<R: Rng>(slots: &[u8; DIMENSIONS], flips: usize, rng: &mut R) -> [u8; DIMENSIONS] {
    let mut out = *slots;
    for i in index::sample(rng, DIMENSIONS, flips) {
        out[i] ^= 1;
    }
    out
}

/// Monte-Carlo per-function collision rates over uniformly random binary
/// vectors. Near partners differ in 1 to 3 coordinates; far partners are
/// independent vectors at distance at least 2.
pub fn lsh_calibrate(family: &LshFamily, pairs: usize, seed: u64) -> Result<CalibrationReport> {
    if pairs == 0 {
        return Err(Error::Config("at least one pair is required".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let functions = family.functions();
    let window = family.window();
    let k = functions.len();
    let mut near = vec![0usize; k];
    let mut far = vec![0usize; k];
    let mut boundary_near = 0usize;
    let mut boundary_far = 0usize;
    let vector = |slots| UnigramVector::from_slots(slots);
    for _ in 0..pairs {
        let base = random_vector(&mut rng);
        let v = vector(base)?;
        let near_v = vector(flipped(&base, rng.random_range(1..=3), &mut rng))?;
        let far_v = loop {
            let candidate = vector(random_vector(&mut rng))?;
            if candidate.hamming(&v) >= 4 {
                break candidate;
            }
        };
        let edge_near = vector(flipped(&base, 3, &mut rng))?;
        let edge_far = vector(flipped(&base, 4, &mut rng))?;
        for (i, h) in functions.iter().enumerate() {
            let hv = h.eval(&v, window);
            near[i] += usize::from(hv == h.eval(&near_v, window));
            far[i] += usize::from(hv == h.eval(&far_v, window));
            boundary_near += usize::from(hv == h.eval(&edge_near, window));
            boundary_far += usize::from(hv == h.eval(&edge_far, window));
        }
    }
    let rate = |c: usize| c as f64 / pairs as f64;
    Ok(CalibrationReport {
        pairs,
        near_rates: near.into_iter().map(rate).collect(),
        far_rates: far.into_iter().map(rate).collect(),
        boundary_near_rate: rate(boundary_near) / k as f64,
        boundary_far_rate: rate(boundary_far) / k as f64,
    })
}
