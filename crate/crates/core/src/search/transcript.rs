//! Search transcripts and their line-delimited wire form.
//!
//! ```text
//! TRANSCRIPT 1 <L> <q> <probes>
//! AP <M|B> <path or -> <0|1>     auxiliary proof, canonical pre-order
//! R <M|B> <doc>                  raw per-tree result
//! K <M|B> <doc> <r1,r2,..>       newest matching history slot per keyword ('-' = none)
//! D <path or -> <64 hex>         main-tree leaf digest
//! F <doc>                        final result
//! END
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::crypto::PrfOutput;
use crate::error::{Error, Result};
use crate::index::{Height, PathCode, TreeTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProofNode {
    pub path: PathCode,
    pub matched: bool,
}

impl ProofNode {
    pub fn new(path: PathCode, matched: bool) -> Self {
        Self { path, matched }
    }
}

/// What one pass over one tree produced.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreeTranscript {
    /// `AP`: visited nodes with their match bit, in pre-order.
    pub proofs: Vec<ProofNode>,
    pub results: BTreeSet<u64>,
    /// `D`: digests of matched leaves, in leaf order. Empty for the deletion tree.
    pub digests: Vec<(PathCode, PrfOutput)>,
    /// For each matched leaf, the history slot that matched per keyword.
    pub ranks: BTreeMap<u64, Vec<Option<u32>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchTranscript {
    pub height: Height,
    pub keywords: usize,
    pub main: TreeTranscript,
    pub deleted: TreeTranscript,
    /// `R = R_main \ R_treeB`.
    pub results: BTreeSet<u64>,
    pub probes: u64,
}

impl SearchTranscript {
    pub fn tree(&self, tree: TreeTag) -> &TreeTranscript {
        match tree {
            TreeTag::Main => &self.main,
            TreeTag::Delete => &self.deleted,
        }
    }

    pub fn tree_mut(&mut self, tree: TreeTag) -> &mut TreeTranscript {
        match tree {
            TreeTag::Main => &mut self.main,
            TreeTag::Delete => &mut self.deleted,
        }
    }

    /// Total auxiliary proof entries over both trees.
    pub fn proof_len(&self) -> usize {
        self.main.proofs.len() + self.deleted.proofs.len()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "TRANSCRIPT 1 {} {} {}",
            self.height.levels(),
            self.keywords,
            self.probes
        )?;
        for (tree, marker) in [(TreeTag::Main, 'M'), (TreeTag::Delete, 'B')] {
            let t = self.tree(tree);
            for p in &t.proofs {
                writeln!(out, "AP {marker} {} {}", p.path.to_token(), u8::from(p.matched))?;
            }
            for doc in &t.results {
                writeln!(out, "R {marker} {doc}")?;
            }
            for (doc, ranks) in &t.ranks {
                let ranks: Vec<String> = ranks
                    .iter()
                    .map(|r| r.map_or_else(|| "-".into(), |v| v.to_string()))
                    .collect();
                writeln!(out, "K {marker} {doc} {}", ranks.join(","))?;
            }
        }
        for (leaf, digest) in &self.main.digests {
            writeln!(out, "D {} {}", leaf.to_token(), digest.to_hex())?;
        }
        for doc in &self.results {
            writeln!(out, "F {doc}")?;
        }
        writeln!(out, "END")?;
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::format(1, "missing header"))?;
        let header = header?;
        let fields: Vec<&str> = header.split(' ').collect();
        let ["TRANSCRIPT", "1", levels, keywords, probes] = fields[..] else {
            return Err(Error::format(1, "malformed transcript header"));
        };
        let height = levels
            .parse()
            .ok()
            .and_then(|l| Height::new(l).ok())
            .ok_or_else(|| Error::format(1, "bad height"))?;
        let keywords = keywords
            .parse()
            .map_err(|_| Error::format(1, "bad keyword count"))?;
        let probes = probes.parse().map_err(|_| Error::format(1, "bad probe count"))?;
        let mut t = SearchTranscript {
            height,
            keywords,
            main: TreeTranscript::default(),
            deleted: TreeTranscript::default(),
            results: BTreeSet::new(),
            probes,
        };
        let mut ended = false;
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line?;
            if ended {
                return Err(Error::format(lineno, "data after END"));
            }
            let parts: Vec<&str> = line.split(' ').collect();
            let tree = |m: &str| match m {
                "M" => Ok(TreeTag::Main),
                "B" => Ok(TreeTag::Delete),
                _ => Err(Error::format(lineno, format!("unknown tree {m:?}"))),
            };
            let doc = |s: &str| {
                s.parse::<u64>()
                    .map_err(|_| Error::format(lineno, format!("bad document id {s:?}")))
            };
            let path = |s: &str| {
                PathCode::from_token(s).map_err(|_| Error::format(lineno, "bad path"))
            };
            match parts[..] {
                ["AP", m, p, bit] => {
                    let matched = match bit {
                        "0" => false,
                        "1" => true,
                        _ => return Err(Error::format(lineno, "match bit must be 0 or 1")),
                    };
                    t.tree_mut(tree(m)?).proofs.push(ProofNode::new(path(p)?, matched));
                }
                ["R", m, d] => {
                    t.tree_mut(tree(m)?).results.insert(doc(d)?);
                }
                ["K", m, d, ranks] => {
                    let ranks = ranks
                        .split(',')
                        .map(|r| {
                            if r == "-" {
                                Ok(None)
                            } else {
                                r.parse()
                                    .map(Some)
                                    .map_err(|_| Error::format(lineno, "bad rank"))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    t.tree_mut(tree(m)?).ranks.insert(doc(d)?, ranks);
                }
                ["D", p, hex] => {
                    let digest = PrfOutput::from_hex(hex)
                        .ok_or_else(|| Error::format(lineno, "digest must be 64 hex chars"))?;
                    t.main.digests.push((path(p)?, digest));
                }
                ["F", d] => {
                    t.results.insert(doc(d)?);
                }
                ["END"] => ended = true,
                _ => return Err(Error::format(lineno, format!("unrecognised record {line:?}"))),
            }
        }
        if !ended {
            return Err(Error::format(0, "transcript truncated (no END)"));
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SearchTranscript {
        let mut main = TreeTranscript::default();
        for (p, m) in [("-", true), ("0", true), ("1", false), ("00", false), ("01", true)] {
            main.proofs.push(ProofNode::new(PathCode::from_token(p).unwrap(), m));
        }
        main.results.insert(1);
        main.ranks.insert(1, vec![Some(0), Some(2)]);
        main.digests.push(("01".parse().unwrap(), PrfOutput([9; 32])));
        let mut deleted = TreeTranscript::default();
        deleted.proofs.push(ProofNode::new(PathCode::ROOT, false));
        deleted.ranks.insert(3, vec![None, Some(1)]);
        SearchTranscript {
            height: Height::new(3).unwrap(),
            keywords: 2,
            main,
            deleted,
            results: BTreeSet::from([1]),
            probes: 12,
        }
    }

    #[test]
    fn text_round_trip() {
        let t = sample();
        let text = t.to_text();
        assert!(text.starts_with("TRANSCRIPT 1 3 2 12\nAP M - 1\n"));
        assert_eq!(SearchTranscript::read_from(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn truncated_or_garbled_streams_fail() {
        let text = sample().to_text();
        let without_end = text.trim_end().trim_end_matches("END");
        assert!(SearchTranscript::read_from(without_end.as_bytes()).is_err());
        let garbled = text.replace("AP M 0 1", "AP M 0 7");
        assert!(matches!(
            SearchTranscript::read_from(garbled.as_bytes()),
            Err(Error::Format { line: 3, .. })
        ));
        let extra = format!("{text}F 9\n");
        assert!(SearchTranscript::read_from(extra.as_bytes()).is_err());
    }
}
