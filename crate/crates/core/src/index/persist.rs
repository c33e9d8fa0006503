//! Line-oriented index file:
//!
//! ```text
//! DVFS-INDEX 1 <L> <M> <n>
//! E <128 hex>            main-tree entry
//! B <128 hex>            deletion-tree entry
//! D <bits or -> <64 hex> leaf digest
//! ```
//!
//! Records are written sorted so identical indexes produce identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{EncryptedIndex, Height, IndexKey, PathCode, TreeTag};
use crate::crypto::PrfOutput;
use crate::error::{Error, Result};

const MAGIC: &str = "DVFS-INDEX";
const VERSION: &str = "1";

impl EncryptedIndex {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{MAGIC} {VERSION} {} {} {}",
            self.height.levels(),
            self.entry_count,
            self.digests.len()
        )?;
        for (tree, marker) in [(TreeTag::Main, 'E'), (TreeTag::Delete, 'B')] {
            let mut keys: Vec<&IndexKey> = self.keys(tree).collect();
            keys.sort_unstable();
            for key in keys {
                writeln!(out, "{marker} {}", key.to_hex())?;
            }
        }
        for (leaf, digest) in &self.digests {
            writeln!(out, "D {} {}", leaf.to_token(), digest.to_hex())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format(1, "missing header"))??;
        let fields: Vec<&str> = header.split(' ').collect();
        let [magic, version, levels, m, n] = fields[..] else {
            return Err(Error::format(1, "malformed header"));
        };
        if magic != MAGIC || version != VERSION {
            return Err(Error::format(1, "not a version-1 index file"));
        }
        let levels: u8 = levels
            .parse()
            .map_err(|_| Error::format(1, "bad height"))?;
        let height = Height::new(levels).map_err(|e| Error::format(1, e.to_string()))?;
        let declared_m: u64 = m.parse().map_err(|_| Error::format(1, "bad entry count"))?;
        let declared_n: usize = n.parse().map_err(|_| Error::format(1, "bad digest count"))?;

        let mut index = EncryptedIndex::new(height);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(marker @ ("E" | "B")), Some(hex), None, None) => {
                    let key = IndexKey::from_hex(hex)
                        .ok_or_else(|| Error::format(lineno, "entry must be 128 hex chars"))?;
                    let tree = if marker == "E" {
                        TreeTag::Main
                    } else {
                        TreeTag::Delete
                    };
                    if !index.insert_key(tree, key) {
                        return Err(Error::format(lineno, "duplicate entry"));
                    }
                }
                (Some("D"), Some(bits), Some(hex), None) => {
                    let leaf = PathCode::from_token(bits)
                        .map_err(|_| Error::format(lineno, "bad leaf path"))?;
                    if !leaf.is_leaf(height) {
                        return Err(Error::format(lineno, "digest path is not a leaf"));
                    }
                    let digest = PrfOutput::from_hex(hex)
                        .ok_or_else(|| Error::format(lineno, "digest must be 64 hex chars"))?;
                    if index.digests.insert(leaf, digest).is_some() {
                        return Err(Error::format(lineno, "duplicate digest"));
                    }
                }
                _ => return Err(Error::format(lineno, format!("unrecognised record {line:?}"))),
            }
        }
        if index.entry_count != declared_m {
            return Err(Error::format(
                1,
                format!("header declares {declared_m} entries, found {}", index.entry_count),
            ));
        }
        if index.digests.len() != declared_n {
            return Err(Error::format(
                1,
                format!("header declares {declared_n} digests, found {}", index.digests.len()),
            ));
        }
        Ok(index)
    }

    pub fn persist(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
