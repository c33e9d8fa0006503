//! `key = value` configuration with `DVFS_*` environment overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{CryptoRng, RngCore};

use crate::crypto::MasterKey;
use crate::error::{Error, Result};
use crate::fuzzy::{LshFamily, LshSeed, DEFAULT_FUNCTIONS, DEFAULT_WINDOW};
use crate::index::Height;

pub const ENV_PREFIX: &str = "DVFS_";

#[derive(Clone, Debug)]
pub struct Config {
    pub master_key: MasterKey,
    pub lsh_seed: LshSeed,
    pub k: usize,
    pub height: Height,
    pub index_path: PathBuf,
    pub ledger_path: PathBuf,
    pub local_repo_path: PathBuf,
    pub doc_store_path: PathBuf,
    pub journal_path: PathBuf,
    pub debug_journal: bool,
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("expected a boolean, got {value:?}"))),
    }
}

impl Config {
    /// Fresh keys; all state files live under `dir`.
    pub fn generate<R: RngCore + CryptoRng>(dir: &Path, rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self {
            master_key: MasterKey::generate(rng),
            lsh_seed: LshSeed(seed),
            k: DEFAULT_FUNCTIONS,
            height: Height::default(),
            index_path: dir.join("index.dvfs"),
            ledger_path: dir.join("ledger.log"),
            local_repo_path: dir.join("local_repo.txt"),
            doc_store_path: dir.join("docs"),
            journal_path: dir.join("journal.txt"),
            debug_journal: false,
        }
    }

    /// Parses a config file body. Relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        Self::from_pairs(pairs, base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Loads `path` and applies overrides from the process environment.
    pub fn load_with_env(path: &Path) -> Result<Self> {
        let mut config = Self::load(path)?;
        config.apply_overrides(std::env::vars(), Path::new("."))?;
        Ok(config)
    }

    fn from_pairs(pairs: Vec<(String, String)>, base: &Path) -> Result<Self> {
        let mut master_key = None;
        let mut lsh_seed = None;
        let mut rest = Vec::new();
        for (key, value) in pairs {
            match key.as_str() {
                "master_key" => master_key = Some(MasterKey::from_hex(&value)?),
                "lsh_seed" => lsh_seed = Some(LshSeed::from_hex(&value)?),
                _ => rest.push((key, value)),
            }
        }
        let master_key = master_key.ok_or_else(|| Error::Config("master_key is required".into()))?;
        let lsh_seed = lsh_seed.ok_or_else(|| Error::Config("lsh_seed is required".into()))?;
        let mut config = Self {
            master_key,
            lsh_seed,
            ..Self::generate(base, &mut rand::rng())
        };
        for (key, value) in rest {
            config.set(&key, &value, base)?;
        }
        Ok(config)
    }

    /// Applies `DVFS_<KEY>=value` overrides; other variables are ignored.
    pub fn apply_overrides(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
        base: &Path,
    ) -> Result<()> {
        for (name, value) in vars {
            if let Some(key) = name.strip_prefix(ENV_PREFIX) {
                self.set(key, &value, base)?;
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || base.join(value);
        match key.to_ascii_lowercase().as_str() {
            "master_key" => self.master_key = MasterKey::from_hex(value)?,
            "lsh_seed" => self.lsh_seed = LshSeed::from_hex(value)?,
            "k" => {
                self.k = value
                    .parse()
                    .ok()
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| Error::Config(format!("k must be a positive integer, got {value:?}")))?
            }
            "l" | "height" => {
                let levels: u8 = value
                    .parse()
                    .map_err(|_| Error::Config(format!("L must be an integer, got {value:?}")))?;
                if !(2..=32).contains(&levels) {
                    return Err(Error::Config(format!("L must be in 2..=32, got {levels}")));
                }
                self.height = Height::new(levels)?;
            }
            "index_path" => self.index_path = path(),
            "ledger_path" => self.ledger_path = path(),
            "local_repo_path" => self.local_repo_path = path(),
            "doc_store_path" => self.doc_store_path = path(),
            "journal_path" => self.journal_path = path(),
            "debug_journal" => self.debug_journal = parse_bool(value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn family(&self) -> Result<LshFamily> {
        LshFamily::new(self.lsh_seed, self.k, DEFAULT_WINDOW)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "master_key = {}", self.master_key.to_hex());
        let _ = writeln!(out, "lsh_seed = {}", self.lsh_seed.to_hex());
        let _ = writeln!(out, "k = {}", self.k);
        let _ = writeln!(out, "L = {}", self.height.levels());
        for (key, path) in [
            ("index_path", &self.index_path),
            ("ledger_path", &self.ledger_path),
            ("local_repo_path", &self.local_repo_path),
            ("doc_store_path", &self.doc_store_path),
            ("journal_path", &self.journal_path),
        ] {
            let _ = writeln!(out, "{key} = {}", path.display());
        }
        let _ = writeln!(out, "debug_journal = {}", self.debug_journal);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sample() -> Config {
        Config::generate(Path::new("/state"), &mut ChaCha20Rng::seed_from_u64(1))
    }

    #[test]
    fn text_round_trip() {
        let c = sample();
        let back = Config::parse(&c.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(back.master_key, c.master_key);
        assert_eq!(back.lsh_seed, c.lsh_seed);
        assert_eq!(back.height, c.height);
        assert_eq!(back.ledger_path, c.ledger_path);
    }

    #[test]
    fn relative_paths_and_comments() {
        let c = sample();
        let text = format!(
            "# state\nmaster_key={}\nlsh_seed = {}\n\nledger_path = run/ledger.log\nL = 12\n",
            c.master_key.to_hex(),
            c.lsh_seed.to_hex()
        );
        let parsed = Config::parse(&text, Path::new("/cfg")).unwrap();
        assert_eq!(parsed.ledger_path, Path::new("/cfg/run/ledger.log"));
        assert_eq!(parsed.height.levels(), 12);
        assert_eq!(parsed.k, 8);
    }

    #[test]
    fn env_overrides() {
        let mut c = sample();
        c.apply_overrides(
            [
                ("DVFS_K".to_string(), "3".to_string()),
                ("DVFS_DEBUG_JOURNAL".to_string(), "true".to_string()),
                ("HOME".to_string(), "/root".to_string()),
            ],
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.k, 3);
        assert!(c.debug_journal);
    }

    #[test]
    fn invariants_enforced() {
        let mut c = sample();
        let base = Path::new(".");
        assert!(c.set("k", "0", base).is_err());
        assert!(c.set("L", "1", base).is_err());
        assert!(c.set("l", "33", base).is_err());
        assert!(c.set("master_key", "abcd", base).is_err());
        assert!(c.set("colour", "blue", base).is_err());
        assert!(Config::parse("k = 8\n", base).is_err());
    }
}
