//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Relative paths are resolved against the directory holding the file, which
//! is also the default output directory.

use crate::error::{ingestion, validation, CliError};
use rpbart::sampler::{Hyperparameters, Schedule};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

type Result<T> = std::result::Result<T, CliError>;

/// Keys that map onto [`Hyperparameters`].
pub const HYPER_KEYS: &[&str] = &[
    "m", "k", "alpha", "beta", "alpha1", "alpha2", "q", "nu", "lambda", "sigma2_hat", "n_cut", "burn_in", "draws",
    "thin", "adaptation",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    base: PathBuf,
    source: String,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ingestion(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base, &path.display().to_string())
    }

    pub fn parse(text: &str, base: PathBuf, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| validation(format!("{source}:{line}: expected `key = value`, got {content:?}")))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(validation(format!("{source}:{line}: invalid key {key:?}")));
            }
            let entry = Entry { value: value.trim().to_string(), line };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(validation(format!(
                    "{source}:{line}: key {key:?} repeats the setting on line {}",
                    prev.line
                )));
            }
        }
        Ok(Config { entries, base, source: source.to_string() })
    }

    /// Reject keys outside `allowed`.
    pub fn check_keys(&self, command: &str, allowed: &[&[&str]]) -> Result<()> {
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !allowed.iter().any(|set| set.contains(&k.as_str())))
            .map(|(k, e)| format!("{k} (line {})", e.line))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(validation(format!("{}: unknown key(s) for `{command}`: {}", self.source, unknown.join(", "))))
        }
    }

    fn location(&self, key: &str) -> String {
        match self.entries.get(key) {
            Some(e) => format!("{}:{}", self.source, e.line),
            None => self.source.clone(),
        }
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| validation(format!("{}: missing required key {key:?}", self.source)))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| validation(format!("{}: key {key}: cannot parse {v:?}: {e}", self.location(key)))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.required(key)?;
        Ok(self.parse_opt(key)?.expect("key is present"))
    }

    /// Comma-separated list of names.
    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }

    pub fn number_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(items) = self.list(key) else {
            return Ok(None);
        };
        items
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| validation(format!("{}: key {key}: cannot parse {s:?}: {e}", self.location(key))))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Directory holding the config file.
    pub fn base_dir(&self) -> PathBuf {
        if self.base.as_os_str().is_empty() {
            PathBuf::from(".")
        } else {
            self.base.clone()
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        Ok(self.resolve(self.required(key)?))
    }

    pub fn path_list(&self, key: &str) -> Option<Vec<PathBuf>> {
        self.list(key).map(|v| v.iter().map(|s| self.resolve(s)).collect())
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// SHA-256 over the sorted settings and the effective seed.
    pub fn hash(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        for (k, e) in &self.entries {
            if k != "seed" {
                h.update(format!("{k}={}\n", e.value));
            }
        }
        h.update(format!("seed={seed}\n"));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Defaults overridden by any hyperparameter keys present.
    /// `adaptation` defaults to the burn-in length.
    pub fn hyperparameters(&self) -> Result<Hyperparameters> {
        let d = Hyperparameters::default();
        let burn_in = self.parse_or("burn_in", d.schedule.burn_in)?;
        let hyper = Hyperparameters {
            m: self.parse_or("m", d.m)?,
            k: self.parse_or("k", d.k)?,
            alpha: self.parse_or("alpha", d.alpha)?,
            beta: self.parse_or("beta", d.beta)?,
            alpha1: self.parse_or("alpha1", d.alpha1)?,
            alpha2: self.parse_or("alpha2", d.alpha2)?,
            q: self.parse_or("q", d.q)?,
            nu: self.parse_or("nu", d.nu)?,
            lambda: self.parse_opt("lambda")?,
            sigma2_hat: self.parse_opt("sigma2_hat")?,
            n_cut: self.parse_or("n_cut", d.n_cut)?,
            schedule: Schedule {
                burn_in,
                draws: self.parse_or("draws", d.schedule.draws)?,
                thin: self.parse_or("thin", d.schedule.thin)?,
                adaptation: self.parse_or("adaptation", burn_in)?,
            },
        };
        hyper.validate().map_err(|e| validation(format!("{}: {e}", self.source)))?;
        Ok(hyper)
    }
}
