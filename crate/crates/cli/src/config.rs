//! Flat `key = value` config files with `[section]` headers. Keys are
//! addressed as "section.key"; lists are comma separated. `#` starts a
//! comment anywhere on a line.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    /// Directory of the config file; relative paths resolve against it.
    pub base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RawConfig> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section header", ln + 1))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", ln + 1))?;
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            if values.insert(full.clone(), value.trim().to_string()).is_some() {
                bail!("line {}: duplicate key `{full}`", ln + 1);
            }
        }
        Ok(RawConfig {
            values,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| anyhow!("missing config key `{key}`"))
    }

    pub fn get_or(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    /// Comma-separated list of T. Empty or missing value gives an empty list.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(s) = self.get(key) else {
            return Ok(Vec::new());
        };
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse()
                    .map_err(|e| anyhow!("config key `{key}`: bad entry `{t}`: {e}"))
            })
            .collect()
    }

    /// Seed points formatted `x y, x y, ...`.
    pub fn seeds(&self, key: &str) -> Result<Vec<[f64; 2]>> {
        let Some(s) = self.get(key) else {
            return Ok(Vec::new());
        };
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                let mut it = t.split_whitespace();
                let x: f64 = it
                    .next()
                    .ok_or_else(|| anyhow!("config key `{key}`: empty seed"))?
                    .parse()
                    .map_err(|e| anyhow!("config key `{key}`: bad seed `{t}`: {e}"))?;
                let y: f64 = it
                    .next()
                    .ok_or_else(|| anyhow!("config key `{key}`: seed `{t}` needs two coordinates"))?
                    .parse()
                    .map_err(|e| anyhow!("config key `{key}`: bad seed `{t}`: {e}"))?;
                Ok([x, y])
            })
            .collect()
    }

    pub fn resolve_path(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
