//! Flat INI-style run configuration: `[section]` headers with `key = value`
//! lines. Every value is stored under `section.key`; command-line flags
//! override file entries before anything is read out.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::usage(format!("line {}: unterminated section", lineno + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("line {}: expected key = value, got `{line}`", lineno + 1))
            })?;
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            map.insert(full, value.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::usage(format!("missing config key `{key}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::usage(format!("config key `{key}`: `{s}` is not a number")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::usage(format!("config key `{key}`: `{s}` is not an integer")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.get(key)
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::usage(format!("config key `{key}`: `{s}` is not an integer")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.get(key)
            .map(|s| match s {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(CliError::usage(format!(
                    "config key `{key}`: `{other}` is not a boolean"
                ))),
            })
            .transpose()
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key)
            .map(|s| {
                s.split(',')
                    .map(|tok| {
                        tok.trim().parse().map_err(|_| {
                            CliError::usage(format!("config key `{key}`: `{tok}` is not a number"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Whitespace-separated rows split by `;`, for small matrices.
    pub fn get_matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>, CliError> {
        let Some(s) = self.get(key) else {
            return Ok(None);
        };
        let mut rows = Vec::new();
        for row in s.split(';') {
            let vals: Result<Vec<f64>, CliError> = row
                .split_whitespace()
                .map(|tok| {
                    tok.parse().map_err(|_| {
                        CliError::usage(format!("config key `{key}`: `{tok}` is not a number"))
                    })
                })
                .collect();
            rows.push(vals?);
        }
        Ok(Some(rows))
    }

    /// Intervals written `a:b` and separated by commas.
    pub fn get_intervals(&self, key: &str) -> Result<Option<Vec<(f64, f64)>>, CliError> {
        let Some(s) = self.get(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for tok in s.split(',') {
            let (a, b) = tok
                .trim()
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("config key `{key}`: `{tok}` is not a:b")))?;
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("config key `{key}`: bad number in `{tok}`")))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("config key `{key}`: bad number in `{tok}`")))?;
            out.push((a, b));
        }
        Ok(Some(out))
    }

    /// SHA-256 over the sorted resolved `key=value` lines; identifies the run.
    pub fn hash(&self) -> String {
        let mut canonical = String::new();
        for (k, v) in &self.map {
            let _ = writeln!(canonical, "{k}={v}");
        }
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_values() {
        let cfg = Config::parse(
            "# comment\n[basis]\nfamily = polynomial\np = 3\n\n[inference]\nalpha = 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.get("basis.family"), Some("polynomial"));
        assert_eq!(cfg.get_usize("basis.p").unwrap(), Some(3));
        assert_eq!(cfg.get_f64("inference.alpha").unwrap(), Some(0.05));
        assert!(cfg.get("missing").is_none());
    }

    #[test]
    fn overrides_change_the_hash() {
        let mut a = Config::parse("[x]\nk = 1\n").unwrap();
        let h1 = a.hash();
        a.set("x.k", 2);
        assert_ne!(h1, a.hash());
    }

    #[test]
    fn intervals_and_matrices() {
        let cfg = Config::parse("[domain]\nintervals = -1:1, 2:3\n[design]\nsigma = 1 0; 0 1\n")
            .unwrap();
        assert_eq!(
            cfg.get_intervals("domain.intervals").unwrap().unwrap(),
            vec![(-1.0, 1.0), (2.0, 3.0)]
        );
        assert_eq!(
            cfg.get_matrix("design.sigma").unwrap().unwrap(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]]
        );
    }
}
