//! Key=value configuration files.
//!
//! ```text
//! # comment
//! n = 100
//! gamma = 0.5            # one value for every node
//! nu = 1, 2.5, 4         # or one value per node
//! ```
//!
//! Keys are case-sensitive and may appear once. Values are a scalar, a
//! comma-separated list or a bare word. Typed getters report the line of a
//! malformed value.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::model::NetworkConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    line: usize,
    raw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

/// Keys read by [`Config::network_config`].
pub const NETWORK_KEYS: &[&str] = &[
    "n",
    "m",
    "gamma",
    "sigma_a2",
    "sigma",
    "nu_h2",
    "nu",
    "sigma_v2",
    "energy_cap",
    "total_energy",
];

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected key = value, found {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config { line, message: format!("invalid key {key:?}") });
            }
            if value.is_empty() {
                return Err(Error::Config { line, message: format!("empty value for {key}") });
            }
            let entry = Entry { line, raw: value.to_string() };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key {key} (first set on line {})", prev.line),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets or replaces a value, as from a command-line override.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), Entry { line: 0, raw: value.to_string() });
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fails on the first key not in `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, e)) => Err(Error::Config { line: e.line, message: format!("unknown key {k}") }),
            None => Ok(()),
        }
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.raw.as_str())
    }

    fn parse_one<V: FromStr>(key: &str, e: &Entry, s: &str) -> Result<V>
    where
        V::Err: std::fmt::Display,
    {
        s.trim().parse().map_err(|err| Error::Config {
            line: e.line,
            message: format!("{key}: cannot parse {s:?}: {err}"),
        })
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>>
    where
        V::Err: std::fmt::Display,
    {
        self.entries.get(key).map(|e| Self::parse_one(key, e, &e.raw)).transpose()
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V>
    where
        V::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<V: FromStr>(&self, key: &str) -> Result<V>
    where
        V::Err: std::fmt::Display,
    {
        self.get(key)?.ok_or_else(|| Error::Config {
            line: 0,
            message: format!("missing required key {key}"),
        })
    }

    pub fn list<V: FromStr>(&self, key: &str) -> Result<Option<Vec<V>>>
    where
        V::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|e| e.raw.split(',').map(|s| Self::parse_one(key, e, s)).collect())
            .transpose()
    }

    /// A list of length `n`, or a scalar repeated `n` times.
    pub fn per_node(&self, key: &str, n: usize) -> Result<Option<Vec<f64>>> {
        let Some(values) = self.list::<f64>(key)? else {
            return Ok(None);
        };
        match values.len() {
            1 => Ok(Some(vec![values[0]; n])),
            len if len == n => Ok(Some(values)),
            len => Err(Error::Config {
                line: self.entries[key].line,
                message: format!("{key}: expected 1 or {n} values, found {len}"),
            }),
        }
    }

    /// Builds the network from `n`, `m` and the per-node keys.
    ///
    /// Defaults: `gamma = 1`, `sigma_a2 = 1`, `nu_h2 = 1`, `sigma_v2 = 0`.
    /// `sigma` and `nu` give per-node standard deviations and Rayleigh
    /// scales directly and exclude `sigma_a2` and `nu_h2`.
    pub fn network_config(&self) -> Result<NetworkConfig<f64>> {
        let n: usize = self.require("n")?;
        let m: usize = self.require("m")?;
        let gamma = self.per_node("gamma", n)?.unwrap_or_else(|| vec![1.0; n]);
        let sigma = self.scale_pair("sigma", "sigma_a2", n)?;
        let nu = self.scale_pair("nu", "nu_h2", n)?;
        let sigma_v2 = self.get_or("sigma_v2", 0.0)?;
        let mut cfg = NetworkConfig::new(m, gamma, sigma, nu, sigma_v2)?;
        if let Some(caps) = self.per_node("energy_cap", n)? {
            cfg = cfg.with_energy_cap(caps)?;
        }
        if let Some(total) = self.get("total_energy")? {
            cfg = cfg.with_total_energy(total)?;
        }
        Ok(cfg)
    }

    fn scale_pair(&self, direct: &str, squared: &str, n: usize) -> Result<Vec<f64>> {
        match (self.per_node(direct, n)?, self.get::<f64>(squared)?) {
            (Some(_), Some(_)) => Err(Error::Config {
                line: self.entries[squared].line,
                message: format!("{direct} and {squared} are mutually exclusive"),
            }),
            (Some(v), None) => Ok(v),
            (None, Some(v2)) => Ok(vec![v2.sqrt(); n]),
            (None, None) => Ok(vec![1.0; n]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_lists_and_comments() {
        let c = Config::parse("# head\n n = 4 \nnu = 1, 2,3,4 # tail\n\nmode = awgn\n").unwrap();
        assert_eq!(c.get::<usize>("n").unwrap(), Some(4));
        assert_eq!(c.list::<f64>("nu").unwrap().unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.str("mode"), Some("awgn"));
        assert_eq!(c.get::<f64>("absent").unwrap(), None);
        assert_eq!(c.keys().collect::<Vec<_>>(), vec!["mode", "n", "nu"]);
    }

    #[test]
    fn reports_lines() {
        let err = Config::parse("n = 4\nbogus\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = Config::parse("n = 4\nn = 5\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let c = Config::parse("\nn = four\n").unwrap();
        assert!(matches!(c.get::<usize>("n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(c.check_known(&["m"]), Err(Error::Config { line: 2, .. })));
        assert!(Config::parse("n =\n").is_err());
    }

    #[test]
    fn builds_network() {
        let c = Config::parse(
            "n = 3\nm = 5\ngamma = 0.5\nsigma_a2 = 4\nnu = 1,2,3\nsigma_v2 = 0.1\nenergy_cap = 2\n",
        )
        .unwrap();
        let cfg = c.network_config().unwrap();
        assert_eq!(cfg.n(), 3);
        assert_eq!(cfg.m(), 5);
        assert_eq!(cfg.gamma(), &[0.5; 3]);
        assert_eq!(cfg.sigma(), &[2.0; 3]);
        assert_eq!(cfg.nu(), &[1.0, 2.0, 3.0]);
        assert_eq!(cfg.energy_cap(), Some(&[2.0; 3][..]));
        assert_eq!(cfg.sigma_v2(), 0.1);
    }

    #[test]
    fn network_errors() {
        let c = Config::parse("n = 3\nm = 5\nnu = 1,2\n").unwrap();
        assert!(matches!(c.network_config(), Err(Error::Config { line: 3, .. })));
        let c = Config::parse("n = 3\nm = 5\nnu = 1\nnu_h2 = 1\n").unwrap();
        assert!(c.network_config().is_err());
        let c = Config::parse("m = 5\n").unwrap();
        assert!(c.network_config().is_err());
        // energy cap violated: gamma sigma^2 = 4 > 2
        let c = Config::parse("n = 2\nm = 2\nsigma_a2 = 4\nenergy_cap = 2\n").unwrap();
        assert!(c.network_config().is_err());
    }

    #[test]
    fn overrides() {
        let mut c = Config::parse("trials = 10\n").unwrap();
        c.set("trials", 3);
        assert_eq!(c.require::<usize>("trials").unwrap(), 3);
        assert!(c.contains("trials"));
    }
}
