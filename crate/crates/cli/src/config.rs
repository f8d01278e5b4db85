//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [common]
//! seed = 7
//! [smallball]
//! eps = 0.3, 0.5, 0.8
//! ```
//!
//! Keys before the first header belong to `[common]`. Unknown sections,
//! unknown keys and duplicates are errors. Command-line flags override the
//! file, which overrides the defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::keys::{section_keys, Key, COMMON, SUBCOMMANDS};

#[derive(Debug)]
pub enum ConfigError {
    Io {
        path: PathBuf,
        err: std::io::Error,
    },
    Syntax {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    Field {
        field: String,
        origin: Origin,
        msg: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, err } => write!(f, "{}: {err}", path.display()),
            ConfigError::Syntax { path, line, msg } => {
                write!(f, "{}:{line}: {msg}", path.display())
            }
            ConfigError::Field { field, origin, msg } => {
                write!(f, "{origin}: field `{field}`: {msg}")
            }
        }
    }
}

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Default,
    Flag,
    File { path: PathBuf, line: usize },
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::Flag => write!(f, "command line"),
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

fn find_key<'a>(keys: &[&'a Key], name: &str) -> Option<&'a Key> {
    keys.iter().copied().find(|k| k.name == name)
}

fn section_table(section: &str) -> Option<Vec<&'static Key>> {
    if section == "common" {
        Some(COMMON.iter().collect())
    } else if SUBCOMMANDS.contains(&section) {
        Some(section_keys(section))
    } else {
        None
    }
}

/// Parse and validate a config file's text.
pub fn parse(text: &str, path: &Path) -> Result<Vec<Entry>, ConfigError> {
    let syntax = |line: usize, msg: String| ConfigError::Syntax {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut section = "common".to_string();
    let mut entries: Vec<Entry> = vec![];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, format!("malformed section header `{s}`")))?
                .trim();
            if section_table(name).is_none() {
                return Err(syntax(
                    line,
                    format!(
                        "unknown section [{name}] (expected common or one of {})",
                        SUBCOMMANDS.join(", ")
                    ),
                ));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected `key = value`, found `{s}`")))?;
        let (k, v) = (k.trim(), v.trim());
        let table = section_table(&section).unwrap_or_default();
        if find_key(&table, k).is_none() {
            let valid: Vec<_> = table.iter().map(|k| k.name).collect();
            return Err(syntax(
                line,
                format!(
                    "unknown key `{k}` in section [{section}] (valid: {})",
                    valid.join(", ")
                ),
            ));
        }
        if let Some(prev) = entries.iter().find(|e| e.section == section && e.key == k) {
            return Err(syntax(
                line,
                format!("duplicate key `{k}` (first set on line {})", prev.line),
            ));
        }
        entries.push(Entry {
            section: section.clone(),
            key: k.to_string(),
            value: v.to_string(),
            line,
        });
    }
    Ok(entries)
}

pub fn load(path: &Path) -> Result<Vec<Entry>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|err| ConfigError::Io {
        path: path.to_path_buf(),
        err,
    })?;
    parse(&text, path)
}

/// The resolved parameter set of one subcommand run.
#[derive(Debug, Clone)]
pub struct Params {
    pub subcommand: String,
    values: BTreeMap<&'static str, (String, Origin)>,
}

/// Keys that never change the results and are left out of the hash.
const NOT_HASHED: [&str; 3] = ["workers", "out", "name"];

impl Params {
    /// Merge defaults, the file (common and the subcommand's section) and flags.
    pub fn resolve(
        subcommand: &str,
        file: &[Entry],
        file_path: Option<&Path>,
        flags: &[(String, String)],
    ) -> Self {
        let mut values = BTreeMap::new();
        let keys: Vec<&'static Key> = COMMON.iter().chain(section_keys(subcommand)).collect();
        for k in &keys {
            if let Some(d) = k.default {
                values.insert(k.name, (d.to_string(), Origin::Default));
            }
        }
        for e in file {
            if e.section != "common" && e.section != subcommand {
                continue;
            }
            if let Some(k) = find_key(&keys, &e.key) {
                let origin = Origin::File {
                    path: file_path.map(Path::to_path_buf).unwrap_or_default(),
                    line: e.line,
                };
                values.insert(k.name, (e.value.clone(), origin));
            }
        }
        for (name, v) in flags {
            if let Some(k) = find_key(&keys, name) {
                values.insert(k.name, (v.clone(), Origin::Flag));
            }
        }
        Self {
            subcommand: subcommand.to_string(),
            values,
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn origin(&self, key: &str) -> Origin {
        self.values
            .get(key)
            .map(|(_, o)| o.clone())
            .unwrap_or(Origin::Default)
    }

    pub fn error(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Field {
            field: key.to_string(),
            origin: self.origin(key),
            msg: msg.into(),
        }
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                self.error(key, format!("cannot parse `{v}` as {}", short_type::<T>()))
            }),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.opt(key)?.ok_or_else(|| self.error(key, "required"))
    }

    /// Counts, also written as `1e6`.
    pub fn count(&self, key: &str) -> Result<u64, ConfigError> {
        let v: f64 = self.get(key)?;
        if v < 0.0 || v.fract() != 0.0 || v > 9.0e15 {
            return Err(self.error(key, format!("expected a nonnegative integer, found {v}")));
        }
        Ok(v as u64)
    }

    pub fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key).unwrap_or("false") {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            v => Err(self.error(key, format!("expected true or false, found `{v}`"))),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|_| {
                    self.error(key, format!("cannot parse `{s}` as {}", short_type::<T>()))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Canonical `key = value` listing of everything that shapes the results.
    pub fn canonical(&self) -> String {
        let mut s = format!("[{}]\n", self.subcommand);
        for (k, (v, _)) in &self.values {
            if !NOT_HASHED.contains(k) {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }

    /// SHA-256 of [`Params::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn short_type<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    name.rsplit("::").next().unwrap_or(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("x.cfg")
    }

    #[test]
    fn parses_sections_and_comments() {
        let e = parse(
            "seed = 3\n# c\n[smallball]\neps = 0.5, 0.8\n\n[common]\nworkers=2\n",
            p(),
        )
        .unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(
            (e[0].section.as_str(), e[0].key.as_str()),
            ("common", "seed")
        );
        assert_eq!(
            (e[1].section.as_str(), e[1].value.as_str(), e[1].line),
            ("smallball", "0.5, 0.8", 4)
        );
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = parse("[urn]\np_w = 0.5\ncolour = red\n", p())
            .unwrap_err()
            .to_string();
        assert!(
            err.starts_with("x.cfg:3: unknown key `colour` in section [urn]"),
            "{err}"
        );
        let err = parse("[nope]\n", p()).unwrap_err().to_string();
        assert!(err.contains("unknown section [nope]"));
        let err = parse("seed = 1\nseed = 2\n", p()).unwrap_err().to_string();
        assert!(err.contains("duplicate key `seed` (first set on line 1)"));
        assert!(parse("just words\n", p()).is_err());
    }

    #[test]
    fn flags_override_file_and_defaults() {
        let e = parse("seed = 3\n[urn]\np_w = 0.6\n[lil]\nreplicas = 9\n", p()).unwrap();
        let params = Params::resolve("urn", &e, Some(p()), &[("p_w".into(), "0.7".into())]);
        assert_eq!(params.get::<u64>("seed").unwrap(), 3);
        assert_eq!(params.get::<f64>("p_w").unwrap(), 0.7);
        assert_eq!(params.count("replicas").unwrap(), 100);
        let err = params.get::<f64>("p_b").unwrap_err().to_string();
        assert_eq!(err, "default: field `p_b`: required");
        let bad = Params::resolve("urn", &e, Some(p()), &[]);
        let e2 = parse("[urn]\nw0 = two\n", p()).unwrap();
        let bad2 = Params::resolve("urn", &e2, Some(p()), &[]);
        assert_eq!(bad.get::<f64>("p_w").unwrap(), 0.6);
        assert_eq!(
            bad2.get::<f64>("w0").unwrap_err().to_string(),
            "x.cfg:2: field `w0`: cannot parse `two` as f64"
        );
    }

    #[test]
    fn hash_ignores_workers_and_output_location() {
        let a = Params::resolve("urn", &[], None, &[("workers".into(), "1".into())]);
        let b = Params::resolve(
            "urn",
            &[],
            None,
            &[
                ("workers".into(), "4".into()),
                ("out".into(), "/tmp".into()),
            ],
        );
        let c = Params::resolve("urn", &[], None, &[("seed".into(), "5".into())]);
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn counts_accept_scientific_notation() {
        let a = Params::resolve("smallball", &[], None, &[("paths".into(), "1e5".into())]);
        assert_eq!(a.count("paths").unwrap(), 100_000);
        let b = Params::resolve("smallball", &[], None, &[("paths".into(), "2.5".into())]);
        assert!(b.count("paths").is_err());
    }
}
