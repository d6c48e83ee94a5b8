//! Flat `key = value` configuration files with `[section]` headers.
//! `#` starts a comment. Keys before any header live in the unnamed
//! section `""`. Parse errors carry the file path and line number.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    path: String,
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
}

impl Config {
    pub fn parse(text: &str, path: &str) -> Result<Config> {
        let mut sections: BTreeMap<String, BTreeMap<String, (String, usize)>> = BTreeMap::new();
        let mut current = String::new();
        sections.entry(current.clone()).or_default();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(path, lineno, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::parse(path, lineno, "empty section name"));
                }
                current = name.to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, lineno, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(path, lineno, "empty key"));
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.to_string(), (value.trim().to_string(), lineno));
        }
        Ok(Config {
            path: path.to_string(),
            sections,
        })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))?;
        Config::parse(&text, &path.display().to_string())
    }

    pub fn sections(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str).filter(|s| !s.is_empty())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|(v, _)| v.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| {
            Error::Config(format!(
                "{}: missing key `{key}` in section [{section}]",
                self.path
            ))
        })
    }

    fn typed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            None => Ok(None),
            Some((v, lineno)) => v.parse::<T>().map(Some).map_err(|_| {
                Error::parse(
                    &self.path,
                    *lineno,
                    format!("bad value {v:?} for key `{key}`"),
                )
            }),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str) -> Result<Option<usize>> {
        self.typed(section, key)
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        self.typed(section, key)
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.typed(section, key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_values() {
        let text = "seed = 7\n[run]\nepisode_length = 34 # steps\nk = 3\n";
        let c = Config::parse(text, "c.ini").unwrap();
        assert_eq!(c.get("", "seed"), Some("7"));
        assert_eq!(c.get_usize("run", "episode_length").unwrap(), Some(34));
        assert_eq!(c.get_usize("run", "k").unwrap(), Some(3));
        assert_eq!(c.get("run", "missing"), None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("[run\n", "c.ini").unwrap_err();
        assert!(err.to_string().contains("c.ini:1"));
        let err = Config::parse("[run]\nk = x\n", "c.ini")
            .unwrap()
            .get_usize("run", "k")
            .unwrap_err();
        assert!(err.to_string().contains("c.ini:2"), "{err}");
    }
}
