//! Minimal `key = value` configuration documents.
//!
//! One assignment per line, `#` starts a comment, keys are
//! `snake_case`. This one format backs the physics configuration, the
//! golden-rule scenario files and the study configuration.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvDoc {
    pairs: BTreeMap<String, String>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!(
                "line {}: expected `key = value`, got `{}`",
                lineno + 1,
                line
            )))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: empty key or value in `{}`",
                    lineno + 1,
                    line
                )));
            }
            pairs.insert(key.to_string(), value.to_string());
        }
        Ok(Self { pairs })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.pairs.contains_key(key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.pairs.get(key) {
            None => Ok(None),
            Some(s) => s.parse::<f64>().map(Some).map_err(|_| Error::InvalidValue {
                key: key.to_string(),
                reason: format!("`{s}` is not a number"),
            }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.pairs.get(key) {
            None => Ok(None),
            Some(s) => s.parse::<u64>().map(Some).map_err(|_| Error::InvalidValue {
                key: key.to_string(),
                reason: format!("`{s}` is not a non-negative integer"),
            }),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.pairs.get(key) {
            None => Ok(None),
            Some(s) => match s.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                other => Err(Error::InvalidValue {
                    key: key.to_string(),
                    reason: format!("`{other}` is not a boolean"),
                }),
            },
        }
    }

    /// Required f64: absent keys are an error naming the key.
    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.get_f64(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let doc = KvDoc::parse("# header\n\n  a = 1.5 # trailing\nname = flat\n").unwrap();
        assert_eq!(doc.get_f64("a").unwrap(), Some(1.5));
        assert_eq!(doc.get_str("name"), Some("flat"));
        assert!(!doc.contains("missing"));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(KvDoc::parse("just_a_token\n").is_err());
        assert!(KvDoc::parse("x =\n").is_err());
    }

    #[test]
    fn typed_getters_name_the_key() {
        let doc = KvDoc::parse("a = not_a_number").unwrap();
        match doc.get_f64("a") {
            Err(Error::InvalidValue { key, .. }) => assert_eq!(key, "a"),
            other => panic!("expected InvalidValue, got {other:?}"),
        }
        match doc.require_f64("b") {
            Err(Error::MissingKey(key)) => assert_eq!(key, "b"),
            other => panic!("expected MissingKey, got {other:?}"),
        }
    }
}
