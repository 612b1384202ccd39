//! Line-oriented `key = value` files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value   # trailing comment
//! ```
//!
//! Keys are case-sensitive and may not repeat. Blank lines are ignored.
//! Values are taken verbatim after trimming, so they cannot contain `#`.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::PipelineError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl FromStr for KeyValues {
    type Err = PipelineError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::Config {
                    line: line_no,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(PipelineError::Config {
                    line: line_no,
                    msg: format!("invalid key {key:?}"),
                });
            }
            if let Some((first, _)) = entries.get(key) {
                return Err(PipelineError::Config {
                    line: line_no,
                    msg: format!("duplicate key {key:?} (first set on line {first})"),
                });
            }
            entries.insert(key.to_string(), (line_no, value.trim().to_string()));
        }
        Ok(Self { entries })
    }
}

impl KeyValues {
    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Parses `key` if present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>, PipelineError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| PipelineError::Config {
                line: *line,
                msg: format!("{key}: cannot parse {v:?}: {e}"),
            }),
        }
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, PipelineError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Fails on any key outside `known`, so typos do not pass silently.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<(), PipelineError> {
        for (key, (line, _)) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(PipelineError::Config {
                    line: *line,
                    msg: format!("unknown key {key:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let kv: KeyValues = "# header\n\ngamma = 2\nname=lis  # trailing\n".parse().unwrap();
        assert_eq!(kv.get::<f64>("gamma").unwrap(), Some(2.0));
        assert_eq!(kv.get_str("name"), Some("lis"));
        assert_eq!(kv.get::<f64>("missing").unwrap(), None);
        assert_eq!(kv.get_or("missing", 7usize).unwrap(), 7);
    }

    #[test]
    fn rejects_bad_lines() {
        let err = "a = 1\nnonsense\n".parse::<KeyValues>().unwrap_err();
        assert!(matches!(err, PipelineError::Config { line: 2, .. }));
        let err = "a = 1\na = 2\n".parse::<KeyValues>().unwrap_err();
        assert!(matches!(err, PipelineError::Config { line: 2, .. }));
        let kv: KeyValues = "a = x\n".parse().unwrap();
        assert!(matches!(kv.get::<f64>("a"), Err(PipelineError::Config { line: 1, .. })));
        assert!(kv.reject_unknown(&["b"]).is_err());
        assert!(kv.reject_unknown(&["a"]).is_ok());
    }
}
