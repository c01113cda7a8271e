use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Reserved silence token, always id 0.
pub const SIL: &str = "SIL";

/// The shipped 34-token inventory in `phonemes.txt` format.
pub const DEFAULT_INVENTORY: &str = include_str!("../../data/phonemes.txt");

const EXPECTED_TOKENS: usize = 34;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhonemeInventory {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl PhonemeInventory {
    /// Parses `phonemes.txt` content: one token per line, `#` comments and
    /// blank lines ignored, `SIL` prepended when absent. Duplicates are a
    /// parse error; an unusual token count only logs a warning.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut tokens = vec![SIL.to_string()];
        let mut index = HashMap::from([(SIL.to_string(), 0)]);
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            if line.split_whitespace().count() != 1 {
                return Err(parse_err(
                    origin,
                    i + 1,
                    format!("expected one token, got {line:?}"),
                ));
            }
            if line == SIL {
                if tokens.len() > 1 {
                    return Err(parse_err(origin, i + 1, "SIL must come first".into()));
                }
                continue;
            }
            if index.contains_key(line) {
                return Err(parse_err(
                    origin,
                    i + 1,
                    format!("duplicate token {line:?}"),
                ));
            }
            index.insert(line.to_string(), tokens.len());
            tokens.push(line.to_string());
        }
        if tokens.len() - 1 != EXPECTED_TOKENS {
            log::warn!(
                "{origin}: inventory has {} tokens besides SIL (expected {EXPECTED_TOKENS})",
                tokens.len() - 1
            );
        }
        Ok(Self { tokens, index })
    }

    /// Number of ids including SIL.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// True when only SIL is present.
    pub fn is_empty(&self) -> bool {
        self.tokens.len() == 1
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl Default for PhonemeInventory {
    fn default() -> Self {
        Self::parse(DEFAULT_INVENTORY, "phonemes.txt").expect("shipped inventory is valid")
    }
}

pub fn load_inventory(path: &Path) -> Result<PhonemeInventory> {
    let text = std::fs::read_to_string(path)?;
    PhonemeInventory::parse(&text, &path.display().to_string())
}

pub(super) fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

pub(super) fn parse_err(origin: &str, line: usize, msg: String) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_34_tokens_plus_sil() {
        let inv = PhonemeInventory::default();
        assert_eq!(inv.len(), 35);
        assert_eq!(inv.token(0), Some(SIL));
        assert_eq!(inv.id("a"), Some(1));
    }

    #[test]
    fn empty_file_is_sil_only() {
        let inv = PhonemeInventory::parse("# nothing\n\n", "t").unwrap();
        assert_eq!(inv.len(), 1);
        assert!(inv.is_empty());
    }

    #[test]
    fn duplicate_names_line() {
        let err = PhonemeInventory::parse("a\nka\n# c\nka\n", "t").unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 4);
                assert!(msg.contains("ka"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn explicit_sil_first_is_accepted() {
        let inv = PhonemeInventory::parse("SIL\na\n", "t").unwrap();
        assert_eq!(inv.len(), 2);
    }
}
