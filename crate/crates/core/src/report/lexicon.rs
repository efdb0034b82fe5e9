use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_CUES: &str = include_str!("../../data/negation_cues.txt");

/// Lowercases, turns every non-alphanumeric character into a space and
/// collapses runs of whitespace.
pub fn normalize_text(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .flat_map(char::to_lowercase)
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Fixed list of negation cues matched on whole words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationLexicon {
    cues: Vec<String>,
}

impl Default for NegationLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_CUES)
    }
}

impl NegationLexicon {
    /// One cue per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let mut cues: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(normalize_text)
            .filter(|c| !c.is_empty())
            .collect();
        cues.sort();
        cues.dedup();
        NegationLexicon { cues }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn cues(&self) -> &[String] {
        &self.cues
    }

    pub fn matches(&self, text: &str) -> bool {
        let padded = format!(" {} ", normalize_text(text));
        self.cues.iter().any(|cue| padded.contains(&format!(" {cue} ")))
    }
}
