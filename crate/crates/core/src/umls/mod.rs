//! UMLS RRF ingestion.
//!
//! The three release tables used here are pipe-delimited with the standard
//! column layout (MRCONSO 18 columns, MRREL 16, MRSTY 6) and a trailing `|` on
//! every row. Rows are filtered to a configured vocabulary set and to English
//! strings; malformed rows are skipped and counted rather than aborting the run.

mod catalog;
mod rrf;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::types::Cui;

pub use catalog::{build_catalog, ConceptCatalog, IngestSummary, CATALOG_FORMAT, CATALOG_VERSION};
pub use rrf::{
    parse_mrconso, parse_mrconso_reader, parse_mrrel, parse_mrrel_reader, parse_mrsty,
    parse_mrsty_reader, ParseStats, Parsed, MRCONSO_COLUMNS, MRREL_COLUMNS, MRSTY_COLUMNS,
};

/// Default source vocabulary.
pub const DEFAULT_VOCABULARY: &str = "SNOMEDCT_US";

/// Default REL allow-list: hierarchy (PAR/CHD), broader/narrower (RB/RN), synonymy (SY).
pub const DEFAULT_RELATIONS: [&str; 5] = ["PAR", "CHD", "RB", "RN", "SY"];

pub fn default_vocabularies() -> BTreeSet<String> {
    [DEFAULT_VOCABULARY.to_string()].into()
}

pub fn default_relations() -> BTreeSet<String> {
    DEFAULT_RELATIONS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptRecord {
    pub cui: Cui,
    pub preferred_name: String,
    /// Distinct surface strings, sorted.
    pub strings: Vec<String>,
    pub source_vocabularies: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SemanticTypeAssignment {
    pub cui: Cui,
    pub tui: String,
    pub semantic_type: String,
}

/// One MRREL row. UMLS reads it as "`cui2` is `rel` of `cui1`", so
/// `(c1, c2, PAR)` makes `c2` a parent of `c1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationRecord {
    pub cui1: Cui,
    pub cui2: Cui,
    pub rel: String,
}

impl RelationRecord {
    /// `(child, parent)` when this row encodes a PAR/CHD hierarchy step.
    pub fn parent_link(&self) -> Option<(Cui, Cui)> {
        match self.rel.as_str() {
            "PAR" => Some((self.cui1, self.cui2)),
            "CHD" => Some((self.cui2, self.cui1)),
            _ => None,
        }
    }

    fn unordered_key(&self) -> (Cui, Cui, &str) {
        let (a, b) = if self.cui1 <= self.cui2 {
            (self.cui1, self.cui2)
        } else {
            (self.cui2, self.cui1)
        };
        (a, b, self.rel.as_str())
    }
}

pub(crate) fn is_valid_tui(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 4 && b[0] == b'T' && b[1..].iter().all(u8::is_ascii_digit)
}
