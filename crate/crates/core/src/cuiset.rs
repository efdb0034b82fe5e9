//! The per-report concept set, the unit every comparison works on.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Assertion, Cui, EntityKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCui {
    pub cui: Cui,
    pub score: f64,
}

/// Per-concept metadata used for preference weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMeta {
    pub kind: EntityKind,
    #[serde(default)]
    pub semantic_types: BTreeSet<String>,
    pub best_score: f64,
}

/// The two linking heads of one mention, kept for the labeler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionLink {
    pub mention_ref: usize,
    pub assertion: Assertion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isolated: Option<ScoredCui>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ScoredCui>,
}

/// A report as a set of `(cui, assertion)` elements.
///
/// A CUI appears at most once. Inserting a CUI that is already present keeps
/// the dominant assertion (Present > Uncertain > Absent).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "CuiSetRepr", into = "CuiSetRepr")]
pub struct CuiSet {
    pub report_id: String,
    elements: BTreeMap<Cui, Assertion>,
    concept_meta: BTreeMap<Cui, ConceptMeta>,
    mentions: Vec<MentionLink>,
}

impl CuiSet {
    pub fn new(report_id: impl Into<String>) -> Self {
        CuiSet {
            report_id: report_id.into(),
            ..Default::default()
        }
    }

    pub fn from_elements(
        report_id: impl Into<String>,
        elements: impl IntoIterator<Item = (Cui, Assertion)>,
    ) -> Self {
        let mut set = CuiSet::new(report_id);
        for (cui, assertion) in elements {
            set.insert(cui, assertion);
        }
        set
    }

    /// Inserts an element, resolving collisions by assertion dominance.
    /// Returns the assertion stored afterwards.
    pub fn insert(&mut self, cui: Cui, assertion: Assertion) -> Assertion {
        let slot = self.elements.entry(cui).or_insert(assertion);
        *slot = slot.dominant(assertion);
        *slot
    }

    pub fn set_meta(&mut self, cui: Cui, meta: ConceptMeta) {
        self.concept_meta.insert(cui, meta);
    }

    pub fn push_mention(&mut self, link: MentionLink) {
        self.mentions.push(link);
    }

    pub fn assertion(&self, cui: Cui) -> Option<Assertion> {
        self.elements.get(&cui).copied()
    }

    pub fn contains(&self, cui: Cui) -> bool {
        self.elements.contains_key(&cui)
    }

    pub fn meta(&self, cui: Cui) -> Option<&ConceptMeta> {
        self.concept_meta.get(&cui)
    }

    pub fn elements(&self) -> &BTreeMap<Cui, Assertion> {
        &self.elements
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cui, Assertion)> + '_ {
        self.elements.iter().map(|(c, a)| (*c, *a))
    }

    pub fn cuis(&self) -> impl Iterator<Item = Cui> + '_ {
        self.elements.keys().copied()
    }

    pub fn concept_meta(&self) -> &BTreeMap<Cui, ConceptMeta> {
        &self.concept_meta
    }

    pub fn mentions(&self) -> &[MentionLink] {
        &self.mentions
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CuiSetRepr {
    report_id: String,
    elements: Vec<ElementRepr>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    concept_meta: BTreeMap<Cui, ConceptMeta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    mentions: Vec<MentionLink>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementRepr {
    cui: Cui,
    assertion: Assertion,
}

impl From<CuiSetRepr> for CuiSet {
    fn from(repr: CuiSetRepr) -> Self {
        let mut set = CuiSet::from_elements(
            repr.report_id,
            repr.elements.into_iter().map(|e| (e.cui, e.assertion)),
        );
        set.concept_meta = repr.concept_meta;
        set.mentions = repr.mentions;
        set
    }
}

impl From<CuiSet> for CuiSetRepr {
    fn from(set: CuiSet) -> Self {
        CuiSetRepr {
            report_id: set.report_id,
            elements: set
                .elements
                .into_iter()
                .map(|(cui, assertion)| ElementRepr { cui, assertion })
                .collect(),
            concept_meta: set.concept_meta,
            mentions: set.mentions,
        }
    }
}

/// Outcome of reading a CuiSet JSON-lines file.
#[derive(Debug, Default)]
pub struct JsonlLoad {
    pub sets: Vec<CuiSet>,
    pub malformed: usize,
}

/// Reads one CuiSet per line. Blank lines are ignored. In strict mode the
/// first malformed line is an error; otherwise malformed lines are counted.
pub fn read_jsonl(path: &Path, strict: bool) -> Result<JsonlLoad> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = JsonlLoad::default();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CuiSet>(&line) {
            Ok(set) => out.sets.push(set),
            Err(e) if strict => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: ix + 1,
                    message: e.to_string(),
                })
            }
            Err(e) => {
                log::warn!("{}:{}: skipping malformed CuiSet: {e}", path.display(), ix + 1);
                out.malformed += 1;
            }
        }
    }
    Ok(out)
}

pub fn write_jsonl<'a, W: Write>(
    mut writer: W,
    sets: impl IntoIterator<Item = &'a CuiSet>,
) -> Result<()> {
    for set in sets {
        serde_json::to_writer(&mut writer, set)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}
