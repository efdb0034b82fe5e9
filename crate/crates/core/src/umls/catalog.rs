use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ConceptRecord, RelationRecord, SemanticTypeAssignment};
use crate::error::{Error, Result};
use crate::types::Cui;

pub const CATALOG_FORMAT: &str = "cuisim-catalog";
pub const CATALOG_VERSION: u32 = 1;
const STRING_DUMP_HEADER: &str = "#cuisim-strings\tv1";

/// Immutable concept table built from the three RRF tables.
///
/// Every CUI referenced by a semantic-type assignment or relation is a key of
/// `records`; dangling references are dropped by [`build_catalog`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConceptCatalog {
    records: BTreeMap<Cui, ConceptRecord>,
    semantic_types: BTreeMap<Cui, BTreeSet<SemanticTypeAssignment>>,
    relations: Vec<RelationRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub records: usize,
    pub assignments: usize,
    pub relations: usize,
    pub merged_records: usize,
    pub dropped_assignments: usize,
    pub dropped_relations: usize,
    pub duplicate_relations: usize,
}

/// Assembles a catalog from parser output.
///
/// The result does not depend on input order: records sharing a CUI are
/// merged (strings unioned, smallest preferred name kept), relations are
/// sorted and duplicate unordered pairs with the same REL collapse to the
/// smallest orientation.
pub fn build_catalog(
    records: impl IntoIterator<Item = ConceptRecord>,
    assignments: impl IntoIterator<Item = SemanticTypeAssignment>,
    relations: impl IntoIterator<Item = RelationRecord>,
) -> (ConceptCatalog, IngestSummary) {
    let mut summary = IngestSummary::default();
    let mut by_cui: BTreeMap<Cui, ConceptRecord> = BTreeMap::new();
    for record in records {
        match by_cui.get_mut(&record.cui) {
            Some(existing) => {
                summary.merged_records += 1;
                let strings: BTreeSet<String> =
                    existing.strings.drain(..).chain(record.strings).collect();
                existing.strings = strings.into_iter().collect();
                existing.source_vocabularies.extend(record.source_vocabularies);
                if record.preferred_name < existing.preferred_name {
                    existing.preferred_name = record.preferred_name;
                }
            }
            None => {
                by_cui.insert(record.cui, record);
            }
        }
    }

    let mut semantic_types: BTreeMap<Cui, BTreeSet<SemanticTypeAssignment>> = BTreeMap::new();
    for assignment in assignments {
        if by_cui.contains_key(&assignment.cui) {
            semantic_types.entry(assignment.cui).or_default().insert(assignment);
        } else {
            summary.dropped_assignments += 1;
        }
    }

    let mut kept: Vec<RelationRecord> = relations
        .into_iter()
        .filter(|r| {
            let ok = r.cui1 != r.cui2 && by_cui.contains_key(&r.cui1) && by_cui.contains_key(&r.cui2);
            if !ok {
                summary.dropped_relations += 1;
            }
            ok
        })
        .collect();
    kept.sort();
    let before = kept.len();
    let mut seen = BTreeSet::new();
    kept.retain(|r| {
        let (a, b, rel) = r.unordered_key();
        seen.insert((a, b, rel.to_string()))
    });
    summary.duplicate_relations = before - kept.len();

    summary.records = by_cui.len();
    summary.assignments = semantic_types.values().map(BTreeSet::len).sum();
    summary.relations = kept.len();
    (
        ConceptCatalog {
            records: by_cui,
            semantic_types,
            relations: kept,
        },
        summary,
    )
}

impl ConceptCatalog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, cui: Cui) -> Option<&ConceptRecord> {
        self.records.get(&cui)
    }

    pub fn contains(&self, cui: Cui) -> bool {
        self.records.contains_key(&cui)
    }

    pub fn records(&self) -> impl Iterator<Item = &ConceptRecord> {
        self.records.values()
    }

    pub fn cuis(&self) -> impl Iterator<Item = Cui> + '_ {
        self.records.keys().copied()
    }

    pub fn relations(&self) -> &[RelationRecord] {
        &self.relations
    }

    pub fn assignments(&self, cui: Cui) -> impl Iterator<Item = &SemanticTypeAssignment> {
        self.semantic_types.get(&cui).into_iter().flatten()
    }

    /// Semantic-type names of a concept; empty for unknown CUIs.
    pub fn semantic_type_names(&self, cui: Cui) -> BTreeSet<String> {
        self.assignments(cui).map(|a| a.semantic_type.clone()).collect()
    }

    pub fn write_snapshot<W: Write>(&self, writer: W) -> Result<()> {
        let snapshot = CatalogSnapshot {
            format: CATALOG_FORMAT.to_string(),
            version: CATALOG_VERSION,
            records: self.records.values().cloned().collect(),
            semantic_types: self.semantic_types.values().flatten().cloned().collect(),
            relations: self.relations.clone(),
        };
        serde_json::to_writer(writer, &snapshot)?;
        Ok(())
    }

    /// Loads a snapshot written by [`ConceptCatalog::write_snapshot`].
    pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Self> {
        let snapshot: CatalogSnapshot = serde_json::from_reader(reader)?;
        if snapshot.format != CATALOG_FORMAT {
            return Err(Error::Snapshot(format!(
                "expected format {CATALOG_FORMAT:?}, found {:?}",
                snapshot.format
            )));
        }
        if snapshot.version != CATALOG_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported catalog version {} (expected {CATALOG_VERSION})",
                snapshot.version
            )));
        }
        for record in &snapshot.records {
            if record.strings.is_empty() || !record.strings.contains(&record.preferred_name) {
                return Err(Error::Snapshot(format!(
                    "record {} violates string invariants",
                    record.cui
                )));
            }
        }
        let (catalog, summary) =
            build_catalog(snapshot.records, snapshot.semantic_types, snapshot.relations);
        if summary.dropped_assignments + summary.dropped_relations + summary.merged_records > 0 {
            return Err(Error::Snapshot(format!(
                "snapshot is not self-consistent: {summary:?}"
            )));
        }
        Ok(catalog)
    }

    /// Writes the `(cui, string)` TSV consumed by the embedding adapter.
    /// The first line is a version header; tabs and newlines inside strings
    /// are replaced by spaces.
    pub fn write_string_dump<W: Write>(&self, mut writer: W) -> Result<usize> {
        let io = |e| Error::io("<string dump>", e);
        writeln!(writer, "{STRING_DUMP_HEADER}").map_err(io)?;
        let mut rows = 0;
        for record in self.records.values() {
            for s in &record.strings {
                let clean: String = s
                    .chars()
                    .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
                    .collect();
                writeln!(writer, "{}\t{}", record.cui, clean).map_err(io)?;
                rows += 1;
            }
        }
        Ok(rows)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogSnapshot {
    format: String,
    version: u32,
    records: Vec<ConceptRecord>,
    semantic_types: Vec<SemanticTypeAssignment>,
    relations: Vec<RelationRecord>,
}
