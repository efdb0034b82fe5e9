use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Serialize;

use super::{is_valid_tui, ConceptRecord, RelationRecord, SemanticTypeAssignment};
use crate::error::{Error, Result};
use crate::types::Cui;

pub const MRCONSO_COLUMNS: usize = 18;
pub const MRREL_COLUMNS: usize = 16;
pub const MRSTY_COLUMNS: usize = 6;

// MRCONSO
const CONSO_CUI: usize = 0;
const CONSO_LAT: usize = 1;
const CONSO_TS: usize = 2;
const CONSO_SAB: usize = 11;
const CONSO_STR: usize = 14;
// MRSTY
const STY_CUI: usize = 0;
const STY_TUI: usize = 1;
const STY_NAME: usize = 3;
// MRREL
const REL_CUI1: usize = 0;
const REL_REL: usize = 3;
const REL_CUI2: usize = 4;

/// Row counters for one parsed file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ParseStats {
    pub rows: usize,
    pub kept: usize,
    /// Well-formed rows rejected by a filter (language, vocabulary, REL, self-loop).
    pub filtered: usize,
    pub malformed: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub items: Vec<T>,
    pub stats: ParseStats,
}

enum Row<'a> {
    Fields(Vec<&'a str>),
    Malformed,
}

/// Feeds every non-empty line to `visit`, split into exactly `columns` fields.
/// Lines with another column count or invalid UTF-8 are counted as malformed.
fn scan_rows<R: BufRead>(
    mut reader: R,
    columns: usize,
    stats: &mut ParseStats,
    origin: &Path,
    mut visit: impl FnMut(Vec<&str>, &mut ParseStats),
) -> Result<()> {
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(origin, e))?;
        if n == 0 {
            return Ok(());
        }
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        if buf.is_empty() {
            continue;
        }
        stats.rows += 1;
        match split_row(&buf, columns) {
            Row::Fields(fields) => visit(fields, stats),
            Row::Malformed => stats.malformed += 1,
        }
    }
}

fn split_row(line: &[u8], columns: usize) -> Row<'_> {
    let Ok(text) = std::str::from_utf8(line) else {
        return Row::Malformed;
    };
    let text = text.strip_suffix('|').unwrap_or(text);
    let fields: Vec<&str> = text.split('|').collect();
    if fields.len() == columns {
        Row::Fields(fields)
    } else {
        Row::Malformed
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn parse_mrconso(path: &Path, vocab_filter: &BTreeSet<String>) -> Result<Parsed<ConceptRecord>> {
    parse_conso_from(open(path)?, vocab_filter, path)
}

pub fn parse_mrconso_reader<R: BufRead>(
    reader: R,
    vocab_filter: &BTreeSet<String>,
) -> Result<Parsed<ConceptRecord>> {
    parse_conso_from(reader, vocab_filter, Path::new("<MRCONSO>"))
}

#[derive(Default)]
struct ConceptBuilder {
    preferred: Option<String>,
    strings: BTreeSet<String>,
    vocabularies: BTreeSet<String>,
}

fn parse_conso_from<R: BufRead>(
    reader: R,
    vocab_filter: &BTreeSet<String>,
    origin: &Path,
) -> Result<Parsed<ConceptRecord>> {
    let mut stats = ParseStats::default();
    let mut concepts: BTreeMap<Cui, ConceptBuilder> = BTreeMap::new();
    scan_rows(reader, MRCONSO_COLUMNS, &mut stats, origin, |f, stats| {
        let Ok(cui) = f[CONSO_CUI].parse::<Cui>() else {
            stats.malformed += 1;
            return;
        };
        let string = f[CONSO_STR].trim();
        if string.is_empty() {
            stats.malformed += 1;
            return;
        }
        if f[CONSO_LAT] != "ENG" || !vocab_filter.contains(f[CONSO_SAB]) {
            stats.filtered += 1;
            return;
        }
        stats.kept += 1;
        let entry = concepts.entry(cui).or_default();
        if f[CONSO_TS] == "P" && entry.preferred.is_none() {
            entry.preferred = Some(string.to_string());
        }
        if !entry.strings.insert(string.to_string()) {
            stats.duplicates += 1;
        }
        entry.vocabularies.insert(f[CONSO_SAB].to_string());
    })?;

    if concepts.is_empty() {
        return Err(Error::Ingest(format!(
            "{}: no concept survived vocabulary filtering ({} rows, {} malformed)",
            origin.display(),
            stats.rows,
            stats.malformed
        )));
    }

    let items = concepts
        .into_iter()
        .map(|(cui, b)| {
            let preferred_name = b
                .preferred
                .unwrap_or_else(|| b.strings.first().cloned().expect("non-empty by construction"));
            ConceptRecord {
                cui,
                preferred_name,
                strings: b.strings.into_iter().collect(),
                source_vocabularies: b.vocabularies,
            }
        })
        .collect();
    Ok(Parsed { items, stats })
}

pub fn parse_mrsty(path: &Path) -> Result<Parsed<SemanticTypeAssignment>> {
    parse_sty_from(open(path)?, path)
}

pub fn parse_mrsty_reader<R: BufRead>(reader: R) -> Result<Parsed<SemanticTypeAssignment>> {
    parse_sty_from(reader, Path::new("<MRSTY>"))
}

fn parse_sty_from<R: BufRead>(reader: R, origin: &Path) -> Result<Parsed<SemanticTypeAssignment>> {
    let mut stats = ParseStats::default();
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    scan_rows(reader, MRSTY_COLUMNS, &mut stats, origin, |f, stats| {
        let name = f[STY_NAME].trim();
        let (Ok(cui), true, false) = (
            f[STY_CUI].parse::<Cui>(),
            is_valid_tui(f[STY_TUI]),
            name.is_empty(),
        ) else {
            stats.malformed += 1;
            return;
        };
        let assignment = SemanticTypeAssignment {
            cui,
            tui: f[STY_TUI].to_string(),
            semantic_type: name.to_string(),
        };
        if seen.insert(assignment.clone()) {
            stats.kept += 1;
            items.push(assignment);
        } else {
            stats.duplicates += 1;
        }
    })?;
    Ok(Parsed { items, stats })
}

pub fn parse_mrrel(path: &Path, rel_allowlist: &BTreeSet<String>) -> Result<Parsed<RelationRecord>> {
    parse_rel_from(open(path)?, rel_allowlist, path)
}

pub fn parse_mrrel_reader<R: BufRead>(
    reader: R,
    rel_allowlist: &BTreeSet<String>,
) -> Result<Parsed<RelationRecord>> {
    parse_rel_from(reader, rel_allowlist, Path::new("<MRREL>"))
}

fn parse_rel_from<R: BufRead>(
    reader: R,
    rel_allowlist: &BTreeSet<String>,
    origin: &Path,
) -> Result<Parsed<RelationRecord>> {
    let mut stats = ParseStats::default();
    let mut seen: HashSet<(Cui, Cui, String)> = HashSet::new();
    let mut items = Vec::new();
    scan_rows(reader, MRREL_COLUMNS, &mut stats, origin, |f, stats| {
        let (Ok(cui1), Ok(cui2)) = (f[REL_CUI1].parse::<Cui>(), f[REL_CUI2].parse::<Cui>()) else {
            stats.malformed += 1;
            return;
        };
        let rel = f[REL_REL];
        if !rel_allowlist.contains(rel) || cui1 == cui2 {
            stats.filtered += 1;
            return;
        }
        let record = RelationRecord {
            cui1,
            cui2,
            rel: rel.to_string(),
        };
        let (a, b, r) = record.unordered_key();
        if seen.insert((a, b, r.to_string())) {
            stats.kept += 1;
            items.push(record);
        } else {
            stats.duplicates += 1;
        }
    })?;
    Ok(Parsed { items, stats })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conso(cui: &str, lat: &str, ts: &str, sab: &str, s: &str) -> String {
        format!("{cui}|{lat}|{ts}|L1|PF|S1|Y|A1||123||{sab}|PT|123|{s}|0|N|256|\n")
    }

    fn snomed() -> BTreeSet<String> {
        super::super::default_vocabularies()
    }

    #[test]
    fn conso_single_row() {
        let data = conso("C0000001", "ENG", "P", "SNOMEDCT_US", "Pneumonia");
        let parsed = parse_mrconso_reader(data.as_bytes(), &snomed()).unwrap();
        assert_eq!(parsed.items.len(), 1);
        assert_eq!(parsed.items[0].cui.to_string(), "C0000001");
        assert_eq!(parsed.items[0].preferred_name, "Pneumonia");
    }

    #[test]
    fn conso_vocabulary_filter_excludes() {
        let data = conso("C0000001", "ENG", "P", "SNOMEDCT_US", "Pneumonia");
        let filter: BTreeSet<String> = ["MSH".to_string()].into();
        let err = parse_mrconso_reader(data.as_bytes(), &filter).unwrap_err();
        assert!(matches!(err, Error::Ingest(_)));
    }

    #[test]
    fn conso_aggregates_strings() {
        let data = conso("C0000001", "ENG", "S", "SNOMEDCT_US", "Pneumonitis")
            + &conso("C0000001", "ENG", "P", "SNOMEDCT_US", "Pneumonia");
        let parsed = parse_mrconso_reader(data.as_bytes(), &snomed()).unwrap();
        let rec = &parsed.items[0];
        assert_eq!(rec.strings, vec!["Pneumonia", "Pneumonitis"]);
        assert_eq!(rec.preferred_name, "Pneumonia");
    }

    #[test]
    fn conso_preferred_falls_back_to_smallest() {
        let data = conso("C0000001", "ENG", "S", "SNOMEDCT_US", "Zeta")
            + &conso("C0000001", "ENG", "S", "SNOMEDCT_US", "Alpha");
        let parsed = parse_mrconso_reader(data.as_bytes(), &snomed()).unwrap();
        assert_eq!(parsed.items[0].preferred_name, "Alpha");
    }

    #[test]
    fn conso_counts_malformed_and_non_english() {
        let data = conso("C0000001", "ENG", "P", "SNOMEDCT_US", "Pneumonia")
            + &conso("C0000002", "GER", "P", "SNOMEDCT_US", "Lungenentzuendung")
            + "C0000003|ENG|P|too|few|\n"
            + &conso("C00003", "ENG", "P", "SNOMEDCT_US", "bad cui");
        let parsed = parse_mrconso_reader(data.as_bytes(), &snomed()).unwrap();
        assert_eq!(parsed.items.len(), 1);
        assert_eq!(parsed.stats.rows, 4);
        assert_eq!(parsed.stats.filtered, 1);
        assert_eq!(parsed.stats.malformed, 2);
    }

    #[test]
    fn sty_rows() {
        let data = "C0000001|T047|B2.2.1.2.1|Disease or Syndrome|AT1|256|\n\
                    C0000001|T047|B2.2.1.2.1|Disease or Syndrome|AT1|256|\n\
                    C0000002|X047|B2.2.1.2.1|Disease or Syndrome|AT2|256|\n";
        let parsed = parse_mrsty_reader(data.as_bytes()).unwrap();
        assert_eq!(parsed.items.len(), 1);
        assert_eq!(parsed.items[0].tui, "T047");
        assert_eq!(parsed.items[0].semantic_type, "Disease or Syndrome");
        assert_eq!(parsed.stats.duplicates, 1);
        assert_eq!(parsed.stats.malformed, 1);
    }

    fn rel(c1: &str, r: &str, c2: &str) -> String {
        format!("{c1}|A1|SCUI|{r}|{c2}|A2|SCUI||R1||SNOMEDCT_US|SNOMEDCT_US||Y|N||\n")
    }

    #[test]
    fn rel_rows() {
        let allow = super::super::default_relations();
        let data = rel("C0000002", "PAR", "C0000001")
            + &rel("C0000002", "AQ", "C0000001")
            + &rel("C0000003", "PAR", "C0000003")
            + &rel("C0000001", "PAR", "C0000002");
        let parsed = parse_mrrel_reader(data.as_bytes(), &allow).unwrap();
        assert_eq!(
            parsed.items,
            vec![RelationRecord {
                cui1: "C0000002".parse().unwrap(),
                cui2: "C0000001".parse().unwrap(),
                rel: "PAR".into()
            }]
        );
        assert_eq!(parsed.stats.filtered, 2);
        assert_eq!(parsed.stats.duplicates, 1);
    }

    #[test]
    fn crlf_and_missing_trailing_pipe() {
        let data = "C0000001|T047|B|Disease or Syndrome|AT1|256\r\n";
        let parsed = parse_mrsty_reader(data.as_bytes()).unwrap();
        assert_eq!(parsed.items.len(), 1);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = parse_mrsty(Path::new("/nonexistent/MRSTY.RRF")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
