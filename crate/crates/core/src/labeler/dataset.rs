use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::phase1::{phase1_label, Phase1Options, Phase1Result};
use super::phase2::{phase2_select, CandidateKind, LabelComparison, SetMeasure};
use super::vocab::{LabelAssignment, LabelValue, LabelVocabulary};
use crate::cuiset::CuiSet;
use crate::error::{Error, Result};
use crate::graph::ConceptGraph;

/// Baseline labels read from a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OldLabels {
    rows: BTreeMap<String, LabelAssignment>,
    order: Vec<String>,
}

impl OldLabels {
    pub fn from_assignments(rows: impl IntoIterator<Item = LabelAssignment>) -> Result<Self> {
        let mut out = OldLabels::default();
        for row in rows {
            if out.rows.contains_key(&row.report_id) {
                return Err(Error::Labels(format!("report {} appears twice in old labels", row.report_id)));
            }
            out.order.push(row.report_id.clone());
            out.rows.insert(row.report_id.clone(), row);
        }
        Ok(out)
    }

    pub fn get(&self, report_id: &str) -> Option<&LabelAssignment> {
        self.rows.get(report_id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Report ids in file order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }
}

/// Reads a label CSV: a header with the report id column first and one
/// column per label, cells `1.0`, `0.0`, `-1.0` or blank. The label columns
/// must be exactly the vocabulary labels, in any order.
pub fn read_old_labels(path: &Path, vocab: &LabelVocabulary) -> Result<OldLabels> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Labels(format!("{}: {other:?}", path.display())),
        })?;
    let header = reader.headers()?.clone();
    let columns: Vec<String> = header.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let have: BTreeSet<&str> = columns.iter().map(String::as_str).collect();
    let want: BTreeSet<&str> = vocab.labels().iter().map(String::as_str).collect();
    if have != want || have.len() != columns.len() {
        return Err(Error::Labels(format!(
            "{}: label columns {:?} do not match the vocabulary {:?}",
            path.display(),
            columns,
            vocab.labels()
        )));
    }
    let mut rows = Vec::new();
    for (ix, record) in reader.records().enumerate() {
        let record = record?;
        let line = ix + 2;
        let id = record.get(0).unwrap_or("").trim();
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "empty report id".into(),
            });
        }
        let mut a = LabelAssignment::new(id);
        for (label, cell) in columns.iter().zip(record.iter().skip(1)) {
            let value = LabelValue::parse_cell(cell).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("invalid value {cell:?} for {label}"),
            })?;
            a.set(label, value);
        }
        rows.push(a);
    }
    OldLabels::from_assignments(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingOptions {
    pub measure: SetMeasure,
    pub phase1: Phase1Options,
    /// Abort on id mismatches between the report file and the old labels.
    pub strict: bool,
    /// Stop after phase 1.
    pub no_retrieval: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledReport {
    pub report_id: String,
    pub labels: LabelAssignment,
    pub phase1: Phase1Result,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<LabelComparison>,
    /// Phase 2 was skipped because the report has no old labels.
    pub missing_old: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LabelSummary {
    pub reports: usize,
    pub missing_old: usize,
    /// Old-label rows without a matching report.
    pub orphan_old: usize,
    pub unmatched_mentions: usize,
    pub selected: BTreeMap<CandidateKind, usize>,
    /// Per label, reports whose final value differs from the old one.
    pub changed: BTreeMap<String, usize>,
    pub positives: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelRun {
    pub reports: Vec<LabeledReport>,
    pub summary: LabelSummary,
}

/// Labels every report, in input order. Without old labels (or with
/// `no_retrieval`) the phase-1 labels are final.
pub fn label_dataset(
    sets: &[CuiSet],
    old: Option<&OldLabels>,
    vocab: &LabelVocabulary,
    graph: Option<&ConceptGraph>,
    options: &LabelingOptions,
) -> Result<LabelRun> {
    let mut ids = BTreeSet::new();
    if let Some(dup) = sets.iter().find(|s| !ids.insert(s.report_id.as_str())) {
        return Err(Error::DuplicateReport(dup.report_id.clone()));
    }
    let old = old.filter(|_| !options.no_retrieval);
    let mut summary = LabelSummary::default();
    if let Some(old) = old {
        let missing: Vec<&str> = sets
            .iter()
            .map(|s| s.report_id.as_str())
            .filter(|id| old.get(id).is_none())
            .collect();
        let orphan: Vec<&str> = old.ids().filter(|id| !ids.contains(id)).collect();
        if options.strict && (!missing.is_empty() || !orphan.is_empty()) {
            return Err(Error::Labels(format!(
                "{} reports lack old labels (first: {:?}); {} old-label rows lack a report (first: {:?})",
                missing.len(),
                missing.first(),
                orphan.len(),
                orphan.first()
            )));
        }
        if !missing.is_empty() {
            log::warn!("{} reports lack old labels; using phase-1 labels", missing.len());
        }
        if !orphan.is_empty() {
            log::warn!("{} old-label rows have no matching report", orphan.len());
        }
        summary.orphan_old = orphan.len();
    }

    let reports: Vec<LabeledReport> = sets
        .par_iter()
        .map(|set| {
            let phase1 = phase1_label(set, vocab, graph, &options.phase1);
            let old_row = old.and_then(|o| o.get(&set.report_id));
            let comparison =
                old_row.map(|o| phase2_select(set, o, &phase1.assignment, vocab, options.measure));
            let labels = comparison
                .as_ref()
                .map_or_else(|| phase1.assignment.clone(), |c| c.final_labels.clone());
            LabeledReport {
                report_id: set.report_id.clone(),
                labels,
                missing_old: old.is_some() && old_row.is_none(),
                phase1,
                comparison,
            }
        })
        .collect();

    summary.reports = reports.len();
    for r in &reports {
        summary.missing_old += usize::from(r.missing_old);
        summary.unmatched_mentions += r.phase1.unmatched_mentions;
        if let Some(c) = &r.comparison {
            *summary.selected.entry(c.selected).or_default() += 1;
        }
        for label in vocab.labels() {
            if r.labels.get(label) == LabelValue::Positive {
                *summary.positives.entry(label.clone()).or_default() += 1;
            }
            if let Some(o) = old.and_then(|o| o.get(&r.report_id)) {
                if o.get(label) != r.labels.get(label) {
                    *summary.changed.entry(label.clone()).or_default() += 1;
                }
            }
        }
    }
    Ok(LabelRun { reports, summary })
}

/// Label CSV in vocabulary column order.
pub fn write_labels_csv<'a, W: Write>(
    writer: W,
    vocab: &LabelVocabulary,
    rows: impl IntoIterator<Item = &'a LabelAssignment>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once("report_id").chain(vocab.labels().iter().map(String::as_str)))?;
    for row in rows {
        w.write_record(
            std::iter::once(row.report_id.as_str()).chain(vocab.labels().iter().map(|l| row.get(l).csv_cell())),
        )?;
    }
    w.flush().map_err(|e| Error::io("<labels>", e))?;
    Ok(())
}

/// One JSON line per report with its phase-1 attributions and comparison.
pub fn write_audit<W: Write>(mut writer: W, reports: &[LabeledReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<audit>", e))?;
    }
    Ok(())
}
