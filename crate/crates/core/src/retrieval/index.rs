use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::cuiset::{read_jsonl, CuiSet};
use crate::error::{Error, Result};
use crate::types::Cui;

/// Report concept sets keyed by id, with a CUI -> reports inverted index.
#[derive(Debug, Clone, Default)]
pub struct ReportIndex {
    reports: BTreeMap<String, CuiSet>,
    inverted: BTreeMap<Cui, BTreeSet<String>>,
    class_labels: BTreeMap<String, String>,
}

impl ReportIndex {
    /// Fails on an empty input or a repeated report id.
    pub fn build(sets: impl IntoIterator<Item = CuiSet>) -> Result<Self> {
        let mut reports = BTreeMap::new();
        let mut inverted: BTreeMap<Cui, BTreeSet<String>> = BTreeMap::new();
        for set in sets {
            if reports.contains_key(&set.report_id) {
                return Err(Error::DuplicateReport(set.report_id));
            }
            for cui in set.cuis() {
                inverted.entry(cui).or_default().insert(set.report_id.clone());
            }
            reports.insert(set.report_id.clone(), set);
        }
        if reports.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let index = ReportIndex {
            reports,
            inverted,
            class_labels: BTreeMap::new(),
        };
        index.check_transpose()?;
        Ok(index)
    }

    /// Loads a CuiSet JSON-lines file. Returns the index and the number of
    /// skipped malformed lines (always 0 in strict mode).
    pub fn from_jsonl(path: &Path, strict: bool) -> Result<(Self, usize)> {
        let load = read_jsonl(path, strict)?;
        Ok((Self::build(load.sets)?, load.malformed))
    }

    /// Verifies that the inverted lists are exactly the transpose of the
    /// report sets.
    pub fn check_transpose(&self) -> Result<()> {
        let mut memberships = 0usize;
        for (id, set) in &self.reports {
            for cui in set.cuis() {
                if !self.inverted.get(&cui).is_some_and(|ids| ids.contains(id)) {
                    return Err(Error::Snapshot(format!("inverted index misses {cui} -> {id}")));
                }
                memberships += 1;
            }
        }
        let listed: usize = self.inverted.values().map(BTreeSet::len).sum();
        if listed != memberships {
            return Err(Error::Snapshot(format!(
                "inverted index lists {listed} memberships, reports hold {memberships}"
            )));
        }
        Ok(())
    }

    /// Attaches a disease class to report ids. Ids outside the index are
    /// rejected.
    pub fn with_classes(mut self, classes: BTreeMap<String, String>) -> Result<Self> {
        if let Some(id) = classes.keys().find(|id| !self.reports.contains_key(*id)) {
            return Err(Error::Plan(format!("class label for unknown report {id}")));
        }
        self.class_labels = classes;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&CuiSet> {
        self.reports.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.reports.contains_key(id)
    }

    /// Report ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.reports.keys().map(String::as_str)
    }

    pub fn reports(&self) -> impl Iterator<Item = &CuiSet> {
        self.reports.values()
    }

    /// Ids of reports containing `cui` under any assertion.
    pub fn reports_with(&self, cui: Cui) -> impl Iterator<Item = &str> {
        self.inverted.get(&cui).into_iter().flatten().map(String::as_str)
    }

    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.class_labels.get(id).map(String::as_str)
    }

    pub fn class_labels(&self) -> &BTreeMap<String, String> {
        &self.class_labels
    }
}
