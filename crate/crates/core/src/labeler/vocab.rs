use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::report::normalize_text;
use crate::types::{Assertion, Cui};
use crate::umls::ConceptCatalog;

/// A report's value for one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LabelValue {
    Positive,
    Negative,
    Uncertain,
    #[default]
    Unmentioned,
}

impl LabelValue {
    pub fn from_assertion(a: Assertion) -> Self {
        match a {
            Assertion::Present => LabelValue::Positive,
            Assertion::Absent => LabelValue::Negative,
            Assertion::Uncertain => LabelValue::Uncertain,
        }
    }

    /// 1 > -1 > 0 > unmentioned.
    fn priority(self) -> u8 {
        match self {
            LabelValue::Positive => 3,
            LabelValue::Uncertain => 2,
            LabelValue::Negative => 1,
            LabelValue::Unmentioned => 0,
        }
    }

    pub fn merge(self, other: LabelValue) -> LabelValue {
        if other.priority() > self.priority() {
            other
        } else {
            self
        }
    }

    pub fn as_number(self) -> Option<i8> {
        match self {
            LabelValue::Positive => Some(1),
            LabelValue::Negative => Some(0),
            LabelValue::Uncertain => Some(-1),
            LabelValue::Unmentioned => None,
        }
    }

    pub fn from_number(n: Option<i8>) -> Option<Self> {
        Some(match n {
            Some(1) => LabelValue::Positive,
            Some(0) => LabelValue::Negative,
            Some(-1) => LabelValue::Uncertain,
            None => LabelValue::Unmentioned,
            Some(_) => return None,
        })
    }

    /// CSV cell: `1.0`, `0.0`, `-1.0` or empty.
    pub fn csv_cell(self) -> &'static str {
        match self {
            LabelValue::Positive => "1.0",
            LabelValue::Negative => "0.0",
            LabelValue::Uncertain => "-1.0",
            LabelValue::Unmentioned => "",
        }
    }

    pub fn parse_cell(cell: &str) -> Option<Self> {
        let cell = cell.trim();
        if cell.is_empty() {
            return Some(LabelValue::Unmentioned);
        }
        let x: f64 = cell.parse().ok()?;
        if x == 1.0 {
            Some(LabelValue::Positive)
        } else if x == 0.0 {
            Some(LabelValue::Negative)
        } else if x == -1.0 {
            Some(LabelValue::Uncertain)
        } else {
            None
        }
    }
}

impl fmt::Display for LabelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_number() {
            Some(n) => write!(f, "{n}"),
            None => f.write_str("unmentioned"),
        }
    }
}

impl Serialize for LabelValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_number().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabelValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = Option::<i8>::deserialize(d)?;
        LabelValue::from_number(n).ok_or_else(|| serde::de::Error::custom(format!("invalid label value {n:?}")))
    }
}

/// Label values of one report. Labels not stored are unmentioned.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub report_id: String,
    values: BTreeMap<String, LabelValue>,
}

impl LabelAssignment {
    pub fn new(report_id: impl Into<String>) -> Self {
        LabelAssignment {
            report_id: report_id.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, label: &str) -> LabelValue {
        self.values.get(label).copied().unwrap_or_default()
    }

    /// Overwrites the value of `label`.
    pub fn set(&mut self, label: &str, value: LabelValue) {
        if value == LabelValue::Unmentioned {
            self.values.remove(label);
        } else {
            self.values.insert(label.to_string(), value);
        }
    }

    /// Combines with the current value under 1 > -1 > 0.
    pub fn mark(&mut self, label: &str, value: LabelValue) {
        let merged = self.get(label).merge(value);
        self.set(label, merged);
    }

    /// Mentioned labels and their values.
    pub fn values(&self) -> impl Iterator<Item = (&str, LabelValue)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn positives(&self) -> BTreeSet<String> {
        self.values
            .iter()
            .filter(|(_, v)| **v == LabelValue::Positive)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// Ordered label names and the CUIs standing for each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVocabulary {
    labels: Vec<String>,
    label_cuis: BTreeMap<String, BTreeSet<Cui>>,
    /// CUI -> label positions, ascending.
    cui_labels: BTreeMap<Cui, Vec<usize>>,
}

impl LabelVocabulary {
    /// Matches each label name against catalog strings after normalization.
    /// An override replaces the match for its label. A label with neither is
    /// a configuration error.
    pub fn build(
        labels: &[String],
        catalog: &ConceptCatalog,
        overrides: &BTreeMap<String, BTreeSet<Cui>>,
    ) -> Result<Self> {
        if let Some(extra) = overrides.keys().find(|k| !labels.contains(k)) {
            return Err(Error::Config(format!("override for unknown label {extra:?}")));
        }
        let mut by_string: HashMap<String, BTreeSet<Cui>> = HashMap::new();
        for record in catalog.records() {
            for s in &record.strings {
                by_string.entry(normalize_text(s)).or_default().insert(record.cui);
            }
        }
        let mut map = BTreeMap::new();
        for label in labels {
            let cuis = match overrides.get(label) {
                Some(cuis) => cuis.clone(),
                None => by_string.get(&normalize_text(label)).cloned().unwrap_or_default(),
            };
            map.insert(label.clone(), cuis);
        }
        Self::from_parts(labels.to_vec(), map)
    }

    pub fn from_parts(labels: Vec<String>, label_cuis: BTreeMap<String, BTreeSet<Cui>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::Config(format!("label {dup:?} listed twice")));
        }
        let mut cui_labels: BTreeMap<Cui, Vec<usize>> = BTreeMap::new();
        for (ix, label) in labels.iter().enumerate() {
            let cuis = label_cuis.get(label).filter(|c| !c.is_empty()).ok_or_else(|| {
                Error::Config(format!("label {label:?} matches no concept and has no override"))
            })?;
            for cui in cuis {
                cui_labels.entry(*cui).or_default().push(ix);
            }
        }
        if let Some(extra) = label_cuis.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(Error::Config(format!("CUIs given for unknown label {extra:?}")));
        }
        Ok(LabelVocabulary {
            labels,
            label_cuis,
            cui_labels,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.label_cuis.contains_key(label)
    }

    pub fn cuis(&self, label: &str) -> Option<&BTreeSet<Cui>> {
        self.label_cuis.get(label)
    }

    /// Labels containing `cui`, in vocabulary order.
    pub fn labels_of(&self, cui: Cui) -> impl Iterator<Item = &str> {
        self.cui_labels
            .get(&cui)
            .into_iter()
            .flatten()
            .map(|ix| self.labels[*ix].as_str())
    }

    /// Union of the CUI sets of `labels`.
    pub fn cui_union<'a>(&self, labels: impl IntoIterator<Item = &'a String>) -> BTreeSet<Cui> {
        labels
            .into_iter()
            .filter_map(|l| self.label_cuis.get(l))
            .flatten()
            .copied()
            .collect()
    }
}
