use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::vocab::{LabelAssignment, LabelValue, LabelVocabulary};
use crate::cuiset::CuiSet;
use crate::types::Cui;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapScore {
    pub score: f64,
    /// The denominator was empty and the score was set to 0.
    pub degenerate: bool,
}

/// `|R ∩ L| / |R|`; an empty `R` scores 0 and is flagged.
pub fn containment_index(r: &BTreeSet<Cui>, l: &BTreeSet<Cui>) -> OverlapScore {
    if r.is_empty() {
        return OverlapScore {
            score: 0.0,
            degenerate: true,
        };
    }
    let shared = r.intersection(l).count();
    OverlapScore {
        score: shared as f64 / r.len() as f64,
        degenerate: false,
    }
}

/// `|R ∩ L| / |R ∪ L|`; two empty sets score 0 and are flagged.
pub fn jaccard_index(r: &BTreeSet<Cui>, l: &BTreeSet<Cui>) -> OverlapScore {
    let shared = r.intersection(l).count();
    let union = r.len() + l.len() - shared;
    if union == 0 {
        return OverlapScore {
            score: 0.0,
            degenerate: true,
        };
    }
    OverlapScore {
        score: shared as f64 / union as f64,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetMeasure {
    #[default]
    Containment,
    Jaccard,
}

impl SetMeasure {
    pub fn apply(self, r: &BTreeSet<Cui>, l: &BTreeSet<Cui>) -> OverlapScore {
        match self {
            SetMeasure::Containment => containment_index(r, l),
            SetMeasure::Jaccard => jaccard_index(r, l),
        }
    }
}

/// The four candidates, declared in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Intersection,
    Old,
    New,
    Union,
}

impl CandidateKind {
    pub const TIE_ORDER: [CandidateKind; 4] = [
        CandidateKind::Intersection,
        CandidateKind::Old,
        CandidateKind::New,
        CandidateKind::Union,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub kind: CandidateKind,
    /// Positive labels of the candidate.
    pub labels: BTreeSet<String>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelComparison {
    pub report_id: String,
    pub measure: SetMeasure,
    /// In tie-break order.
    pub candidates: Vec<CandidateScore>,
    pub selected: CandidateKind,
    pub degenerate: bool,
    pub final_labels: LabelAssignment,
}

impl LabelComparison {
    pub fn candidate(&self, kind: CandidateKind) -> &CandidateScore {
        self.candidates.iter().find(|c| c.kind == kind).expect("all four present")
    }
}

/// Scores the old, new, intersection and union positive-label sets against
/// the report's concepts and keeps the best, ties going to the earlier kind
/// in [`CandidateKind::TIE_ORDER`].
///
/// Selecting `old` or `new` keeps that assignment unchanged. Selecting the
/// intersection or the union sets its labels to 1; other labels keep the
/// non-positive value new gives them, else the one old gives them.
pub fn phase2_select(
    report: &CuiSet,
    old: &LabelAssignment,
    new: &LabelAssignment,
    vocab: &LabelVocabulary,
    measure: SetMeasure,
) -> LabelComparison {
    let r: BTreeSet<Cui> = report.cuis().collect();
    let old_pos = old.positives();
    let new_pos = new.positives();
    let mut degenerate = false;
    let candidates: Vec<CandidateScore> = CandidateKind::TIE_ORDER
        .into_iter()
        .map(|kind| {
            let labels: BTreeSet<String> = match kind {
                CandidateKind::Intersection => old_pos.intersection(&new_pos).cloned().collect(),
                CandidateKind::Old => old_pos.clone(),
                CandidateKind::New => new_pos.clone(),
                CandidateKind::Union => old_pos.union(&new_pos).cloned().collect(),
            };
            let s = measure.apply(&r, &vocab.cui_union(&labels));
            degenerate |= s.degenerate;
            CandidateScore {
                kind,
                labels,
                score: s.score,
            }
        })
        .collect();
    let mut best = &candidates[0];
    for c in &candidates[1..] {
        if c.score > best.score {
            best = c;
        }
    }
    let selected = best.kind;
    let final_labels = match selected {
        CandidateKind::Old => relabel(old, &report.report_id),
        CandidateKind::New => relabel(new, &report.report_id),
        CandidateKind::Intersection | CandidateKind::Union => {
            let mut out = LabelAssignment::new(report.report_id.clone());
            for label in vocab.labels() {
                let value = if best.labels.contains(label) {
                    LabelValue::Positive
                } else {
                    [new.get(label), old.get(label)]
                        .into_iter()
                        .find(|v| !matches!(v, LabelValue::Positive | LabelValue::Unmentioned))
                        .unwrap_or(LabelValue::Unmentioned)
                };
                out.set(label, value);
            }
            out
        }
    };
    LabelComparison {
        report_id: report.report_id.clone(),
        measure,
        candidates,
        selected,
        degenerate,
        final_labels,
    }
}

fn relabel(a: &LabelAssignment, report_id: &str) -> LabelAssignment {
    let mut out = a.clone();
    out.report_id = report_id.to_string();
    out
}
