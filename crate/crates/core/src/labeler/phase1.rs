use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::vocab::{LabelAssignment, LabelValue, LabelVocabulary};
use crate::cuiset::{CuiSet, MentionLink, ScoredCui};
use crate::graph::ConceptGraph;
use crate::linking::Provenance;
use crate::types::Cui;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1Options {
    /// How many parent steps to climb when neither head matches a label.
    pub parent_depth: usize,
}

impl Default for Phase1Options {
    fn default() -> Self {
        Phase1Options { parent_depth: 1 }
    }
}

/// Why a label was set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attribution {
    pub mention_ref: usize,
    pub label: String,
    pub value: LabelValue,
    /// The CUI found in the label's set.
    pub cui: Cui,
    pub head: Provenance,
    /// Linking score of the head the match came from.
    pub score: f64,
    /// Number of parent steps taken; 0 for a direct match.
    pub parent_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase1Result {
    pub assignment: LabelAssignment,
    pub attributions: Vec<Attribution>,
    pub unmatched_mentions: usize,
}

/// The mention list of a report. Sets built without linking metadata get one
/// synthetic mention per element.
fn mentions_of(report: &CuiSet) -> Vec<MentionLink> {
    if !report.mentions().is_empty() {
        return report.mentions().to_vec();
    }
    report
        .iter()
        .enumerate()
        .map(|(ix, (cui, assertion))| MentionLink {
            mention_ref: ix,
            assertion,
            isolated: Some(ScoredCui {
                cui,
                score: report.meta(cui).map_or(0.0, |m| m.best_score),
            }),
            context: None,
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Head {
    cui: Cui,
    score: f64,
    provenance: Provenance,
}

/// Higher score first, then smaller CUI.
fn sort_heads(heads: &mut Vec<Head>) {
    heads.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.cui.cmp(&b.cui)));
    let mut seen = BTreeSet::new();
    heads.retain(|h| seen.insert(h.cui));
}

fn first_match<'v>(heads: &[Head], vocab: &'v LabelVocabulary) -> Option<(Head, &'v str)> {
    heads
        .iter()
        .find_map(|h| vocab.labels_of(h.cui).next().map(|label| (*h, label)))
}

/// Maps every mention to at most one label.
///
/// Both heads of a mention are tried in score order and the first label hit
/// wins. When neither head is in any label, their parents are tried the same
/// way, up to `parent_depth` steps. Values across mentions combine as
/// 1 > -1 > 0.
pub fn phase1_label(
    report: &CuiSet,
    vocab: &LabelVocabulary,
    graph: Option<&ConceptGraph>,
    options: &Phase1Options,
) -> Phase1Result {
    let mut assignment = LabelAssignment::new(report.report_id.clone());
    let mut attributions = Vec::new();
    let mut unmatched = 0;
    for mention in mentions_of(report) {
        let mut heads: Vec<Head> = [
            mention.context.map(|s| (s, Provenance::Context)),
            mention.isolated.map(|s| (s, Provenance::Isolated)),
        ]
        .into_iter()
        .flatten()
        .map(|(s, provenance)| Head {
            cui: s.cui,
            score: s.score,
            provenance,
        })
        .collect();
        sort_heads(&mut heads);

        let mut found = None;
        let mut steps = 0;
        loop {
            if let Some(hit) = first_match(&heads, vocab) {
                found = Some(hit);
                break;
            }
            let Some(graph) = graph else { break };
            if steps == options.parent_depth {
                break;
            }
            steps += 1;
            heads = heads
                .iter()
                .flat_map(|h| graph.parents(h.cui).map(move |p| Head { cui: p, ..*h }))
                .collect();
            sort_heads(&mut heads);
            if heads.is_empty() {
                break;
            }
        }

        match found {
            Some((head, label)) => {
                let value = LabelValue::from_assertion(mention.assertion);
                assignment.mark(label, value);
                attributions.push(Attribution {
                    mention_ref: mention.mention_ref,
                    label: label.to_string(),
                    value,
                    cui: head.cui,
                    head: head.provenance,
                    score: head.score,
                    parent_steps: steps,
                });
            }
            None => unmatched += 1,
        }
    }
    Phase1Result {
        assignment,
        attributions,
        unmatched_mentions: unmatched,
    }
}
