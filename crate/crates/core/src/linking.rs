//! Concept linking: semantic-type filtering of pre-scored candidates and
//! selection of one CUI per mention.
//!
//! Each mention arrives with two ranked candidate lists from the embedding
//! search, one for the isolated mention text and one for its context. Semantic
//! types are always resolved against the local catalog.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cuiset::{ConceptMeta, CuiSet, MentionLink, ScoredCui};
use crate::error::{Error, Result};
use crate::report::{Mention, ReportMentions};
use crate::types::{Assertion, Cui, EntityKind};
use crate::umls::ConceptCatalog;

/// Upper bound on each ranked candidate list.
pub const MAX_CANDIDATES: usize = 128;

pub const DEFAULT_OBSERVATION_TYPES: [&str; 4] = [
    "Disease or Syndrome",
    "Sign or Symptom",
    "Pathologic Function",
    "Finding",
];

pub const DEFAULT_ANATOMY_TYPES: [&str; 5] = [
    "Body Part, Organ, or Organ Component",
    "Body Location or Region",
    "Body Space or Junction",
    "Tissue",
    "Body System",
];

/// Semantic-type allow-list per entity kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticTypeConfig {
    pub observation: BTreeSet<String>,
    pub anatomy: BTreeSet<String>,
}

impl Default for SemanticTypeConfig {
    fn default() -> Self {
        SemanticTypeConfig {
            observation: DEFAULT_OBSERVATION_TYPES.iter().map(|s| s.to_string()).collect(),
            anatomy: DEFAULT_ANATOMY_TYPES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SemanticTypeConfig {
    pub fn allowed(&self, kind: EntityKind) -> &BTreeSet<String> {
        match kind {
            EntityKind::Observation => &self.observation,
            EntityKind::Anatomy => &self.anatomy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCandidate {
    pub cui: Cui,
    pub score: f64,
    pub semantic_types: BTreeSet<String>,
}

/// Descending score, ascending CUI on ties.
fn rank_order(a: &LinkCandidate, b: &LinkCandidate) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then(a.cui.cmp(&b.cui))
}

/// Resolves raw `(cui, score)` pairs against the catalog, sorts them and caps
/// the list at [`MAX_CANDIDATES`]. Scores outside `[-1, 1]` are rejected.
pub fn resolve_candidates(raw: &[ScoredCui], catalog: &ConceptCatalog) -> Result<Vec<LinkCandidate>> {
    let mut out = Vec::with_capacity(raw.len());
    for c in raw {
        if !(-1.0..=1.0).contains(&c.score) {
            return Err(Error::Candidates(format!(
                "score {} for {} is not a cosine similarity",
                c.score, c.cui
            )));
        }
        out.push(LinkCandidate {
            cui: c.cui,
            score: c.score,
            semantic_types: catalog.semantic_type_names(c.cui),
        });
    }
    out.sort_by(rank_order);
    out.truncate(MAX_CANDIDATES);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MentionCandidates {
    pub mention: Mention,
    pub isolated: Vec<LinkCandidate>,
    pub context: Vec<LinkCandidate>,
}

impl MentionCandidates {
    pub fn new(mention: Mention, mut isolated: Vec<LinkCandidate>, mut context: Vec<LinkCandidate>) -> Self {
        for list in [&mut isolated, &mut context] {
            list.sort_by(rank_order);
            list.truncate(MAX_CANDIDATES);
        }
        MentionCandidates {
            mention,
            isolated,
            context,
        }
    }
}

/// Keeps candidates with at least one semantic type allowed for `kind`,
/// preserving order.
pub fn filter_candidates(
    candidates: &[LinkCandidate],
    kind: EntityKind,
    config: &SemanticTypeConfig,
) -> Vec<LinkCandidate> {
    let allowed = config.allowed(kind);
    candidates
        .iter()
        .filter(|c| c.semantic_types.iter().any(|t| allowed.contains(t)))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Isolated,
    Context,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub cui: Cui,
    pub score: f64,
    pub provenance: Provenance,
    pub semantic_types: BTreeSet<String>,
    /// Best surviving isolated candidate.
    pub isolated: Option<ScoredCui>,
    /// Best surviving context candidate.
    pub context: Option<ScoredCui>,
}

fn head(list: &[LinkCandidate]) -> Option<&LinkCandidate> {
    list.iter().min_by(|a, b| rank_order(a, b))
}

/// The candidate with the highest score across both filtered lists. Equal
/// scores go to the smaller CUI, then to the isolated list.
pub fn select_best(isolated: &[LinkCandidate], context: &[LinkCandidate]) -> Option<Selection> {
    let iso = head(isolated);
    let ctx = head(context);
    let (winner, provenance) = match (iso, ctx) {
        (None, None) => return None,
        (Some(i), None) => (i, Provenance::Isolated),
        (None, Some(c)) => (c, Provenance::Context),
        (Some(i), Some(c)) => {
            if rank_order(c, i).is_lt() {
                (c, Provenance::Context)
            } else {
                (i, Provenance::Isolated)
            }
        }
    };
    let scored = |c: &LinkCandidate| ScoredCui {
        cui: c.cui,
        score: c.score,
    };
    Some(Selection {
        cui: winner.cui,
        score: winner.score,
        provenance,
        semantic_types: winner.semantic_types.clone(),
        isolated: iso.map(scored),
        context: ctx.map(scored),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkedConcept {
    pub cui: Cui,
    pub assertion: Assertion,
    pub kind: EntityKind,
    pub score: f64,
    pub provenance: Provenance,
    pub mention_ref: usize,
    pub semantic_types: BTreeSet<String>,
    pub isolated: Option<ScoredCui>,
    pub context: Option<ScoredCui>,
}

pub fn link_mention(
    mention_ref: usize,
    candidates: &MentionCandidates,
    config: &SemanticTypeConfig,
) -> Option<LinkedConcept> {
    let kind = candidates.mention.kind;
    let isolated = filter_candidates(&candidates.isolated, kind, config);
    let context = filter_candidates(&candidates.context, kind, config);
    let s = select_best(&isolated, &context)?;
    Some(LinkedConcept {
        cui: s.cui,
        assertion: candidates.mention.assertion,
        kind,
        score: s.score,
        provenance: s.provenance,
        mention_ref,
        semantic_types: s.semantic_types,
        isolated: s.isolated,
        context: s.context,
    })
}

/// Collapses linked mentions into the report's concept set. Only the winning
/// CUI of each mention becomes an element; both heads are kept as mention
/// metadata.
pub fn report_to_cui_set(links: &[LinkedConcept], report_id: &str) -> CuiSet {
    let mut set = CuiSet::new(report_id);
    let mut meta: BTreeMap<Cui, ConceptMeta> = BTreeMap::new();
    for link in links {
        set.insert(link.cui, link.assertion);
        let entry = meta.entry(link.cui).or_insert_with(|| ConceptMeta {
            kind: link.kind,
            semantic_types: link.semantic_types.clone(),
            best_score: link.score,
        });
        if link.score > entry.best_score {
            entry.kind = link.kind;
            entry.best_score = link.score;
        }
        set.push_mention(MentionLink {
            mention_ref: link.mention_ref,
            assertion: link.assertion,
            isolated: link.isolated,
            context: link.context,
        });
    }
    for (cui, m) in meta {
        set.set_meta(cui, m);
    }
    set
}

/// One line of the candidate file produced by the embedding adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub report_id: String,
    pub mention_ix: usize,
    #[serde(default)]
    pub isolated: Vec<ScoredCui>,
    #[serde(default)]
    pub context: Vec<ScoredCui>,
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: ix + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkStats {
    pub mentions: usize,
    pub linked: usize,
    /// Mentions whose candidates were all filtered out, or that had none.
    pub unlinked: usize,
}

impl LinkStats {
    pub fn add(&mut self, other: LinkStats) {
        self.mentions += other.mentions;
        self.linked += other.linked;
        self.unlinked += other.unlinked;
    }
}

/// Links every mention of one report. `candidates` maps mention index to its
/// candidate record; mentions without a record count as unlinked.
pub fn link_report(
    report_id: &str,
    mentions: &[Mention],
    candidates: &BTreeMap<usize, &CandidateRecord>,
    catalog: &ConceptCatalog,
    config: &SemanticTypeConfig,
) -> Result<(CuiSet, LinkStats)> {
    let mut stats = LinkStats {
        mentions: mentions.len(),
        ..Default::default()
    };
    if let Some(bad) = candidates.keys().find(|ix| **ix >= mentions.len()) {
        return Err(Error::Candidates(format!(
            "report {report_id}: candidates for mention {bad}, but the report has {} mentions",
            mentions.len()
        )));
    }
    let mut links = Vec::new();
    for (ix, mention) in mentions.iter().enumerate() {
        let Some(record) = candidates.get(&ix) else {
            stats.unlinked += 1;
            continue;
        };
        let mc = MentionCandidates::new(
            mention.clone(),
            resolve_candidates(&record.isolated, catalog)?,
            resolve_candidates(&record.context, catalog)?,
        );
        match link_mention(ix, &mc, config) {
            Some(link) => {
                stats.linked += 1;
                links.push(link);
            }
            None => stats.unlinked += 1,
        }
    }
    Ok((report_to_cui_set(&links, report_id), stats))
}

/// Links a whole mention file. Every candidate record must name a report in
/// `reports` and appear at most once per mention.
pub fn link_all(
    reports: &[ReportMentions],
    candidates: &[CandidateRecord],
    catalog: &ConceptCatalog,
    config: &SemanticTypeConfig,
) -> Result<(Vec<CuiSet>, LinkStats)> {
    let mut by_report: BTreeMap<&str, BTreeMap<usize, &CandidateRecord>> = BTreeMap::new();
    for r in reports {
        if by_report.insert(r.report_id.as_str(), BTreeMap::new()).is_some() {
            return Err(Error::DuplicateReport(r.report_id.clone()));
        }
    }
    for rec in candidates {
        let slot = by_report.get_mut(rec.report_id.as_str()).ok_or_else(|| {
            Error::Candidates(format!("candidates for unknown report {}", rec.report_id))
        })?;
        if slot.insert(rec.mention_ix, rec).is_some() {
            return Err(Error::Candidates(format!(
                "report {}: mention {} has two candidate records",
                rec.report_id, rec.mention_ix
            )));
        }
    }
    let mut stats = LinkStats::default();
    let mut sets = Vec::with_capacity(reports.len());
    for r in reports {
        let (set, s) = link_report(&r.report_id, &r.mentions, &by_report[r.report_id.as_str()], catalog, config)?;
        stats.add(s);
        sets.push(set);
    }
    Ok((sets, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::MentionSource;

    fn c(n: u32) -> Cui {
        Cui::new(n).unwrap()
    }

    fn cand(n: u32, score: f64, types: &[&str]) -> LinkCandidate {
        LinkCandidate {
            cui: c(n),
            score,
            semantic_types: types.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn mention(kind: EntityKind, assertion: Assertion) -> Mention {
        Mention {
            isolated_text: "x".into(),
            context_text: "x".into(),
            kind,
            assertion,
            source: MentionSource::Merged,
            span: (0, 0),
            sentence: None,
        }
    }

    #[test]
    fn filter_by_kind() {
        let cfg = SemanticTypeConfig::default();
        let list = vec![
            cand(1, 0.9, &["Disease or Syndrome"]),
            cand(2, 0.8, &["Pharmacologic Substance"]),
            cand(3, 0.7, &["Tissue"]),
        ];
        let obs = filter_candidates(&list, EntityKind::Observation, &cfg);
        assert_eq!(obs.iter().map(|c| c.cui).collect::<Vec<_>>(), vec![c(1)]);
        let anat = filter_candidates(&list, EntityKind::Anatomy, &cfg);
        assert_eq!(anat.iter().map(|c| c.cui).collect::<Vec<_>>(), vec![c(3)]);
        assert!(filter_candidates(&[], EntityKind::Anatomy, &cfg).is_empty());
    }

    #[test]
    fn select_higher_score() {
        let s = select_best(&[cand(5, 0.91, &[])], &[cand(4, 0.88, &[])]).unwrap();
        assert_eq!(s.cui, c(5));
        assert_eq!(s.provenance, Provenance::Isolated);
        assert_eq!(s.context.unwrap().cui, c(4));
    }

    #[test]
    fn select_tie_smaller_cui() {
        let s = select_best(&[cand(7, 0.90, &[])], &[cand(3, 0.90, &[])]).unwrap();
        assert_eq!(s.cui, c(3));
        assert_eq!(s.provenance, Provenance::Context);
    }

    #[test]
    fn select_none_when_empty() {
        assert!(select_best(&[], &[]).is_none());
    }

    #[test]
    fn cui_set_collisions() {
        let link = |n: u32, a: Assertion, score: f64, m: usize| LinkedConcept {
            cui: c(n),
            assertion: a,
            kind: EntityKind::Observation,
            score,
            provenance: Provenance::Isolated,
            mention_ref: m,
            semantic_types: BTreeSet::new(),
            isolated: None,
            context: None,
        };
        let set = report_to_cui_set(
            &[
                link(1, Assertion::Present, 0.8, 0),
                link(1, Assertion::Present, 0.9, 1),
                link(2, Assertion::Absent, 0.7, 2),
                link(2, Assertion::Present, 0.6, 3),
            ],
            "r",
        );
        assert_eq!(set.len(), 2);
        assert_eq!(set.assertion(c(2)), Some(Assertion::Present));
        assert_eq!(set.meta(c(1)).unwrap().best_score, 0.9);
        assert_eq!(set.mentions().len(), 4);
        assert!(report_to_cui_set(&[], "empty").is_empty());
    }

    #[test]
    fn link_mention_uses_mention_assertion() {
        let mc = MentionCandidates::new(
            mention(EntityKind::Observation, Assertion::Absent),
            vec![cand(2, 0.5, &["Finding"]), cand(1, 0.95, &["Tissue"])],
            vec![],
        );
        let l = link_mention(0, &mc, &SemanticTypeConfig::default()).unwrap();
        assert_eq!(l.cui, c(2));
        assert_eq!(l.assertion, Assertion::Absent);
    }

    #[test]
    fn candidates_capped_and_sorted() {
        let many: Vec<_> = (1..=200).map(|n| cand(n, 0.0, &[])).collect();
        let mc = MentionCandidates::new(mention(EntityKind::Anatomy, Assertion::Present), many, vec![]);
        assert_eq!(mc.isolated.len(), MAX_CANDIDATES);
        assert_eq!(mc.isolated[0].cui, c(1));
    }

    #[test]
    fn out_of_range_score_rejected() {
        let catalog = ConceptCatalog::default();
        let err = resolve_candidates(&[ScoredCui { cui: c(1), score: 1.5 }], &catalog).unwrap_err();
        assert!(matches!(err, Error::Candidates(_)));
    }
}
