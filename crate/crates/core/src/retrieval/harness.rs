//! Round-robin retrieval over a balanced query set.
//!
//! Each class owns an ordered list of query reports. Round `r` issues the
//! `r`-th query of every class in class order. Retrieved reports are collected
//! per class until the class budget is filled.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::ReportIndex;
use super::search::{search_filtered, RankedResult, SearchOptions};
use crate::error::{Error, Result};
use crate::graph::ConceptGraph;
use crate::similarity::{ComparisonBreakdown, Scorer};

/// Size of the balanced baseline dataset the retrieved set is matched to.
pub const BASELINE_DATASET_SIZE: usize = 706;

pub const DEFAULT_QUERIES_PER_CLASS: usize = 10;

/// `ceil(706 / classes)`.
pub fn default_budget(classes: usize) -> usize {
    BASELINE_DATASET_SIZE.div_ceil(classes.max(1))
}

/// User-facing plan description, resolved into a [`HarnessPlan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSpec {
    pub classes: Vec<String>,
    pub queries_per_class: usize,
    /// Explicit query ids per class, in issue order. Classes not listed take
    /// their first `queries_per_class` balanced ids in ascending order.
    pub queries: BTreeMap<String, Vec<String>>,
    pub budget_per_class: Option<usize>,
    /// Cap on reports taken from a single query.
    pub per_query_k: Option<usize>,
    /// Skip reports already retrieved earlier in the run.
    pub dedup: bool,
    /// Discovery settings for every query. `k` is ignored: the harness walks
    /// each ranking as far as the quota needs.
    pub search: SearchOptions,
}

impl Default for PlanSpec {
    fn default() -> Self {
        PlanSpec {
            classes: Vec::new(),
            queries_per_class: DEFAULT_QUERIES_PER_CLASS,
            queries: BTreeMap::new(),
            budget_per_class: None,
            per_query_k: None,
            dedup: true,
            search: SearchOptions::default(),
        }
    }
}

/// A validated harness plan.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessPlan {
    pub classes: Vec<String>,
    pub queries_per_class: usize,
    /// Balanced report id -> class.
    pub balanced: BTreeMap<String, String>,
    /// Class -> query ids in issue order.
    pub queries: BTreeMap<String, Vec<String>>,
    pub retrieval_ids: BTreeSet<String>,
    pub budget_per_class: usize,
    pub per_query_k: Option<usize>,
    pub dedup: bool,
    pub search: SearchOptions,
}

impl HarnessPlan {
    /// Resolves query lists and checks the plan against `index`.
    pub fn resolve(
        spec: &PlanSpec,
        balanced: BTreeMap<String, String>,
        retrieval_ids: BTreeSet<String>,
        index: &ReportIndex,
    ) -> Result<Self> {
        if spec.classes.is_empty() {
            return Err(Error::Plan("no classes".into()));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = spec.classes.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Plan(format!("class {dup:?} listed twice")));
        }
        if let Some(extra) = spec.queries.keys().find(|c| !seen.contains(c.as_str())) {
            return Err(Error::Plan(format!("queries given for unknown class {extra:?}")));
        }
        if spec.queries_per_class == 0 {
            return Err(Error::Plan("queries_per_class must be at least 1".into()));
        }
        let mut queries = BTreeMap::new();
        for class in &spec.classes {
            let ids: Vec<String> = match spec.queries.get(class) {
                Some(ids) => ids.clone(),
                None => balanced
                    .iter()
                    .filter(|(_, c)| *c == class)
                    .map(|(id, _)| id.clone())
                    .take(spec.queries_per_class)
                    .collect(),
            };
            if ids.is_empty() {
                return Err(Error::Plan(format!("class {class:?} has no queries")));
            }
            if ids.len() < spec.queries_per_class {
                log::warn!(
                    "class {class:?} has {} queries, fewer than {}",
                    ids.len(),
                    spec.queries_per_class
                );
            }
            queries.insert(class.clone(), ids);
        }
        let plan = HarnessPlan {
            budget_per_class: spec.budget_per_class.unwrap_or_else(|| default_budget(spec.classes.len())),
            classes: spec.classes.clone(),
            queries_per_class: spec.queries_per_class,
            balanced,
            queries,
            retrieval_ids,
            per_query_k: spec.per_query_k,
            dedup: spec.dedup,
            search: SearchOptions { k: 0, ..spec.search },
        };
        plan.validate(index)?;
        Ok(plan)
    }

    pub fn query_ids(&self) -> BTreeSet<&str> {
        self.queries.values().flatten().map(String::as_str).collect()
    }

    /// Checks `Q ⊆ B`, `(B ∖ Q) ⊆ R`, query classes, and that every query is
    /// indexed.
    pub fn validate(&self, index: &ReportIndex) -> Result<()> {
        let query_ids = self.query_ids();
        let total: usize = self.queries.values().map(Vec::len).sum();
        if total != query_ids.len() {
            return Err(Error::Plan("a report is used as a query more than once".into()));
        }
        for (class, ids) in &self.queries {
            for id in ids {
                match self.balanced.get(id) {
                    None => return Err(Error::Plan(format!("query {id} is not in the balanced set"))),
                    Some(c) if c != class => {
                        return Err(Error::Plan(format!(
                            "query {id} is listed for {class:?} but labeled {c:?}"
                        )))
                    }
                    Some(_) => {}
                }
                if !index.contains(id) {
                    return Err(Error::Plan(format!("query {id} is not indexed")));
                }
            }
        }
        if let Some(id) = self
            .balanced
            .keys()
            .find(|id| !query_ids.contains(id.as_str()) && !self.retrieval_ids.contains(*id))
        {
            return Err(Error::Plan(format!(
                "balanced report {id} is neither a query nor in the retrieval set"
            )));
        }
        if self.budget_per_class == 0 {
            return Err(Error::Plan("budget_per_class must be at least 1".into()));
        }
        Ok(())
    }

    fn rounds(&self) -> usize {
        self.queries.values().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub report_id: String,
    /// Class of the query that retrieved the report.
    pub class: String,
    pub query_id: String,
    /// 1-based round.
    pub round: usize,
    /// 1-based position in the query's ranking, counting skipped duplicates.
    pub rank: usize,
    pub score: f64,
    pub breakdown: ComparisonBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryIssue {
    pub round: usize,
    pub class: String,
    pub query_id: String,
    pub taken: usize,
    pub skipped_duplicates: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessOutcome {
    pub entries: Vec<ManifestEntry>,
    pub issued: Vec<QueryIssue>,
    pub per_class: BTreeMap<String, usize>,
    pub budget_per_class: usize,
    /// Retrieval ids missing from the index.
    pub unindexed_retrieval_ids: usize,
}

/// Runs the round-robin plan. Queries of one round are searched in parallel;
/// their results are consumed in class order so dedup is deterministic.
pub fn run_harness(
    plan: &HarnessPlan,
    index: &ReportIndex,
    graph: Option<&ConceptGraph>,
    scorer: &Scorer<'_>,
) -> Result<HarnessOutcome> {
    plan.validate(index)?;
    let query_ids = plan.query_ids();
    let unindexed = plan.retrieval_ids.iter().filter(|id| !index.contains(id)).count();
    if unindexed > 0 {
        log::warn!("{unindexed} retrieval ids are not indexed and will never be retrieved");
    }
    let pool = |id: &str| plan.retrieval_ids.contains(id) && !query_ids.contains(id);

    let mut per_class: BTreeMap<String, usize> = plan.classes.iter().map(|c| (c.clone(), 0)).collect();
    let mut remaining_queries: BTreeMap<&str, usize> = plan
        .queries
        .iter()
        .map(|(c, q)| (c.as_str(), q.len()))
        .collect();
    let mut taken: HashSet<String> = HashSet::new();
    let mut entries = Vec::new();
    let mut issued = Vec::new();

    for round in 0..plan.rounds() {
        let due: Vec<(&str, &str)> = plan
            .classes
            .iter()
            .filter(|c| per_class[*c] < plan.budget_per_class)
            .filter_map(|c| plan.queries[c].get(round).map(|q| (c.as_str(), q.as_str())))
            .collect();
        if due.is_empty() {
            if per_class.values().all(|n| *n >= plan.budget_per_class) {
                break;
            }
            continue;
        }
        let results: Vec<RankedResult> = due
            .par_iter()
            .map(|(_, qid)| {
                let query = index.get(qid).expect("validated");
                search_filtered(query, index, graph, scorer, &plan.search, pool)
            })
            .collect();

        for ((class, qid), result) in due.into_iter().zip(results) {
            let left = remaining_queries.get_mut(class).expect("class has queries");
            let remaining_budget = plan.budget_per_class - per_class[class];
            let mut quota = remaining_budget.div_ceil(*left);
            *left -= 1;
            if let Some(k) = plan.per_query_k {
                quota = quota.min(k);
            }
            let mut issue = QueryIssue {
                round: round + 1,
                class: class.to_string(),
                query_id: qid.to_string(),
                taken: 0,
                skipped_duplicates: 0,
                pool_size: result.pool_size,
            };
            for (pos, entry) in result.entries.into_iter().enumerate() {
                if issue.taken == quota {
                    break;
                }
                if plan.dedup && !taken.insert(entry.report_id.clone()) {
                    issue.skipped_duplicates += 1;
                    continue;
                }
                issue.taken += 1;
                entries.push(ManifestEntry {
                    report_id: entry.report_id,
                    class: class.to_string(),
                    query_id: qid.to_string(),
                    round: round + 1,
                    rank: pos + 1,
                    score: entry.score,
                    breakdown: entry.breakdown,
                });
            }
            *per_class.get_mut(class).expect("known class") += issue.taken;
            issued.push(issue);
        }
    }
    Ok(HarnessOutcome {
        entries,
        issued,
        per_class,
        budget_per_class: plan.budget_per_class,
        unindexed_retrieval_ids: unindexed,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    report_id: &'a str,
    class: &'a str,
    query_id: &'a str,
    round: usize,
    rank: usize,
    score: String,
}

/// CSV with columns `report_id,class,query_id,round,rank,score`.
pub fn write_manifest_csv<W: Write>(writer: W, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for e in entries {
        w.serialize(CsvRow {
            report_id: &e.report_id,
            class: &e.class,
            query_id: &e.query_id,
            round: e.round,
            rank: e.rank,
            score: e.score.to_string(),
        })?;
    }
    if entries.is_empty() {
        w.write_record(["report_id", "class", "query_id", "round", "rank", "score"])?;
    }
    w.flush().map_err(|e| Error::io("<manifest>", e))?;
    Ok(())
}

/// One JSON object per entry, breakdown included.
pub fn write_manifest_jsonl<W: Write>(mut writer: W, entries: &[ManifestEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
    }
    Ok(())
}
