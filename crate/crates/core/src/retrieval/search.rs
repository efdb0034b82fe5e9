use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::ReportIndex;
use crate::cuiset::CuiSet;
use crate::graph::{bfs_discover, discover_candidate_reports, ConceptGraph, TraversalEdges};
use crate::similarity::{ComparisonBreakdown, Scorer};

pub const DEFAULT_DISCOVERY_DEPTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Number of results kept; 0 keeps the whole ranked pool.
    pub k: usize,
    /// Narrow the pool by BFS discovery; otherwise every report is scored.
    pub discovery: bool,
    pub discovery_depth: usize,
    pub traversal: TraversalEdges,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            k: 10,
            discovery: true,
            discovery_depth: DEFAULT_DISCOVERY_DEPTH,
            traversal: TraversalEdges::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub report_id: String,
    pub score: f64,
    pub breakdown: ComparisonBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub query_id: String,
    /// Score descending, report id ascending on ties.
    pub entries: Vec<RankedEntry>,
    /// Number of reports scored.
    pub pool_size: usize,
    /// Concepts reached by discovery, when it ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discovered_concepts: Option<usize>,
}

impl RankedResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.report_id.as_str())
    }
}

/// Ranks indexed reports against `query`.
///
/// With discovery enabled the pool is every report sharing a CUI with the
/// concepts within `discovery_depth` hops of the query; without a graph only
/// the query's own CUIs make up the reached set. A report whose set is empty is
/// therefore reachable only with discovery disabled.
pub fn search(
    query: &CuiSet,
    index: &ReportIndex,
    graph: Option<&ConceptGraph>,
    scorer: &Scorer<'_>,
    options: &SearchOptions,
) -> RankedResult {
    search_filtered(query, index, graph, scorer, options, |_| true)
}

/// [`search`] restricted to reports accepted by `keep`.
pub fn search_filtered(
    query: &CuiSet,
    index: &ReportIndex,
    graph: Option<&ConceptGraph>,
    scorer: &Scorer<'_>,
    options: &SearchOptions,
    keep: impl Fn(&str) -> bool + Sync,
) -> RankedResult {
    let (pool, discovered) = if options.discovery {
        let empty;
        let graph = match graph {
            Some(g) => g,
            None => {
                empty = ConceptGraph::default();
                &empty
            }
        };
        let found = bfs_discover(graph, query.cuis(), options.discovery_depth, options.traversal);
        let ids = discover_candidate_reports(&found, index, true);
        (ids.into_iter().collect(), Some(found.reached.len()))
    } else {
        (index.ids().map(str::to_string).collect::<Vec<_>>(), None)
    };
    let pool: Vec<String> = pool.into_iter().filter(|id| keep(id)).collect();
    let prepared = scorer.prepare(query);
    let mut entries: Vec<RankedEntry> = pool
        .par_iter()
        .map(|id| {
            let candidate = index.get(id).expect("pool ids come from the index");
            let breakdown = prepared.score(candidate);
            RankedEntry {
                report_id: id.clone(),
                score: breakdown.score,
                breakdown,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.report_id.cmp(&b.report_id)));
    if options.k > 0 {
        entries.truncate(options.k);
    }
    RankedResult {
        query_id: query.report_id.clone(),
        entries,
        pool_size: pool.len(),
        discovered_concepts: discovered,
    }
}
