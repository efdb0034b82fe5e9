//! Undirected concept graph over catalog relations.
//!
//! The graph has two jobs: a breadth-first discovery pass that narrows the
//! pool of candidate reports, and synonym expansion of a query set when it is
//! compared against a candidate. Synonym reachability is answered from
//! connected components of the synonym-only subgraph, computed once at build
//! time, so expansion never walks the graph.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::cuiset::CuiSet;
use crate::error::{Error, Result};
use crate::retrieval::ReportIndex;
use crate::types::{Assertion, Cui};
use crate::umls::ConceptCatalog;

pub const GRAPH_FORMAT: &str = "cuisim-graph";
pub const GRAPH_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Hierarchy,
    Synonym,
}

/// Which edge kinds a traversal may follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraversalEdges {
    #[default]
    Both,
    Hierarchy,
    Synonym,
}

impl TraversalEdges {
    fn allows(self, kind: EdgeKind) -> bool {
        match self {
            TraversalEdges::Both => true,
            TraversalEdges::Hierarchy => kind == EdgeKind::Hierarchy,
            TraversalEdges::Synonym => kind == EdgeKind::Synonym,
        }
    }
}

pub fn default_synonym_relations() -> BTreeSet<String> {
    ["SY".to_string()].into()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConceptGraph {
    adjacency: BTreeMap<Cui, BTreeMap<Cui, EdgeKind>>,
    /// child -> parents, from PAR/CHD rows only.
    parents: BTreeMap<Cui, BTreeSet<Cui>>,
    synonym_relations: BTreeSet<String>,
    /// Synonym component id for every node that has a synonym edge.
    synonym_component: HashMap<Cui, u32>,
}

impl ConceptGraph {
    /// Builds the graph from catalog relations. Every catalog concept becomes a
    /// node. When one unordered pair carries both a synonym code and a
    /// hierarchy code, the edge is a synonym edge.
    pub fn build(catalog: &ConceptCatalog, synonym_relations: &BTreeSet<String>) -> Self {
        let nodes = catalog.cuis();
        let edges = catalog.relations().iter().map(|r| {
            let kind = if synonym_relations.contains(&r.rel) {
                EdgeKind::Synonym
            } else {
                EdgeKind::Hierarchy
            };
            (r.cui1, r.cui2, kind)
        });
        let parents = catalog.relations().iter().filter_map(|r| r.parent_link());
        Self::from_parts(nodes, edges, parents, synonym_relations.clone())
    }

    /// Builds a graph from explicit edges; self-loops are ignored.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = Cui>,
        edges: impl IntoIterator<Item = (Cui, Cui, EdgeKind)>,
        parent_links: impl IntoIterator<Item = (Cui, Cui)>,
        synonym_relations: BTreeSet<String>,
    ) -> Self {
        let mut adjacency: BTreeMap<Cui, BTreeMap<Cui, EdgeKind>> =
            nodes.into_iter().map(|c| (c, BTreeMap::new())).collect();
        for (u, v, kind) in edges {
            if u == v {
                continue;
            }
            for (a, b) in [(u, v), (v, u)] {
                let slot = adjacency.entry(a).or_default().entry(b).or_insert(kind);
                if kind == EdgeKind::Synonym {
                    *slot = EdgeKind::Synonym;
                }
            }
        }
        let mut parents: BTreeMap<Cui, BTreeSet<Cui>> = BTreeMap::new();
        for (child, parent) in parent_links {
            if child != parent {
                parents.entry(child).or_default().insert(parent);
            }
        }
        let synonym_component = synonym_components(&adjacency);
        ConceptGraph {
            adjacency,
            parents,
            synonym_relations,
            synonym_component,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn contains(&self, cui: Cui) -> bool {
        self.adjacency.contains_key(&cui)
    }

    pub fn neighbors(&self, cui: Cui) -> impl Iterator<Item = (Cui, EdgeKind)> + '_ {
        self.adjacency
            .get(&cui)
            .into_iter()
            .flat_map(|m| m.iter().map(|(c, k)| (*c, *k)))
    }

    pub fn edge(&self, a: Cui, b: Cui) -> Option<EdgeKind> {
        self.adjacency.get(&a)?.get(&b).copied()
    }

    /// Undirected edges, each reported once with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (Cui, Cui, EdgeKind)> + '_ {
        self.adjacency.iter().flat_map(|(u, m)| {
            m.iter()
                .filter(move |(v, _)| *u < **v)
                .map(move |(v, k)| (*u, *v, *k))
        })
    }

    pub fn parents(&self, cui: Cui) -> impl Iterator<Item = Cui> + '_ {
        self.parents.get(&cui).into_iter().flatten().copied()
    }

    pub fn synonym_relations(&self) -> &BTreeSet<String> {
        &self.synonym_relations
    }

    /// Whether `a` reaches `b` through synonym edges only.
    pub fn synonym_reachable(&self, a: Cui, b: Cui) -> bool {
        if a == b {
            return true;
        }
        match (self.synonym_component.get(&a), self.synonym_component.get(&b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    fn synonym_component_of(&self, cui: Cui) -> Option<u32> {
        self.synonym_component.get(&cui).copied()
    }

    pub fn stats(&self) -> GraphStats {
        let mut hierarchy_edges = 0;
        let mut synonym_edges = 0;
        for (_, _, kind) in self.edges() {
            match kind {
                EdgeKind::Hierarchy => hierarchy_edges += 1,
                EdgeKind::Synonym => synonym_edges += 1,
            }
        }
        let mut seen: BTreeSet<Cui> = BTreeSet::new();
        let mut components = 0;
        let mut isolated = 0;
        for &start in self.adjacency.keys() {
            if !seen.insert(start) {
                continue;
            }
            components += 1;
            if self.adjacency[&start].is_empty() {
                isolated += 1;
            }
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for (v, _) in self.neighbors(u) {
                    if seen.insert(v) {
                        queue.push_back(v);
                    }
                }
            }
        }
        GraphStats {
            nodes: self.adjacency.len(),
            edges: hierarchy_edges + synonym_edges,
            hierarchy_edges,
            synonym_edges,
            parent_links: self.parents.values().map(BTreeSet::len).sum(),
            connected_components: components,
            isolated_nodes: isolated,
        }
    }

    pub fn write_snapshot<W: Write>(&self, writer: W) -> Result<()> {
        let snapshot = GraphSnapshot {
            format: GRAPH_FORMAT.to_string(),
            version: GRAPH_VERSION,
            synonym_relations: self.synonym_relations.clone(),
            nodes: self.adjacency.keys().copied().collect(),
            edges: self.edges().collect(),
            parents: self
                .parents
                .iter()
                .flat_map(|(c, ps)| ps.iter().map(move |p| (*c, *p)))
                .collect(),
        };
        serde_json::to_writer(writer, &snapshot)?;
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(reader: R) -> Result<Self> {
        let snapshot: GraphSnapshot = serde_json::from_reader(reader)?;
        if snapshot.format != GRAPH_FORMAT || snapshot.version != GRAPH_VERSION {
            return Err(Error::Snapshot(format!(
                "expected {GRAPH_FORMAT} v{GRAPH_VERSION}, found {} v{}",
                snapshot.format, snapshot.version
            )));
        }
        Ok(Self::from_parts(
            snapshot.nodes,
            snapshot.edges,
            snapshot.parents,
            snapshot.synonym_relations,
        ))
    }
}

fn synonym_components(adjacency: &BTreeMap<Cui, BTreeMap<Cui, EdgeKind>>) -> HashMap<Cui, u32> {
    let mut component = HashMap::new();
    let mut next = 0u32;
    for (&start, nbrs) in adjacency {
        if component.contains_key(&start) || !nbrs.values().any(|k| *k == EdgeKind::Synonym) {
            continue;
        }
        component.insert(start, next);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for (v, k) in &adjacency[&u] {
                if *k == EdgeKind::Synonym && !component.contains_key(v) {
                    component.insert(*v, next);
                    queue.push_back(*v);
                }
            }
        }
        next += 1;
    }
    component
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSnapshot {
    format: String,
    version: u32,
    synonym_relations: BTreeSet<String>,
    nodes: Vec<Cui>,
    edges: Vec<(Cui, Cui, EdgeKind)>,
    parents: Vec<(Cui, Cui)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub hierarchy_edges: usize,
    pub synonym_edges: usize,
    pub parent_links: usize,
    pub connected_components: usize,
    pub isolated_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscoveryResult {
    pub reached: BTreeSet<Cui>,
    /// Largest distance of any reached node from the seed set.
    pub depth_used: usize,
    /// Number of nodes first reached at each distance, starting at 0 (the seeds).
    pub frontier_sizes: Vec<usize>,
}

/// Every node within `depth` edges of a seed. Seeds missing from the graph are
/// still part of the result.
pub fn bfs_discover(
    graph: &ConceptGraph,
    seeds: impl IntoIterator<Item = Cui>,
    depth: usize,
    edges: TraversalEdges,
) -> DiscoveryResult {
    let reached: BTreeSet<Cui> = seeds.into_iter().collect();
    let mut frontier: Vec<Cui> = reached.iter().copied().collect();
    let mut reached = reached;
    let mut frontier_sizes = vec![frontier.len()];
    let mut level = 0;
    while level < depth && !frontier.is_empty() {
        let mut next = BTreeSet::new();
        for &u in &frontier {
            for (v, kind) in graph.neighbors(u) {
                if edges.allows(kind) && !reached.contains(&v) {
                    next.insert(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level += 1;
        reached.extend(next.iter().copied());
        frontier_sizes.push(next.len());
        frontier = next.into_iter().collect();
    }
    DiscoveryResult {
        reached,
        depth_used: level,
        frontier_sizes,
    }
}

/// Report ids sharing at least one CUI (assertion ignored) with the discovered
/// subset. With `enabled == false` every indexed report is returned.
pub fn discover_candidate_reports(
    result: &DiscoveryResult,
    index: &ReportIndex,
    enabled: bool,
) -> BTreeSet<String> {
    if !enabled {
        return index.ids().map(str::to_string).collect();
    }
    result
        .reached
        .iter()
        .flat_map(|cui| index.reports_with(*cui))
        .map(str::to_string)
        .collect()
}

/// Assertion given to a candidate CUI added by synonym expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynonymAssertion {
    /// Take the assertion of the target CUI that reaches it.
    #[default]
    Inherit,
    /// Keep the candidate's own assertion.
    Candidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynonymOptions {
    /// Follow chains of synonym edges; otherwise only direct synonym neighbours.
    pub multi_hop: bool,
    pub assertion: SynonymAssertion,
}

impl Default for SynonymOptions {
    fn default() -> Self {
        SynonymOptions {
            multi_hop: true,
            assertion: SynonymAssertion::Inherit,
        }
    }
}

/// Expands one target set against any number of candidates.
///
/// Holds the per-target synonym lookup so the candidate loop in a search does
/// not recompute it.
pub struct SynonymExpander<'a> {
    graph: &'a ConceptGraph,
    target: &'a CuiSet,
    options: SynonymOptions,
    /// Synonym component -> dominant assertion among target CUIs in it.
    components: HashMap<u32, Assertion>,
}

impl<'a> SynonymExpander<'a> {
    pub fn new(graph: &'a ConceptGraph, target: &'a CuiSet, options: SynonymOptions) -> Self {
        let mut components: HashMap<u32, Assertion> = HashMap::new();
        for (cui, assertion) in target.iter() {
            if let Some(comp) = graph.synonym_component_of(cui) {
                components
                    .entry(comp)
                    .and_modify(|a| *a = a.dominant(assertion))
                    .or_insert(assertion);
            }
        }
        SynonymExpander {
            graph,
            target,
            options,
            components,
        }
    }

    /// Assertion carried by the target CUIs that reach `cui` via synonyms.
    fn reaching_assertion(&self, cui: Cui) -> Option<Assertion> {
        if self.options.multi_hop {
            let comp = self.graph.synonym_component_of(cui)?;
            self.components.get(&comp).copied()
        } else {
            self.graph
                .neighbors(cui)
                .filter(|(_, k)| *k == EdgeKind::Synonym)
                .filter_map(|(n, _)| self.target.assertion(n))
                .reduce(Assertion::dominant)
        }
    }

    /// The target plus every candidate CUI it reaches through synonym edges.
    /// Returns `None` when nothing would be added.
    pub fn expand(&self, candidate: &CuiSet) -> Option<CuiSet> {
        let mut added: Vec<(Cui, Assertion)> = Vec::new();
        for (cui, own) in candidate.iter() {
            if self.target.contains(cui) {
                continue;
            }
            if let Some(reaching) = self.reaching_assertion(cui) {
                let assertion = match self.options.assertion {
                    SynonymAssertion::Inherit => reaching,
                    SynonymAssertion::Candidate => own,
                };
                added.push((cui, assertion));
            }
        }
        if added.is_empty() {
            return None;
        }
        let mut expanded = self.target.clone();
        for (cui, assertion) in added {
            expanded.insert(cui, assertion);
            if let Some(meta) = candidate.meta(cui) {
                expanded.set_meta(cui, meta.clone());
            }
        }
        Some(expanded)
    }
}

/// Copy of `target` extended with the candidate CUIs it reaches through
/// synonym edges. `target` itself is not modified.
pub fn synonym_expand(
    target: &CuiSet,
    candidate: &CuiSet,
    graph: &ConceptGraph,
    options: SynonymOptions,
) -> CuiSet {
    SynonymExpander::new(graph, target, options)
        .expand(candidate)
        .unwrap_or_else(|| target.clone())
}
