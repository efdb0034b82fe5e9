//! Seeded synthetic corpora for the criterion benches.

use cuisim_core::graph::{default_synonym_relations, EdgeKind};
use cuisim_core::{Assertion, ConceptGraph, ConceptMeta, Cui, CuiSet, EntityKind, PreferenceVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEMANTIC_TYPES: [&str; 6] = [
    "Disease or Syndrome",
    "Finding",
    "Sign or Symptom",
    "Body Part, Organ, or Organ Component",
    "Body Location or Region",
    "Medical Device",
];

#[derive(Debug, Clone, Copy)]
pub struct CorpusShape {
    pub reports: usize,
    /// Distinct CUIs to draw from.
    pub universe: u32,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for CorpusShape {
    fn default() -> Self {
        CorpusShape {
            reports: 1000,
            universe: 2000,
            min_len: 3,
            max_len: 20,
        }
    }
}

fn cui(n: u32) -> Cui {
    Cui::new(n + 1).expect("synthetic CUI in range")
}

fn assertion(rng: &mut ChaCha8Rng) -> Assertion {
    match rng.gen_range(0..10) {
        0..=5 => Assertion::Present,
        6..=8 => Assertion::Absent,
        _ => Assertion::Uncertain,
    }
}

/// Semantic type of a synthetic CUI; fixed per CUI so metadata agrees across reports.
pub fn type_of(n: u32) -> &'static str {
    SEMANTIC_TYPES[(n as usize * 7 + 3) % SEMANTIC_TYPES.len()]
}

/// Reports `r00000`, `r00001`, ... with metadata on every element.
pub fn reports(shape: CorpusShape, seed: u64) -> Vec<CuiSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..shape.reports)
        .map(|i| {
            let len = rng.gen_range(shape.min_len..=shape.max_len);
            let mut set = CuiSet::new(format!("r{i:05}"));
            for _ in 0..len {
                let n = rng.gen_range(0..shape.universe);
                set.insert(cui(n), assertion(&mut rng));
                set.set_meta(
                    cui(n),
                    ConceptMeta {
                        kind: EntityKind::Observation,
                        semantic_types: [type_of(n).to_string()].into(),
                        best_score: 1.0,
                    },
                );
            }
            set
        })
        .collect()
}

/// A sparse random graph over `nodes` CUIs with roughly `degree` edges per
/// node; one edge in ten is a synonym edge.
pub fn graph(nodes: u32, degree: usize, seed: u64) -> ConceptGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<(Cui, Cui, EdgeKind)> = (0..nodes as usize * degree / 2)
        .filter_map(|_| {
            let a = rng.gen_range(0..nodes);
            let b = rng.gen_range(0..nodes);
            let kind = if rng.gen_ratio(1, 10) { EdgeKind::Synonym } else { EdgeKind::Hierarchy };
            (a != b).then(|| (cui(a), cui(b), kind))
        })
        .collect();
    ConceptGraph::from_parts((0..nodes).map(cui), edges, [], default_synonym_relations())
}

/// Preference weights over [`SEMANTIC_TYPES`] in `[0.25, 2]`.
pub fn preference(seed: u64) -> PreferenceVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SEMANTIC_TYPES
        .iter()
        .fold(PreferenceVector::uniform(), |p, t| p.with_weight(t, rng.gen_range(1..=8) as f64 / 4.0))
}

/// `count` distinct seeds drawn from the graph's nodes.
pub fn seeds(nodes: u32, count: usize, seed: u64) -> Vec<Cui> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<u32> = (0..nodes).collect();
    all.shuffle(&mut rng);
    all.into_iter().take(count).map(cui).collect()
}
