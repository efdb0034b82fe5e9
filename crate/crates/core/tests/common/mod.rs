//! Shared fixtures, exact oracles, strategies and property bodies for the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use cuisim_core::graph::{bfs_discover, ConceptGraph, EdgeKind, TraversalEdges};
use cuisim_core::similarity::{
    prototypical, symmetric_tversky, tversky, DistanceConfig, Measure, PreferenceVector, Scorer,
};
use cuisim_core::umls::{
    build_catalog, default_relations, default_vocabularies, parse_mrconso, parse_mrrel, parse_mrsty,
    IngestSummary, ParseStats,
};
use cuisim_core::{Assertion, ConceptCatalog, ConceptMeta, Cui, CuiSet, EntityKind};
use num_rational::Ratio;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub type Q = Ratio<i64>;

// ------------------------------------------------------------------ fixtures

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(rel: &str) -> PathBuf {
    fixtures().join(rel)
}

pub fn cui(s: &str) -> Cui {
    s.parse().unwrap()
}

pub fn c(n: u32) -> Cui {
    Cui::new(n).unwrap()
}

pub struct Ingested {
    pub catalog: ConceptCatalog,
    pub conso: ParseStats,
    pub sty: ParseStats,
    pub rel: ParseStats,
    pub summary: IngestSummary,
}

pub fn ingest_fixture() -> Ingested {
    let dir = fixture("umls");
    let conso = parse_mrconso(&dir.join("MRCONSO.RRF"), &default_vocabularies()).unwrap();
    let sty = parse_mrsty(&dir.join("MRSTY.RRF")).unwrap();
    let rel = parse_mrrel(&dir.join("MRREL.RRF"), &default_relations()).unwrap();
    let (catalog, summary) = build_catalog(conso.items, sty.items, rel.items);
    Ingested {
        catalog,
        conso: conso.stats,
        sty: sty.stats,
        rel: rel.stats,
        summary,
    }
}

// ------------------------------------------------------------------ exact oracle

pub fn to_f64(q: Q) -> f64 {
    // Both parts are far below 2^53, so this is the correctly rounded value.
    *q.numer() as f64 / *q.denom() as f64
}

/// Exact value of a dyadic float with a small denominator.
pub fn q(x: f64) -> Q {
    let (mut v, mut d) = (x, 1i64);
    while v.fract() != 0.0 {
        v *= 2.0;
        d *= 2;
        assert!(d <= 1 << 40, "{x} is not a short dyadic");
    }
    Q::new(v as i64, d)
}

fn pairs(s: &CuiSet) -> BTreeSet<(Cui, Assertion)> {
    s.iter().collect()
}

/// Counts over `(cui, assertion)` pairs, computed with set algebra.
pub fn exact_counts(a: &CuiSet, b: &CuiSet) -> (i64, i64, i64) {
    let (pa, pb) = (pairs(a), pairs(b));
    let i = pa.intersection(&pb).count() as i64;
    (i, pa.len() as i64 - i, pb.len() as i64 - i)
}

fn quotient(i: Q, penalty: Q, both_empty: bool) -> Q {
    if both_empty {
        Q::from_integer(1)
    } else if i == Q::from_integer(0) {
        Q::from_integer(0)
    } else {
        i / (i + penalty)
    }
}

pub fn jaccard_exact(a: &CuiSet, b: &CuiSet) -> Q {
    let (pa, pb) = (pairs(a), pairs(b));
    let union = pa.union(&pb).count() as i64;
    if union == 0 {
        return Q::from_integer(1);
    }
    Q::new(pa.intersection(&pb).count() as i64, union)
}

pub fn dice_exact(a: &CuiSet, b: &CuiSet) -> Q {
    let (pa, pb) = (pairs(a), pairs(b));
    let total = (pa.len() + pb.len()) as i64;
    if total == 0 {
        return Q::from_integer(1);
    }
    Q::new(2 * pa.intersection(&pb).count() as i64, total)
}

pub fn tversky_exact(a: &CuiSet, b: &CuiSet, alpha: Q, beta: Q) -> Q {
    let (i, x, y) = exact_counts(a, b);
    quotient(Q::from(i), alpha * x + beta * y, i + x + y == 0)
}

pub fn symmetric_exact(a: &CuiSet, b: &CuiSet, alpha: Q, beta: Q) -> Q {
    let (i, x, y) = exact_counts(a, b);
    let one = Q::from_integer(1);
    let penalty = beta * (alpha * Q::from(x.min(y)) + (one - alpha) * Q::from(x.max(y)));
    quotient(Q::from(i), penalty, i + x + y == 0)
}

fn contradicts(x: Assertion, y: Assertion) -> bool {
    matches!(
        (x, y),
        (Assertion::Present, Assertion::Absent) | (Assertion::Absent, Assertion::Present)
    )
}

/// Element weight: max over the semantic types listed for the CUI on either
/// side, `default_weight` for unknown types and for CUIs with none.
pub fn weight_exact(cui: Cui, a: &CuiSet, b: &CuiSet, pref: &PreferenceVector) -> Q {
    let mut types = BTreeSet::new();
    for s in [a, b] {
        if let Some(m) = s.meta(cui) {
            types.extend(m.semantic_types.iter().cloned());
        }
    }
    let w = |t: &String| q(*pref.weights.get(t).unwrap_or(&pref.default_weight));
    types.iter().map(w).max().unwrap_or_else(|| q(pref.default_weight))
}

/// Weighted score with contradictions single-counted.
pub fn weighted_exact(a: &CuiSet, b: &CuiSet, pref: &PreferenceVector, beta: Q) -> Q {
    let zero = Q::from_integer(0);
    let (mut i, mut x, mut y, mut k) = (zero, zero, zero, zero);
    let all: BTreeSet<Cui> = a.cuis().chain(b.cuis()).collect();
    for cu in &all {
        let w = weight_exact(*cu, a, b, pref);
        match (a.assertion(*cu), b.assertion(*cu)) {
            (Some(p), Some(r)) if p == r => i += w,
            (Some(p), Some(r)) if contradicts(p, r) => k += w,
            (Some(_), Some(_)) => {
                x += w;
                y += w;
            }
            (Some(_), None) => x += w,
            (None, Some(_)) => y += w,
            (None, None) => unreachable!(),
        }
    }
    if all.is_empty() {
        return Q::from_integer(1);
    }
    let denominator = i + beta * x.max(y) + k;
    if denominator == zero || i == zero {
        return zero;
    }
    i / denominator
}

// ------------------------------------------------------------------ strategies

pub const TYPES: [&str; 5] = ["Disease", "Finding", "Body Part", "Region", "Device"];
pub const UNIVERSE: u32 = 24;

#[derive(Debug, Clone)]
pub struct Pair {
    pub a: CuiSet,
    pub b: CuiSet,
}

fn assertion() -> impl Strategy<Value = Assertion> {
    prop_oneof![
        4 => Just(Assertion::Present),
        3 => Just(Assertion::Absent),
        1 => Just(Assertion::Uncertain),
    ]
}

/// Per-CUI semantic types shared by both sides; `None` leaves the CUI without
/// metadata.
fn type_table() -> impl Strategy<Value = Vec<Option<BTreeSet<usize>>>> {
    prop::collection::vec(
        prop::option::weighted(0.8, prop::collection::btree_set(0..TYPES.len(), 1..=2)),
        UNIVERSE as usize,
    )
}

fn build_set(id: &str, elements: &BTreeMap<u32, Assertion>, table: &[Option<BTreeSet<usize>>]) -> CuiSet {
    let mut s = CuiSet::from_elements(id, elements.iter().map(|(n, x)| (c(*n), *x)));
    for n in elements.keys() {
        if let Some(types) = &table[(*n - 1) as usize] {
            s.set_meta(
                c(*n),
                ConceptMeta {
                    kind: EntityKind::Observation,
                    semantic_types: types.iter().map(|t| TYPES[*t].to_string()).collect(),
                    best_score: 1.0,
                },
            );
        }
    }
    s
}

fn elements() -> impl Strategy<Value = BTreeMap<u32, Assertion>> {
    prop::collection::btree_map(1..=UNIVERSE, assertion(), 0..=12)
}

pub fn pair() -> impl Strategy<Value = Pair> {
    (elements(), elements(), type_table()).prop_map(|(ea, eb, table)| Pair {
        a: build_set("a", &ea, &table),
        b: build_set("b", &eb, &table),
    })
}

/// Pairs sharing a sizeable common core, so intersections are rarely empty.
pub fn overlapping_pair() -> impl Strategy<Value = Pair> {
    (elements(), elements(), elements(), type_table()).prop_map(|(core, ea, eb, table)| {
        let mut a = core.clone();
        let mut b = core;
        a.extend(ea);
        b.extend(eb);
        Pair {
            a: build_set("a", &a, &table),
            b: build_set("b", &b, &table),
        }
    })
}

/// Arbitrary positive weights.
pub fn preference() -> impl Strategy<Value = PreferenceVector> {
    (prop::collection::vec(0.01f64..4.0, TYPES.len()), 0.01f64..4.0).prop_map(|(ws, d)| {
        let mut p = PreferenceVector::uniform();
        p.default_weight = d;
        for (t, w) in TYPES.iter().zip(ws) {
            p = p.with_weight(t, w);
        }
        p
    })
}

/// Positive multiples of 1/16, so every weight sum is exact.
pub fn dyadic_preference() -> impl Strategy<Value = PreferenceVector> {
    (prop::collection::vec(1u32..=64, TYPES.len()), 1u32..=64).prop_map(|(ws, d)| {
        let mut p = PreferenceVector::uniform();
        p.default_weight = d as f64 / 16.0;
        for (t, w) in TYPES.iter().zip(ws) {
            p = p.with_weight(t, w as f64 / 16.0);
        }
        p
    })
}

pub fn weighted_config(pref: PreferenceVector, beta: f64) -> DistanceConfig {
    DistanceConfig {
        measure: Measure::Weighted,
        beta,
        preference: pref,
        ..DistanceConfig::default()
    }
}

pub fn score(cfg: &DistanceConfig, a: &CuiSet, b: &CuiSet) -> f64 {
    Scorer::new(cfg.clone(), None).unwrap().compare(a, b).score
}

// ------------------------------------------------------------------ properties

type PropResult = Result<(), TestCaseError>;

/// Jaccard, Dice and prototypical identities, checked against exact rationals.
pub fn prop_identities(p: &Pair) -> PropResult {
    let (a, b) = (&p.a, &p.b);
    let one = Q::from_integer(1);
    let half = Q::new(1, 2);
    let j = jaccard_exact(a, b);
    prop_assert_eq!(tversky_exact(a, b, one, one), j);
    prop_assert_eq!(tversky(a, b, 1.0, 1.0), to_f64(j));
    let d = dice_exact(a, b);
    prop_assert_eq!(tversky_exact(a, b, half, half), d);
    prop_assert_eq!(tversky(a, b, 0.5, 0.5), to_f64(d));
    for beta in [1.0, 2.0, 0.5] {
        let exact = symmetric_exact(a, b, Q::from_integer(0), q(beta));
        prop_assert_eq!(prototypical(a, b, beta), to_f64(exact));
        prop_assert_eq!(symmetric_tversky(a, b, 0.0, beta), to_f64(exact));
        let via_proto = score(
            &DistanceConfig {
                measure: Measure::Prototypical,
                beta,
                ..Default::default()
            },
            a,
            b,
        );
        let via_sym = score(
            &DistanceConfig {
                measure: Measure::Symmetric,
                alpha: 0.0,
                beta,
                ..Default::default()
            },
            a,
            b,
        );
        prop_assert_eq!(via_proto, via_sym);
        prop_assert_eq!(via_proto, to_f64(exact));
    }
    Ok(())
}

/// Exact symmetry and [0, 1] bounds for the symmetric and weighted measures.
pub fn prop_symmetry_bounds(p: &Pair, pref: &PreferenceVector, alpha: f64, beta: f64) -> PropResult {
    let sym = DistanceConfig {
        measure: Measure::Symmetric,
        alpha,
        beta,
        ..Default::default()
    };
    let weighted = weighted_config(pref.clone(), beta);
    for cfg in [&sym, &weighted] {
        let ab = score(cfg, &p.a, &p.b);
        let ba = score(cfg, &p.b, &p.a);
        prop_assert_eq!(ab.to_bits(), ba.to_bits(), "{} not symmetric", cfg.measure);
        prop_assert!((0.0..=1.0).contains(&ab), "{} out of range: {}", cfg.measure, ab);
    }
    Ok(())
}

/// The weighted score equals the exact rational score when all sums are exact.
pub fn prop_weighted_matches_oracle(p: &Pair, pref: &PreferenceVector, beta_sixteenths: u32) -> PropResult {
    let beta = beta_sixteenths as f64 / 16.0;
    let got = score(&weighted_config(pref.clone(), beta), &p.a, &p.b);
    prop_assert_eq!(got, to_f64(weighted_exact(&p.a, &p.b, pref, q(beta))));
    Ok(())
}

/// Flips `flips` shared Present/Absent elements of `b` to the opposite
/// reading and checks the weighted score strictly drops.
pub fn prop_contradiction_injection(p: &Pair, pref: &PreferenceVector, beta: f64, flips: usize) -> PropResult {
    let cfg = weighted_config(pref.clone(), beta);
    let before = score(&cfg, &p.a, &p.b);
    prop_assume!(before > 0.0);
    let shared: Vec<(Cui, Assertion)> = p
        .a
        .iter()
        .filter(|(cu, x)| *x != Assertion::Uncertain && p.b.assertion(*cu) == Some(*x))
        .collect();
    prop_assume!(!shared.is_empty());
    let mut b = p.b.clone();
    let flips = flips.clamp(1, shared.len());
    for (cu, x) in shared.iter().take(flips) {
        let opposite = if *x == Assertion::Present {
            Assertion::Absent
        } else {
            Assertion::Present
        };
        b = CuiSet::from_elements(
            "b",
            b.iter().map(|(k, y)| (k, if k == *cu { opposite } else { y })),
        )
        .with_meta_of(&p.b);
    }
    let out = Scorer::new(cfg, None).unwrap().compare(&p.a, &b);
    prop_assert!(out.contradiction_count() >= flips);
    prop_assert!(out.score < before, "{} !< {}", out.score, before);
    Ok(())
}

/// Multiplying every weight by `lambda` leaves the score bit-identical.
pub fn prop_scaling(p: &Pair, pref: &PreferenceVector, lambda: f64) -> PropResult {
    let base = score(&weighted_config(pref.clone(), 1.0), &p.a, &p.b);
    let scaled = score(&weighted_config(pref.scaled(lambda), 1.0), &p.a, &p.b);
    prop_assert_eq!(base.to_bits(), scaled.to_bits(), "lambda {}", lambda);
    Ok(())
}

/// Elements whose only semantic type weighs 0 do not move the score.
pub fn prop_zero_weight(p: &Pair, pref: &PreferenceVector, extra_a: &BTreeMap<u32, Assertion>, extra_b: &BTreeMap<u32, Assertion>) -> PropResult {
    prop_assume!(!(p.a.is_empty() && p.b.is_empty()));
    let pref = pref.clone().with_weight("Zero", 0.0);
    let cfg = weighted_config(pref, 1.0);
    let base = score(&cfg, &p.a, &p.b);
    let add = |s: &CuiSet, extra: &BTreeMap<u32, Assertion>| {
        let mut out = s.clone();
        for (n, x) in extra {
            let cu = c(100 + n);
            out.insert(cu, *x);
            out.set_meta(
                cu,
                ConceptMeta {
                    kind: EntityKind::Observation,
                    semantic_types: ["Zero".to_string()].into(),
                    best_score: 1.0,
                },
            );
        }
        out
    };
    let after = score(&cfg, &add(&p.a, extra_a), &add(&p.b, extra_b));
    prop_assert_eq!(base.to_bits(), after.to_bits());
    Ok(())
}

pub fn zero_weight_extras() -> impl Strategy<Value = BTreeMap<u32, Assertion>> {
    prop::collection::btree_map(1u32..=12, assertion(), 0..=6)
}

pub trait WithMetaOf {
    fn with_meta_of(self, other: &CuiSet) -> CuiSet;
}

impl WithMetaOf for CuiSet {
    fn with_meta_of(mut self, other: &CuiSet) -> CuiSet {
        for (cu, m) in other.concept_meta() {
            if self.contains(*cu) {
                self.set_meta(*cu, m.clone());
            }
        }
        self
    }
}

// ------------------------------------------------------------------ graphs

#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub nodes: u32,
    pub edges: Vec<(u32, u32, EdgeKind)>,
    pub seeds: BTreeSet<u32>,
    pub depth: usize,
}

pub fn random_graph() -> impl Strategy<Value = RandomGraph> {
    (1u32..=50).prop_flat_map(|n| {
        let edge = (1..=n, 1..=n, prop_oneof![Just(EdgeKind::Hierarchy), Just(EdgeKind::Synonym)]);
        (
            Just(n),
            prop::collection::vec(edge, 0..=(2 * n as usize)),
            prop::collection::btree_set(1..=n + 2, 0..=4),
            0usize..=10,
        )
            .prop_map(|(nodes, edges, seeds, depth)| RandomGraph {
                nodes,
                edges,
                seeds,
                depth,
            })
    })
}

impl RandomGraph {
    pub fn build(&self) -> ConceptGraph {
        ConceptGraph::from_parts(
            (1..=self.nodes).map(c),
            self.edges.iter().map(|(u, v, k)| (c(*u), c(*v), *k)),
            [],
            BTreeSet::new(),
        )
    }

    /// All-pairs distances by Floyd–Warshall over the allowed edges; seeds
    /// outside the node range keep distance 0 to themselves only.
    pub fn distances_from_seeds(&self, traversal: TraversalEdges) -> BTreeMap<u32, usize> {
        let n = (self.nodes + 3) as usize;
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        // A pair carrying both kinds counts as a synonym edge.
        let mut kinds: BTreeMap<(u32, u32), EdgeKind> = BTreeMap::new();
        for (u, v, k) in &self.edges {
            if u == v {
                continue;
            }
            let key = (*u.min(v), *u.max(v));
            let slot = kinds.entry(key).or_insert(*k);
            if *k == EdgeKind::Synonym {
                *slot = EdgeKind::Synonym;
            }
        }
        for ((u, v), k) in kinds {
            let ok = match traversal {
                TraversalEdges::Both => true,
                TraversalEdges::Hierarchy => k == EdgeKind::Hierarchy,
                TraversalEdges::Synonym => k == EdgeKind::Synonym,
            };
            if ok {
                d[u as usize][v as usize] = 1;
                d[v as usize][u as usize] = 1;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i][k] + d[k][j];
                    if via < d[i][j] {
                        d[i][j] = via;
                    }
                }
            }
        }
        let mut out = BTreeMap::new();
        for v in 1..n as u32 {
            let best = self.seeds.iter().map(|s| d[*s as usize][v as usize]).min();
            if let Some(dist) = best.filter(|x| *x < inf) {
                out.insert(v, dist);
            }
        }
        out
    }
}

/// `bfs_discover` equals brute-force distance filtering, for all three
/// traversal modes.
pub fn prop_bfs_oracle(g: &RandomGraph) -> PropResult {
    let graph = g.build();
    for traversal in [TraversalEdges::Both, TraversalEdges::Hierarchy, TraversalEdges::Synonym] {
        let dist = g.distances_from_seeds(traversal);
        let expected: BTreeSet<Cui> = dist.iter().filter(|(_, d)| **d <= g.depth).map(|(v, _)| c(*v)).collect();
        let got = bfs_discover(&graph, g.seeds.iter().map(|s| c(*s)), g.depth, traversal);
        prop_assert_eq!(&got.reached, &expected, "{:?}", traversal);
        let mut sizes = vec![0usize; got.depth_used + 1];
        for d in dist.values().filter(|d| **d <= g.depth) {
            sizes[*d] += 1;
        }
        if g.seeds.is_empty() {
            prop_assert_eq!(got.frontier_sizes, vec![0]);
        } else {
            prop_assert_eq!(&got.frontier_sizes, &sizes);
            let deepest = dist.values().filter(|d| **d <= g.depth).max().copied().unwrap_or(0);
            prop_assert_eq!(got.depth_used, deepest);
        }
    }
    Ok(())
}

/// Breadth-first distances by a plain queue, used to cross-check the Floyd–
/// Warshall oracle itself.
pub fn queue_distances(g: &RandomGraph) -> BTreeMap<u32, usize> {
    let mut adj: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for (u, v, _) in &g.edges {
        if u != v {
            adj.entry(*u).or_default().insert(*v);
            adj.entry(*v).or_default().insert(*u);
        }
    }
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    for s in &g.seeds {
        dist.insert(*s, 0);
        queue.push_back(*s);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        for v in adj.get(&u).into_iter().flatten() {
            if !dist.contains_key(v) {
                dist.insert(*v, du + 1);
                queue.push_back(*v);
            }
        }
    }
    dist
}

// ------------------------------------------------------------------ runner

/// Runs `cases` deterministic cases of a property outside the proptest macro.
pub fn run_cases<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> PropResult,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let config = Config {
        cases,
        failure_persistence: None,
        max_global_rejects: cases * 50,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

// ------------------------------------------------------------------ annotations

use cuisim_core::report::{AnnotatedEntity, AssertionRules, ReportAnnotation, SentenceAnnotation};

const WORDS: [&str; 14] = [
    "no", "effusion", "lung", "left", "without", "mild", "opacity", "base", "resolved", "heart",
    "normal", "free", "of", ".",
];

/// Entity draft: head position, extra tokens, is-anatomy, assertion, relations.
type EntityDraft = (usize, usize, bool, Assertion, Vec<(bool, usize)>);

fn sentence() -> impl Strategy<Value = (Vec<usize>, Vec<EntityDraft>)> {
    (1usize..=8).prop_flat_map(|n| {
        let entity = (
            0..n,
            0usize..=1,
            any::<bool>(),
            assertion(),
            prop::collection::vec((any::<bool>(), 0usize..4), 0..=2),
        );
        (
            prop::collection::vec(0..WORDS.len(), n),
            prop::collection::vec(entity, 0..=4),
        )
    })
}

/// Random two-granularity annotations; the report level repeats the sentence
/// entities with shifted spans and, for variety, flipped assertions.
pub fn annotation() -> impl Strategy<Value = ReportAnnotation> {
    (prop::collection::vec(sentence(), 1..=5), any::<u64>()).prop_map(|(sentences, salt)| {
        let mut out = ReportAnnotation {
            report_id: "rand".into(),
            text: String::new(),
            report_level: Vec::new(),
            sentences: Vec::new(),
        };
        let mut texts = Vec::new();
        let mut offset = 0;
        for (ix, (words, ents)) in sentences.into_iter().enumerate() {
            let n = words.len();
            let text = words.iter().map(|w| WORDS[*w]).collect::<Vec<_>>().join(" ");
            let count = ents.len();
            let mut local = Vec::new();
            for (start, extra, anatomy, a, rels) in ents {
                let end = (start + extra).min(n - 1);
                let kind = if anatomy { EntityKind::Anatomy } else { EntityKind::Observation };
                let tokens = text.split(' ').skip(start).take(end - start + 1).collect::<Vec<_>>().join(" ");
                let mut e = AnnotatedEntity::new(&tokens, (start, end), kind, a);
                for (modify, t) in rels {
                    if t < count {
                        e = e.with_relation(if modify { "modify" } else { "located_at" }, t);
                    }
                }
                local.push(e);
            }
            let base = out.report_level.len();
            for (k, e) in local.iter().enumerate() {
                let mut r = e.clone();
                r.span = (e.span.0 + offset, e.span.1 + offset);
                for rel in &mut r.relations {
                    rel.target += base;
                }
                if (salt >> ((base + k) % 64)) & 1 == 1 {
                    r.assertion = match r.assertion {
                        Assertion::Present => Assertion::Absent,
                        Assertion::Absent => Assertion::Present,
                        x => x,
                    };
                }
                out.report_level.push(r);
            }
            out.sentences.push(SentenceAnnotation {
                index: ix,
                text: text.clone(),
                token_offset: offset,
                entities: local,
            });
            texts.push(text);
            offset += n;
        }
        out.text = texts.join(" ");
        out.validate().expect("generated annotation is valid");
        out
    })
}

/// Each rule is a fixed point after one pass. Their composition is not: an
/// anatomy negated as an orphan can seed a later propagation pass.
pub fn prop_rules_idempotent(a: &ReportAnnotation) -> PropResult {
    let rules = AssertionRules::default();
    type Rule<'r> = &'r dyn Fn(&ReportAnnotation) -> ReportAnnotation;
    let steps: [(&str, Rule); 3] = [
        ("short-phrase fix", &|x| rules.fix_short_phrase_assertions(x)),
        ("negation propagation", &|x| rules.propagate_negations(x)),
        ("orphan anatomies", &|x| rules.negate_orphan_anatomies(x)),
    ];
    for (name, f) in steps {
        let once = f(a);
        prop_assert_eq!(&f(&once), &once, "{} not idempotent", name);
    }
    Ok(())
}

pub fn read_one_annotation(rel: &str) -> ReportAnnotation {
    let mut all = cuisim_core::report::read_annotations(&fixture(rel)).unwrap();
    assert_eq!(all.len(), 1);
    all.remove(0)
}

// ------------------------------------------------------------------ retrieval

use cuisim_core::retrieval::{HarnessPlan, PlanSpec, ReportIndex, SearchOptions};

/// SplitMix64; enough randomness for synthetic corpora.
pub struct Mix(pub u64);

impl Mix {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

pub fn random_report(rng: &mut Mix, id: &str, universe: u64) -> CuiSet {
    let n = 1 + rng.below(10);
    let elements: Vec<(Cui, Assertion)> = (0..n)
        .map(|_| {
            let a = match rng.below(8) {
                0..=4 => Assertion::Present,
                5 | 6 => Assertion::Absent,
                _ => Assertion::Uncertain,
            };
            (c(1 + rng.below(universe) as u32), a)
        })
        .collect();
    CuiSet::from_elements(id, elements)
}

pub struct Synthetic {
    pub index: ReportIndex,
    pub balanced: BTreeMap<String, String>,
    pub retrieval: BTreeSet<String>,
    pub classes: Vec<String>,
}

/// `classes` classes with `queries + 2` balanced reports each (the extra two
/// go to the retrieval set) plus `pool` unlabeled retrieval reports.
pub fn synthetic_corpus(seed: u64, classes: usize, queries: usize, pool: usize) -> Synthetic {
    let mut rng = Mix(seed);
    let names: Vec<String> = (0..classes).map(|k| format!("class{k}")).collect();
    let mut sets = Vec::new();
    let mut balanced = BTreeMap::new();
    let mut retrieval = BTreeSet::new();
    for (k, class) in names.iter().enumerate() {
        for j in 0..queries + 2 {
            let id = format!("b{k}-{j:02}");
            sets.push(random_report(&mut rng, &id, 200));
            balanced.insert(id.clone(), class.clone());
            if j >= queries {
                retrieval.insert(id);
            }
        }
    }
    for j in 0..pool {
        let id = format!("p{j:04}");
        sets.push(random_report(&mut rng, &id, 200));
        retrieval.insert(id);
    }
    Synthetic {
        index: ReportIndex::build(sets).unwrap(),
        balanced,
        retrieval,
        classes: names,
    }
}

impl Synthetic {
    pub fn plan(&self, queries_per_class: usize) -> cuisim_core::Result<HarnessPlan> {
        let spec = PlanSpec {
            classes: self.classes.clone(),
            queries_per_class,
            search: SearchOptions {
                discovery: false,
                ..Default::default()
            },
            ..Default::default()
        };
        HarnessPlan::resolve(&spec, self.balanced.clone(), self.retrieval.clone(), &self.index)
    }
}

pub fn read_fixture_reports() -> Vec<CuiSet> {
    cuisim_core::cuiset::read_jsonl(&fixture("retrieval/reports.jsonl"), true).unwrap().sets
}

pub fn fixture_preference() -> PreferenceVector {
    PreferenceVector::uniform()
        .with_weight("Body Part, Organ, or Organ Component", 0.5)
        .with_weight("Body Location or Region", 0.25)
}

/// Exact score of `candidate` against `query` under `cfg`.
pub fn exact_score(cfg: &DistanceConfig, query: &CuiSet, candidate: &CuiSet) -> Q {
    match cfg.measure {
        Measure::Tversky => tversky_exact(query, candidate, q(cfg.alpha), q(cfg.beta)),
        Measure::Symmetric => symmetric_exact(query, candidate, q(cfg.alpha), q(cfg.beta)),
        Measure::Prototypical => symmetric_exact(query, candidate, Q::from_integer(0), q(cfg.beta)),
        Measure::Weighted => weighted_exact(query, candidate, &cfg.preference, q(cfg.beta)),
    }
}

/// Search with discovery off equals an exhaustive argsort by exact score,
/// ties broken by ascending report id, for every query of the fixture.
pub fn check_search_oracle(measure: Measure) -> Result<(), String> {
    use cuisim_core::retrieval::search;
    let sets = read_fixture_reports();
    let index = ReportIndex::build(sets.clone()).unwrap();
    let cfg = DistanceConfig {
        measure,
        preference: fixture_preference(),
        ..Default::default()
    };
    let scorer = Scorer::new(cfg.clone(), None).unwrap();
    let opts = SearchOptions {
        k: 0,
        discovery: false,
        ..Default::default()
    };
    for query in &sets {
        let mut expected: Vec<(Q, &str)> = sets
            .iter()
            .map(|s| (exact_score(&cfg, query, s), s.report_id.as_str()))
            .collect();
        expected.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        let got = search(query, &index, None, &scorer, &opts);
        let got_ids: Vec<&str> = got.ids().collect();
        let want_ids: Vec<&str> = expected.iter().map(|e| e.1).collect();
        if got_ids != want_ids {
            return Err(format!("{measure} query {}: {got_ids:?} != {want_ids:?}", query.report_id));
        }
        for (e, (x, _)) in got.entries.iter().zip(&expected) {
            if e.score != to_f64(*x) {
                return Err(format!("{measure} query {} report {}: {} != {}", query.report_id, e.report_id, e.score, x));
            }
        }
        let top5 = search(query, &index, None, &scorer, &SearchOptions { k: 5, ..opts });
        if top5.ids().collect::<Vec<_>>() != want_ids[..5] {
            return Err(format!("{measure} query {}: top-5 is not a prefix", query.report_id));
        }
    }
    Ok(())
}

/// The fixture plan, written out in code; it mirrors `retrieval/plan.toml`.
pub fn fixture_harness() -> (HarnessPlan, ReportIndex, DistanceConfig) {
    let index = ReportIndex::build(read_fixture_reports()).unwrap();
    let text = std::fs::read_to_string(fixture("retrieval/balanced.csv")).unwrap();
    let balanced: BTreeMap<String, String> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (id, class) = l.split_once(',').unwrap();
            (id.to_string(), class.to_string())
        })
        .collect();
    let retrieval: BTreeSet<String> = std::fs::read_to_string(fixture("retrieval/retrieval_ids.txt"))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    let spec = PlanSpec {
        classes: ["Pneumothorax", "Pleural Effusion", "Pneumonia"].map(String::from).to_vec(),
        queries_per_class: 2,
        budget_per_class: Some(4),
        search: SearchOptions {
            discovery: false,
            ..Default::default()
        },
        ..Default::default()
    };
    let plan = HarnessPlan::resolve(&spec, balanced, retrieval, &index).unwrap();
    let cfg = DistanceConfig {
        preference: fixture_preference(),
        ..Default::default()
    };
    (plan, index, cfg)
}
