//! The Tversky distance family over CUI sets.
//!
//! Elements are `(cui, assertion)` pairs: two sets share an element only when
//! they hold the same CUI with the same assertion. The unweighted measures give
//! every element weight 1. The weighted measure takes element weights from a
//! [`PreferenceVector`] keyed by semantic type and adds a penalty for
//! contradicted concepts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cuiset::CuiSet;
use crate::error::{Error, Result};
use crate::graph::{ConceptGraph, SynonymExpander, SynonymOptions};
use crate::types::Cui;

/// How the weights of a concept's semantic types combine into one element
/// weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightAggregation {
    #[default]
    Max,
    Sum,
}

/// Nonnegative weight per semantic-type name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferenceVector {
    pub weights: BTreeMap<String, f64>,
    /// Weight of types not listed in `weights`, and of concepts with no known
    /// semantic type.
    pub default_weight: f64,
    pub aggregation: WeightAggregation,
}

impl Default for PreferenceVector {
    fn default() -> Self {
        PreferenceVector::uniform()
    }
}

impl PreferenceVector {
    /// Every type weighs 1.
    pub fn uniform() -> Self {
        PreferenceVector {
            weights: BTreeMap::new(),
            default_weight: 1.0,
            aggregation: WeightAggregation::Max,
        }
    }

    pub fn with_weight(mut self, semantic_type: &str, weight: f64) -> Self {
        self.weights.insert(semantic_type.to_string(), weight);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |w: f64| !w.is_finite() || w < 0.0;
        if bad(self.default_weight) {
            return Err(Error::Config(format!(
                "default_weight must be a finite nonnegative number, got {}",
                self.default_weight
            )));
        }
        if let Some((t, w)) = self.weights.iter().find(|(_, w)| bad(**w)) {
            return Err(Error::Config(format!(
                "weight for {t:?} must be a finite nonnegative number, got {w}"
            )));
        }
        if self.default_weight == 0.0 && self.weights.values().all(|w| *w == 0.0) {
            return Err(Error::Config("preference vector is all zero".into()));
        }
        Ok(())
    }

    fn type_weight(&self, semantic_type: &str) -> f64 {
        self.weights.get(semantic_type).copied().unwrap_or(self.default_weight)
    }

    pub fn weight_of<'t>(&self, semantic_types: impl IntoIterator<Item = &'t String>) -> f64 {
        let mut weights = semantic_types.into_iter().map(|t| self.type_weight(t)).peekable();
        if weights.peek().is_none() {
            return self.default_weight;
        }
        match self.aggregation {
            WeightAggregation::Max => weights.fold(0.0, f64::max),
            WeightAggregation::Sum => weights.sum(),
        }
    }

    /// Every weight multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        PreferenceVector {
            weights: self.weights.iter().map(|(k, w)| (k.clone(), w * lambda)).collect(),
            default_weight: self.default_weight * lambda,
            aggregation: self.aggregation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Tversky,
    Symmetric,
    Prototypical,
    #[default]
    Weighted,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::Tversky,
        Measure::Symmetric,
        Measure::Prototypical,
        Measure::Weighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Tversky => "tversky",
            Measure::Symmetric => "symmetric",
            Measure::Prototypical => "prototypical",
            Measure::Weighted => "weighted",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown measure {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub measure: Measure,
    pub alpha: f64,
    pub beta: f64,
    pub contradictions_enabled: bool,
    /// Also add a contradicted concept's weight to both difference tallies.
    pub double_count_contradictions: bool,
    pub synonym_expansion_enabled: bool,
    /// Expand the candidate against the target as well as the target against
    /// the candidate.
    pub expand_both: bool,
    pub synonym: SynonymOptions,
    pub preference: PreferenceVector,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            measure: Measure::Weighted,
            alpha: 0.5,
            beta: 1.0,
            contradictions_enabled: true,
            double_count_contradictions: false,
            synonym_expansion_enabled: false,
            expand_both: false,
            synonym: SynonymOptions::default(),
            preference: PreferenceVector::uniform(),
        }
    }
}

impl DistanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        self.preference.validate()
    }
}

/// Element counts of two sets, matching on `(cui, assertion)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SetCounts {
    pub intersection: usize,
    pub a_only: usize,
    pub b_only: usize,
}

impl SetCounts {
    pub fn of(a: &CuiSet, b: &CuiSet) -> Self {
        let intersection = a.iter().filter(|(c, x)| b.assertion(*c) == Some(*x)).count();
        SetCounts {
            intersection,
            a_only: a.len() - intersection,
            b_only: b.len() - intersection,
        }
    }

    fn is_empty_pair(&self) -> bool {
        self.intersection == 0 && self.a_only == 0 && self.b_only == 0
    }
}

/// `inter / (inter + penalty)`, with 1 for two empty sets and 0 whenever the
/// intersection is empty.
fn ratio(inter: f64, penalty: f64, both_empty: bool) -> f64 {
    if both_empty {
        1.0
    } else if inter == 0.0 {
        0.0
    } else {
        inter / (inter + penalty)
    }
}

fn symmetric_penalty(x: f64, y: f64, alpha: f64, beta: f64) -> f64 {
    beta * (alpha * x.min(y) + (1.0 - alpha) * x.max(y))
}

/// `|A∩B| / (|A∩B| + α|A\B| + β|B\A|)`.
pub fn tversky(a: &CuiSet, b: &CuiSet, alpha: f64, beta: f64) -> f64 {
    let n = SetCounts::of(a, b);
    ratio(
        n.intersection as f64,
        alpha * n.a_only as f64 + beta * n.b_only as f64,
        n.is_empty_pair(),
    )
}

/// Tversky with the prototype chosen per pair: `α` weighs the smaller
/// difference and `1 − α` the larger one.
pub fn symmetric_tversky(a: &CuiSet, b: &CuiSet, alpha: f64, beta: f64) -> f64 {
    let n = SetCounts::of(a, b);
    ratio(
        n.intersection as f64,
        symmetric_penalty(n.a_only as f64, n.b_only as f64, alpha, beta),
        n.is_empty_pair(),
    )
}

/// `|A∩B| / (|A∩B| + β·max(|A\B|, |B\A|))`.
pub fn prototypical(a: &CuiSet, b: &CuiSet, beta: f64) -> f64 {
    symmetric_tversky(a, b, 0.0, beta)
}

/// CUIs asserted Present in one set and Absent in the other.
pub fn count_contradictions(a: &CuiSet, b: &CuiSet) -> (usize, BTreeSet<Cui>) {
    let cuis: BTreeSet<Cui> = a
        .iter()
        .filter(|(c, x)| b.assertion(*c).is_some_and(|y| x.contradicts(y)))
        .map(|(c, _)| c)
        .collect();
    (cuis.len(), cuis)
}

/// Score and the terms it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBreakdown {
    pub measure: Measure,
    pub score: f64,
    pub intersection_weight: f64,
    /// Weight of elements only in the target.
    pub a_difference_weight: f64,
    /// Weight of elements only in the candidate.
    pub b_difference_weight: f64,
    pub max_difference_weight: f64,
    pub min_difference_weight: f64,
    pub contradiction_weight: f64,
    pub contradicted_cuis: BTreeSet<Cui>,
    pub alpha: f64,
    pub beta: f64,
    /// The denominator vanished for a non-empty pair and the score was set to 0.
    pub degenerate: bool,
    /// Number of CUIs synonym expansion added to either side.
    pub expanded: usize,
}

impl ComparisonBreakdown {
    fn finish(mut self, both_empty: bool) -> Self {
        let (penalty, denominator) = self.penalty_and_denominator();
        self.degenerate = !both_empty && denominator == 0.0;
        self.score = if both_empty {
            1.0
        } else if self.degenerate || self.intersection_weight == 0.0 {
            0.0
        } else {
            self.intersection_weight / (self.intersection_weight + penalty)
        };
        self
    }

    fn penalty_and_denominator(&self) -> (f64, f64) {
        let penalty = match self.measure {
            Measure::Tversky => self.alpha * self.a_difference_weight + self.beta * self.b_difference_weight,
            Measure::Symmetric => symmetric_penalty(
                self.a_difference_weight,
                self.b_difference_weight,
                self.alpha,
                self.beta,
            ),
            Measure::Prototypical => self.beta * self.max_difference_weight,
            Measure::Weighted => self.beta * self.max_difference_weight + self.contradiction_weight,
        };
        (penalty, self.intersection_weight + penalty)
    }

    /// The score recomputed from the stored terms.
    pub fn recompute(&self) -> f64 {
        let (penalty, denominator) = self.penalty_and_denominator();
        if denominator == 0.0 {
            if self.degenerate {
                0.0
            } else {
                1.0
            }
        } else if self.intersection_weight == 0.0 {
            0.0
        } else {
            self.intersection_weight / (self.intersection_weight + penalty)
        }
    }

    pub fn contradiction_count(&self) -> usize {
        self.contradicted_cuis.len()
    }
}

fn element_weight(cui: Cui, a: &CuiSet, b: &CuiSet, preference: &PreferenceVector) -> f64 {
    let types = a
        .meta(cui)
        .into_iter()
        .chain(b.meta(cui))
        .flat_map(|m| m.semantic_types.iter())
        .collect::<BTreeSet<_>>();
    preference.weight_of(types)
}

/// Preference-weighted distance with contradiction penalty:
/// `ΣW∩ / (ΣW∩ + β·max(ΣW_{A\B}, ΣW_{B\A}) + ΣW_contr)`.
///
/// A contradicted CUI is left out of the intersection and both differences
/// and counts once in the contradiction term. With contradictions disabled it
/// is left out entirely. No synonym expansion happens here; see [`Scorer`].
pub fn weighted_distance(a: &CuiSet, b: &CuiSet, config: &DistanceConfig) -> Result<ComparisonBreakdown> {
    config.validate()?;
    Ok(weighted_unchecked(a, b, config))
}

fn weighted_unchecked(a: &CuiSet, b: &CuiSet, config: &DistanceConfig) -> ComparisonBreakdown {
    let mut inter = 0.0;
    let mut a_diff = 0.0;
    let mut b_diff = 0.0;
    let mut contr = 0.0;
    let mut contradicted = BTreeSet::new();
    let weight = |cui| element_weight(cui, a, b, &config.preference);
    // Walk the union in CUI order so both argument orders add the same terms
    // in the same sequence.
    let union: BTreeSet<Cui> = a.cuis().chain(b.cuis()).collect();
    for cui in union {
        match (a.assertion(cui), b.assertion(cui)) {
            (Some(x), Some(y)) if x == y => inter += weight(cui),
            (Some(x), Some(y)) if x.contradicts(y) => {
                contradicted.insert(cui);
                let w = weight(cui);
                if config.contradictions_enabled {
                    contr += w;
                    if config.double_count_contradictions {
                        a_diff += w;
                        b_diff += w;
                    }
                }
            }
            (Some(_), Some(_)) => {
                let w = weight(cui);
                a_diff += w;
                b_diff += w;
            }
            (Some(_), None) => a_diff += weight(cui),
            (None, Some(_)) => b_diff += weight(cui),
            (None, None) => unreachable!("cui taken from one of the sets"),
        }
    }
    ComparisonBreakdown {
        measure: Measure::Weighted,
        score: 0.0,
        intersection_weight: inter,
        a_difference_weight: a_diff,
        b_difference_weight: b_diff,
        max_difference_weight: f64::max(a_diff, b_diff),
        min_difference_weight: f64::min(a_diff, b_diff),
        contradiction_weight: contr,
        contradicted_cuis: contradicted,
        alpha: config.alpha,
        beta: config.beta,
        degenerate: false,
        expanded: 0,
    }
    .finish(a.is_empty() && b.is_empty())
}

fn unweighted(a: &CuiSet, b: &CuiSet, measure: Measure, alpha: f64, beta: f64) -> ComparisonBreakdown {
    let n = SetCounts::of(a, b);
    let (x, y) = (n.a_only as f64, n.b_only as f64);
    ComparisonBreakdown {
        measure,
        score: 0.0,
        intersection_weight: n.intersection as f64,
        a_difference_weight: x,
        b_difference_weight: y,
        max_difference_weight: x.max(y),
        min_difference_weight: x.min(y),
        contradiction_weight: 0.0,
        contradicted_cuis: count_contradictions(a, b).1,
        alpha,
        beta,
        degenerate: false,
        expanded: 0,
    }
    .finish(n.is_empty_pair())
}

/// Scores target/candidate pairs under one validated configuration.
#[derive(Debug, Clone)]
pub struct Scorer<'g> {
    config: DistanceConfig,
    graph: Option<&'g ConceptGraph>,
}

impl<'g> Scorer<'g> {
    /// Fails on an invalid configuration, or when synonym expansion is enabled
    /// without a graph.
    pub fn new(config: DistanceConfig, graph: Option<&'g ConceptGraph>) -> Result<Self> {
        config.validate()?;
        if config.synonym_expansion_enabled && graph.is_none() {
            return Err(Error::Config("synonym expansion needs a concept graph".into()));
        }
        Ok(Scorer { config, graph })
    }

    pub fn config(&self) -> &DistanceConfig {
        &self.config
    }

    /// Per-target state for scoring many candidates.
    pub fn prepare<'s>(&'s self, target: &'s CuiSet) -> PreparedTarget<'s> {
        let expander = match (self.config.synonym_expansion_enabled, self.graph) {
            (true, Some(graph)) => Some(SynonymExpander::new(graph, target, self.config.synonym)),
            _ => None,
        };
        PreparedTarget {
            scorer: self,
            target,
            expander,
        }
    }

    pub fn compare(&self, target: &CuiSet, candidate: &CuiSet) -> ComparisonBreakdown {
        self.prepare(target).score(candidate)
    }

    fn measure(&self, a: &CuiSet, b: &CuiSet) -> ComparisonBreakdown {
        let c = &self.config;
        match c.measure {
            Measure::Weighted => weighted_unchecked(a, b, c),
            Measure::Prototypical => unweighted(a, b, Measure::Prototypical, 0.0, c.beta),
            m => unweighted(a, b, m, c.alpha, c.beta),
        }
    }
}

pub struct PreparedTarget<'s> {
    scorer: &'s Scorer<'s>,
    target: &'s CuiSet,
    expander: Option<SynonymExpander<'s>>,
}

impl PreparedTarget<'_> {
    pub fn score(&self, candidate: &CuiSet) -> ComparisonBreakdown {
        let Some(expander) = &self.expander else {
            return self.scorer.measure(self.target, candidate);
        };
        let a = expander.expand(candidate);
        let a_ref = a.as_ref().unwrap_or(self.target);
        let b = match (self.scorer.config.expand_both, self.scorer.graph) {
            (true, Some(graph)) => {
                SynonymExpander::new(graph, candidate, self.scorer.config.synonym).expand(self.target)
            }
            _ => None,
        };
        let b_ref = b.as_ref().unwrap_or(candidate);
        let mut out = self.scorer.measure(a_ref, b_ref);
        out.expanded = (a_ref.len() - self.target.len()) + (b_ref.len() - candidate.len());
        out
    }
}
