use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::annotation::{AnnotatedEntity, ReportAnnotation};
use super::lexicon::NegationLexicon;
use crate::types::{Assertion, EntityKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationScope {
    /// Everything in the relation component of a negated entity.
    #[default]
    Component,
    /// Direct relation neighbours only. Not idempotent: a second pass can
    /// reach one hop further.
    OneHop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleConfig {
    pub propagation: PropagationScope,
    /// Negate anatomies that have no observation relation at all.
    pub negate_bare_anatomies: bool,
    pub short_phrase_max_entities: usize,
    pub short_phrase_max_head_tokens: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            propagation: PropagationScope::Component,
            negate_bare_anatomies: false,
            short_phrase_max_entities: 2,
            short_phrase_max_head_tokens: 3,
        }
    }
}

/// The three assertion corrections, applied per granularity.
#[derive(Debug, Clone, Default)]
pub struct AssertionRules {
    pub config: RuleConfig,
    pub lexicon: NegationLexicon,
}

impl AssertionRules {
    pub fn new(config: RuleConfig, lexicon: NegationLexicon) -> Self {
        AssertionRules { config, lexicon }
    }

    /// Short-phrase fix, then negation propagation, then orphan anatomies.
    pub fn apply(&self, annotation: &ReportAnnotation) -> ReportAnnotation {
        let fixed = self.fix_short_phrase_assertions(annotation);
        let propagated = self.propagate_negations(&fixed);
        self.negate_orphan_anatomies(&propagated)
    }

    /// Negated entities pass their negation to related entities that are not
    /// backed by a present observation. Uncertain assertions do not spread.
    pub fn propagate_negations(&self, annotation: &ReportAnnotation) -> ReportAnnotation {
        let scope = self.config.propagation;
        map_lists(annotation, |entities| propagate_in(entities, scope))
    }

    /// Anatomies related to observations, none of them present, become Absent.
    pub fn negate_orphan_anatomies(&self, annotation: &ReportAnnotation) -> ReportAnnotation {
        let bare = self.config.negate_bare_anatomies;
        map_lists(annotation, |entities| orphans_in(entities, bare))
    }

    /// Overrides the model's assertion in sentences that are a single head
    /// entity plus at most one modifier: Absent with a negation cue in the
    /// sentence, otherwise a negated reading is corrected to Present.
    pub fn fix_short_phrase_assertions(&self, annotation: &ReportAnnotation) -> ReportAnnotation {
        let mut out = annotation.clone();
        for sentence in &mut out.sentences {
            let group: Vec<usize> = (0..sentence.entities.len()).collect();
            self.fix_group(&mut sentence.entities, &group, &sentence.text);
        }
        if out.sentences.is_empty() {
            let group: Vec<usize> = (0..out.report_level.len()).collect();
            self.fix_group(&mut out.report_level, &group, &annotation.text);
        } else {
            for sentence in &annotation.sentences {
                let range = sentence.token_offset..sentence.token_offset + sentence.token_count();
                let group: Vec<usize> = out
                    .report_level
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| range.contains(&e.span.0))
                    .map(|(i, _)| i)
                    .collect();
                self.fix_group(&mut out.report_level, &group, &sentence.text);
            }
        }
        out
    }

    fn fix_group(&self, entities: &mut [AnnotatedEntity], group: &[usize], text: &str) {
        if group.is_empty() || group.len() > self.config.short_phrase_max_entities {
            return;
        }
        let Some(head) = phrase_head(entities, group) else {
            return;
        };
        if entities[head].token_len() > self.config.short_phrase_max_head_tokens {
            return;
        }
        let negated = self.lexicon.matches(text);
        for &i in group {
            let e = &mut entities[i];
            if negated {
                e.assertion = Assertion::Absent;
            } else if e.assertion == Assertion::Absent {
                e.assertion = Assertion::Present;
            }
        }
    }
}

fn map_lists(
    annotation: &ReportAnnotation,
    f: impl Fn(&mut [AnnotatedEntity]),
) -> ReportAnnotation {
    let mut out = annotation.clone();
    f(&mut out.report_level);
    for sentence in &mut out.sentences {
        f(&mut sentence.entities);
    }
    out
}

/// Undirected relation adjacency, self-relations dropped.
fn neighbours(entities: &[AnnotatedEntity]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); entities.len()];
    for (i, e) in entities.iter().enumerate() {
        for r in &e.relations {
            if r.target != i && r.target < entities.len() {
                adj[i].push(r.target);
                adj[r.target].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

fn is_positive_observation(e: &AnnotatedEntity) -> bool {
    e.kind == EntityKind::Observation && e.assertion == Assertion::Present
}

fn propagate_in(entities: &mut [AnnotatedEntity], scope: PropagationScope) {
    let adj = neighbours(entities);
    let original: Vec<Assertion> = entities.iter().map(|e| e.assertion).collect();
    let anchored: Vec<bool> = (0..entities.len())
        .map(|i| match entities[i].kind {
            EntityKind::Observation => original[i] == Assertion::Present,
            EntityKind::Anatomy => adj[i].iter().any(|&j| is_positive_observation(&entities[j])),
        })
        .collect();
    let flip = |i: usize| original[i] == Assertion::Present && !anchored[i];

    let mut negate = vec![false; entities.len()];
    match scope {
        PropagationScope::OneHop => {
            for i in 0..entities.len() {
                negate[i] = flip(i) && adj[i].iter().any(|&j| original[j] == Assertion::Absent);
            }
        }
        PropagationScope::Component => {
            let mut seen = vec![false; entities.len()];
            for start in 0..entities.len() {
                if seen[start] {
                    continue;
                }
                seen[start] = true;
                let mut component = vec![start];
                let mut queue = VecDeque::from([start]);
                while let Some(u) = queue.pop_front() {
                    for &v in &adj[u] {
                        if !seen[v] {
                            seen[v] = true;
                            component.push(v);
                            queue.push_back(v);
                        }
                    }
                }
                if component.iter().any(|&i| original[i] == Assertion::Absent) {
                    for &i in &component {
                        negate[i] = flip(i);
                    }
                }
            }
        }
    }
    for (e, n) in entities.iter_mut().zip(negate) {
        if n {
            e.assertion = Assertion::Absent;
        }
    }
}

fn orphans_in(entities: &mut [AnnotatedEntity], negate_bare: bool) {
    let adj = neighbours(entities);
    let decisions: Vec<bool> = (0..entities.len())
        .map(|i| {
            if entities[i].kind != EntityKind::Anatomy {
                return false;
            }
            let mut observations = adj[i]
                .iter()
                .filter(|&&j| entities[j].kind == EntityKind::Observation)
                .peekable();
            if observations.peek().is_none() {
                return negate_bare;
            }
            !observations.any(|&j| entities[j].assertion == Assertion::Present)
        })
        .collect();
    for (e, negate) in entities.iter_mut().zip(decisions) {
        if negate {
            e.assertion = Assertion::Absent;
        }
    }
}

/// The head of a group that forms one connected phrase: the single
/// observation if there is exactly one, otherwise the single entity that is
/// not modifying another group member.
fn phrase_head(entities: &[AnnotatedEntity], group: &[usize]) -> Option<usize> {
    if group.len() == 1 {
        return Some(group[0]);
    }
    let in_group = |i: usize| group.contains(&i);
    // connectivity within the group
    let mut reached = vec![group[0]];
    let mut queue = VecDeque::from([group[0]]);
    while let Some(u) = queue.pop_front() {
        for &v in group {
            let linked = entities[u].relations.iter().any(|r| r.target == v)
                || entities[v].relations.iter().any(|r| r.target == u);
            if linked && !reached.contains(&v) {
                reached.push(v);
                queue.push_back(v);
            }
        }
    }
    if reached.len() != group.len() {
        return None;
    }
    let observations: Vec<usize> = group
        .iter()
        .copied()
        .filter(|&i| entities[i].kind == EntityKind::Observation)
        .collect();
    if observations.len() == 1 {
        return Some(observations[0]);
    }
    let unmodifying: Vec<usize> = group
        .iter()
        .copied()
        .filter(|&i| {
            !entities[i]
                .relations
                .iter()
                .any(|r| r.name == "modify" && r.target != i && in_group(r.target))
        })
        .collect();
    (unmodifying.len() == 1).then(|| unmodifying[0])
}
