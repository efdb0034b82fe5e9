use std::collections::{BTreeSet, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::annotation::{AnnotatedEntity, ReportAnnotation};
use super::lexicon::normalize_text;
use super::rules::AssertionRules;
use crate::error::{Error, Result};
use crate::types::{Assertion, EntityKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSource {
    ReportLevel,
    SentenceLevel,
    Merged,
}

/// A normalized entity mention, ready for candidate retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub isolated_text: String,
    /// The mention together with every entity it is linked to by
    /// modify-type relations, in token order.
    pub context_text: String,
    pub kind: EntityKind,
    pub assertion: Assertion,
    pub source: MentionSource,
    /// Inclusive span in report token coordinates.
    pub span: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePolicy {
    /// On assertion conflict the sentence-level reading wins.
    #[default]
    SentenceWins,
    ReportWins,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MentionConfig {
    /// Relation names that build the context string of a mention.
    pub context_relations: BTreeSet<String>,
    pub merge_policy: MergePolicy,
}

impl Default for MentionConfig {
    fn default() -> Self {
        MentionConfig {
            context_relations: ["modify".to_string(), "located_at".to_string()].into(),
            merge_policy: MergePolicy::SentenceWins,
        }
    }
}

fn mentions_of(
    entities: &[AnnotatedEntity],
    offset: usize,
    sentence: Option<usize>,
    source: MentionSource,
    config: &MentionConfig,
) -> Vec<Mention> {
    let mut adj = vec![Vec::new(); entities.len()];
    for (i, e) in entities.iter().enumerate() {
        for r in &e.relations {
            if r.target != i && config.context_relations.contains(&r.name) {
                adj[i].push(r.target);
                adj[r.target].push(i);
            }
        }
    }
    (0..entities.len())
        .map(|i| {
            let mut members = vec![i];
            let mut queue = VecDeque::from([i]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !members.contains(&v) {
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            members.sort_by_key(|&m| (entities[m].span, m));
            let context_text = members
                .iter()
                .map(|&m| entities[m].tokens.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let e = &entities[i];
            Mention {
                isolated_text: e.tokens.clone(),
                context_text,
                kind: e.kind,
                assertion: e.assertion,
                source,
                span: (e.span.0 + offset, e.span.1 + offset),
                sentence,
            }
        })
        .collect()
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

fn is_duplicate(a: &Mention, b: &Mention) -> bool {
    a.kind == b.kind
        && overlaps(a.span, b.span)
        && normalize_text(&a.isolated_text) == normalize_text(&b.isolated_text)
}

/// Unions report-level and sentence-level mentions. A report mention and a
/// sentence mention with the same normalized text and kind and overlapping
/// spans collapse into one `Merged` mention (matched one-to-one). Output is
/// ordered by span.
pub fn merge_granularities(annotation: &ReportAnnotation, config: &MentionConfig) -> Vec<Mention> {
    let report = mentions_of(
        &annotation.report_level,
        0,
        None,
        MentionSource::ReportLevel,
        config,
    );
    let sentence: Vec<Mention> = annotation
        .sentences
        .iter()
        .flat_map(|s| {
            mentions_of(
                &s.entities,
                s.token_offset,
                Some(s.index),
                MentionSource::SentenceLevel,
                config,
            )
        })
        .collect();

    let mut used = vec![false; sentence.len()];
    let mut out = Vec::with_capacity(report.len() + sentence.len());
    for r in report {
        let partner = (0..sentence.len()).find(|&j| !used[j] && is_duplicate(&r, &sentence[j]));
        match partner {
            Some(j) => {
                used[j] = true;
                let s = &sentence[j];
                let assertion = match config.merge_policy {
                    MergePolicy::SentenceWins => s.assertion,
                    MergePolicy::ReportWins => r.assertion,
                };
                out.push(Mention {
                    assertion,
                    source: MentionSource::Merged,
                    ..s.clone()
                });
            }
            None => out.push(r),
        }
    }
    out.extend(
        sentence
            .into_iter()
            .zip(used)
            .filter(|(_, u)| !u)
            .map(|(m, _)| m),
    );
    out.sort_by(|a, b| {
        (a.span, a.kind, &a.isolated_text, a.source, a.sentence)
            .cmp(&(b.span, b.kind, &b.isolated_text, b.source, b.sentence))
    });
    out
}

/// Full report-model pipeline: assertion rules, then granularity merge.
pub fn extract_mentions(
    annotation: &ReportAnnotation,
    rules: &AssertionRules,
    config: &MentionConfig,
) -> Vec<Mention> {
    merge_granularities(&rules.apply(annotation), config)
}

/// One JSON line of the mention file handed to the candidate generator.
/// Mentions are addressed by their position in `mentions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMentions {
    pub report_id: String,
    pub mentions: Vec<Mention>,
}

/// Reads a mention file written by [`write_mentions`].
pub fn read_mentions(path: &Path) -> Result<Vec<ReportMentions>> {
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

pub fn write_mentions<'a, W: Write>(
    mut writer: W,
    reports: impl IntoIterator<Item = &'a ReportMentions>,
) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<mentions>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::annotation::SentenceAnnotation;
    use crate::types::Assertion::*;
    use crate::types::EntityKind::*;

    fn ent(tokens: &str, at: usize, kind: EntityKind, a: Assertion) -> AnnotatedEntity {
        AnnotatedEntity::new(tokens, (at, at), kind, a)
    }

    fn two_level(report: Vec<AnnotatedEntity>, sentence: Vec<AnnotatedEntity>) -> ReportAnnotation {
        ReportAnnotation {
            report_id: "r".into(),
            text: "Heart normal . Small effusion .".into(),
            report_level: report,
            sentences: vec![
                SentenceAnnotation {
                    index: 0,
                    text: "Heart normal .".into(),
                    token_offset: 0,
                    entities: vec![],
                },
                SentenceAnnotation {
                    index: 1,
                    text: "Small effusion .".into(),
                    token_offset: 3,
                    entities: sentence,
                },
            ],
        }
    }

    #[test]
    fn same_mention_both_levels() {
        let a = two_level(
            vec![ent("effusion", 4, Observation, Present)],
            vec![ent("effusion", 1, Observation, Present)],
        );
        let m = merge_granularities(&a, &MentionConfig::default());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].source, MentionSource::Merged);
        assert_eq!(m[0].span, (4, 4));
    }

    #[test]
    fn sentence_level_wins_conflict() {
        let a = two_level(
            vec![ent("effusion", 4, Observation, Present)],
            vec![ent("Effusion", 1, Observation, Absent)],
        );
        let m = merge_granularities(&a, &MentionConfig::default());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].assertion, Absent);
        let report_wins = MentionConfig {
            merge_policy: MergePolicy::ReportWins,
            ..Default::default()
        };
        assert_eq!(merge_granularities(&a, &report_wins)[0].assertion, Present);
    }

    #[test]
    fn sentence_only_mention_kept() {
        let a = two_level(vec![], vec![ent("effusion", 1, Observation, Present)]);
        let m = merge_granularities(&a, &MentionConfig::default());
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].source, MentionSource::SentenceLevel);
        assert_eq!(m[0].sentence, Some(1));
    }

    #[test]
    fn non_overlapping_same_text_not_merged() {
        let a = two_level(
            vec![ent("effusion", 0, Observation, Present)],
            vec![ent("effusion", 1, Observation, Present)],
        );
        assert_eq!(merge_granularities(&a, &MentionConfig::default()).len(), 2);
    }

    #[test]
    fn context_follows_modify_component() {
        let a = two_level(
            vec![],
            vec![
                ent("Small", 0, Observation, Present).with_relation("modify", 1),
                ent("effusion", 1, Observation, Present),
            ],
        );
        let m = merge_granularities(&a, &MentionConfig::default());
        assert_eq!(m[1].isolated_text, "effusion");
        assert_eq!(m[1].context_text, "Small effusion");
        assert_eq!(m[0].context_text, "Small effusion");
    }

    #[test]
    fn suggestive_of_not_in_context() {
        let a = two_level(
            vec![],
            vec![
                ent("opacity", 0, Observation, Present).with_relation("suggestive_of", 1),
                ent("pneumonia", 1, Observation, Uncertain),
            ],
        );
        let m = merge_granularities(&a, &MentionConfig::default());
        assert_eq!(m[0].context_text, "opacity");
    }
}
