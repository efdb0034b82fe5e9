use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Assertion, EntityKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    /// Index of the target entity in the same list.
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedEntity {
    pub tokens: String,
    /// Inclusive token span `(start, end)` in the owning token stream.
    pub span: (usize, usize),
    pub kind: EntityKind,
    pub assertion: Assertion,
    pub relations: Vec<Relation>,
}

impl AnnotatedEntity {
    pub fn new(tokens: &str, span: (usize, usize), kind: EntityKind, assertion: Assertion) -> Self {
        AnnotatedEntity {
            tokens: tokens.to_string(),
            span,
            kind,
            assertion,
            relations: Vec::new(),
        }
    }

    pub fn with_relation(mut self, name: &str, target: usize) -> Self {
        self.relations.push(Relation {
            name: name.to_string(),
            target,
        });
        self
    }

    pub fn token_len(&self) -> usize {
        self.span.1 - self.span.0 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceAnnotation {
    pub index: usize,
    pub text: String,
    /// Position of the sentence's first token in the report token stream.
    pub token_offset: usize,
    pub entities: Vec<AnnotatedEntity>,
}

impl SentenceAnnotation {
    pub fn token_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Both annotation granularities of one report. Spans index the whitespace
/// tokens of `text` (report level) or of the sentence text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawReport", into = "RawReport")]
pub struct ReportAnnotation {
    pub report_id: String,
    pub text: String,
    pub report_level: Vec<AnnotatedEntity>,
    pub sentences: Vec<SentenceAnnotation>,
}

impl ReportAnnotation {
    pub fn token_count(&self) -> usize {
        self.text.split_whitespace().count()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Annotation {
            report_id: self.report_id.clone(),
            message,
        };
        check_entities(&self.report_level, self.token_count()).map_err(|m| fail(format!("report level: {m}")))?;
        for s in &self.sentences {
            check_entities(&s.entities, s.token_count())
                .map_err(|m| fail(format!("sentence {}: {m}", s.index)))?;
        }
        Ok(())
    }
}

fn check_entities(entities: &[AnnotatedEntity], tokens: usize) -> Result<(), String> {
    for (i, e) in entities.iter().enumerate() {
        if e.span.0 > e.span.1 {
            return Err(format!("entity {i} has start {} > end {}", e.span.0, e.span.1));
        }
        if e.span.1 >= tokens {
            return Err(format!("entity {i} ends at token {} of {tokens}", e.span.1));
        }
        if let Some(r) = e.relations.iter().find(|r| r.target >= entities.len()) {
            return Err(format!("entity {i} relation {:?} targets missing entity {}", r.name, r.target));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntity {
    tokens: String,
    start_ix: usize,
    end_ix: usize,
    label: String,
    #[serde(default)]
    relations: Vec<(String, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSentence {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token_offset: Option<usize>,
    #[serde(default)]
    entities: Vec<RawEntity>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReport {
    report_id: String,
    text: String,
    #[serde(default)]
    entities: Vec<RawEntity>,
    #[serde(default)]
    sentences: Vec<RawSentence>,
}

fn parse_label(label: &str) -> Option<(EntityKind, Assertion)> {
    let (kind, status) = label.split_once('-')?;
    let kind = match kind {
        "ANAT" => EntityKind::Anatomy,
        "OBS" => EntityKind::Observation,
        _ => return None,
    };
    let assertion = match status {
        "DP" => Assertion::Present,
        "DA" => Assertion::Absent,
        "U" => Assertion::Uncertain,
        _ => return None,
    };
    Some((kind, assertion))
}

fn format_label(kind: EntityKind, assertion: Assertion) -> String {
    let k = match kind {
        EntityKind::Anatomy => "ANAT",
        EntityKind::Observation => "OBS",
    };
    let a = match assertion {
        Assertion::Present => "DP",
        Assertion::Absent => "DA",
        Assertion::Uncertain => "U",
    };
    format!("{k}-{a}")
}

fn convert_entities(raw: Vec<RawEntity>) -> Result<Vec<AnnotatedEntity>, String> {
    raw.into_iter()
        .map(|e| {
            let (kind, assertion) =
                parse_label(&e.label).ok_or_else(|| format!("unknown entity label {:?}", e.label))?;
            Ok(AnnotatedEntity {
                tokens: e.tokens,
                span: (e.start_ix, e.end_ix),
                kind,
                assertion,
                relations: e
                    .relations
                    .into_iter()
                    .map(|(name, target)| Relation { name, target })
                    .collect(),
            })
        })
        .collect()
}

fn raw_entities(entities: Vec<AnnotatedEntity>) -> Vec<RawEntity> {
    entities
        .into_iter()
        .map(|e| RawEntity {
            label: format_label(e.kind, e.assertion),
            tokens: e.tokens,
            start_ix: e.span.0,
            end_ix: e.span.1,
            relations: e.relations.into_iter().map(|r| (r.name, r.target)).collect(),
        })
        .collect()
}

impl TryFrom<RawReport> for ReportAnnotation {
    type Error = String;

    fn try_from(raw: RawReport) -> Result<Self, String> {
        let mut offset = 0;
        let mut sentences = Vec::with_capacity(raw.sentences.len());
        for (index, s) in raw.sentences.into_iter().enumerate() {
            let token_offset = s.token_offset.unwrap_or(offset);
            let sentence = SentenceAnnotation {
                index,
                entities: convert_entities(s.entities)?,
                text: s.text,
                token_offset,
            };
            offset = token_offset + sentence.token_count();
            sentences.push(sentence);
        }
        let annotation = ReportAnnotation {
            report_level: convert_entities(raw.entities)?,
            report_id: raw.report_id,
            text: raw.text,
            sentences,
        };
        annotation.validate().map_err(|e| e.to_string())?;
        Ok(annotation)
    }
}

impl From<ReportAnnotation> for RawReport {
    fn from(a: ReportAnnotation) -> Self {
        RawReport {
            report_id: a.report_id,
            text: a.text,
            entities: raw_entities(a.report_level),
            sentences: a
                .sentences
                .into_iter()
                .map(|s| RawSentence {
                    text: s.text,
                    token_offset: Some(s.token_offset),
                    entities: raw_entities(s.entities),
                })
                .collect(),
        }
    }
}

/// Reads one annotation per line.
pub fn read_annotations(path: &Path) -> Result<Vec<ReportAnnotation>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let annotation = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: ix + 1,
            message: e.to_string(),
        })?;
        out.push(annotation);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"report_id":"r1","text":"No consolidations in the lung . Heart normal .",
        "entities":[{"tokens":"consolidations","start_ix":1,"end_ix":1,"label":"OBS-DA","relations":[["located_at",1]]},
                    {"tokens":"lung","start_ix":4,"end_ix":4,"label":"ANAT-DP","relations":[]}],
        "sentences":[{"text":"No consolidations in the lung .","entities":[]},
                     {"text":"Heart normal .","entities":[{"tokens":"Heart","start_ix":0,"end_ix":0,"label":"ANAT-DP"}]}]}"#;

    #[test]
    fn parses_labels_and_offsets() {
        let a: ReportAnnotation = serde_json::from_str(SAMPLE).unwrap();
        assert_eq!(a.report_level[0].kind, EntityKind::Observation);
        assert_eq!(a.report_level[0].assertion, Assertion::Absent);
        assert_eq!(a.report_level[1].assertion, Assertion::Present);
        assert_eq!(a.sentences[1].token_offset, 6);
    }

    #[test]
    fn json_round_trip() {
        let a: ReportAnnotation = serde_json::from_str(SAMPLE).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b: ReportAnnotation = serde_json::from_str(&json).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range_span() {
        let bad = r#"{"report_id":"r","text":"a b","entities":[{"tokens":"x","start_ix":1,"end_ix":5,"label":"OBS-DP"}]}"#;
        let err = serde_json::from_str::<ReportAnnotation>(bad).unwrap_err();
        assert!(err.to_string().contains("ends at token"));
    }

    #[test]
    fn rejects_dangling_relation_and_bad_label() {
        let bad = r#"{"report_id":"r","text":"a b","entities":[{"tokens":"a","start_ix":0,"end_ix":0,"label":"OBS-DP","relations":[["modify",3]]}]}"#;
        assert!(serde_json::from_str::<ReportAnnotation>(bad).is_err());
        let bad = r#"{"report_id":"r","text":"a b","entities":[{"tokens":"a","start_ix":0,"end_ix":0,"label":"FOO-DP"}]}"#;
        assert!(serde_json::from_str::<ReportAnnotation>(bad).is_err());
    }
}
