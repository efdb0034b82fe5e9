//! RadGraph-style report annotations and the assertion corrections applied to
//! them before linking.
//!
//! The neural annotator is run twice per report, once on the whole text and
//! once per sentence. Both granularities go through the same rule set
//! ([`AssertionRules::apply`]) and are then merged into one mention list
//! ([`merge_granularities`]).

mod annotation;
mod lexicon;
mod merge;
mod rules;

pub use annotation::{
    read_annotations, AnnotatedEntity, Relation, ReportAnnotation, SentenceAnnotation,
};
pub use lexicon::{normalize_text, NegationLexicon};
pub use merge::{
    extract_mentions, merge_granularities, read_mentions, write_mentions, MentionConfig, MergePolicy, Mention,
    MentionSource, ReportMentions,
};
pub use rules::{AssertionRules, PropagationScope, RuleConfig};
