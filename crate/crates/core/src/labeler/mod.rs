//! Two-phase label generation.
//!
//! Phase 1 maps each mention's linked concepts onto a label vocabulary and
//! marks matched labels 1, 0 or -1 from the mention assertion. Phase 2
//! compares the report's concepts against four candidate label sets built
//! from the old labels and the phase-1 labels and keeps the one that contains
//! the report best.

mod dataset;
mod phase1;
mod phase2;
mod vocab;

pub use dataset::{
    label_dataset, read_old_labels, write_audit, write_labels_csv, LabelRun, LabelSummary, LabeledReport,
    LabelingOptions, OldLabels,
};
pub use phase1::{phase1_label, Attribution, Phase1Options, Phase1Result};
pub use phase2::{
    containment_index, jaccard_index, phase2_select, CandidateKind, CandidateScore, LabelComparison,
    OverlapScore, SetMeasure,
};
pub use vocab::{LabelAssignment, LabelValue, LabelVocabulary};
