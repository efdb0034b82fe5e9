//! Ranked search over an index of report concept sets, and the round-robin
//! retrieval harness built on top of it.

mod harness;
mod index;
mod search;

pub use harness::{
    default_budget, run_harness, write_manifest_csv, write_manifest_jsonl, HarnessOutcome, HarnessPlan,
    ManifestEntry, PlanSpec, QueryIssue, BASELINE_DATASET_SIZE,
};
pub use index::ReportIndex;
pub use search::{search, search_filtered, RankedEntry, RankedResult, SearchOptions};
