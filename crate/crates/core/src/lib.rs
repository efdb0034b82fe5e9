//! Concept-set similarity, retrieval and labeling for radiology reports.
//!
//! Each report is reduced to a set of asserted UMLS concepts ([`CuiSet`]). The
//! crate covers everything downstream of the neural front end:
//!
//! - [`umls`]: RRF ingestion into an immutable [`ConceptCatalog`]
//! - [`graph`]: the undirected concept graph, BFS discovery and synonym expansion
//! - [`report`]: assertion correction over RadGraph-style annotations
//! - [`linking`]: semantic-type filtering and best-candidate selection
//! - [`similarity`]: the Tversky family and the preference-weighted distance
//! - [`retrieval`]: ranked search and the round-robin retrieval harness
//! - [`labeler`]: two-phase ontology-backed label generation

pub mod cuiset;
pub mod error;
pub mod graph;
pub mod labeler;
pub mod linking;
pub mod report;
pub mod retrieval;
pub mod similarity;
pub mod types;
pub mod umls;

pub use cuiset::{ConceptMeta, CuiSet, MentionLink, ScoredCui};
pub use error::{Error, Result};
pub use graph::{ConceptGraph, DiscoveryResult, EdgeKind};
pub use similarity::{ComparisonBreakdown, DistanceConfig, Measure, PreferenceVector, Scorer};
pub use types::{Assertion, Cui, EntityKind};
pub use umls::{ConceptCatalog, ConceptRecord, RelationRecord, SemanticTypeAssignment};
