//! Run configuration: one TOML file with a section per module.
//!
//! Relative paths in the file resolve against the file's directory. Nested
//! keys can be overridden with `CUISIM_<SECTION>__<KEY>` environment variables,
//! e.g. `CUISIM_DISTANCE__BETA=2` or `CUISIM_PLAN__SEARCH__DISCOVERY=false`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cuisim_core::labeler::SetMeasure;
use cuisim_core::linking::SemanticTypeConfig;
use cuisim_core::report::{MentionConfig, RuleConfig};
use cuisim_core::retrieval::{PlanSpec, SearchOptions};
use cuisim_core::{Cui, DistanceConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const ENV_PREFIX: &str = "CUISIM_";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog snapshot written by `ingest`.
    pub catalog: Option<PathBuf>,
    /// Graph snapshot written by `graph build`.
    pub graph: Option<PathBuf>,
    /// CuiSet JSON-lines file.
    pub reports: Option<PathBuf>,
    /// Balanced-set CSV with `report_id,class` columns.
    pub balanced: Option<PathBuf>,
    /// Retrieval-set ids, one per line.
    pub retrieval: Option<PathBuf>,
    pub old_labels: Option<PathBuf>,
    /// Negation cues, one per line; the built-in list otherwise.
    pub negation_lexicon: Option<PathBuf>,
    pub workers: Option<usize>,
    pub strict: bool,
    pub ingest: IngestSection,
    pub concept_graph: GraphSection,
    pub rules: RuleConfig,
    pub mentions: MentionConfig,
    pub semantic_types: SemanticTypeConfig,
    pub distance: DistanceConfig,
    pub search: SearchOptions,
    pub plan: PlanSpec,
    pub labeler: LabelerSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub vocabularies: BTreeSet<String>,
    pub relations: BTreeSet<String>,
}

impl Default for IngestSection {
    fn default() -> Self {
        IngestSection {
            vocabularies: cuisim_core::umls::default_vocabularies(),
            relations: cuisim_core::umls::default_relations(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    pub synonym_relations: BTreeSet<String>,
}

impl Default for GraphSection {
    fn default() -> Self {
        GraphSection {
            synonym_relations: cuisim_core::graph::default_synonym_relations(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelerSection {
    pub labels: Vec<String>,
    /// Fixed CUIs per label, used instead of catalog string matching.
    pub overrides: BTreeMap<String, BTreeSet<Cui>>,
    pub measure: SetMeasure,
    pub parent_depth: usize,
}

impl Default for LabelerSection {
    fn default() -> Self {
        LabelerSection {
            labels: Vec::new(),
            overrides: BTreeMap::new(),
            measure: SetMeasure::default(),
            parent_depth: 1,
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies environment overrides
    /// and resolves relative paths.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let (mut table, base, origin) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| UsageError(format!("cannot read config {}: {e}", p.display())))?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| UsageError(format!("invalid config {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, base, p.display().to_string())
            }
            None => (toml::Table::new(), PathBuf::new(), "<defaults>".to_string()),
        };
        apply_env(&mut table, env)?;
        let mut config = RunConfig::deserialize(toml::Value::Table(table))
            .map_err(|e| UsageError(format!("invalid config {origin}: {e}")))?;
        config.resolve_paths(&base);
        config
            .distance
            .validate()
            .with_context(|| format!("invalid [distance] section in {origin}"))?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.catalog,
            &mut self.graph,
            &mut self.reports,
            &mut self.balanced,
            &mut self.retrieval,
            &mut self.old_labels,
            &mut self.negation_lexicon,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    /// Hex SHA-256 of the resolved configuration.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        crate::manifest::sha256_hex(&bytes)
    }
}

/// Applies `CUISIM_A__B=value` variables. Single-segment names belong to the
/// global flags and are skipped.
fn apply_env(table: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut vars: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k.contains("__"))
        .collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(UsageError(format!("malformed override variable {key}")).into());
        }
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw));
        let (last, parents) = path.split_last().expect("at least two segments");
        let mut node = &mut *table;
        for seg in parents {
            let entry = node
                .entry(seg.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| UsageError(format!("{key}: {seg} is not a section")))?;
        }
        node.insert(last.clone(), value);
    }
    Ok(())
}
