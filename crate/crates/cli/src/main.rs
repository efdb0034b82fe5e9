//! `cuisim` command-line front end.

mod commands;
mod config;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use cuisim_core::labeler::SetMeasure;
use cuisim_core::Measure;

/// Usage or configuration problem; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "cuisim", version, about = "Concept-set similarity, retrieval and labeling for radiology reports")]
pub struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its directory
    #[arg(long, global = true, env = "CUISIM_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sections [default: all cores]
    #[arg(long, global = true, env = "CUISIM_WORKERS", value_name = "N")]
    pub workers: Option<usize>,
    /// Treat malformed input rows and report id mismatches as errors
    #[arg(long, global = true)]
    pub strict: bool,
    /// Run manifest path [default: <out>.run.json, or stderr without --out]
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse UMLS RRF files into a catalog snapshot
    Ingest {
        /// Directory holding MRCONSO.RRF, MRSTY.RRF and MRREL.RRF
        #[arg(long, value_name = "DIR")]
        umls: PathBuf,
        /// Catalog snapshot to write
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the (cui, string) TSV used by the candidate generator
        #[arg(long, value_name = "FILE")]
        strings: Option<PathBuf>,
        /// Source vocabulary to keep; repeatable [default: from config, SNOMEDCT_US]
        #[arg(long = "vocab", value_name = "SAB")]
        vocabularies: Vec<String>,
    },
    /// Build or inspect the concept graph
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Apply assertion rules to annotations and write the mention file
    Mentions {
        /// Annotation JSON lines
        #[arg(long, value_name = "FILE")]
        annotations: PathBuf,
        /// Mention JSON lines [default: stdout]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Link mentions to concepts using precomputed candidates
    Link {
        /// Mention JSON lines written by `mentions`
        #[arg(long, value_name = "FILE")]
        mentions: PathBuf,
        /// Candidate JSON lines, one record per mention
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        /// Catalog snapshot [default: `catalog` from config]
        #[arg(long, value_name = "FILE")]
        catalog: Option<PathBuf>,
        /// CuiSet JSON lines [default: stdout]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compare two CuiSets and print the score breakdown as JSON
    Score {
        /// Target (query) CuiSet JSON
        a: PathBuf,
        /// Candidate CuiSet JSON
        b: PathBuf,
        /// Override the configured measure
        #[arg(long, value_parser = parse_measure)]
        measure: Option<Measure>,
        /// Graph snapshot, needed for synonym expansion
        #[arg(long, value_name = "FILE")]
        graph: Option<PathBuf>,
    },
    /// Rank indexed reports against one query report
    Search {
        /// Report id of the query; it must be in the report file
        #[arg(long)]
        query: String,
        /// CuiSet JSON lines [default: `reports` from config]
        #[arg(long, value_name = "FILE")]
        reports: Option<PathBuf>,
        /// Results to keep, 0 for all [default: from config, 10]
        #[arg(long)]
        k: Option<usize>,
        /// Score every report instead of the BFS-discovered pool
        #[arg(long)]
        no_discovery: bool,
        /// Discovery depth in hops [default: from config, 10]
        #[arg(long)]
        depth: Option<usize>,
        /// Graph snapshot for discovery and synonym expansion
        #[arg(long, value_name = "FILE")]
        graph: Option<PathBuf>,
        /// Ranked result JSON [default: stdout]
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the round-robin retrieval plan and write the manifest
    Harness {
        /// Plan file; same format as --config, which it replaces
        #[arg(long, value_name = "FILE")]
        plan: Option<PathBuf>,
        /// Manifest CSV
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write JSON lines with score breakdowns
        #[arg(long, value_name = "FILE")]
        jsonl: Option<PathBuf>,
        /// Graph snapshot for discovery and synonym expansion
        #[arg(long, value_name = "FILE")]
        graph: Option<PathBuf>,
    },
    /// Generate labels from concepts, optionally reconciled with old labels
    Label {
        /// CuiSet JSON lines [default: `reports` from config]
        #[arg(long, value_name = "FILE")]
        reports: Option<PathBuf>,
        /// Existing label CSV for phase 2 [default: `old_labels` from config]
        #[arg(long, value_name = "FILE")]
        old_labels: Option<PathBuf>,
        /// Catalog snapshot [default: `catalog` from config]
        #[arg(long, value_name = "FILE")]
        catalog: Option<PathBuf>,
        /// Graph snapshot [default: built from the catalog]
        #[arg(long, value_name = "FILE")]
        graph: Option<PathBuf>,
        /// Final label CSV
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Per-report JSON lines with attributions and candidate scores
        #[arg(long, value_name = "FILE")]
        audit: Option<PathBuf>,
        /// Stop after phase 1
        #[arg(long)]
        no_retrieval: bool,
        /// Overlap measure for phase 2 [default: from config, containment]
        #[arg(long, value_enum)]
        measure: Option<MeasureArg>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Build the graph from a catalog snapshot
    Build {
        /// Catalog snapshot [default: `catalog` from config]
        #[arg(long, value_name = "FILE")]
        catalog: Option<PathBuf>,
        /// Graph snapshot to write
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Print node, edge and component counts as JSON
    Stats {
        /// Graph snapshot [default: `graph` from config]
        #[arg(long, value_name = "FILE", conflicts_with = "catalog")]
        graph: Option<PathBuf>,
        /// Build from this catalog snapshot instead
        #[arg(long, value_name = "FILE")]
        catalog: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeasureArg {
    Containment,
    Jaccard,
}

impl From<MeasureArg> for SetMeasure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Containment => SetMeasure::Containment,
            MeasureArg::Jaccard => SetMeasure::Jaccard,
        }
    }
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    s.parse().map_err(|e: cuisim_core::Error| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage = err.chain().any(|cause| {
        cause.downcast_ref::<UsageError>().is_some()
            || cause.downcast_ref::<cuisim_core::Error>().is_some_and(|e| e.is_config())
    });
    if usage {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
