use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cuisim_core::cuiset::{read_jsonl, write_jsonl};
use cuisim_core::labeler::{
    label_dataset, read_old_labels, write_audit, write_labels_csv, LabelVocabulary, LabelingOptions, Phase1Options,
};
use cuisim_core::linking::{link_all, read_candidates};
use cuisim_core::report::{
    read_annotations, read_mentions, write_mentions, AssertionRules, NegationLexicon, ReportMentions,
};
use cuisim_core::retrieval::{run_harness, search, write_manifest_csv, write_manifest_jsonl, HarnessPlan, ReportIndex};
use cuisim_core::umls::{build_catalog, parse_mrconso, parse_mrrel, parse_mrsty};
use cuisim_core::{ConceptCatalog, ConceptGraph, CuiSet, Scorer};
use serde_json::json;

use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::{Cli, Command, GraphCommand, UsageError};

struct Ctx {
    config: RunConfig,
    strict: bool,
    manifest_path: Option<PathBuf>,
    digest: String,
}

impl Ctx {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, self.digest.clone())
    }

    /// Writes the run manifest to `--manifest`, next to `primary`, or to stderr.
    fn finish(&self, manifest: &RunManifest, primary: Option<&Path>) -> Result<()> {
        match (&self.manifest_path, primary) {
            (Some(p), _) => manifest.write(p),
            (None, Some(out)) => {
                let mut name = out.as_os_str().to_owned();
                name.push(".run.json");
                manifest.write(Path::new(&name))
            }
            (None, None) => {
                eprintln!("{}", serde_json::to_string(manifest)?);
                Ok(())
            }
        }
    }
}

/// Fails with a usage error naming `path` when it does not exist.
fn require(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(UsageError(format!("input not found: {}", path.display())).into())
    }
}

/// Flag value, else config value; either way it must exist.
fn pick(flag: Option<PathBuf>, config: &Option<PathBuf>, flag_name: &str) -> Result<PathBuf> {
    let path = flag.or_else(|| config.clone()).ok_or_else(|| {
        UsageError(format!(
            "missing input: pass --{flag_name} or set `{}` in the config",
            flag_name.replace('-', "_")
        ))
    })?;
    require(&path)
}

fn pick_optional(flag: Option<PathBuf>, config: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    flag.or_else(|| config.clone()).map(|p| require(&p)).transpose()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn finish_writer(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

/// Runs `write` against the file at `out`, or stdout.
fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            finish_writer(w, path)
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush().context("cannot write to stdout")
        }
    }
}

fn load_catalog(path: &Path) -> Result<ConceptCatalog> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    ConceptCatalog::read_snapshot(BufReader::new(file)).with_context(|| format!("loading catalog {}", path.display()))
}

fn load_graph(path: &Path) -> Result<ConceptGraph> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    ConceptGraph::read_snapshot(BufReader::new(file)).with_context(|| format!("loading graph {}", path.display()))
}

fn read_cuiset(path: &Path) -> Result<CuiSet> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("{} is not a CuiSet", path.display()))
}

fn load_index(path: &Path, strict: bool) -> Result<(ReportIndex, usize)> {
    ReportIndex::from_jsonl(path, strict).with_context(|| format!("loading reports {}", path.display()))
}

fn read_balanced(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["report_id", "class"] {
        bail!("{}: expected columns report_id,class", path.display());
    }
    let mut out = BTreeMap::new();
    for (ix, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("{}: row {}", path.display(), ix + 2))?;
        if out.insert(row[0].to_string(), row[1].to_string()).is_some() {
            bail!("{}: report {} listed twice", path.display(), &row[0]);
        }
    }
    Ok(out)
}

fn read_ids(path: &Path) -> Result<BTreeSet<String>> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.with_context(|| format!("cannot read {}", path.display()))?;
        let id = line.trim();
        if !id.is_empty() {
            out.insert(id.to_string());
        }
    }
    Ok(out)
}

pub fn run(cli: Cli) -> Result<()> {
    let config_path = match &cli.command {
        Command::Harness { plan: Some(plan), .. } => {
            if cli.config.is_some() {
                return Err(UsageError("--plan replaces --config; pass only one".into()).into());
            }
            Some(plan.clone())
        }
        _ => cli.config.clone(),
    };
    if let Some(p) = &config_path {
        require(p)?;
    }
    let config = RunConfig::load(config_path.as_deref())?;
    if let Some(n) = cli.workers.or(config.workers) {
        if n == 0 {
            return Err(UsageError("worker count must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker pool")?;
    }
    let ctx = Ctx {
        strict: cli.strict || config.strict,
        manifest_path: cli.manifest,
        digest: config.digest(),
        config,
    };
    match cli.command {
        Command::Ingest {
            umls,
            out,
            strings,
            vocabularies,
        } => ingest(&ctx, &umls, &out, strings.as_deref(), vocabularies),
        Command::Graph(GraphCommand::Build { catalog, out }) => graph_build(&ctx, catalog, &out),
        Command::Graph(GraphCommand::Stats { graph, catalog }) => graph_stats(&ctx, graph, catalog),
        Command::Mentions { annotations, out } => mentions(&ctx, &annotations, out.as_deref()),
        Command::Link {
            mentions,
            candidates,
            catalog,
            out,
        } => link(&ctx, &mentions, &candidates, catalog, out.as_deref()),
        Command::Score { a, b, measure, graph } => score(&ctx, &a, &b, measure, graph),
        Command::Search {
            query,
            reports,
            k,
            no_discovery,
            depth,
            graph,
            out,
        } => {
            let mut options = ctx.config.search;
            if let Some(k) = k {
                options.k = k;
            }
            if no_discovery {
                options.discovery = false;
            }
            if let Some(d) = depth {
                options.discovery_depth = d;
            }
            search_cmd(&ctx, &query, reports, options, graph, out.as_deref())
        }
        Command::Harness { out, jsonl, graph, .. } => harness(&ctx, &out, jsonl.as_deref(), graph),
        Command::Label {
            reports,
            old_labels,
            catalog,
            graph,
            out,
            audit,
            no_retrieval,
            measure,
        } => {
            let options = LabelingOptions {
                measure: measure.map_or(ctx.config.labeler.measure, Into::into),
                phase1: Phase1Options {
                    parent_depth: ctx.config.labeler.parent_depth,
                },
                strict: ctx.strict,
                no_retrieval,
            };
            let inputs = LabelInputs {
                reports: pick(reports, &ctx.config.reports, "reports")?,
                old_labels: pick_optional(old_labels, &ctx.config.old_labels)?,
                catalog: pick(catalog, &ctx.config.catalog, "catalog")?,
                graph: pick_optional(graph, &ctx.config.graph)?,
            };
            label(&ctx, inputs, &out, audit.as_deref(), options)
        }
    }
}

fn ingest(ctx: &Ctx, dir: &Path, out: &Path, strings: Option<&Path>, vocab: Vec<String>) -> Result<()> {
    let conso = require(&dir.join("MRCONSO.RRF"))?;
    let sty = require(&dir.join("MRSTY.RRF"))?;
    let rel = require(&dir.join("MRREL.RRF"))?;
    let vocabularies: BTreeSet<String> = if vocab.is_empty() {
        ctx.config.ingest.vocabularies.clone()
    } else {
        vocab.into_iter().collect()
    };
    let c = parse_mrconso(&conso, &vocabularies)?;
    let s = parse_mrsty(&sty)?;
    let r = parse_mrrel(&rel, &ctx.config.ingest.relations)?;
    let malformed = c.stats.malformed + s.stats.malformed + r.stats.malformed;
    if malformed > 0 {
        if ctx.strict {
            bail!("{malformed} malformed RRF rows (MRCONSO {}, MRSTY {}, MRREL {})", c.stats.malformed, s.stats.malformed, r.stats.malformed);
        }
        log::warn!("skipped {malformed} malformed RRF rows");
    }
    let (conso_stats, sty_stats, rel_stats) = (c.stats, s.stats, r.stats);
    let (catalog, summary) = build_catalog(c.items, s.items, r.items);
    let mut w = create(out)?;
    catalog.write_snapshot(&mut w)?;
    finish_writer(w, out)?;
    let mut dumped = None;
    if let Some(path) = strings {
        let mut w = create(path)?;
        dumped = Some(catalog.write_string_dump(&mut w)?);
        finish_writer(w, path)?;
    }
    log::info!(
        "catalog: {} concepts, {} semantic-type assignments, {} relations",
        summary.records,
        summary.assignments,
        summary.relations
    );

    let mut m = ctx.manifest("ingest");
    m.inputs(&[&conso, &sty, &rel])?;
    m.outputs(&[out])?;
    if let Some(p) = strings {
        m.outputs(&[p])?;
    }
    m.counters(json!({
        "mrconso": conso_stats,
        "mrsty": sty_stats,
        "mrrel": rel_stats,
        "catalog": summary,
        "strings": dumped,
    }));
    ctx.finish(&m, Some(out))
}

fn graph_build(ctx: &Ctx, catalog: Option<PathBuf>, out: &Path) -> Result<()> {
    let catalog_path = pick(catalog, &ctx.config.catalog, "catalog")?;
    let catalog = load_catalog(&catalog_path)?;
    let graph = ConceptGraph::build(&catalog, &ctx.config.concept_graph.synonym_relations);
    let mut w = create(out)?;
    graph.write_snapshot(&mut w)?;
    finish_writer(w, out)?;
    let stats = graph.stats();
    log::info!("graph: {} nodes, {} edges", stats.nodes, stats.edges);
    let mut m = ctx.manifest("graph build");
    m.inputs(&[&catalog_path])?;
    m.outputs(&[out])?;
    m.counters(stats);
    ctx.finish(&m, Some(out))
}

fn graph_stats(ctx: &Ctx, graph: Option<PathBuf>, catalog: Option<PathBuf>) -> Result<()> {
    let (input, graph) = match catalog {
        Some(c) => {
            let path = require(&c)?;
            let catalog = load_catalog(&path)?;
            let graph = ConceptGraph::build(&catalog, &ctx.config.concept_graph.synonym_relations);
            (path, graph)
        }
        None => {
            let path = pick(graph, &ctx.config.graph, "graph")?;
            let graph = load_graph(&path)?;
            (path, graph)
        }
    };
    let stats = graph.stats();
    println!("{}", serde_json::to_string_pretty(&stats)?);
    let mut m = ctx.manifest("graph stats");
    m.inputs(&[&input])?;
    m.counters(stats);
    ctx.finish(&m, None)
}

fn mentions(ctx: &Ctx, annotations: &Path, out: Option<&Path>) -> Result<()> {
    let annotations = require(annotations)?;
    let lexicon_path = pick_optional(None, &ctx.config.negation_lexicon)?;
    let lexicon = match &lexicon_path {
        Some(p) => NegationLexicon::load(p)?,
        None => NegationLexicon::default(),
    };
    let rules = AssertionRules::new(ctx.config.rules.clone(), lexicon);
    let reports: Vec<ReportMentions> = read_annotations(&annotations)?
        .iter()
        .map(|a| ReportMentions {
            report_id: a.report_id.clone(),
            mentions: cuisim_core::report::extract_mentions(a, &rules, &ctx.config.mentions),
        })
        .collect();
    emit(out, |w| Ok(write_mentions(w, &reports)?))?;
    let total: usize = reports.iter().map(|r| r.mentions.len()).sum();
    log::info!("{} reports, {total} mentions", reports.len());

    let mut m = ctx.manifest("mentions");
    m.inputs(&[&annotations])?;
    if let Some(p) = &lexicon_path {
        m.inputs(&[p])?;
    }
    if let Some(p) = out {
        m.outputs(&[p])?;
    }
    m.counters(json!({ "reports": reports.len(), "mentions": total }));
    ctx.finish(&m, out)
}

fn link(ctx: &Ctx, mentions: &Path, candidates: &Path, catalog: Option<PathBuf>, out: Option<&Path>) -> Result<()> {
    let mentions = require(mentions)?;
    let candidates = require(candidates)?;
    let catalog_path = pick(catalog, &ctx.config.catalog, "catalog")?;
    let catalog = load_catalog(&catalog_path)?;
    let reports = read_mentions(&mentions)?;
    let records = read_candidates(&candidates)?;
    let (sets, stats) = link_all(&reports, &records, &catalog, &ctx.config.semantic_types)?;
    emit(out, |w| Ok(write_jsonl(w, &sets)?))?;
    log::info!("{} mentions: {} linked, {} unlinked", stats.mentions, stats.linked, stats.unlinked);

    let mut m = ctx.manifest("link");
    m.inputs(&[&mentions, &candidates, &catalog_path])?;
    if let Some(p) = out {
        m.outputs(&[p])?;
    }
    m.counters(json!({ "reports": sets.len(), "mentions": stats }));
    ctx.finish(&m, out)
}

fn score(ctx: &Ctx, a: &Path, b: &Path, measure: Option<cuisim_core::Measure>, graph: Option<PathBuf>) -> Result<()> {
    let a = require(a)?;
    let b = require(b)?;
    let graph_path = pick_optional(graph, &ctx.config.graph)?;
    let graph = graph_path.as_deref().map(load_graph).transpose()?;
    let mut distance = ctx.config.distance.clone();
    if let Some(m) = measure {
        distance.measure = m;
    }
    let scorer = Scorer::new(distance, graph.as_ref())?;
    let breakdown = scorer.compare(&read_cuiset(&a)?, &read_cuiset(&b)?);
    println!("{}", serde_json::to_string_pretty(&breakdown)?);

    let mut m = ctx.manifest("score");
    m.inputs(&[&a, &b])?;
    if let Some(p) = &graph_path {
        m.inputs(&[p])?;
    }
    m.counters(json!({ "score": breakdown.score, "degenerate": breakdown.degenerate }));
    ctx.finish(&m, None)
}

fn search_cmd(
    ctx: &Ctx,
    query: &str,
    reports: Option<PathBuf>,
    options: cuisim_core::retrieval::SearchOptions,
    graph: Option<PathBuf>,
    out: Option<&Path>,
) -> Result<()> {
    let reports = pick(reports, &ctx.config.reports, "reports")?;
    let graph_path = pick_optional(graph, &ctx.config.graph)?;
    let (index, malformed) = load_index(&reports, ctx.strict)?;
    let graph = graph_path.as_deref().map(load_graph).transpose()?;
    if options.discovery && graph.is_none() {
        log::warn!("discovery without a graph only reaches reports sharing a query concept");
    }
    let target = index
        .get(query)
        .ok_or_else(|| anyhow!("query {query} is not in {}", reports.display()))?;
    let scorer = Scorer::new(ctx.config.distance.clone(), graph.as_ref())?;
    let result = search(target, &index, graph.as_ref(), &scorer, &options);
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, &result)?;
        writeln!(w)?;
        Ok(())
    })?;

    let mut m = ctx.manifest("search");
    m.inputs(&[&reports])?;
    if let Some(p) = &graph_path {
        m.inputs(&[p])?;
    }
    if let Some(p) = out {
        m.outputs(&[p])?;
    }
    m.counters(json!({
        "indexed": index.len(),
        "malformed": malformed,
        "pool": result.pool_size,
        "returned": result.entries.len(),
    }));
    ctx.finish(&m, out)
}

fn harness(ctx: &Ctx, out: &Path, jsonl: Option<&Path>, graph: Option<PathBuf>) -> Result<()> {
    let c = &ctx.config;
    let reports = pick(None, &c.reports, "reports")?;
    let balanced_path = pick(None, &c.balanced, "balanced")?;
    let retrieval_path = pick(None, &c.retrieval, "retrieval")?;
    let graph_path = pick_optional(graph, &c.graph)?;
    let (index, malformed) = load_index(&reports, ctx.strict)?;
    let balanced = read_balanced(&balanced_path)?;
    let retrieval = read_ids(&retrieval_path)?;
    let graph = graph_path.as_deref().map(load_graph).transpose()?;
    let plan = HarnessPlan::resolve(&c.plan, balanced, retrieval, &index)?;
    let scorer = Scorer::new(c.distance.clone(), graph.as_ref())?;
    let outcome = run_harness(&plan, &index, graph.as_ref(), &scorer)?;

    let mut w = create(out)?;
    write_manifest_csv(&mut w, &outcome.entries)?;
    finish_writer(w, out)?;
    if let Some(path) = jsonl {
        let mut w = create(path)?;
        write_manifest_jsonl(&mut w, &outcome.entries)?;
        finish_writer(w, path)?;
    }
    log::info!(
        "{} searches, {} reports retrieved (budget {} per class)",
        outcome.issued.len(),
        outcome.entries.len(),
        outcome.budget_per_class
    );

    let mut m = ctx.manifest("harness");
    m.inputs(&[&reports, &balanced_path, &retrieval_path])?;
    if let Some(p) = &graph_path {
        m.inputs(&[p])?;
    }
    m.outputs(&[out])?;
    if let Some(p) = jsonl {
        m.outputs(&[p])?;
    }
    m.counters(json!({
        "malformed_reports": malformed,
        "retrieved": outcome.entries.len(),
        "per_class": outcome.per_class,
        "budget_per_class": outcome.budget_per_class,
        "unindexed_retrieval_ids": outcome.unindexed_retrieval_ids,
        "issued": outcome.issued,
    }));
    ctx.finish(&m, Some(out))
}

struct LabelInputs {
    reports: PathBuf,
    old_labels: Option<PathBuf>,
    catalog: PathBuf,
    graph: Option<PathBuf>,
}

fn label(ctx: &Ctx, inputs: LabelInputs, out: &Path, audit: Option<&Path>, options: LabelingOptions) -> Result<()> {
    let section = &ctx.config.labeler;
    if section.labels.is_empty() {
        return Err(UsageError("no labels configured: set `labels` in [labeler]".into()).into());
    }
    let catalog = load_catalog(&inputs.catalog)?;
    let graph = match &inputs.graph {
        Some(p) => load_graph(p)?,
        None => ConceptGraph::build(&catalog, &ctx.config.concept_graph.synonym_relations),
    };
    let vocab = LabelVocabulary::build(&section.labels, &catalog, &section.overrides)?;
    let load = read_jsonl(&inputs.reports, ctx.strict)?;
    let old = inputs
        .old_labels
        .as_deref()
        .map(|p| read_old_labels(p, &vocab).with_context(|| format!("loading old labels {}", p.display())))
        .transpose()?;
    let run = label_dataset(&load.sets, old.as_ref(), &vocab, Some(&graph), &options)?;

    let mut w = create(out)?;
    write_labels_csv(&mut w, &vocab, run.reports.iter().map(|r| &r.labels))?;
    finish_writer(w, out)?;
    if let Some(path) = audit {
        let mut w = create(path)?;
        write_audit(&mut w, &run.reports)?;
        finish_writer(w, path)?;
    }
    log::info!(
        "{} reports labeled, {} without old labels",
        run.summary.reports,
        run.summary.missing_old
    );

    let mut m = ctx.manifest("label");
    m.inputs(&[&inputs.reports, &inputs.catalog])?;
    for p in inputs.old_labels.iter().chain(&inputs.graph) {
        m.inputs(&[p])?;
    }
    m.outputs(&[out])?;
    if let Some(p) = audit {
        m.outputs(&[p])?;
    }
    m.counters(json!({ "malformed_reports": load.malformed, "summary": run.summary }));
    ctx.finish(&m, Some(out))
}
