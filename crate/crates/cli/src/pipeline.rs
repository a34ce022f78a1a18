//! The offline and online stages as library calls; the subcommands are thin
//! wrappers around these.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use docrefine::budget_select::{assemble, recall, select_with, CostModel, RefineOptions, RefineResult};
use docrefine::doctree::DocTree;
use docrefine::label_pipeline::{CleanConfig, LabelPipeline, PipelineStats, RawWikiPage, TrainingPair};
use docrefine::providers::{
    content_hash, structure_document, CorpusStore, HttpProvider, LeafScorer, LevelProbabilityProvider, MissReason, Prompts, ProviderConfig,
    ProviderError, SectionSelector, StoreLookup, StructMeta, Structurer, StubLevelProvider, StubStructurer,
};
use docrefine::query_analysis::{analyze, ScopeMode};
use docrefine::records::{DocumentRecord, QueryRecord};
use docrefine::refine;
use docrefine::scoring::{query_providers, score_tree, Bm25, JaccardSelector};
use docrefine::tokens::TokenCounter;
use docrefine::xml_codec::{parse, restore, CodecError, SkipPolicy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::Summary;

/// The four model-dependent components.
#[derive(Clone)]
pub struct Providers {
    pub level: Arc<dyn LevelProbabilityProvider>,
    pub structurer: Arc<dyn Structurer>,
    pub selector: Arc<dyn SectionSelector>,
    pub scorer: Arc<dyn LeafScorer>,
}

impl Providers {
    /// Deterministic offline components: rule-table query analysis, the
    /// rule-based structurer, Jaccard title overlap and BM25.
    pub fn stub(policy: SkipPolicy) -> Self {
        Self {
            level: Arc::new(StubLevelProvider),
            structurer: Arc::new(StubStructurer { policy, ..Default::default() }),
            selector: Arc::new(JaccardSelector::default()),
            scorer: Arc::new(Bm25::default()),
        }
    }

    /// One client per task, each routed to its own adapter.
    pub fn http(config: &ProviderConfig, prompts: &Prompts) -> Result<Self, ProviderError> {
        let make = |tag: &str| HttpProvider::new(config.with_adapter(tag), prompts.clone()).map(Arc::new);
        Ok(Self { level: make("query_analysis")?, structurer: make("structure")?, selector: make("select")?, scorer: make("rerank")? })
    }
}

// ---- structuring ----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DocOutcome {
    Hit,
    Structured {
        /// Why the store had no usable record.
        miss: MissReason,
        windows: usize,
        repairs: usize,
        paragraphs: usize,
        failed_paragraphs: usize,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureSummary {
    pub docs: usize,
    pub hits: usize,
    pub structured: usize,
    pub failed: usize,
    /// Records that were present but stale.
    pub stale: usize,
    /// Records found corrupt and moved to quarantine during this run.
    pub quarantined: usize,
    pub repairs: usize,
    /// Failed paragraph alignments over all aligned paragraphs.
    pub alignment_failure_rate: f64,
    pub structurer_calls: usize,
}

/// Counts structuring calls made through it.
struct Tally<'a> {
    inner: &'a dyn Structurer,
    calls: &'a AtomicUsize,
}

impl Structurer for Tally<'_> {
    fn structure(&self, text: &str) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.structure(text)
    }
    fn context_window(&self) -> usize {
        self.inner.context_window()
    }
    fn model_id(&self) -> String {
        self.inner.model_id()
    }
}

/// Structures `text` and aligns the markup back onto it. Returns the tree,
/// window count, parse repairs, and (paragraphs, failed alignments).
pub fn structure_text(
    structurer: &dyn Structurer,
    source_id: &str,
    text: &str,
    policy: &SkipPolicy,
) -> Result<(DocTree, usize, usize, (usize, usize)), String> {
    let structured = structure_document(structurer, text).map_err(|e| e.to_string())?;
    let parsed = match parse(&structured.xml) {
        Ok(p) => p,
        Err(CodecError::EmptyInput) => parse("<abstract>\n</abstract>").map_err(|e| e.to_string())?,
        Err(e) => return Err(e.to_string()),
    };
    let (tree, report) = restore(&parsed.doc, text, source_id, policy);
    let violations = tree.validate();
    if let Some(v) = violations.first() {
        return Err(format!("restored tree invalid: {v}"));
    }
    let repairs = parsed.repairs.len() + structured.stitch_repairs.len();
    Ok((tree, structured.windows, repairs, (report.paragraphs.len(), report.failed)))
}

fn structure_one(doc: &DocumentRecord, store: &CorpusStore, structurer: &dyn Structurer, policy: &SkipPolicy) -> DocOutcome {
    let miss = match store.get(&doc.source_id, &content_hash(&doc.text)) {
        StoreLookup::Hit(_) => return DocOutcome::Hit,
        StoreLookup::Miss(reason) => reason,
    };
    match structure_text(structurer, &doc.source_id, &doc.text, policy) {
        Ok((tree, windows, repairs, (paragraphs, failed_paragraphs))) => {
            match store.put(&doc.source_id, &tree, StructMeta::now(structurer.model_id(), repairs)) {
                Ok(()) => DocOutcome::Structured { miss, windows, repairs, paragraphs, failed_paragraphs },
                Err(e) => DocOutcome::Failed { error: e.to_string() },
            }
        }
        Err(error) => DocOutcome::Failed { error },
    }
}

/// Offline stage: every document not already in the store (with a matching
/// hash) is structured, restored, validated and stored.
pub fn structure_corpus(
    docs: &[DocumentRecord],
    store: &CorpusStore,
    structurer: &dyn Structurer,
    policy: &SkipPolicy,
) -> (Vec<DocOutcome>, StructureSummary) {
    let calls = AtomicUsize::new(0);
    let tally = Tally { inner: structurer, calls: &calls };
    let quarantined_before = store.quarantined();
    let outcomes: Vec<DocOutcome> = docs.par_iter().map(|d| structure_one(d, store, &tally, policy)).collect();
    let mut s = StructureSummary { docs: docs.len(), ..Default::default() };
    let (mut paragraphs, mut failed_paragraphs) = (0, 0);
    for (doc, o) in docs.iter().zip(&outcomes) {
        match o {
            DocOutcome::Hit => s.hits += 1,
            DocOutcome::Structured { miss, repairs, paragraphs: p, failed_paragraphs: f, .. } => {
                s.structured += 1;
                s.stale += usize::from(*miss == MissReason::Stale);
                s.repairs += repairs;
                paragraphs += p;
                failed_paragraphs += f;
            }
            DocOutcome::Failed { error } => {
                tracing::error!(source_id = %doc.source_id, %error, "structuring failed");
                s.failed += 1;
            }
        }
    }
    s.quarantined = store.quarantined() - quarantined_before;
    s.alignment_failure_rate = if paragraphs == 0 { 0.0 } else { failed_paragraphs as f64 / paragraphs as f64 };
    s.structurer_calls = calls.into_inner();
    (outcomes, s)
}

// ---- online refinement ----------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefineSummary {
    pub queries: usize,
    pub failed: usize,
    /// Documents structured online because the store missed.
    pub store_misses: usize,
    pub structurer_calls: usize,
    pub mean_gamma: f64,
    pub tokens: Summary,
    pub latency_ms: Summary,
    pub engine_latency_ms: Summary,
}

pub struct RefineSetup<'a> {
    pub docs: &'a HashMap<String, DocumentRecord>,
    pub store: &'a CorpusStore,
    pub providers: &'a Providers,
    pub counter: &'a dyn TokenCounter,
    pub policy: SkipPolicy,
    pub options: RefineOptions,
    pub scope: ScopeMode,
    pub trace: bool,
}

/// Loads each document's tree from the store. A miss is structured on the
/// spot (and stored), which costs provider calls on the online path.
fn load_tree(setup: &RefineSetup, id: &str, tally: &Tally) -> Result<(DocTree, bool), String> {
    let doc = setup.docs.get(id).ok_or_else(|| format!("unknown document {id}"))?;
    if let StoreLookup::Hit(rec) = setup.store.get(id, &content_hash(&doc.text)) {
        return Ok((rec.tree, false));
    }
    tracing::warn!(source_id = id, "store miss on the online path; structuring now");
    let (tree, _, repairs, _) = structure_text(tally, id, &doc.text, &setup.policy)?;
    if let Err(e) = setup.store.put(id, &tree, StructMeta::now(tally.model_id(), repairs)) {
        tracing::warn!(source_id = id, error = %e, "could not store tree");
    }
    Ok((tree, true))
}

fn refine_one(setup: &RefineSetup, q: &QueryRecord, tally: &Tally, misses: &AtomicUsize) -> Result<RefineResult, String> {
    let start = Instant::now();
    let analysis = analyze(&q.query, setup.providers.level.as_ref(), setup.scope).map_err(|e| e.to_string())?;
    let mut trees = Vec::with_capacity(q.doc_ids.len());
    for id in &q.doc_ids {
        let (tree, missed) = load_tree(setup, id, tally)?;
        misses.fetch_add(usize::from(missed), Ordering::Relaxed);
        trees.push(tree);
    }
    let refs: Vec<&DocTree> = trees.iter().collect();
    let mut r = refine(
        &refs,
        &q.query,
        &analysis,
        setup.providers.scorer.as_ref(),
        setup.providers.selector.as_ref(),
        setup.counter,
        &setup.options,
    )
    .map_err(|e| e.to_string())?;
    r.query_id = q.query_id.clone();
    r.latency_ms = start.elapsed().as_secs_f64() * 1000.0;
    if !setup.trace {
        r.trace = None;
    }
    Ok(r)
}

/// Online stage over a batch of queries. Failed queries are logged and left
/// out of the results.
pub fn refine_queries(setup: &RefineSetup, queries: &[QueryRecord]) -> (Vec<RefineResult>, RefineSummary) {
    let calls = AtomicUsize::new(0);
    let misses = AtomicUsize::new(0);
    let tally = Tally { inner: setup.providers.structurer.as_ref(), calls: &calls };
    let outcomes: Vec<Result<RefineResult, String>> = queries.par_iter().map(|q| refine_one(setup, q, &tally, &misses)).collect();
    let mut results = Vec::with_capacity(queries.len());
    let mut failed = 0;
    for (q, o) in queries.iter().zip(outcomes) {
        match o {
            Ok(r) => results.push(r),
            Err(e) => {
                tracing::error!(query_id = %q.query_id, error = %e, "refinement failed");
                failed += 1;
            }
        }
    }
    let col = |f: fn(&RefineResult) -> f64| results.iter().map(f).collect::<Vec<f64>>();
    let gammas: Vec<f64> = results.iter().filter_map(|r| r.gamma).collect();
    let summary = RefineSummary {
        queries: queries.len(),
        failed,
        store_misses: misses.into_inner(),
        structurer_calls: calls.into_inner(),
        mean_gamma: crate::stats::mean(&gammas).unwrap_or(0.0),
        tokens: Summary::of(&col(|r| r.tokens as f64)),
        latency_ms: Summary::of(&col(|r| r.latency_ms)),
        engine_latency_ms: Summary::of(&col(|r| r.engine_latency_ms)),
    };
    (results, summary)
}

// ---- evaluation -----------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub queries: usize,
    /// Queries in the query file without a result row.
    pub missing: usize,
    pub recall: f64,
    pub mean_gamma: f64,
    pub tokens: Summary,
    pub latency_ms: Summary,
    pub engine_latency_ms: Summary,
    /// Recall and gamma of handing over the documents unrefined.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_content: Option<FullContent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullContent {
    pub recall: f64,
    pub gamma: f64,
}

pub fn full_context(q: &QueryRecord, docs: &HashMap<String, DocumentRecord>) -> String {
    q.doc_ids.iter().filter_map(|id| docs.get(id)).map(|d| d.text.as_str()).collect::<Vec<_>>().join("\n\n")
}

pub fn evaluate(results: &[RefineResult], queries: &[QueryRecord], docs: Option<&HashMap<String, DocumentRecord>>) -> Metrics {
    let by_id: HashMap<&str, &RefineResult> = results.iter().map(|r| (r.query_id.as_str(), r)).collect();
    let mut pairs: Vec<(&str, &[String])> = Vec::new();
    let mut missing = 0;
    for q in queries {
        match by_id.get(q.query_id.as_str()) {
            Some(r) => pairs.push((r.context.as_str(), q.golden_answers.as_slice())),
            None => {
                missing += 1;
                pairs.push(("", q.golden_answers.as_slice()));
            }
        }
    }
    let full_content = docs.map(|docs| {
        let contexts: Vec<String> = queries.iter().map(|q| full_context(q, docs)).collect();
        FullContent { recall: recall(contexts.iter().zip(queries).map(|(c, q)| (c.as_str(), q.golden_answers.as_slice()))), gamma: 1.0 }
    });
    let gammas: Vec<f64> = results.iter().filter_map(|r| r.gamma).collect();
    let col = |f: fn(&RefineResult) -> f64| results.iter().map(f).collect::<Vec<f64>>();
    Metrics {
        queries: queries.len(),
        missing,
        recall: recall(pairs),
        mean_gamma: crate::stats::mean(&gammas).unwrap_or(0.0),
        tokens: Summary::of(&col(|r| r.tokens as f64)),
        latency_ms: Summary::of(&col(|r| r.latency_ms)),
        engine_latency_ms: Summary::of(&col(|r| r.engine_latency_ms)),
        full_content,
    }
}

// ---- label building -------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    #[serde(flatten)]
    pub pipeline: PipelineStats,
    pub k: usize,
    /// Label tokens over text tokens, per pair.
    pub elision_ratio: Summary,
    /// Text tokens over label tokens, per pair.
    pub gamma: Summary,
}

pub fn build_labels(pages: &[RawWikiPage], policy: SkipPolicy) -> Result<(Vec<TrainingPair>, LabelStats), String> {
    let pipeline = LabelPipeline::new(&CleanConfig::default(), policy).map_err(|e| e.to_string())?;
    let (pairs, stats) = pipeline.build_pairs(pages);
    let ratios: Vec<f64> = pairs.iter().map(|p| p.stats.elision_ratio).collect();
    let gammas: Vec<f64> = pairs.iter().filter(|p| p.stats.label_tokens > 0).map(|p| 1.0 / p.stats.elision_ratio).collect();
    Ok((pairs, LabelStats { pipeline: stats, k: policy.k(), elision_ratio: Summary::of(&ratios), gamma: Summary::of(&gammas) }))
}

// ---- benchmarking ---------------------------------------------------------

pub const STAGES: [&str; 5] = ["parse", "restore", "score", "select", "assemble"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub docs: usize,
    pub iterations: usize,
    pub budget: usize,
    pub doc_tokens: Vec<usize>,
    /// Selected node count per document (last iteration).
    pub selected: Vec<usize>,
    pub stages: Vec<StageTiming>,
    /// score + select + assemble per document and iteration.
    pub online: StageTiming,
}

impl BenchReport {
    /// The report with every timing zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let zero = |s: &StageTiming| StageTiming { stage: s.stage.clone(), p50_ms: 0.0, p95_ms: 0.0, mean_ms: 0.0 };
        Self { stages: self.stages.iter().map(zero).collect(), online: zero(&self.online), ..self.clone() }
    }
}

fn timing(stage: &str, ms: &[f64]) -> StageTiming {
    let s = Summary::of(ms);
    StageTiming { stage: stage.into(), p50_ms: s.p50, p95_ms: s.p95, mean_ms: s.mean }
}

/// Times the engine stages on each (document, query) pair. Structuring and
/// provider calls happen once per document, outside the timed region.
pub fn bench(
    docs: &[(DocumentRecord, String)],
    providers: &Providers,
    counter: &dyn TokenCounter,
    policy: &SkipPolicy,
    options: &RefineOptions,
    iterations: usize,
) -> Result<BenchReport, String> {
    let mut samples: [Vec<f64>; 5] = Default::default();
    let mut online = Vec::new();
    let mut selected = Vec::new();
    let mut doc_tokens = Vec::new();
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1000.0;
    for (doc, query) in docs {
        let xml = structure_document(providers.structurer.as_ref(), &doc.text).map_err(|e| e.to_string())?.xml;
        let analysis = analyze(query, providers.level.as_ref(), ScopeMode::default()).map_err(|e| e.to_string())?;
        doc_tokens.push(counter.count(&doc.text));
        let mut last = 0;
        for _ in 0..iterations {
            let t = Instant::now();
            let parsed = parse(&xml).map_err(|e| e.to_string())?;
            samples[0].push(ms(t));
            let t = Instant::now();
            let (tree, _) = restore(&parsed.doc, &doc.text, &doc.source_id, policy);
            samples[1].push(ms(t));
            // provider calls are not part of the engine timing
            let provided =
                query_providers(&tree, query, providers.scorer.as_ref(), providers.selector.as_ref()).map_err(|e| e.to_string())?;
            let t = Instant::now();
            let scores = score_tree(&tree, &provided, analysis.r_q);
            let score_ms = ms(t);
            let t = Instant::now();
            let costs = CostModel::new(&tree, counter);
            let sel = select_with(&tree, &scores.combined, options.budget, &costs, options.stop_on_first_overflow);
            let select_ms = ms(t);
            let t = Instant::now();
            let text = assemble(&tree, &sel.selected);
            let assemble_ms = ms(t);
            std::hint::black_box(text);
            samples[2].push(score_ms);
            samples[3].push(select_ms);
            samples[4].push(assemble_ms);
            online.push(score_ms + select_ms + assemble_ms);
            last = sel.ids().len();
        }
        selected.push(last);
    }
    Ok(BenchReport {
        docs: docs.len(),
        iterations,
        budget: options.budget.max_tokens,
        doc_tokens,
        selected,
        stages: STAGES.iter().zip(&samples).map(|(s, v)| timing(s, v)).collect(),
        online: timing("online", &online),
    })
}
