//! Command-line driver: offline label building and structuring, online
//! refinement, evaluation and benchmarking.

pub mod args;
pub mod pipeline;
pub mod stats;

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use docrefine::budget_select::{Budget, RefineOptions, RefineResult};
use docrefine::providers::{CorpusStore, Prompts, ProviderConfig};
use docrefine::records::{read_jsonl, write_jsonl, DocumentRecord, QueryRecord};
use docrefine::synth::Synth;
use docrefine::tokens::TokenCounter;
use docrefine::xml_codec::SkipPolicy;
use serde::Serialize;
use thiserror::Error;

use args::{BenchArgs, BuildLabelsArgs, Cli, Command, Common, EvalArgs, Overflow, ProviderMode, RefineArgs, StructureArgs};
use pipeline::{Providers, RefineSetup};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation: missing files, invalid values. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Anything that went wrong while running. Exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>, CliError> {
    require_file(path, what)?;
    let f = File::open(path).map_err(runtime)?;
    read_jsonl(BufReader::new(f)).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn write_records<T: Serialize>(path: Option<&Path>, items: &[T]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(runtime)?;
            }
            write_jsonl(BufWriter::new(File::create(p).map_err(runtime)?), items).map_err(runtime)
        }
        None => write_jsonl(io::stdout().lock(), items).map_err(runtime),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(path, text + "\n").map_err(runtime)
}

/// The run summary: JSON on stdout with `--json`, otherwise a log line.
fn report<T: Serialize>(common: &Common, what: &str, summary: &T) -> Result<(), CliError> {
    let text = serde_json::to_string(summary).map_err(runtime)?;
    if common.json {
        let mut out = io::stdout().lock();
        writeln!(out, "{text}").map_err(runtime)?;
    } else {
        tracing::info!("{what}: {text}");
    }
    Ok(())
}

fn policy(common: &Common) -> Result<SkipPolicy, CliError> {
    SkipPolicy::with_k(common.k).map_err(|e| CliError::Usage(format!("--k: {e}")))
}

fn counter(common: &Common) -> Result<Box<dyn TokenCounter>, CliError> {
    common.tokenizer.build().map_err(|e| CliError::Usage(format!("--tokenizer {}: {e}", common.tokenizer)))
}

fn budget(max_tokens: usize) -> Result<Budget, CliError> {
    Budget::new(max_tokens).ok_or_else(|| CliError::Usage("--budget must be at least 1".into()))
}

fn providers(common: &Common) -> Result<Providers, CliError> {
    let policy = policy(common)?;
    match common.provider {
        ProviderMode::Stub => Ok(Providers::stub(policy)),
        ProviderMode::Http => {
            let mut config = ProviderConfig::from_env();
            if let Some(e) = &common.endpoint {
                config.endpoint_url = e.clone();
            }
            if let Some(m) = &common.model {
                config.model_name = m.clone();
            }
            config.skip_k = policy.k();
            let prompts = match &common.prompt_dir {
                Some(dir) => Prompts::from_dir(dir).map_err(|e| CliError::Usage(format!("--prompt-dir: {e}")))?,
                None => Prompts::default(),
            };
            Providers::http(&config, &prompts).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

fn docs_by_id(docs: Vec<DocumentRecord>) -> HashMap<String, DocumentRecord> {
    docs.into_iter().map(|d| (d.source_id.clone(), d)).collect()
}

fn stop_on_overflow(overflow: Overflow, flag: bool) -> bool {
    flag || overflow == Overflow::Stop
}

fn cmd_build_labels(common: &Common, a: &BuildLabelsArgs) -> Result<(), CliError> {
    let pages = read_records(&a.input, "input")?;
    let (pairs, stats) = pipeline::build_labels(&pages, policy(common)?).map_err(runtime)?;
    write_records(Some(&a.output), &pairs)?;
    let stats_path = a.stats.clone().unwrap_or_else(|| {
        let mut p = a.output.clone().into_os_string();
        p.push(".stats.json");
        PathBuf::from(p)
    });
    write_json(&stats_path, &stats)?;
    report(common, "labels", &stats)
}

fn cmd_structure(common: &Common, a: &StructureArgs) -> Result<(), CliError> {
    let docs: Vec<DocumentRecord> = read_records(&a.input, "input")?;
    let policy = policy(common)?;
    let providers = providers(common)?;
    let store = CorpusStore::open(&a.store, policy).map_err(runtime)?;
    let (outcomes, summary) = pipeline::structure_corpus(&docs, &store, providers.structurer.as_ref(), &policy);
    if let Some(out) = &a.output {
        #[derive(Serialize)]
        struct Row<'a> {
            source_id: &'a str,
            #[serde(flatten)]
            outcome: &'a pipeline::DocOutcome,
        }
        let rows: Vec<Row> = docs.iter().zip(&outcomes).map(|(d, o)| Row { source_id: &d.source_id, outcome: o }).collect();
        write_records(Some(out), &rows)?;
    }
    report(common, "structure", &summary)?;
    if summary.failed > 0 {
        return Err(runtime(format!("{} of {} documents failed", summary.failed, summary.docs)));
    }
    Ok(())
}

fn cmd_refine(common: &Common, a: &RefineArgs) -> Result<(), CliError> {
    let queries: Vec<QueryRecord> = read_records(&a.input, "input")?;
    let docs = docs_by_id(read_records(&a.docs, "docs")?);
    let policy = policy(common)?;
    let counter = counter(common)?;
    let providers = providers(common)?;
    let store = CorpusStore::open(&a.store, policy).map_err(runtime)?;
    let setup = RefineSetup {
        docs: &docs,
        store: &store,
        providers: &providers,
        counter: counter.as_ref(),
        policy,
        options: RefineOptions {
            budget: budget(a.budget)?,
            stop_on_first_overflow: stop_on_overflow(a.overflow, a.stop_on_first_overflow),
        },
        scope: a.scope.into(),
        trace: a.trace,
    };
    let (results, summary) = pipeline::refine_queries(&setup, &queries);
    write_records(a.output.as_deref(), &results)?;
    report(common, "refine", &summary)?;
    if summary.failed > 0 {
        return Err(runtime(format!("{} of {} queries failed", summary.failed, summary.queries)));
    }
    Ok(())
}

fn cmd_eval(common: &Common, a: &EvalArgs) -> Result<(), CliError> {
    let results: Vec<RefineResult> = read_records(&a.input, "input")?;
    let queries: Vec<QueryRecord> = read_records(&a.queries, "queries")?;
    let docs = a.docs.as_deref().map(|p| read_records(p, "docs").map(docs_by_id)).transpose()?;
    let metrics = pipeline::evaluate(&results, &queries, docs.as_ref());
    let value = match &a.compare {
        None => serde_json::to_value(&metrics).map_err(runtime)?,
        Some(other) => {
            let other_results: Vec<RefineResult> = read_records(other, "compare")?;
            let b = pipeline::evaluate(&other_results, &queries, docs.as_ref());
            serde_json::json!({
                "a": metrics,
                "b": b,
                "recall_delta": b.recall - metrics.recall,
                "gamma_delta": b.mean_gamma - metrics.mean_gamma,
            })
        }
    };
    if let Some(out) = &a.output {
        write_json(out, &value)?;
    }
    report(common, "eval", &value)
}

fn cmd_bench(common: &Common, a: &BenchArgs) -> Result<(), CliError> {
    let docs: Vec<DocumentRecord> = read_records(&a.docs, "docs")?;
    let queries: Vec<QueryRecord> = a.queries.as_deref().map(|p| read_records(p, "queries")).transpose()?.unwrap_or_default();
    let policy = policy(common)?;
    let counter = counter(common)?;
    let providers = providers(common)?;
    let mut synth = Synth::new(common.seed);
    let pairs: Vec<(DocumentRecord, String)> = docs
        .into_iter()
        .map(|mut d| {
            if let Some(n) = a.pad_to {
                d.text = synth.pad(&d.text, n);
            }
            let q = queries
                .iter()
                .find(|q| q.doc_ids.contains(&d.source_id))
                .map(|q| q.query.clone())
                .unwrap_or_else(|| "What is this document about?".into());
            (d, q)
        })
        .collect();
    let options = RefineOptions { budget: budget(a.budget)?, stop_on_first_overflow: a.overflow == Overflow::Stop };
    let report_ = pipeline::bench(&pairs, &providers, counter.as_ref(), &policy, &options, a.iterations.max(1)).map_err(runtime)?;
    if let Some(out) = &a.output {
        write_json(out, &report_)?;
    }
    report(common, "bench", &report_)
}

/// Runs one parsed invocation with a thread pool sized by `--jobs`.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.common.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(runtime)?;
    pool.install(|| match &cli.command {
        Command::BuildLabels(a) => cmd_build_labels(&cli.common, a),
        Command::Structure(a) => cmd_structure(&cli.common, a),
        Command::Refine(a) => cmd_refine(&cli.common, a),
        Command::Eval(a) => cmd_eval(&cli.common, a),
        Command::Bench(a) => cmd_bench(&cli.common, a),
    })
}
