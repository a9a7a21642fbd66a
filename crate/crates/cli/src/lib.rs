//! `apichain` command-line driver: parse, infer, eval, record, cache and
//! catalog subcommands. Data goes to the named output files; diagnostics go
//! to stderr.

mod input;
mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use apichain::config::{split_relations, BackendKind, ConfigLayer, PipelineConfig};
use apichain::eval::{
    fqn_accuracy, gold_triples, load_dataset, predicted_triples, prediction_rows, score_relations, EvalReport,
    PredictionRow,
};
use apichain::gateway::{Complete, DiskCache, FixtureStore, Gateway, Tracked};
use apichain::model::{ApiPair, Fqn, Warning};
use apichain::parser::parse;
use apichain::pipeline::{infer_batch, RelationReport, Variant};
use apichain::prompting::PromptCatalog;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use input::{read_inputs, InputText};
pub use manifest::{digest_bytes, manifest_path, RunManifest, TextStats, Totals};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "apichain", version, about = "Infer relations between APIs mentioned in developer text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract FQNs and API pairs from each text.
    Parse(IoArgs),
    /// Infer relation triples for each text.
    Infer(InferArgs),
    /// Score predictions against a gold file.
    Eval(EvalArgs),
    /// Run inference while saving every exchange as a replay fixture.
    Record(RecordArgs),
    /// Inspect or clear a response cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Prompt catalog utilities.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["http", "replay", "mock"])]
    backend: Option<String>,
    /// Reply rules for the mock backend.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Fixture directory for the replay backend.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Response cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Directory of `<unit>.prompt.json` overrides.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Few-shot examples per prompt.
    #[arg(long)]
    examples: Option<usize>,
    #[arg(long)]
    model: Option<String>,
}

impl BackendArgs {
    fn layer(&self) -> Result<ConfigLayer, String> {
        Ok(ConfigLayer {
            backend: self.backend.as_deref().map(str::parse::<BackendKind>).transpose()?,
            mock_script: self.mock_script.clone(),
            fixtures_dir: self.fixtures.clone(),
            cache_dir: self.cache.clone(),
            catalog_dir: self.catalog.clone(),
            concurrency: self.concurrency,
            examples: self.examples,
            model: self.model.clone(),
            ..Default::default()
        })
    }
}

#[derive(Debug, Args)]
struct IoArgs {
    /// Plain-text document, or JSONL of {id, text}.
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
struct InferArgs {
    #[command(flatten)]
    io: IoArgs,
    /// full, direct, cot, ard1, ard2 or ard3.
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated relation names.
    #[arg(long)]
    relations: Option<String>,
}

#[derive(Debug, Args)]
struct RecordArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Where fixtures are written.
    #[arg(long)]
    fixtures: PathBuf,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    relations: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to http.
    #[arg(long, value_parser = ["http", "mock"])]
    backend: Option<String>,
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    examples: Option<usize>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// RelationReport JSONL from `infer`, or rows of {id, api1, api2, relation, holds}.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Output of `parse`, for FQN accuracy.
    #[arg(long)]
    parsed: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum CacheAction {
    Stats {
        #[arg(long)]
        cache: PathBuf,
    },
    Clear {
        #[arg(long)]
        cache: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogAction {
    /// Write the bundled templates as editable files.
    Export { dir: PathBuf },
}

/// Per-text output of `parse`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRow {
    pub id: String,
    pub fqns: Vec<Fqn>,
    pub pairs: Vec<ApiPair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub non_fqns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs the CLI and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Parse(a) => cmd_parse(&a),
        Command::Infer(a) => cmd_infer(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Record(a) => cmd_record(&a),
        Command::Cache { action } => cmd_cache(&action),
        Command::Catalog { action } => cmd_catalog(&action),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    }
}

fn resolve(flags: ConfigLayer, file: Option<&Path>) -> Result<PipelineConfig, String> {
    PipelineConfig::resolve(flags, file).map_err(|e| e.to_string())
}

fn run_flags(variant: &Option<String>, relations: &Option<String>) -> Result<ConfigLayer, String> {
    Ok(ConfigLayer {
        variant: variant
            .as_deref()
            .map(str::parse::<Variant>)
            .transpose()
            .map_err(|e| e.to_string())?,
        relations: relations.as_deref().map(split_relations),
        ..Default::default()
    })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), String> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| e.to_string())?;
        out.push(b'\n');
    }
    write_file(path, &out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    }
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn exit_for(errors: usize) -> i32 {
    if errors == 0 {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

fn cmd_parse(args: &IoArgs) -> Result<i32, String> {
    let config = resolve(args.backend.layer()?, args.backend.config.as_deref())?;
    let gateway = config.gateway().map_err(|e| e.to_string())?;
    let catalog = config.catalog().map_err(|e| e.to_string())?;
    let (texts, bytes) = read_inputs(&args.input)?;
    let mut manifest = RunManifest::start("parse", Some(&config), &args.input, &bytes, gateway.backend_id());
    let mut rows = Vec::new();
    for t in &texts {
        let started = Instant::now();
        let tracked = Tracked::new(&gateway);
        let row = parse_row(t, &catalog, &tracked);
        manifest.record_text(&t.id, tracked.stats(), started, row.pairs.len(), row.error.clone());
        rows.push(row);
    }
    write_jsonl(&args.output, &rows)?;
    manifest.finish(&args.output)?;
    Ok(exit_for(manifest.totals.errors))
}

fn parse_row(t: &InputText, catalog: &PromptCatalog, gateway: &dyn Complete) -> ParseRow {
    match parse(&t.id, &t.text, catalog, gateway) {
        Ok(p) => ParseRow {
            id: t.id.clone(),
            fqns: p.fqns,
            pairs: p.pairs,
            non_fqns: p.non_fqns,
            warnings: p.warnings,
            error: None,
        },
        Err(e) => ParseRow {
            id: t.id.clone(),
            fqns: Vec::new(),
            pairs: Vec::new(),
            non_fqns: Vec::new(),
            warnings: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn infer_with(
    command: &str,
    config: &PipelineConfig,
    gateway: &Gateway,
    input: &Path,
    output: &Path,
) -> Result<i32, String> {
    let catalog = config.catalog().map_err(|e| e.to_string())?;
    let (texts, bytes) = read_inputs(input)?;
    let mut manifest = RunManifest::start(command, Some(config), input, &bytes, gateway.backend_id());
    let pairs: Vec<(String, String)> = texts.into_iter().map(|t| (t.id, t.text)).collect();
    let reports = infer_batch(&pairs, &config.settings, &catalog, gateway);
    for r in &reports {
        manifest.record_report(r);
        if let Some(e) = &r.error {
            eprintln!("{}: {e}", r.source_id);
        }
    }
    manifest.totals.gateway_calls = gateway.stats().gateway_calls;
    manifest.totals.cache_hits = gateway.stats().cache_hits;
    write_jsonl(output, &reports)?;
    manifest.finish(output)?;
    Ok(exit_for(manifest.totals.errors))
}

fn cmd_infer(args: &InferArgs) -> Result<i32, String> {
    let flags = run_flags(&args.variant, &args.relations)?.over(args.io.backend.layer()?);
    let config = resolve(flags, args.io.backend.config.as_deref())?;
    let gateway = config.gateway().map_err(|e| e.to_string())?;
    infer_with("infer", &config, &gateway, &args.io.input, &args.io.output)
}

fn cmd_record(args: &RecordArgs) -> Result<i32, String> {
    let backend = args.backend.as_deref().unwrap_or("http").parse::<BackendKind>()?;
    let flags = run_flags(&args.variant, &args.relations)?.over(ConfigLayer {
        backend: Some(backend),
        fixtures_dir: Some(args.fixtures.clone()),
        mock_script: args.mock_script.clone(),
        cache_dir: args.cache.clone(),
        catalog_dir: args.catalog.clone(),
        concurrency: args.concurrency,
        examples: args.examples,
        model: args.model.clone(),
        ..Default::default()
    });
    let config = resolve(flags, args.config.as_deref())?;
    let gateway = config
        .gateway()
        .map_err(|e| e.to_string())?
        .with_recorder(FixtureStore::new(&args.fixtures));
    infer_with("record", &config, &gateway, &args.input, &args.output)
}

/// Reads predictions from `infer` reports or plain prediction rows.
pub fn load_prediction_file(path: &Path) -> Result<Vec<PredictionRow>, String> {
    let raw = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: String| format!("{}:{}: {e}", path.display(), i + 1);
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
        if value.get("triples").is_some() {
            let report: RelationReport = serde_json::from_value(value).map_err(|e| at(e.to_string()))?;
            rows.extend(prediction_rows(&report));
        } else {
            let row: PredictionRow = serde_json::from_value(value).map_err(|e| at(e.to_string()))?;
            row.triple().map_err(at)?;
            rows.push(row);
        }
    }
    Ok(rows)
}

fn cmd_eval(args: &EvalArgs) -> Result<i32, String> {
    let (gold, warnings) = load_dataset(&args.gold).map_err(|e| e.to_string())?;
    for w in &warnings {
        eprintln!("warning: {}", w.message);
    }
    let pred = load_prediction_file(&args.pred)?;
    let metrics = score_relations(&predicted_triples(&pred, &gold), &gold_triples(&gold));
    let mut accuracy = BTreeMap::new();
    if let Some(parsed) = &args.parsed {
        let raw = fs::read_to_string(parsed).map_err(|e| format!("{}: {e}", parsed.display()))?;
        let mut by_id = BTreeMap::new();
        for (i, line) in raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: ParseRow =
                serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", parsed.display(), i + 1))?;
            by_id.insert(row.id, row.fqns.iter().map(Fqn::normalized).collect::<Vec<_>>());
        }
        match fqn_accuracy(&by_id, &gold) {
            Ok(acc) => {
                accuracy.insert("fqn".to_string(), acc);
            }
            Err(e) => eprintln!("warning: fqn accuracy skipped: {e}"),
        }
    }
    let report = EvalReport::new(metrics, accuracy);
    let table = report.table();
    print!("{table}");
    let _ = std::io::stdout().flush();
    if let Some(path) = &args.report {
        let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| e.to_string())?;
        bytes.push(b'\n');
        write_file(path, &bytes)?;
        let mut inputs = fs::read(&args.pred).map_err(|e| e.to_string())?;
        inputs.extend(fs::read(&args.gold).map_err(|e| e.to_string())?);
        let mut manifest = RunManifest::start("eval", None, &args.pred, &inputs, "none");
        manifest.finish(path)?;
    }
    Ok(EXIT_OK)
}

fn cmd_cache(action: &CacheAction) -> Result<i32, String> {
    match action {
        CacheAction::Stats { cache } => {
            println!("{} entries in {}", DiskCache::new(cache).len(), cache.display());
        }
        CacheAction::Clear { cache } => {
            let removed = DiskCache::new(cache).clear().map_err(|e| e.to_string())?;
            eprintln!("removed {removed} entries");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_catalog(action: &CatalogAction) -> Result<i32, String> {
    match action {
        CatalogAction::Export { dir } => {
            PromptCatalog::bundled().write_dir(dir).map_err(|e| e.to_string())?;
            eprintln!("wrote {} templates to {}", PromptCatalog::bundled().unit_ids().count(), dir.display());
        }
    }
    Ok(EXIT_OK)
}
