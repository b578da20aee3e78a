//! `rscm`: dataset pipeline command line.
//!
//! Subcommands cover the full life of a dataset: `generate` synthesizes
//! tampered records and QA triples from a corpus, `balance` draws an
//! answer-balanced subset, `split` partitions by source image, `stats`
//! prints distribution summaries, `verify` runs the independent oracle,
//! and `score` evaluates model predictions.
//!
//! Exit codes: 0 ok, 1 verification violations, 2 configuration error,
//! 3 input error, 4 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rscm_core::curate::{
    balance, distribution_report, qid_deviation, split, BalanceRecord, BalanceSpec, Split,
    BALANCE_RECORD_FILE, DEFAULT_RATIOS,
};
use rscm_core::dataset::{
    read_manifest, read_triples, split_file_path, write_split_file, write_triples, MANIFEST_FILE,
    TRIPLES_FILE,
};
use rscm_core::error::Error as CoreError;
use rscm_core::eval::{read_predictions, score, ScorePolicy};
use rscm_core::oracle::verify_dataset;
use rscm_core::pipeline::{generate, GenerateConfig};
use rscm_core::qa::{DatasetKind, Registry};

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INPUT: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

/// Default file name for balanced triple subsets.
const BALANCED_FILE: &str = "triples.balanced.jsonl";

#[derive(Parser)]
#[command(name = "rscm", version, about = "Tampered-image dataset pipeline")]
struct Cli {
    /// TOML config file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Global random seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to RSCM_WORKERS, then logical cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Dataset root directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a tampered dataset with QA triples from a corpus
    Generate(GenerateArgs),
    /// Draw an answer-balanced subset of the dataset's triples
    Balance(BalanceArgs),
    /// Partition the dataset 70/15/15 by source image
    #[command(name = "split")]
    SplitCmd(SplitArgs),
    /// Print triple distribution statistics as JSON
    Stats(StatsArgs),
    /// Re-check every constraint and answer with the independent verifier
    Verify(VerifyArgs),
    /// Score model predictions against the dataset's triples
    Score(ScoreArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Corpus root (must hold a corpus index)
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    /// Dataset flavor: cmqa or tqa
    #[arg(long)]
    kind: Option<String>,
    /// Placement retries per instance before skipping it
    #[arg(long)]
    max_attempts: Option<u32>,
    /// Question registry JSON (defaults to the built-in registry)
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
}

#[derive(Args)]
struct BalanceArgs {
    /// Maximum relative deviation between per-qid counts
    #[arg(long)]
    tolerance: Option<f64>,
    /// Per-qid output count (clamped to the smallest qid count)
    #[arg(long)]
    target: Option<u64>,
    /// Output file name, relative to the dataset root
    #[arg(long, default_value = BALANCED_FILE)]
    output: String,
}

#[derive(Args)]
struct SplitArgs {
    /// Train/val/test ratios
    #[arg(long, value_name = "R,R,R")]
    ratios: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    /// Triples file to report on, relative to the dataset root
    #[arg(long, default_value = TRIPLES_FILE)]
    triples: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Treat warnings as violations
    #[arg(long)]
    strict: bool,
    /// Question registry JSON (defaults to the built-in registry)
    #[arg(long, value_name = "FILE")]
    registry: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Predictions file: one JSON record per line (triple_id, answer)
    #[arg(long, value_name = "FILE")]
    predictions: PathBuf,
    /// Gold triples file, relative to the dataset root
    #[arg(long, default_value = TRIPLES_FILE)]
    triples: String,
    /// Error on unknown or missing triple ids instead of counting them
    #[arg(long)]
    strict: bool,
    /// Write per-qid accuracies as CSV
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

/// Optional TOML configuration; any flag wins over its file value.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    corpus_root: Option<PathBuf>,
    out_root: Option<PathBuf>,
    dataset_kind: Option<String>,
    global_seed: Option<u64>,
    workers: Option<usize>,
    max_attempts: Option<u32>,
    registry_path: Option<PathBuf>,
    tolerance: Option<f64>,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn input(message: impl Into<String>) -> Failure {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

/// Classify a library error: bad inputs exit 3, everything unexpected 4.
fn classify(e: CoreError) -> Failure {
    let code = match &e {
        CoreError::Config(_) => EXIT_CONFIG,
        CoreError::IoFailure { .. } => EXIT_RUNTIME,
        _ => EXIT_INPUT,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, Failure> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::config(format!("config {}: {e}", path.display())))
}

fn parse_kind(s: &str) -> Result<DatasetKind, Failure> {
    DatasetKind::from_label(s)
        .map_err(|_| Failure::config(format!("unknown dataset kind '{s}' (expected cmqa or tqa)")))
}

fn resolve_workers(flag: Option<usize>, file: Option<usize>) -> Result<usize, Failure> {
    if let Some(w) = flag.or(file) {
        if w == 0 {
            return Err(Failure::config("workers must be at least 1"));
        }
        return Ok(w);
    }
    if let Ok(env) = std::env::var("RSCM_WORKERS") {
        return env
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&w| w > 0)
            .ok_or_else(|| Failure::config(format!("RSCM_WORKERS is not a worker count: '{env}'")));
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn resolve_root(flag: Option<&Path>, file: Option<&Path>) -> Result<PathBuf, Failure> {
    flag.or(file)
        .map(Path::to_path_buf)
        .ok_or_else(|| Failure::config("no dataset root: pass --out or set out_root in the config"))
}

fn load_registry(flag: Option<&Path>, file: Option<&Path>) -> Result<Registry, Failure> {
    match flag.or(file) {
        None => Ok(Registry::builtin()),
        Some(path) => Registry::from_path(path).map_err(classify),
    }
}

fn read_dataset_triples(root: &Path, rel: &str) -> Result<Vec<rscm_core::qa::Triple>, Failure> {
    read_triples(&root.join(rel)).map_err(classify)
}

fn cmd_generate(cli: &Cli, args: &GenerateArgs, file: &FileConfig) -> Result<(), Failure> {
    let corpus_root = args
        .corpus
        .as_deref()
        .or(file.corpus_root.as_deref())
        .ok_or_else(|| Failure::config("no corpus: pass --corpus or set corpus_root"))?;
    let out_root = resolve_root(cli.out.as_deref(), file.out_root.as_deref())?;
    let kind = match args.kind.as_deref().or(file.dataset_kind.as_deref()) {
        Some(s) => parse_kind(s)?,
        None => DatasetKind::Cmqa,
    };
    let config = GenerateConfig {
        dataset_kind: kind,
        global_seed: cli.seed.or(file.global_seed).unwrap_or(0),
        workers: resolve_workers(cli.workers, file.workers)?,
        max_attempts: args.max_attempts.or(file.max_attempts).unwrap_or(100),
    };
    let registry = load_registry(args.registry.as_deref(), file.registry_path.as_deref())?;
    let corpus = rscm_core::dataset::load_corpus(corpus_root).map_err(classify)?;
    let outcome = generate(&corpus, &registry, &config, &out_root).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        message: format!("generation failed: {e}"),
    })?;
    println!(
        "generated {} records, {} triples ({} instances skipped) -> {}",
        outcome.manifest.items.len(),
        outcome.manifest.triple_count,
        outcome.skipped.len(),
        out_root.display()
    );
    for s in &outcome.skipped {
        eprintln!("skipped {}/{}: {}", s.image_id, s.instance_id, s.reason);
    }
    Ok(())
}

fn cmd_balance(cli: &Cli, args: &BalanceArgs, file: &FileConfig) -> Result<(), Failure> {
    let root = resolve_root(cli.out.as_deref(), file.out_root.as_deref())?;
    let triples = read_dataset_triples(&root, TRIPLES_FILE)?;
    let spec = BalanceSpec {
        tolerance: args.tolerance.or(file.tolerance).unwrap_or(0.02),
        per_qid_target: args.target,
        seed: cli.seed.or(file.global_seed).unwrap_or(0),
    };
    let balanced = balance(&triples, &spec).map_err(classify)?;
    write_triples(&balanced, &root.join(&args.output)).map_err(classify)?;
    let record = BalanceRecord {
        spec,
        source: TRIPLES_FILE.to_string(),
        output: args.output.clone(),
    };
    let record_path = root.join(BALANCE_RECORD_FILE);
    let text = serde_json::to_string_pretty(&record)
        .map_err(|e| Failure::input(format!("serialize balance record: {e}")))?;
    std::fs::write(&record_path, text)
        .map_err(|e| Failure::input(format!("{}: {e}", record_path.display())))?;

    let report = distribution_report(&balanced);
    let deviation = qid_deviation(&report).unwrap_or(0.0);
    println!(
        "balanced {} -> {} triples, per-qid deviation {deviation:.4}",
        triples.len(),
        balanced.len(),
    );
    Ok(())
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::config(format!("ratios must be three numbers: '{s}'")))?;
    if parts.len() != 3 {
        return Err(Failure::config(format!("ratios must be three numbers: '{s}'")));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn cmd_split(cli: &Cli, args: &SplitArgs, file: &FileConfig) -> Result<(), Failure> {
    let root = resolve_root(cli.out.as_deref(), file.out_root.as_deref())?;
    let manifest = read_manifest(&root.join(MANIFEST_FILE), false).map_err(classify)?;
    let ratios = match args.ratios.as_deref() {
        Some(s) => parse_ratios(s)?,
        None => DEFAULT_RATIOS,
    };
    let groups: Vec<String> = {
        let mut g: Vec<String> = manifest
            .items
            .iter()
            .map(|e| e.raw_image_id.clone())
            .collect();
        g.sort();
        g.dedup();
        g
    };
    let seed = cli.seed.or(file.global_seed).unwrap_or(0);
    let assignment = split(&groups, ratios, seed).map_err(classify)?;
    for (name, kind) in [
        ("train", Split::Train),
        ("val", Split::Val),
        ("test", Split::Test),
    ] {
        let raw_ids = assignment.ids_for(kind);
        // derivatives of one source image stay together
        let ids: Vec<String> = manifest
            .items
            .iter()
            .filter(|e| raw_ids.binary_search(&e.raw_image_id).is_ok())
            .map(|e| e.image_id.clone())
            .collect();
        write_split_file(&ids, &split_file_path(&root, name)).map_err(classify)?;
        println!("{name}: {} groups, {} items", raw_ids.len(), ids.len());
    }
    Ok(())
}

fn cmd_stats(cli: &Cli, args: &StatsArgs, file: &FileConfig) -> Result<(), Failure> {
    let root = resolve_root(cli.out.as_deref(), file.out_root.as_deref())?;
    let triples = read_dataset_triples(&root, &args.triples)?;
    let report = distribution_report(&triples);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::input(format!("serialize stats: {e}")))?;
    println!("{json}");
    Ok(())
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs, file: &FileConfig) -> Result<u8, Failure> {
    let root = resolve_root(cli.out.as_deref(), file.out_root.as_deref())?;
    let registry = load_registry(args.registry.as_deref(), file.registry_path.as_deref())?;
    let report = verify_dataset(&root, &registry, args.strict).map_err(classify)?;
    for v in &report.violations {
        println!("violation {v}");
    }
    for w in &report.warnings {
        println!("warning {w}");
    }
    println!(
        "checked {} items: {} violations, {} warnings -> {}",
        report.items_checked,
        report.violations.len(),
        report.warnings.len(),
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(if report.pass { 0 } else { EXIT_VIOLATIONS })
}

fn cmd_score(cli: &Cli, args: &ScoreArgs, file: &FileConfig) -> Result<(), Failure> {
    let root = resolve_root(cli.out.as_deref(), file.out_root.as_deref())?;
    let gold = read_dataset_triples(&root, &args.triples)?;
    let preds = read_predictions(&args.predictions).map_err(classify)?;
    let policy = if args.strict {
        ScorePolicy::Strict
    } else {
        ScorePolicy::Lenient
    };
    let report = score(&gold, &preds, policy).map_err(classify)?;
    println!("OA={:.2} AA={:.2}", report.oa, report.aa);
    for (qid, s) in &report.per_qid {
        println!("q{qid} accuracy={:.2} ({}/{})", s.accuracy, s.correct, s.total);
    }
    if report.missing_predictions > 0 {
        eprintln!("warning: {} gold triples had no prediction", report.missing_predictions);
    }
    if report.unmatched_predictions > 0 {
        eprintln!(
            "warning: {} predictions matched no gold triple",
            report.unmatched_predictions
        );
    }
    if let Some(csv) = &args.csv {
        let mut text = String::from("qid,correct,total,accuracy\n");
        for (qid, s) in &report.per_qid {
            text.push_str(&format!("{qid},{},{},{:.2}\n", s.correct, s.total, s.accuracy));
        }
        std::fs::write(csv, text)
            .map_err(|e| Failure::input(format!("{}: {e}", csv.display())))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let file = load_file_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Generate(args) => cmd_generate(cli, args, &file).map(|()| 0),
        Command::Balance(args) => cmd_balance(cli, args, &file).map(|()| 0),
        Command::SplitCmd(args) => cmd_split(cli, args, &file).map(|()| 0),
        Command::Stats(args) => cmd_stats(cli, args, &file).map(|()| 0),
        Command::Verify(args) => cmd_verify(cli, args, &file),
        Command::Score(args) => cmd_score(cli, args, &file).map(|()| 0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
