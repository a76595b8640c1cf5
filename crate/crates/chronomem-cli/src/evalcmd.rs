//! Evaluation subcommands: corpus synthesis, review-ledger sweeps, the
//! component-contribution matrix, protocol statistics, and report export.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use chronomem::{EngineError, HashingEmbedder, TurnRecord};
use chronomem_eval::corpus;
use chronomem_eval::highnoise::{self, NoiseRatio};
use chronomem_eval::report;
use chronomem_eval::{per_identity, run_matrix, summarize, ManualReview};

#[derive(Args)]
pub struct EvalArgs {
    /// Seed for synthetic corpora (pinned review ledgers and the component
    /// fixture are seed-independent by design).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: EvalCommand,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Synthesize a high-noise corpus and its question manifest.
    Synth(SynthArgs),
    /// Reproduce a review-ledger sweep: curves, reviews, summary (and
    /// optionally the live retrieval gate).
    Run(RunArgs),
    /// Run the component-contribution matrix and write its table.
    Ablate(AblateArgs),
    /// Aggregate per-model protocol statistics from turn logs.
    Stats(StatsArgs),
    /// Re-export curves and summary from a records file plus a (possibly
    /// hand-edited) review sheet.
    Export(ExportArgs),
}

#[derive(Copy, Clone, ValueEnum)]
enum RatioArg {
    /// One gold fact per five noise chunks.
    #[value(name = "1to5")]
    OneToFive,
    /// One gold fact per two hundred noise chunks.
    #[value(name = "1to200")]
    OneToTwoHundred,
}

impl RatioArg {
    fn to_ratio(self) -> NoiseRatio {
        match self {
            RatioArg::OneToFive => NoiseRatio::OneToFive,
            RatioArg::OneToTwoHundred => NoiseRatio::OneToTwoHundred,
        }
    }
}

pub fn run(_config: Option<&Path>, args: &EvalArgs) -> Result<(), EngineError> {
    match &args.command {
        EvalCommand::Synth(a) => synth(args.seed, a),
        EvalCommand::Run(a) => run_sweep(args.seed, a),
        EvalCommand::Ablate(a) => ablate(a),
        EvalCommand::Stats(a) => stats(a),
        EvalCommand::Export(a) => export(a),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Noise regime to synthesize.
    #[arg(long, value_enum, default_value = "1to200")]
    ratio: RatioArg,
    /// Override the number of gold facts.
    #[arg(long)]
    gold: Option<usize>,
    /// Override the noise chunks per gold fact.
    #[arg(long)]
    noise_per_gold: Option<usize>,
    /// Output directory (docs.jsonl, manifest.json, spec.json).
    #[arg(long)]
    out: PathBuf,
}

/// One manifest row: the question, the answer string the reply must
/// contain, and the chunk id the fact occupies after an in-order ingest
/// into a fresh store.
#[derive(Serialize, Deserialize)]
struct ManifestRow {
    round: usize,
    question: String,
    gold_chunk_id: String,
    gold_answer: String,
    gold_label: String,
}

fn synth(seed: Option<u64>, args: &SynthArgs) -> Result<(), EngineError> {
    let mut spec = args.ratio.to_ratio().corpus_spec();
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(gold) = args.gold {
        spec.gold_count = gold;
    }
    if let Some(noise) = args.noise_per_gold {
        spec.noise_per_gold = noise;
    }
    let corpus = corpus::synthesize(&spec)?;

    // Learn the deterministic chunk ids by ingesting into a scratch store.
    let mut store =
        chronomem::store::KnowledgeStore::in_memory(Arc::new(HashingEmbedder::new(spec.dim)));
    let ids = corpus::ingest(&corpus, &mut store, 0)?;

    fs::create_dir_all(&args.out).map_err(|e| EngineError::io(&args.out, e))?;
    let mut docs = String::new();
    for doc in &corpus.docs {
        docs.push_str(&serde_json::to_string(doc)?);
        docs.push('\n');
    }
    report::write_atomic(&args.out.join("docs.jsonl"), docs.as_bytes())?;

    let manifest: Vec<ManifestRow> = corpus
        .cases
        .iter()
        .map(|c| ManifestRow {
            round: c.index,
            question: c.question.clone(),
            gold_chunk_id: ids[&c.gold_label].clone(),
            gold_answer: c.gold_answer.clone(),
            gold_label: c.gold_label.clone(),
        })
        .collect();
    report::write_json(&args.out.join("manifest.json"), &manifest)?;
    report::write_json(&args.out.join("spec.json"), &spec)?;
    println!(
        "wrote {} document(s) and {} question(s) to {}",
        corpus.docs.len(),
        corpus.cases.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct RunArgs {
    /// Review-ledger regime to reproduce.
    #[arg(long, value_enum)]
    ratio: RatioArg,
    /// Output directory (curves.csv, reviews.csv, records.json, summary.json).
    #[arg(long)]
    out: PathBuf,
    /// Also run the live retrieval gate over the synthetic corpus and write
    /// gate.json.
    #[arg(long)]
    gate: bool,
    /// Candidate quota the gate checks the gold fact against.
    #[arg(long, default_value_t = 3)]
    top_k: usize,
}

/// Minimal per-round record: enough to recompute every curve.
#[derive(Serialize, Deserialize)]
pub struct RecordRow {
    pub round: u32,
    pub auto_correct: bool,
}

fn run_sweep(seed: Option<u64>, args: &RunArgs) -> Result<(), EngineError> {
    let ratio = args.ratio.to_ratio();
    let fixture = highnoise::review_fixture(ratio);
    let summary = summarize(&fixture.auto, &fixture.reviews)?;
    fs::create_dir_all(&args.out).map_err(|e| EngineError::io(&args.out, e))?;
    report::write_curves_csv(&args.out.join("curves.csv"), &fixture.auto, &fixture.reviews)?;
    report::write_reviews_csv(&args.out.join("reviews.csv"), &fixture.reviews)?;
    let records: Vec<RecordRow> = fixture
        .auto
        .iter()
        .enumerate()
        .map(|(i, &a)| RecordRow {
            round: (i + 1) as u32,
            auto_correct: a,
        })
        .collect();
    report::write_json(&args.out.join("records.json"), &records)?;
    let run = report::RunSummary::from_review(ratio.as_str(), &summary);
    report::write_json(&args.out.join("summary.json"), &run)?;
    println!(
        "{}: auto {:.1}% ({}/{}), reviewed {:.1}% ({}/{}), {} correction(s), {} pending",
        ratio.as_str(),
        summary.auto_accuracy * 100.0,
        summary.auto_correct,
        summary.total,
        summary.manual_accuracy * 100.0,
        summary.final_correct,
        summary.total,
        summary.corrections,
        summary.pending
    );
    if args.gate {
        let mut spec = ratio.corpus_spec();
        if let Some(seed) = seed {
            spec.seed = seed;
        }
        let outcome = highnoise::retrieval_gate(&spec, args.top_k)?;
        report::write_json(&args.out.join("gate.json"), &outcome)?;
        println!(
            "gate: hybrid {}/{} vs embedding-only {}/{} in top {} ({:.2}s)",
            outcome.hybrid_hits,
            outcome.total,
            outcome.vector_only_hits,
            outcome.total,
            args.top_k,
            outcome.elapsed_secs
        );
    }
    Ok(())
}

#[derive(Args)]
struct AblateArgs {
    /// Output directory; each configuration runs in its own subdirectory
    /// and the table lands in ablation.csv.
    #[arg(long)]
    out: PathBuf,
}

fn ablate(args: &AblateArgs) -> Result<(), EngineError> {
    fs::create_dir_all(&args.out).map_err(|e| EngineError::io(&args.out, e))?;
    let outcomes = run_matrix(&args.out)?;
    report::write_ablation_csv(&args.out.join("ablation.csv"), &outcomes)?;
    for o in &outcomes {
        println!(
            "{:<28} {:>2}/{:<2} = {:>5.1}%  stale-order anomalies: {}",
            o.mode.as_str(),
            o.correct,
            o.total,
            o.accuracy() * 100.0,
            o.stale_order_anomalies
        );
    }
    Ok(())
}

#[derive(Args)]
struct StatsArgs {
    /// Turn logs to aggregate: turns.jsonl files or session directories.
    #[arg(long = "log", value_name = "PATH", required = true)]
    logs: Vec<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn read_turn_log(path: &Path) -> Result<Vec<TurnRecord>, EngineError> {
    let file = if path.is_dir() { path.join("turns.jsonl") } else { path.to_path_buf() };
    chronomem::jsonl::read_all(&file)
}

fn stats(args: &StatsArgs) -> Result<(), EngineError> {
    let mut records = Vec::new();
    for log in &args.logs {
        records.extend(read_turn_log(log)?);
    }
    let stats = per_identity(&records);
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| EngineError::io(parent, e))?;
        }
    }
    report::write_stats_csv(&args.out, &stats)?;
    for s in &stats {
        println!(
            "{}: {} turn(s), {} anomaly(ies), mean analysis {:.1} chars, {} missing analysis, {} missing response, {} repaired turn(s)",
            s.identity,
            s.turns,
            s.anomalies,
            s.mean_analysis_chars,
            s.missing_analysis,
            s.missing_response,
            s.repaired_turns
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct ExportArgs {
    /// records.json produced by `eval run` (round + automatic flag).
    #[arg(long)]
    records: PathBuf,
    /// Review sheet CSV (round, manual_support, answer_correct); cells may
    /// be 1, 0, or `unknown`. Hand-edit it to apply review outcomes.
    #[arg(long)]
    reviews: PathBuf,
    /// Optional turn logs to aggregate into stats.csv alongside the curves.
    #[arg(long = "log", value_name = "PATH")]
    logs: Vec<PathBuf>,
    /// Output directory (curves.csv, summary.json, optionally stats.csv).
    #[arg(long)]
    out: PathBuf,
    /// Label written into summary.json.
    #[arg(long, default_value = "export")]
    label: String,
}

fn export(args: &ExportArgs) -> Result<(), EngineError> {
    let raw = fs::read_to_string(&args.records).map_err(|e| EngineError::io(&args.records, e))?;
    let records: Vec<RecordRow> = serde_json::from_str(&raw)?;
    let reviews: Vec<ManualReview> = report::read_reviews_csv(&args.reviews)?;
    if records.len() != reviews.len() {
        return Err(EngineError::InvalidConfig(format!(
            "records cover {} round(s) but the review sheet covers {}",
            records.len(),
            reviews.len()
        )));
    }
    for (r, review) in records.iter().zip(&reviews) {
        if r.round != review.round {
            return Err(EngineError::InvalidConfig(format!(
                "round mismatch: records say {}, review sheet says {}",
                r.round, review.round
            )));
        }
    }
    let auto: Vec<bool> = records.iter().map(|r| r.auto_correct).collect();
    let summary = summarize(&auto, &reviews)?;
    fs::create_dir_all(&args.out).map_err(|e| EngineError::io(&args.out, e))?;
    report::write_curves_csv(&args.out.join("curves.csv"), &auto, &reviews)?;
    report::write_json(
        &args.out.join("summary.json"),
        &report::RunSummary::from_review(&args.label, &summary),
    )?;
    if !args.logs.is_empty() {
        let mut turn_records = Vec::new();
        for log in &args.logs {
            turn_records.extend(read_turn_log(log)?);
        }
        report::write_stats_csv(&args.out.join("stats.csv"), &per_identity(&turn_records))?;
    }
    println!(
        "{}: auto {:.1}%, reviewed {:.1}% ({} correction(s), {} pending) -> {}",
        args.label,
        summary.auto_accuracy * 100.0,
        summary.manual_accuracy * 100.0,
        summary.corrections,
        summary.pending,
        args.out.display()
    );
    Ok(())
}
