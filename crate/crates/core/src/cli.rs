//! The `perturbe` command line.
//!
//! Exit codes: 0 success, 1 invalid configuration or arguments, 2 data error,
//! 3 external syntax-checker failure. Every command writes a manifest next to
//! its outputs (or where `--manifest` points).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::augment::{augment_split, covered_ids, vocab_growth, AugmentPlan, KindSelector};
use crate::config::PipelineConfig;
use crate::corpus::{load_corpus, save_corpus, split_corpus, Format, SplitSpec};
use crate::embedding::load_vectors;
use crate::error::{Error, Result};
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::metrics::{
    evaluate_cell, exact_match_labels, jsd, line_cohorts, omission_rate_stats, syntactic_accuracy,
    write_report, CellInputs, CellMetrics, OmissionRates, PredictionSet, SemLabelSet, SyntaxChecker,
};
use crate::perturb::{read_records, write_jsonl, write_records, Perturber, SubstitutionConfig};
use crate::pipeline::{
    kinds_for, mine_vocabulary, perturb_kinds, run_matrix, score_and_gate, SHIPPED_COMPARISON,
};
use crate::postag::{LexiconTagger, TagOverrides};
use crate::preprocess::{tokenize, Standardizer, Stopwords};
use crate::semgate::{
    summarize, sweep_by_kind, write_sweep_csv, GateConfig, MeanEncoder, PrecomputedEncoder,
    SentenceEncoder, SimilaritySummary, DEFAULT_THRESHOLD,
};
use crate::vocab::{RegisterList, Vocabulary, DEFAULT_RATIO_THRESHOLD};

#[derive(Debug, Parser)]
#[command(name = "perturbe", version, about = "Perturb, gate and augment NL-to-code corpora")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Where to write the run manifest instead of next to the outputs.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSONL or CSV corpus and rewrite it as JSONL.
    Ingest(IngestArgs),
    /// Split a corpus into train/val/test.
    Split(SplitArgs),
    /// Mine structure and name words against general English.
    BuildVocab(BuildVocabArgs),
    /// Generate perturbation records.
    Perturb(PerturbArgs),
    /// Score records and split them at a similarity threshold.
    Gate(GateArgs),
    /// Replace a fraction of intents with gated perturbed ones.
    Augment(AugmentArgs),
    /// Run the whole experiment matrix from a config file.
    Matrix(MatrixArgs),
    /// Compute SYN, SEM and ROB for one model on one test split.
    Evaluate(EvaluateArgs),
    /// Merge evaluated cells into CSV and text reports.
    Report(ReportArgs),
    /// Corpus statistics: sizes, vocabulary, JSD, omission rates, similarity.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: PathBuf,
    /// Replace values, labels and parameters in intents with var# placeholders.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test: f64,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// General-English text; a shipped text by default.
    #[arg(long)]
    pub comparison: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RATIO_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub registers: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// A kind (e.g. omit-name) or a family (substitution, omission).
    #[arg(long)]
    pub kind: KindSelector,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// JSONL part-of-speech overrides.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub registers: Option<PathBuf>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GateArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, required_unless_present = "embeddings")]
    pub vectors: Option<PathBuf>,
    /// JSONL sentence embeddings keyed by id and id/kind.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.8, 0.9])]
    pub sweep: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Gated records; only passing ones are used.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub kind: KindSelector,
    #[arg(long)]
    pub ratio: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Drop samples without a passing record first, as `matrix` does by default.
    #[arg(long)]
    pub covered_only: bool,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// The test split the predictions were made on.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value = "none")]
    pub kind: String,
    #[arg(long, default_value_t = 0.0)]
    pub train_p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub test_p: f64,
    /// Semantic labels (human judgments).
    #[arg(long, conflicts_with = "exact_match")]
    pub labels: Option<PathBuf>,
    /// Use normalized exact match as a lower-bound proxy for SEM.
    #[arg(long)]
    pub exact_match: bool,
    /// Labels of the same model on the unperturbed test split, for ROB.
    #[arg(long)]
    pub before_labels: Option<PathBuf>,
    /// Checker command with a {file} placeholder.
    #[arg(long)]
    pub checker: Option<String>,
    #[arg(long)]
    pub no_syntax: bool,
    #[arg(long, default_value_t = 10.0)]
    pub timeout: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metric files written by `evaluate`.
    #[arg(long, num_args = 0..)]
    pub metrics: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpora to compare against (JSD and unique-word counts).
    #[arg(long, num_args = 0..)]
    pub compare: Vec<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Write JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `argv` (program name first), run, and return the process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let manifest = cli.manifest;
    pool.install(|| dispatch(cli.command, manifest.as_deref()))
}

fn dispatch(command: Command, manifest: Option<&Path>) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a, manifest),
        Command::Split(a) => split(a, manifest),
        Command::BuildVocab(a) => build_vocab(a, manifest),
        Command::Perturb(a) => perturb(a, manifest),
        Command::Gate(a) => gate_cmd(a, manifest),
        Command::Augment(a) => augment(a, manifest),
        Command::Matrix(a) => matrix(a, manifest),
        Command::Evaluate(a) => evaluate(a, manifest),
        Command::Report(a) => report(a, manifest),
        Command::Stats(a) => stats(a, manifest),
    }
}

fn parent(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// `<dir>/<stem>.<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    parent(path).join(format!("{stem}.{suffix}"))
}

/// Record `outputs` (relative to `root`) and write the manifest.
fn finish(
    mut m: Manifest,
    root: &Path,
    outputs: &[PathBuf],
    default_path: PathBuf,
    override_path: Option<&Path>,
) -> Result<()> {
    for path in outputs {
        m.add_file(root, path)?;
    }
    let path = override_path.map_or(default_path, Path::to_path_buf);
    m.write_to(&path)?;
    log::info!("manifest {} digest {}", path.display(), m.digest);
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_any(path: &Path, format: Option<Format>) -> Result<crate::corpus::Corpus> {
    load_corpus(path, format.unwrap_or_else(|| Format::from_path(path)))
}

fn stopwords(path: Option<&Path>) -> Result<Stopwords> {
    path.map_or_else(|| Ok(Stopwords::default_english()), Stopwords::load)
}

fn registers(path: Option<&Path>) -> Result<RegisterList> {
    path.map_or_else(|| Ok(RegisterList::default()), RegisterList::load)
}

#[derive(Serialize)]
struct MapLine {
    id: String,
    placeholders: Vec<(usize, String)>,
}

fn ingest(a: IngestArgs, manifest: Option<&Path>) -> Result<()> {
    let corpus = load_any(&a.input, a.format)?;
    let mut outputs = vec![a.out.clone()];
    if a.standardize {
        let standardizer = match &a.patterns {
            Some(p) => Standardizer::load(p, stopwords(a.stopwords.as_deref())?)?,
            None => Standardizer::with_defaults(),
        };
        let mut samples = Vec::with_capacity(corpus.len());
        let mut maps = Vec::with_capacity(corpus.len());
        for s in &corpus {
            let (std, map) = standardizer.standardize(&tokenize(&s.intent));
            let mut sample = s.clone();
            sample.intent = std.joined();
            samples.push(sample);
            maps.push(MapLine {
                id: s.id.clone(),
                placeholders: map.entries().map(|(i, w)| (i, w.to_string())).collect(),
            });
        }
        let standardized = crate::corpus::Corpus::from_samples(corpus.name.clone(), samples)?;
        save_corpus(&standardized, &a.out, Format::Jsonl)?;
        let map_path = sibling(&a.out, "maps.jsonl");
        write_jsonl(&map_path, &maps)?;
        outputs.push(map_path);
    } else {
        save_corpus(&corpus, &a.out, Format::Jsonl)?;
    }
    eprintln!("ingested {} samples", corpus.len());
    finish(
        Manifest::new("ingest", 0),
        &parent(&a.out),
        &outputs,
        sibling(&a.out, "manifest.json"),
        manifest,
    )
}

fn split(a: SplitArgs, manifest: Option<&Path>) -> Result<()> {
    let spec = SplitSpec::new(a.train, a.val, a.test, a.seed)?;
    let corpus = load_any(&a.input, None)?;
    let (train, val, test) = split_corpus(&corpus, &spec)?;
    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        let path = a.out.join(format!("{name}.jsonl"));
        save_corpus(part, &path, Format::Jsonl)?;
        outputs.push(path);
    }
    eprintln!("train {} / val {} / test {}", train.len(), val.len(), test.len());
    finish(Manifest::new("split", a.seed), &a.out, &outputs, a.out.join(MANIFEST_FILE), manifest)
}

fn build_vocab(a: BuildVocabArgs, manifest: Option<&Path>) -> Result<()> {
    let corpus = load_any(&a.input, None)?;
    let comparison = match &a.comparison {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => SHIPPED_COMPARISON.to_string(),
    };
    let vocab = mine_vocabulary(
        &corpus,
        &comparison,
        a.threshold,
        &stopwords(a.stopwords.as_deref())?,
        &registers(a.registers.as_deref())?,
    )?;
    vocab.save(&a.out)?;
    eprintln!(
        "{} structure words, {} name words",
        vocab.structure_words.len(),
        vocab.name_words.len()
    );
    finish(
        Manifest::new("build-vocab", 0),
        &parent(&a.out),
        std::slice::from_ref(&a.out),
        sibling(&a.out, "manifest.json"),
        manifest,
    )
}

fn perturb(a: PerturbArgs, manifest: Option<&Path>) -> Result<()> {
    let corpus = load_any(&a.input, None)?;
    let vocab = Vocabulary::load(&a.vocab)?;
    let stop = stopwords(a.stopwords.as_deref())?;
    let tagger = LexiconTagger::new(crate::postag::Lexicon::shipped(), registers(a.registers.as_deref())?)
        .with_vocabulary(&vocab);
    let store = a.vectors.as_deref().map(load_vectors).transpose()?;
    let overrides = a.tags.as_deref().map(TagOverrides::load).transpose()?;
    let mut perturber = Perturber::new(&vocab, &stop, &tagger);
    if let Some(s) = &store {
        perturber = perturber.with_store(s);
    }
    if let Some(o) = &overrides {
        perturber = perturber.with_overrides(o);
    }
    let tune = |base: SubstitutionConfig| SubstitutionConfig {
        ratio: a.ratio.unwrap_or(base.ratio),
        k: a.k.unwrap_or(base.k),
        tau: a.tau.unwrap_or(base.tau),
        ..base
    };
    let kinds = kinds_for(&[a.kind]);
    let (records, skipped) = perturb_kinds(
        &perturber,
        &corpus,
        &kinds,
        &tune(SubstitutionConfig::constrained(a.seed)),
        &tune(SubstitutionConfig::unconstrained(a.seed)),
    )?;
    write_records(&a.out, &records)?;
    let skipped_path = sibling(&a.out, "skipped.jsonl");
    write_jsonl(&skipped_path, &skipped)?;
    eprintln!("{} records, {} skipped", records.len(), skipped.len());
    finish(
        Manifest::new("perturb", a.seed),
        &parent(&a.out),
        &[a.out.clone(), skipped_path],
        sibling(&a.out, "manifest.json"),
        manifest,
    )
}

fn gate_cmd(a: GateArgs, manifest: Option<&Path>) -> Result<()> {
    let records = read_records(&a.records)?;
    let cfg = GateConfig::new(a.threshold)?;
    let store;
    let encoder: Box<dyn SentenceEncoder> = match (&a.embeddings, &a.vectors) {
        (Some(e), _) => Box::new(PrecomputedEncoder::load(e)?),
        (None, Some(v)) => {
            store = load_vectors(v)?;
            Box::new(MeanEncoder::new(&store))
        }
        (None, None) => return Err(Error::InvalidConfig("--vectors or --embeddings is required".into())),
    };
    let gated = score_and_gate(&records, encoder.as_ref(), &cfg)?;
    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    for (name, list) in [
        ("passed", &gated.passed),
        ("failed", &gated.failed),
        ("unevaluable", &gated.unevaluable),
    ] {
        let path = a.out.join(format!("{name}.jsonl"));
        write_records(&path, list)?;
        outputs.push(path);
    }
    let scored = gated.scored();
    if !scored.is_empty() {
        let path = a.out.join("sweep.csv");
        write_sweep_csv(&path, &sweep_by_kind(&scored, &a.sweep)?)?;
        outputs.push(path);
    }
    eprintln!(
        "{} passed, {} failed, {} unevaluable",
        gated.passed.len(),
        gated.failed.len(),
        gated.unevaluable.len()
    );
    finish(Manifest::new("gate", 0), &a.out, &outputs, a.out.join(MANIFEST_FILE), manifest)
}

fn augment(a: AugmentArgs, manifest: Option<&Path>) -> Result<()> {
    let mut split = load_any(&a.input, None)?;
    let records = read_records(&a.records)?;
    if a.covered_only {
        let keep = covered_ids(&split, &records, a.kind);
        split = split.retain_ids(split.name.clone(), |id| keep.contains(id));
    }
    let plan = AugmentPlan::new(a.ratio, a.kind, a.seed)?;
    let out = augment_split(&split, &records, &plan)?;
    save_corpus(&out, &a.out, Format::Jsonl)?;
    finish(
        Manifest::new("augment", a.seed),
        &parent(&a.out),
        std::slice::from_ref(&a.out),
        sibling(&a.out, "manifest.json"),
        manifest,
    )
}

fn matrix(a: MatrixArgs, manifest: Option<&Path>) -> Result<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(out) = a.out {
        cfg.output = out;
    }
    let mut m = run_matrix(&cfg)?;
    if let Some(path) = manifest {
        m.write_to(path)?;
    }
    eprintln!("{} cells, manifest digest {}", m.cells.len(), m.digest);
    Ok(())
}

fn evaluate(a: EvaluateArgs, manifest: Option<&Path>) -> Result<()> {
    let test = load_any(&a.test, None)?;
    let preds = PredictionSet::load(&a.predictions, &a.model)?;
    let mut outputs = vec![a.out.clone()];
    let labels = if let Some(path) = &a.labels {
        Some(SemLabelSet::load(path)?)
    } else if a.exact_match {
        let labels = exact_match_labels(&preds, &test)?;
        let path = sibling(&a.out, "labels.jsonl");
        labels.save(&path)?;
        outputs.push(path);
        Some(labels)
    } else {
        None
    };
    let before = a.before_labels.as_deref().map(SemLabelSet::load).transpose()?;
    let syntax = if a.no_syntax {
        None
    } else {
        let checker = match &a.checker {
            Some(t) => SyntaxChecker::for_template(t)?,
            None => SyntaxChecker::gas(),
        };
        let checker = checker.with_timeout(Duration::from_secs_f64(a.timeout));
        let checker = match rayon::current_num_threads() {
            n if n > 0 => checker.with_parallelism(n),
            _ => checker,
        };
        Some(syntactic_accuracy(&preds, &checker)?)
    };
    let metrics = evaluate_cell(
        &a.model,
        &a.kind,
        a.train_p,
        a.test_p,
        &CellInputs {
            test: &test,
            syntax: syntax.as_ref(),
            labels: labels.as_ref(),
            before: before.as_ref(),
        },
    )?;
    fs::write(&a.out, serde_json::to_string_pretty(&metrics)? + "\n").map_err(|e| Error::io(&a.out, e))?;
    if let Some(report) = &syntax {
        let path = sibling(&a.out, "syntax.json");
        fs::write(&path, serde_json::to_string_pretty(report)? + "\n").map_err(|e| Error::io(&path, e))?;
        outputs.push(path);
    }
    finish(
        Manifest::new("evaluate", 0),
        &parent(&a.out),
        &outputs,
        sibling(&a.out, "manifest.json"),
        manifest,
    )
}

fn report(a: ReportArgs, manifest: Option<&Path>) -> Result<()> {
    let mut cells: Vec<CellMetrics> = Vec::new();
    for path in &a.metrics {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cells.push(serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?);
    }
    let outputs = write_report(&a.out, &cells)?;
    finish(Manifest::new("report", 0), &a.out, &outputs, a.out.join(MANIFEST_FILE), manifest)
}

#[derive(Serialize)]
struct JsdEntry {
    against: String,
    jsd: f64,
}

#[derive(Serialize)]
struct Stats {
    samples: usize,
    single_line: usize,
    multi_line: usize,
    /// Unique non-stopword words of the corpus, then of each compared corpus.
    unique_words: Vec<usize>,
    jsd: Vec<JsdEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omission_rates: Option<OmissionRates>,
    #[serde(skip_serializing_if = "Option::is_none")]
    similarity: Option<Vec<SimilaritySummary>>,
}

fn stats(a: StatsArgs, manifest: Option<&Path>) -> Result<()> {
    let stop = stopwords(a.stopwords.as_deref())?;
    let corpus = load_any(&a.corpus, None)?;
    let others = a
        .compare
        .iter()
        .map(|p| load_any(p, None))
        .collect::<Result<Vec<_>>>()?;
    let (single, multi) = line_cohorts(&corpus);
    let mut all = vec![corpus.clone()];
    all.extend(others.iter().cloned());
    let jsd_entries = a
        .compare
        .iter()
        .zip(&others)
        .map(|(p, o)| {
            Ok(JsdEntry {
                against: p.display().to_string(),
                jsd: jsd(&corpus, o, &stop)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let omission_rates = match &a.vocab {
        Some(path) => {
            let vocab = Vocabulary::load(path)?;
            let tagger = LexiconTagger::default().with_vocabulary(&vocab);
            Some(omission_rate_stats(&corpus, &vocab, &tagger))
        }
        None => None,
    };
    let similarity = match &a.records {
        Some(path) => Some(summarize(&read_records(path)?)),
        None => None,
    };
    let stats = Stats {
        samples: corpus.len(),
        single_line: single.len(),
        multi_line: multi.len(),
        unique_words: vocab_growth(&all, &stop),
        jsd: jsd_entries,
        omission_rates,
        similarity,
    };
    let text = serde_json::to_string_pretty(&stats)? + "\n";
    match &a.out {
        Some(out) => {
            fs::write(out, &text).map_err(|e| Error::io(out, e))?;
            finish(
                Manifest::new("stats", 0),
                &parent(out),
                std::slice::from_ref(out),
                sibling(out, "manifest.json"),
                manifest,
            )
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_command(["perturbe", "no-such-command"]), 1);
        assert_eq!(run_command(["perturbe", "split", "--in", "x.jsonl"]), 1);
        assert_eq!(run_command(["perturbe", "--version"]), 0);
    }

    #[test]
    fn data_errors_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.jsonl");
        let out = dir.path().join("splits");
        let code = run_command([
            "perturbe",
            "split",
            "--in",
            missing.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "1",
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn bad_ratios_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("c.jsonl");
        fs::write(&input, "{\"intent\":\"push eax\",\"snippet\":\"push eax\"}\n").unwrap();
        let code = run_command([
            "perturbe",
            "split",
            "--in",
            input.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
            "--seed",
            "1",
            "--train",
            "0.9",
        ]);
        assert_eq!(code, 1);
    }
}
