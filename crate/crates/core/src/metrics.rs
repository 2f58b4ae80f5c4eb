//! Evaluation metrics: syntactic, semantic and robust accuracy, Jensen-Shannon
//! divergence between corpora, omission rates and report files.

pub mod syntax;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LINE_SEPARATOR};
use crate::error::{Error, Result};
use crate::perturb::{omittable_words, read_jsonl, write_jsonl, OmissionCategory};
use crate::postag::PosTagger;
use crate::preprocess::{is_punctuation, tokenize, Stopwords};
use crate::vocab::Vocabulary;

pub use syntax::{syntactic_accuracy, SyntaxChecker, SyntaxReport, SyntaxVerdict};

/// Model outputs keyed by sample id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictionSet {
    pub model: String,
    pub entries: BTreeMap<String, String>,
}

#[derive(Deserialize, Serialize)]
struct PredictionLine {
    id: String,
    prediction: String,
}

impl PredictionSet {
    pub fn from_pairs<'a>(model: &str, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        PredictionSet {
            model: model.to_string(),
            entries: pairs
                .into_iter()
                .map(|(id, p)| (id.to_string(), p.to_string()))
                .collect(),
        }
    }

    /// Load `{"id", "prediction"}` lines.
    pub fn load(path: &Path, model: &str) -> Result<Self> {
        let lines: Vec<PredictionLine> = read_jsonl(path)?;
        let mut entries = BTreeMap::new();
        for line in lines {
            if entries.insert(line.id.clone(), line.prediction).is_some() {
                return Err(Error::DuplicateId(line.id));
            }
        }
        Ok(PredictionSet {
            model: model.to_string(),
            entries,
        })
    }

    /// Use the reference snippets themselves as predictions.
    pub fn from_references(model: &str, corpus: &Corpus) -> Self {
        PredictionSet {
            model: model.to_string(),
            entries: corpus
                .iter()
                .map(|s| (s.id.clone(), s.snippet.clone()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Human,
    ExactMatchProxy,
}

/// Per-sample semantic correctness judgments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SemLabelSet {
    pub provenance: Provenance,
    pub entries: BTreeMap<String, bool>,
}

#[derive(Deserialize, Serialize)]
struct LabelLine {
    id: String,
    correct: bool,
    #[serde(default)]
    provenance: Provenance,
}

impl SemLabelSet {
    pub fn new(provenance: Provenance, entries: impl IntoIterator<Item = (String, bool)>) -> Self {
        SemLabelSet {
            provenance,
            entries: entries.into_iter().collect(),
        }
    }

    /// Load `{"id", "correct", "provenance"}` lines; provenance defaults to human.
    pub fn load(path: &Path) -> Result<Self> {
        let lines: Vec<LabelLine> = read_jsonl(path)?;
        let provenance = lines.first().map(|l| l.provenance).unwrap_or_default();
        if lines.iter().any(|l| l.provenance != provenance) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1 + lines.iter().position(|l| l.provenance != provenance).unwrap_or(0),
                message: "label file mixes provenances".into(),
            });
        }
        let mut entries = BTreeMap::new();
        for l in lines {
            if entries.insert(l.id.clone(), l.correct).is_some() {
                return Err(Error::DuplicateId(l.id));
            }
        }
        Ok(SemLabelSet { provenance, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let lines: Vec<LabelLine> = self
            .entries
            .iter()
            .map(|(id, &correct)| LabelLine {
                id: id.clone(),
                correct,
                provenance: self.provenance,
            })
            .collect();
        write_jsonl(path, &lines)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Instructions of a snippet with whitespace collapsed and commas tightened.
pub fn normalize_code(code: &str) -> String {
    code.replace(LINE_SEPARATOR, "\n")
        .lines()
        .map(|line| {
            line.split(',')
                .map(|part| part.split_whitespace().collect::<Vec<_>>().join(" "))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Automatic lower bound on semantic correctness: normalized exact match.
///
/// Equivalent but differently written code counts as wrong.
pub fn exact_match_labels(preds: &PredictionSet, references: &Corpus) -> Result<SemLabelSet> {
    let mut entries = BTreeMap::new();
    for (id, prediction) in &preds.entries {
        let reference = references
            .get(id)
            .ok_or_else(|| Error::MissingReference(id.clone()))?;
        entries.insert(id.clone(), normalize_code(prediction) == normalize_code(&reference.snippet));
    }
    Ok(SemLabelSet {
        provenance: Provenance::ExactMatchProxy,
        entries,
    })
}

pub fn semantic_accuracy(labels: &SemLabelSet) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("no semantic labels"));
    }
    let correct = labels.entries.values().filter(|&&c| c).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Among samples correct before perturbation, the fraction still correct after.
///
/// `None` when no sample was correct before: the ratio is undefined.
pub fn robust_accuracy(before: &SemLabelSet, after: &SemLabelSet) -> Result<Option<f64>> {
    let a: BTreeSet<&String> = before.entries.keys().collect();
    let b: BTreeSet<&String> = after.entries.keys().collect();
    if a != b {
        let only: Vec<&str> = a.symmetric_difference(&b).take(5).map(|s| s.as_str()).collect();
        return Err(Error::IdMismatch(format!(
            "{} ids differ, e.g. {}",
            a.symmetric_difference(&b).count(),
            only.join(", ")
        )));
    }
    let mut denominator = 0usize;
    let mut numerator = 0usize;
    for (id, &ok) in &before.entries {
        if ok {
            denominator += 1;
            if after.entries[id] {
                numerator += 1;
            }
        }
    }
    Ok((denominator > 0).then(|| numerator as f64 / denominator as f64))
}

/// Lowercase non-stopword word counts over the intents of a corpus.
pub fn unigram_counts(corpus: &Corpus, stopwords: &Stopwords) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for sample in corpus {
        for token in tokenize(&sample.intent).tokens {
            if is_punctuation(&token) || stopwords.contains(&token) {
                continue;
            }
            *counts.entry(token.to_lowercase()).or_insert(0) += 1;
        }
    }
    counts
}

/// Base-2 Jensen-Shannon divergence of two count tables over the union vocabulary.
///
/// Words present on one side only contribute exactly half their probability,
/// so that part is summed as counts and divided once: token-disjoint tables
/// give exactly 1.
pub fn jsd_counts(a: &BTreeMap<String, u64>, b: &BTreeMap<String, u64>) -> Result<f64> {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    if na == 0 || nb == 0 {
        return Err(Error::EmptyInput("JSD needs two non-empty distributions"));
    }
    let (fa, fb) = (na as f64, nb as f64);
    let (mut a_only, mut b_only) = (0u64, 0u64);
    let mut shared = 0.0;
    for (word, &ca) in a {
        match b.get(word) {
            Some(&cb) => {
                let (p, q) = (ca as f64 / fa, cb as f64 / fb);
                let m = 0.5 * (p + q);
                shared += 0.5 * (p * (p / m).log2() + q * (q / m).log2());
            }
            None => a_only += ca,
        }
    }
    for (word, &cb) in b {
        if !a.contains_key(word) {
            b_only += cb;
        }
    }
    let exclusive = 0.5 * (a_only as f64 / fa + b_only as f64 / fb);
    Ok((exclusive + shared).clamp(0.0, 1.0))
}

/// JSD between the intent unigram distributions of two corpora.
pub fn jsd(a: &Corpus, b: &Corpus, stopwords: &Stopwords) -> Result<f64> {
    jsd_counts(&unigram_counts(a, stopwords), &unigram_counts(b, stopwords))
}

/// JSD of two non-negative weight vectors over the same support, normalized first.
pub fn jsd_distributions(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(p.len(), q.len()));
    }
    if p.iter().chain(q).any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidConfig("distribution weights must be finite and non-negative".into()));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if sp <= 0.0 || sq <= 0.0 {
        return Err(Error::EmptyInput("JSD needs two non-empty distributions"));
    }
    let (mut p_only, mut q_only, mut shared) = (0.0, 0.0, 0.0);
    for (&x, &y) in p.iter().zip(q) {
        match (x > 0.0, y > 0.0) {
            (true, true) => {
                let (x, y) = (x / sp, y / sq);
                let m = 0.5 * (x + y);
                shared += 0.5 * (x * (x / m).log2() + y * (y / m).log2());
            }
            (true, false) => p_only += x,
            (false, true) => q_only += y,
            (false, false) => {}
        }
    }
    Ok((0.5 * (p_only / sp + q_only / sq) + shared).clamp(0.0, 1.0))
}

/// Mean per-intent share of word tokens in each omission category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OmissionRates {
    pub action: f64,
    pub structure: f64,
    pub name: f64,
}

impl OmissionRates {
    pub fn get(&self, category: OmissionCategory) -> f64 {
        match category {
            OmissionCategory::Action => self.action,
            OmissionCategory::Structure => self.structure,
            OmissionCategory::Name => self.name,
        }
    }
}

/// Fractions in [0, 1]; intents without word tokens are left out of the mean.
pub fn omission_rate_stats(corpus: &Corpus, vocab: &Vocabulary, tagger: &dyn PosTagger) -> OmissionRates {
    let mut sums = [0.0f64; 3];
    let mut n = 0usize;
    for sample in corpus {
        let tokens = tokenize(&sample.intent).tokens;
        let words = tokens.iter().filter(|t| !is_punctuation(t)).count();
        if words == 0 {
            continue;
        }
        n += 1;
        let tags = tagger.tag(&tokens);
        for (slot, category) in sums.iter_mut().zip(OmissionCategory::ALL) {
            *slot += omittable_words(&tokens, category, vocab, &tags).len() as f64 / words as f64;
        }
    }
    if n == 0 {
        return OmissionRates::default();
    }
    OmissionRates {
        action: sums[0] / n as f64,
        structure: sums[1] / n as f64,
        name: sums[2] / n as f64,
    }
}

/// Ids of single-line and multi-line samples.
pub fn line_cohorts(corpus: &Corpus) -> (BTreeSet<String>, BTreeSet<String>) {
    corpus
        .iter()
        .map(|s| s.id.clone())
        .partition(|id| !corpus.get(id).is_some_and(|s| s.multi_line))
}

fn restrict(labels: &SemLabelSet, ids: &BTreeSet<String>) -> SemLabelSet {
    SemLabelSet {
        provenance: labels.provenance,
        entries: labels
            .entries
            .iter()
            .filter(|(id, _)| ids.contains(*id))
            .map(|(id, &c)| (id.clone(), c))
            .collect(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub n: usize,
    pub syn: Option<f64>,
    pub sem: Option<f64>,
    pub rob: Option<f64>,
}

/// Metrics of one model on one experiment cell.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub model: String,
    pub kind: String,
    pub train_p: f64,
    pub test_p: f64,
    pub all: Scores,
    pub single_line: Scores,
    pub multi_line: Scores,
}

/// Inputs of [`evaluate_cell`]; labels and syntax verdicts are optional.
pub struct CellInputs<'a> {
    pub test: &'a Corpus,
    pub syntax: Option<&'a SyntaxReport>,
    pub labels: Option<&'a SemLabelSet>,
    /// Labels of the same model on the unperturbed test set, for ROB.
    pub before: Option<&'a SemLabelSet>,
}

fn scores(ids: &BTreeSet<String>, inputs: &CellInputs<'_>) -> Result<Scores> {
    let syn = inputs.syntax.and_then(|report| {
        let verdicts: Vec<bool> = report
            .verdicts
            .iter()
            .filter(|(id, _)| ids.contains(*id))
            .map(|(_, v)| v.valid)
            .collect();
        (!verdicts.is_empty()).then(|| verdicts.iter().filter(|&&v| v).count() as f64 / verdicts.len() as f64)
    });
    let sem = match inputs.labels {
        Some(labels) => {
            let subset = restrict(labels, ids);
            (!subset.is_empty()).then(|| semantic_accuracy(&subset)).transpose()?
        }
        None => None,
    };
    let rob = match (inputs.before, inputs.labels) {
        (Some(before), Some(after)) => robust_accuracy(&restrict(before, ids), &restrict(after, ids))?,
        _ => None,
    };
    Ok(Scores {
        n: ids.len(),
        syn,
        sem,
        rob,
    })
}

pub fn evaluate_cell(
    model: &str,
    kind: &str,
    train_p: f64,
    test_p: f64,
    inputs: &CellInputs<'_>,
) -> Result<CellMetrics> {
    let (single, multi) = line_cohorts(inputs.test);
    let all: BTreeSet<String> = single.union(&multi).cloned().collect();
    Ok(CellMetrics {
        model: model.to_string(),
        kind: kind.to_string(),
        train_p,
        test_p,
        all: scores(&all, inputs)?,
        single_line: scores(&single, inputs)?,
        multi_line: scores(&multi, inputs)?,
    })
}

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"))
}

pub const REPORT_HEADER: &str = "model,kind,train_p,test_p,SYN,SEM,ROB";

/// One CSV row per cell; undefined values are written as `undefined`.
pub fn report_csv(cells: &[CellMetrics]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.model,
            c.kind,
            c.train_p,
            c.test_p,
            cell(c.all.syn),
            cell(c.all.sem),
            cell(c.all.rob)
        );
    }
    out
}

/// Same rows split into single-line and multi-line cohorts.
pub fn breakdown_csv(cells: &[CellMetrics]) -> String {
    let mut out = String::from("model,kind,train_p,test_p,cohort,n,SYN,SEM,ROB\n");
    for c in cells {
        for (name, s) in [("single", &c.single_line), ("multi", &c.multi_line)] {
            let _ = writeln!(
                out,
                "{},{},{},{},{name},{},{},{},{}",
                c.model,
                c.kind,
                c.train_p,
                c.test_p,
                s.n,
                cell(s.syn),
                cell(s.sem),
                cell(s.rob)
            );
        }
    }
    out
}

fn pct(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}%", 100.0 * v))
}

/// Plain-text tables grouped by model.
pub fn summary_text(cells: &[CellMetrics]) -> String {
    let mut out = String::new();
    if cells.is_empty() {
        out.push_str("no evaluated cells\n");
        return out;
    }
    let models: BTreeSet<&str> = cells.iter().map(|c| c.model.as_str()).collect();
    for model in models {
        let _ = writeln!(out, "{model}");
        let _ = writeln!(
            out,
            "  {:<18} {:>7} {:>6} {:>8} {:>8} {:>8} {:>14} {:>14}",
            "kind", "train", "test", "SYN", "SEM", "ROB", "SEM single", "SEM multi"
        );
        for c in cells.iter().filter(|c| c.model == model) {
            let _ = writeln!(
                out,
                "  {:<18} {:>6.0}% {:>5.0}% {:>8} {:>8} {:>8} {:>14} {:>14}",
                c.kind,
                100.0 * c.train_p,
                100.0 * c.test_p,
                pct(c.all.syn),
                pct(c.all.sem),
                pct(c.all.rob),
                format!("{} (n={})", pct(c.single_line.sem), c.single_line.n),
                format!("{} (n={})", pct(c.multi_line.sem), c.multi_line.n),
            );
        }
    }
    out
}

/// Write `report.csv`, `breakdown.csv` and `summary.txt` into `dir`.
pub fn write_report(dir: &Path, cells: &[CellMetrics]) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("report.csv", report_csv(cells)),
        ("breakdown.csv", breakdown_csv(cells)),
        ("summary.txt", summary_text(cells)),
    ];
    let mut paths = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
