//! End-to-end composition: split, mine the vocabulary, perturb, gate, augment.
//!
//! Every step is also available on its own; [`run_matrix`] chains them and
//! records every output in a single manifest.

use std::fs;
use std::path::{Path, PathBuf};

use crate::augment::{build_matrix, KindSelector, Splits};
use crate::config::PipelineConfig;
use crate::corpus::{load_corpus, save_corpus, split_corpus, Corpus, Format};
use crate::embedding::{load_vectors, VectorStore};
use crate::error::{Error, Result};
use crate::manifest::Manifest;
use crate::perturb::{
    write_jsonl, write_records, PerturbationKind, PerturbationRecord, Perturber, Skip,
    SubstitutionConfig,
};
use crate::postag::{Lexicon, LexiconTagger, TagOverrides};
use crate::preprocess::Stopwords;
use crate::semgate::{
    gate, score_all, summarize, sweep_by_kind, write_sweep_csv, GateConfig, MeanEncoder,
    PrecomputedEncoder, SentenceEncoder,
};
use crate::vocab::{build_vocabulary, count_frequencies, RegisterList, Vocabulary};

/// General-English prose used when no comparison corpus is configured.
pub const SHIPPED_COMPARISON: &str = include_str!("../data/comparison.txt");

/// Mine structure and name words from corpus intents against general English.
pub fn mine_vocabulary(
    corpus: &Corpus,
    comparison: &str,
    threshold: f64,
    stopwords: &Stopwords,
    registers: &RegisterList,
) -> Result<Vocabulary> {
    let codegen = count_frequencies(corpus.iter().map(|s| s.intent.as_str()), stopwords);
    let general = count_frequencies([comparison], stopwords);
    build_vocabulary(&codegen, &general, threshold, registers)
}

/// Records of every kind for every sample, plus the samples that had none.
pub fn perturb_kinds(
    perturber: &Perturber<'_>,
    corpus: &Corpus,
    kinds: &[PerturbationKind],
    constrained: &SubstitutionConfig,
    unconstrained: &SubstitutionConfig,
) -> Result<(Vec<PerturbationRecord>, Vec<Skip>)> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for &kind in kinds {
        let cfg = if kind == PerturbationKind::SubstUnconstrained {
            unconstrained
        } else {
            constrained
        };
        let outcome = perturber.perturb_corpus(corpus, kind, cfg)?;
        log::info!(
            "{kind}: {} records, {} samples skipped",
            outcome.records.len(),
            outcome.skipped.len()
        );
        records.extend(outcome.records);
        skipped.extend(outcome.skipped);
    }
    Ok((records, skipped))
}

/// Scored and gated records: passing and failing ones, then unevaluable ones.
pub struct Gated {
    pub passed: Vec<PerturbationRecord>,
    pub failed: Vec<PerturbationRecord>,
    pub unevaluable: Vec<PerturbationRecord>,
}

impl Gated {
    /// Passing and failing records, both scored.
    pub fn scored(&self) -> Vec<PerturbationRecord> {
        self.passed.iter().chain(&self.failed).cloned().collect()
    }
}

pub fn score_and_gate(
    records: &[PerturbationRecord],
    encoder: &dyn SentenceEncoder,
    cfg: &GateConfig,
) -> Result<Gated> {
    let scored = score_all(records, encoder);
    let outcome = gate(&scored.records, cfg)?;
    Ok(Gated {
        passed: outcome.passed,
        failed: outcome.failed,
        unevaluable: scored.unevaluable,
    })
}

/// Everything loaded once from the config paths.
pub struct Resources {
    pub stopwords: Stopwords,
    pub registers: RegisterList,
    pub lexicon: Lexicon,
    pub store: Option<VectorStore>,
    pub embeddings: Option<PrecomputedEncoder>,
    pub overrides: Option<TagOverrides>,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let p = &cfg.paths;
        Ok(Resources {
            stopwords: match &p.stopwords {
                Some(path) => Stopwords::load(path)?,
                None => Stopwords::default_english(),
            },
            registers: match &p.registers {
                Some(path) => RegisterList::load(path)?,
                None => RegisterList::default(),
            },
            lexicon: Lexicon::shipped(),
            store: p.vectors.as_deref().map(load_vectors).transpose()?,
            embeddings: p.embeddings.as_deref().map(PrecomputedEncoder::load).transpose()?,
            overrides: p.tags.as_deref().map(TagOverrides::load).transpose()?,
        })
    }

    /// Precomputed embeddings win over the mean-vector encoder.
    pub fn encoder(&self) -> Result<Box<dyn SentenceEncoder + '_>> {
        match (&self.embeddings, &self.store) {
            (Some(e), _) => Ok(Box::new(e.clone())),
            (None, Some(s)) => Ok(Box::new(MeanEncoder::new(s))),
            (None, None) => Err(Error::InvalidConfig("no sentence encoder available".into())),
        }
    }
}

/// Kinds needed to build the given families, in canonical order.
pub fn kinds_for(families: &[KindSelector]) -> Vec<PerturbationKind> {
    let mut kinds: Vec<PerturbationKind> = families.iter().flat_map(|f| f.kinds()).collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Run split → vocabulary → perturb → gate → augment under `cfg.output`.
///
/// Output tree:
///
/// ```text
/// splits/{train,val,test}.jsonl
/// vocab.json
/// records/<kind>.jsonl          scored records of every kind
/// records/skipped.jsonl
/// gate/{passed,failed,unevaluable}.jsonl, gate/sweep.csv, gate/summary.json
/// <family>/trainNNN_testNNN/{train,val,test}.jsonl
/// manifest.json
/// ```
pub fn run_matrix(cfg: &PipelineConfig) -> Result<Manifest> {
    let out = &cfg.output;
    create_dir(out)?;
    let res = Resources::load(cfg)?;
    let corpus = load_corpus(&cfg.paths.corpus, Format::from_path(&cfg.paths.corpus))?;
    let (train, val, test) = split_corpus(&corpus, &cfg.split_spec()?)?;
    let mut written: Vec<PathBuf> = Vec::new();

    let split_dir = out.join("splits");
    create_dir(&split_dir)?;
    for (name, split) in [("train", &train), ("val", &val), ("test", &test)] {
        let path = split_dir.join(format!("{name}.jsonl"));
        save_corpus(split, &path, Format::Jsonl)?;
        written.push(path);
    }

    let vocab = match &cfg.paths.vocabulary {
        Some(path) => Vocabulary::load(path)?,
        None => {
            let comparison = match &cfg.paths.comparison {
                Some(path) => fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
                None => SHIPPED_COMPARISON.to_string(),
            };
            mine_vocabulary(&corpus, &comparison, cfg.vocab_threshold(), &res.stopwords, &res.registers)?
        }
    };
    let vocab_path = out.join("vocab.json");
    vocab.save(&vocab_path)?;
    written.push(vocab_path);

    let tagger = LexiconTagger::new(res.lexicon.clone(), res.registers.clone()).with_vocabulary(&vocab);
    let mut perturber = Perturber::new(&vocab, &res.stopwords, &tagger);
    if let Some(store) = &res.store {
        perturber = perturber.with_store(store);
    }
    if let Some(overrides) = &res.overrides {
        perturber = perturber.with_overrides(overrides);
    }
    let families = cfg.families()?;
    let kinds = kinds_for(&families);
    let (records, skipped) = perturb_kinds(
        &perturber,
        &corpus,
        &kinds,
        &cfg.substitution(false),
        &cfg.substitution(true),
    )?;

    let encoder = res.encoder()?;
    let gated = score_and_gate(&records, encoder.as_ref(), &cfg.gate_config()?)?;
    let scored = gated.scored();

    let rec_dir = out.join("records");
    create_dir(&rec_dir)?;
    for &kind in &kinds {
        let path = rec_dir.join(format!("{kind}.jsonl"));
        let of_kind: Vec<PerturbationRecord> = scored
            .iter()
            .chain(&gated.unevaluable)
            .filter(|r| r.kind == kind)
            .cloned()
            .collect();
        write_records(&path, &of_kind)?;
        written.push(path);
    }
    let path = rec_dir.join("skipped.jsonl");
    write_jsonl(&path, &skipped)?;
    written.push(path);

    let gate_dir = out.join("gate");
    create_dir(&gate_dir)?;
    for (name, list) in [
        ("passed", &gated.passed),
        ("failed", &gated.failed),
        ("unevaluable", &gated.unevaluable),
    ] {
        let path = gate_dir.join(format!("{name}.jsonl"));
        write_records(&path, list)?;
        written.push(path);
    }
    if !scored.is_empty() {
        let path = gate_dir.join("sweep.csv");
        write_sweep_csv(&path, &sweep_by_kind(&scored, &cfg.gate.sweep)?)?;
        written.push(path);
        let path = gate_dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summarize(&scored))? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    let splits = Splits {
        train: &train,
        val: &val,
        test: &test,
        records: &gated.passed,
    };
    let mut manifest = build_matrix(&splits, &cfg.matrix_spec()?, out)?;
    manifest.config_digest = Some(cfg.digest.clone());
    for path in &written {
        manifest.add_file(out, path)?;
    }
    manifest.write(out)?;
    Ok(manifest)
}
