//! Perturbed intents: word substitution in an embedding neighborhood and
//! omission of one word category at a time.
//!
//! Substitution swaps a fraction of the eligible words (content words that are
//! not stopwords, not protected by the vocabulary and present in the vector
//! store) for top-k neighbors. With constraints, a neighbor must reach the
//! cosine threshold and keep the part-of-speech tag of the word it replaces;
//! without them the nearest neighbor is taken. Omission removes every word of
//! one category: verbs, structure words or names.
//!
//! Every sample draws from its own RNG stream derived from the seed and the
//! sample id, so corpus-level results do not depend on thread count.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{top_k_neighbors, VectorStore};
use crate::error::{Error, Result};
use crate::postag::{PosTag, PosTagger, TagOverrides};
use crate::preprocess::{is_punctuation, rewrite, tokenize, Stopwords, TokenEdit};
use crate::seed::{derived_rng, round_count};
use crate::vocab::{is_protected, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    SubstConstrained,
    SubstUnconstrained,
    OmitAction,
    OmitStructure,
    OmitName,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 5] = [
        PerturbationKind::SubstConstrained,
        PerturbationKind::SubstUnconstrained,
        PerturbationKind::OmitAction,
        PerturbationKind::OmitStructure,
        PerturbationKind::OmitName,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::SubstConstrained => "subst_constrained",
            PerturbationKind::SubstUnconstrained => "subst_unconstrained",
            PerturbationKind::OmitAction => "omit_action",
            PerturbationKind::OmitStructure => "omit_structure",
            PerturbationKind::OmitName => "omit_name",
        }
    }

    pub fn omission_category(self) -> Option<OmissionCategory> {
        match self {
            PerturbationKind::OmitAction => Some(OmissionCategory::Action),
            PerturbationKind::OmitStructure => Some(OmissionCategory::Structure),
            PerturbationKind::OmitName => Some(OmissionCategory::Name),
            _ => None,
        }
    }

    pub fn is_substitution(self) -> bool {
        self.omission_category().is_none()
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let kind = match norm.as_str() {
            "subst_constrained" | "substitution" | "subst" => PerturbationKind::SubstConstrained,
            "subst_unconstrained" => PerturbationKind::SubstUnconstrained,
            "omit_action" => PerturbationKind::OmitAction,
            "omit_structure" => PerturbationKind::OmitStructure,
            "omit_name" => PerturbationKind::OmitName,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown perturbation kind {s:?}"
                )))
            }
        };
        Ok(kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmissionCategory {
    Action,
    Structure,
    Name,
}

impl OmissionCategory {
    pub const ALL: [OmissionCategory; 3] = [
        OmissionCategory::Action,
        OmissionCategory::Structure,
        OmissionCategory::Name,
    ];

    pub fn kind(self) -> PerturbationKind {
        match self {
            OmissionCategory::Action => PerturbationKind::OmitAction,
            OmissionCategory::Structure => PerturbationKind::OmitStructure,
            OmissionCategory::Name => PerturbationKind::OmitName,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateVerdict {
    Pass,
    Fail,
    #[default]
    Unevaluated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    #[serde(rename = "id")]
    pub sample_id: String,
    pub kind: PerturbationKind,
    pub original: String,
    pub perturbed: String,
    #[serde(rename = "changed")]
    pub changed_positions: Vec<usize>,
    pub similarity: Option<f64>,
    #[serde(rename = "gate")]
    pub gate_pass: GateVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubstitutionConfig {
    pub ratio: f64,
    pub k: usize,
    pub tau: f64,
    pub use_constraints: bool,
    pub seed: u64,
}

impl SubstitutionConfig {
    /// 10% of eligible words, top 20 neighbors, cosine at least 0.8, same tag.
    pub fn constrained(seed: u64) -> Self {
        SubstitutionConfig {
            ratio: 0.10,
            k: 20,
            tau: 0.8,
            use_constraints: true,
            seed,
        }
    }

    /// Nearest of the top 50 neighbors, no threshold or tag check.
    pub fn unconstrained(seed: u64) -> Self {
        SubstitutionConfig {
            ratio: 0.10,
            k: 50,
            tau: 0.0,
            use_constraints: false,
            seed,
        }
    }

    pub fn for_kind(kind: PerturbationKind, seed: u64) -> Self {
        match kind {
            PerturbationKind::SubstUnconstrained => SubstitutionConfig::unconstrained(seed),
            _ => SubstitutionConfig::constrained(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "substitution ratio must be in (0, 1], got {}",
                self.ratio
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!(
                "tau must be in [0, 1], got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Why a sample produced no record for a kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unperturbable {
    /// No eligible or omittable word.
    NoEligible,
    /// Eligible words exist but none has a qualifying neighbor.
    NoQualifyingNeighbor,
    /// Omission would leave no word.
    NothingLeft,
}

impl fmt::Display for Unperturbable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unperturbable::NoEligible => "no eligible words",
            Unperturbable::NoQualifyingNeighbor => "no qualifying neighbor",
            Unperturbable::NothingLeft => "omission leaves no words",
        })
    }
}

/// Token indices that may be substituted.
pub fn eligible_words(
    tokens: &[String],
    vocab: &Vocabulary,
    tags: &[PosTag],
    store: &VectorStore,
    stopwords: &Stopwords,
) -> BTreeSet<usize> {
    debug_assert_eq!(tokens.len(), tags.len());
    tokens
        .iter()
        .zip(tags)
        .enumerate()
        .filter(|(_, (token, tag))| {
            !is_punctuation(token)
                && !stopwords.contains(token)
                && !is_protected(token, vocab)
                && tag.is_content()
                && store.contains(token)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Token indices removed by omitting `category`.
///
/// Structure words tagged as verbs are left to the action category, so each
/// category keeps to its own part of speech.
pub fn omittable_words(
    tokens: &[String],
    category: OmissionCategory,
    vocab: &Vocabulary,
    tags: &[PosTag],
) -> BTreeSet<usize> {
    debug_assert_eq!(tokens.len(), tags.len());
    tokens
        .iter()
        .zip(tags)
        .enumerate()
        .filter(|(_, (token, &tag))| {
            !is_punctuation(token)
                && match category {
                    OmissionCategory::Action => tag == PosTag::Verb,
                    OmissionCategory::Structure => vocab.is_structure(token) && tag != PosTag::Verb,
                    OmissionCategory::Name => vocab.is_name(token),
                }
        })
        .map(|(i, _)| i)
        .collect()
}

/// Give `candidate` the capitalization pattern of `original`.
fn match_case(candidate: &str, original: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase()) {
        return candidate.to_uppercase();
    }
    match original.chars().next() {
        Some(c) if c.is_uppercase() => {
            let mut chars = candidate.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
        _ => candidate.to_string(),
    }
}

/// Immutable resources shared by every perturbation of a corpus.
#[derive(Clone, Copy)]
pub struct Perturber<'a> {
    pub vocab: &'a Vocabulary,
    pub stopwords: &'a Stopwords,
    pub tagger: &'a dyn PosTagger,
    pub store: Option<&'a VectorStore>,
    pub overrides: Option<&'a TagOverrides>,
}

impl<'a> Perturber<'a> {
    pub fn new(vocab: &'a Vocabulary, stopwords: &'a Stopwords, tagger: &'a dyn PosTagger) -> Self {
        Perturber {
            vocab,
            stopwords,
            tagger,
            store: None,
            overrides: None,
        }
    }

    pub fn with_store(mut self, store: &'a VectorStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn with_overrides(mut self, overrides: &'a TagOverrides) -> Self {
        self.overrides = Some(overrides);
        self
    }

    /// Tags for a sample, preferring aligned external tags.
    pub fn tags_for(&self, id: &str, tokens: &[String]) -> Vec<PosTag> {
        self.overrides
            .and_then(|o| o.get(id, tokens))
            .map(<[PosTag]>::to_vec)
            .unwrap_or_else(|| self.tagger.tag(tokens))
    }

    fn store(&self) -> Result<&'a VectorStore> {
        self.store
            .ok_or_else(|| Error::InvalidConfig("word substitution needs a vector store".into()))
    }

    fn is_usable_candidate(&self, candidate: &str, original: &str) -> bool {
        candidate.to_lowercase() != original.to_lowercase()
            && !is_punctuation(candidate)
            && !self.stopwords.contains(candidate)
            && tokenize(candidate).len() == 1
    }

    /// Substitute words of one intent.
    pub fn substitute<R: Rng>(
        &self,
        id: &str,
        intent: &str,
        cfg: &SubstitutionConfig,
        rng: &mut R,
    ) -> Result<std::result::Result<PerturbationRecord, Unperturbable>> {
        cfg.validate()?;
        let store = self.store()?;
        let tokens = tokenize(intent).tokens;
        let tags = self.tags_for(id, &tokens);
        let eligible = eligible_words(&tokens, self.vocab, &tags, store, self.stopwords);
        if eligible.is_empty() {
            return Ok(Err(Unperturbable::NoEligible));
        }
        let wanted = round_count(cfg.ratio, eligible.len()).max(1);

        let mut order: Vec<usize> = eligible.into_iter().collect();
        order.shuffle(rng);

        let mut current = tokens.clone();
        let mut edits = vec![TokenEdit::Keep; tokens.len()];
        let mut changed = Vec::new();
        for idx in order {
            if changed.len() == wanted {
                break;
            }
            let original = &tokens[idx];
            for neighbor in top_k_neighbors(original, cfg.k, store)? {
                if cfg.use_constraints && neighbor.similarity < cfg.tau {
                    // neighbors are sorted, nothing further qualifies
                    break;
                }
                if !self.is_usable_candidate(&neighbor.word, original) {
                    continue;
                }
                let candidate = match_case(&neighbor.word, original);
                if cfg.use_constraints {
                    let mut trial = current.clone();
                    trial[idx] = candidate.clone();
                    if self.tagger.tag(&trial)[idx] != tags[idx] {
                        continue;
                    }
                }
                current[idx] = candidate.clone();
                edits[idx] = TokenEdit::Replace(candidate);
                changed.push(idx);
                break;
            }
        }
        if changed.is_empty() {
            return Ok(Err(Unperturbable::NoQualifyingNeighbor));
        }
        changed.sort_unstable();
        let kind = if cfg.use_constraints {
            PerturbationKind::SubstConstrained
        } else {
            PerturbationKind::SubstUnconstrained
        };
        Ok(Ok(PerturbationRecord {
            sample_id: id.to_string(),
            kind,
            original: intent.to_string(),
            perturbed: rewrite(intent, &edits),
            changed_positions: changed,
            similarity: None,
            gate_pass: GateVerdict::Unevaluated,
        }))
    }

    /// Remove every word of `category` from one intent.
    pub fn omit(
        &self,
        id: &str,
        intent: &str,
        category: OmissionCategory,
    ) -> std::result::Result<PerturbationRecord, Unperturbable> {
        let tokens = tokenize(intent).tokens;
        let tags = self.tags_for(id, &tokens);
        let removed = omittable_words(&tokens, category, self.vocab, &tags);
        if removed.is_empty() {
            return Err(Unperturbable::NoEligible);
        }
        let survivors = tokens
            .iter()
            .enumerate()
            .any(|(i, t)| !removed.contains(&i) && !is_punctuation(t));
        if !survivors {
            return Err(Unperturbable::NothingLeft);
        }
        let edits: Vec<TokenEdit> = (0..tokens.len())
            .map(|i| {
                if removed.contains(&i) {
                    TokenEdit::Remove
                } else {
                    TokenEdit::Keep
                }
            })
            .collect();
        Ok(PerturbationRecord {
            sample_id: id.to_string(),
            kind: category.kind(),
            original: intent.to_string(),
            perturbed: rewrite(intent, &edits),
            changed_positions: removed.into_iter().collect(),
            similarity: None,
            gate_pass: GateVerdict::Unevaluated,
        })
    }

    /// Perturb one sample with `kind`, drawing from the sample's own stream.
    pub fn perturb_sample(
        &self,
        id: &str,
        intent: &str,
        kind: PerturbationKind,
        cfg: &SubstitutionConfig,
    ) -> Result<std::result::Result<PerturbationRecord, Unperturbable>> {
        match kind.omission_category() {
            Some(category) => Ok(self.omit(id, intent, category)),
            None => {
                let cfg = SubstitutionConfig {
                    use_constraints: kind == PerturbationKind::SubstConstrained,
                    ..*cfg
                };
                let mut rng = derived_rng(cfg.seed, &["substitute", id]);
                self.substitute(id, intent, &cfg, &mut rng)
            }
        }
    }

    /// Perturb every sample of `corpus`, in parallel, in corpus order.
    pub fn perturb_corpus(
        &self,
        corpus: &Corpus,
        kind: PerturbationKind,
        cfg: &SubstitutionConfig,
    ) -> Result<PerturbOutcome> {
        cfg.validate()?;
        if kind.is_substitution() {
            self.store()?;
        }
        let results: Vec<_> = corpus
            .samples()
            .par_iter()
            .map(|s| self.perturb_sample(&s.id, &s.intent, kind, cfg).map(|r| (s, r)))
            .collect::<Result<_>>()?;
        let mut outcome = PerturbOutcome::default();
        for (sample, result) in results {
            match result {
                Ok(record) => outcome.records.push(record),
                Err(reason) => outcome.skipped.push(Skip {
                    id: sample.id.clone(),
                    kind,
                    reason,
                }),
            }
        }
        Ok(outcome)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub id: String,
    pub kind: PerturbationKind,
    pub reason: Unperturbable,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerturbOutcome {
    pub records: Vec<PerturbationRecord>,
    pub skipped: Vec<Skip>,
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(items)
}

pub fn write_records(path: &Path, records: &[PerturbationRecord]) -> Result<()> {
    write_jsonl(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<PerturbationRecord>> {
    read_jsonl(path)
}
