//! Programming-language vocabulary mined by corpus frequency comparison.
//!
//! A word enters the vocabulary when its relative frequency in the
//! code-generation corpus is at least `threshold` times its relative frequency
//! in a general-English comparison corpus, or when it never occurs there. The
//! relative frequency of a word is its count divided by the number of distinct
//! words of the corpus. The test runs on lowercased words; surface case is kept
//! for name words.
//!
//! Included words are split into name words (registers, labels, identifiers,
//! tokens with digits or special characters) and structure words (everything
//! else, stored lowercase).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{is_punctuation, tokenize, Stopwords};

const DEFAULT_REGISTERS: &str = include_str!("../data/registers.txt");

/// Default inclusion ratio.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 50.0;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
}

impl FrequencyTable {
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut table = FrequencyTable::default();
        for (word, count) in counts {
            if count > 0 {
                *table.counts.entry(word.into()).or_insert(0) += count;
            }
        }
        table
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn unique_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Add another shard's counts.
    pub fn merge(&mut self, other: &FrequencyTable) {
        for (word, count) in other.iter() {
            *self.counts.entry(word.to_string()).or_insert(0) += count;
        }
    }

    /// Counts folded onto lowercase keys.
    pub fn lowercased(&self) -> FrequencyTable {
        FrequencyTable::from_counts(self.iter().map(|(w, c)| (w.to_lowercase(), c)))
    }
}

/// Count non-stopword, non-punctuation tokens over a stream of texts.
pub fn count_frequencies<I, S>(texts: I, stopwords: &Stopwords) -> FrequencyTable
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut table = FrequencyTable::default();
    for text in texts {
        for token in tokenize(text.as_ref()).tokens {
            if is_punctuation(&token) || stopwords.contains(&token) {
                continue;
            }
            *table.counts.entry(token).or_insert(0) += 1;
        }
    }
    table
}

/// Register mnemonics treated as names.
#[derive(Clone, Debug)]
pub struct RegisterList {
    names: HashSet<String>,
}

impl Default for RegisterList {
    fn default() -> Self {
        RegisterList::parse(DEFAULT_REGISTERS)
    }
}

impl RegisterList {
    pub fn parse(text: &str) -> Self {
        RegisterList {
            names: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(RegisterList::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.names.contains(&word.to_lowercase())
    }
}

fn is_numeric(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| c.is_ascii_digit())
}

/// Name-like surface forms: identifiers, labels, registers, operands.
pub fn is_name_like(word: &str, registers: &RegisterList) -> bool {
    if word.is_empty() || is_numeric(word) {
        return false;
    }
    let chars: Vec<char> = word.chars().collect();
    let special = chars
        .iter()
        .any(|&c| !c.is_alphanumeric() && c != '-' && c != '\'');
    let digit_next_to_letter = chars.windows(2).any(|w| {
        (w[0].is_ascii_digit() && w[1].is_alphabetic())
            || (w[0].is_alphabetic() && w[1].is_ascii_digit())
    });
    let letters: Vec<char> = chars.iter().copied().filter(|c| c.is_alphabetic()).collect();
    let all_caps = letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase());
    special || digit_next_to_letter || all_caps || registers.contains(word)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    #[serde(rename = "structure")]
    pub structure_words: BTreeSet<String>,
    #[serde(rename = "name")]
    pub name_words: BTreeSet<String>,
    #[serde(rename = "threshold")]
    pub ratio_threshold: f64,
}

impl Vocabulary {
    /// Hand-assembled vocabulary; structure words are lowercased.
    pub fn from_words<S, N>(structure: S, name: N) -> Self
    where
        S: IntoIterator,
        S::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        Vocabulary {
            structure_words: structure
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect(),
            name_words: name.into_iter().map(|w| w.as_ref().to_string()).collect(),
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
        }
    }

    pub fn is_structure(&self, word: &str) -> bool {
        self.structure_words.contains(&word.to_lowercase())
    }

    pub fn is_name(&self, word: &str) -> bool {
        self.name_words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.structure_words.len() + self.name_words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Structure words match case-insensitively, name words exactly.
pub fn is_protected(word: &str, vocab: &Vocabulary) -> bool {
    !word.is_empty() && (vocab.is_structure(word) || vocab.is_name(word))
}

fn relative_frequency(table: &FrequencyTable, word: &str) -> f64 {
    match table.unique_count() {
        0 => 0.0,
        n => table.count(word) as f64 / n as f64,
    }
}

/// Mine the vocabulary from code-generation and comparison frequency tables.
pub fn build_vocabulary(
    codegen: &FrequencyTable,
    comparison: &FrequencyTable,
    threshold: f64,
    registers: &RegisterList,
) -> Result<Vocabulary> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "ratio threshold must be positive, got {threshold}"
        )));
    }
    if codegen.is_empty() || comparison.is_empty() {
        return Err(Error::EmptyInput("frequency tables must be non-empty"));
    }
    let code_lc = codegen.lowercased();
    let cmp_lc = comparison.lowercased();
    let included: HashSet<&str> = code_lc
        .iter()
        .map(|(w, _)| w)
        .filter(|w| !is_numeric(w))
        .filter(|w| {
            let cmp = relative_frequency(&cmp_lc, w);
            cmp == 0.0 || relative_frequency(&code_lc, w) >= threshold * cmp
        })
        .collect();

    let mut vocab = Vocabulary {
        ratio_threshold: threshold,
        ..Default::default()
    };
    for (surface, _) in codegen.iter() {
        let lower = surface.to_lowercase();
        if !included.contains(lower.as_str()) {
            continue;
        }
        if is_name_like(surface, registers) {
            vocab.name_words.insert(surface.to_string());
        } else {
            vocab.structure_words.insert(lower);
        }
    }
    Ok(vocab)
}
