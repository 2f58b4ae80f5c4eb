//! Dense word vectors: text-format loader, cosine similarity, exact top-k
//! neighbor search and mean-of-word-vectors sentence embeddings.
//!
//! The loader reads the usual whitespace-delimited format (`word f1 f2 ...`),
//! optionally preceded by a `count dimension` header line, as shipped with
//! counter-fitted and GloVe-style vectors. All arithmetic is in `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct VectorStore {
    dimension: usize,
    words: Vec<String>,
    data: Vec<f64>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
}

impl VectorStore {
    pub fn new(dimension: usize) -> Self {
        VectorStore {
            dimension,
            ..Default::default()
        }
    }

    /// Insert or overwrite `word`. Returns true when an existing entry was replaced.
    pub fn insert(&mut self, word: impl Into<String>, vector: &[f64]) -> Result<bool> {
        let word = word.into();
        if word.is_empty() {
            return Err(Error::InvalidConfig("empty word in vector store".into()));
        }
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch(self.dimension, vector.len()));
        }
        let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        match self.index.get(&word) {
            Some(&i) => {
                self.data[i * self.dimension..(i + 1) * self.dimension].copy_from_slice(vector);
                self.norms[i] = norm;
                Ok(true)
            }
            None => {
                self.index.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.data.extend_from_slice(vector);
                self.norms.push(norm);
                Ok(false)
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    /// Exact lookup, then lowercase fallback.
    fn position(&self, word: &str) -> Option<usize> {
        self.index
            .get(word)
            .or_else(|| self.index.get(&word.to_lowercase()))
            .copied()
    }

    /// Stored key used for `word` (exact match or its lowercase form).
    pub fn resolve(&self, word: &str) -> Option<&str> {
        self.position(word).map(|i| self.words[i].as_str())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.position(word).is_some()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.position(word).map(|i| self.row(i))
    }

    /// Cosine similarity between two stored words.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let va = self.get(a).ok_or_else(|| Error::OutOfVocabulary(a.into()))?;
        let vb = self.get(b).ok_or_else(|| Error::OutOfVocabulary(b.into()))?;
        cosine(va, vb)
    }
}

pub fn load_vectors(path: &Path) -> Result<VectorStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_error = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut store: Option<VectorStore> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();

        if i == 0 && rest.len() == 1 {
            if let (Ok(_), Ok(dim)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                if dim == 0 {
                    return Err(parse_error(lineno, "header declares dimension 0".into()));
                }
                store = Some(VectorStore::new(dim));
                continue;
            }
        }
        let values = rest
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| parse_error(lineno, format!("bad float: {e}")))?;
        if values.is_empty() {
            return Err(parse_error(lineno, format!("no components for {word:?}")));
        }
        let store = store.get_or_insert_with(|| VectorStore::new(values.len()));
        if values.len() != store.dimension {
            return Err(Error::Dimension {
                line: lineno,
                expected: store.dimension,
                found: values.len(),
            });
        }
        if store.insert(word, &values)? {
            log::warn!("{}:{lineno}: duplicate word {word:?}, keeping the last vector", path.display());
        }
    }
    Ok(store.unwrap_or_default())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot(a, b) / (na * nb))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f64,
}

/// The `k` most similar words to `word`, excluding itself, by exact scan.
///
/// Ordered by descending cosine, ties broken by the word in lexicographic order.
pub fn top_k_neighbors(word: &str, k: usize, store: &VectorStore) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let q = store
        .position(word)
        .ok_or_else(|| Error::OutOfVocabulary(word.into()))?;
    let query = store.row(q);
    let qnorm = store.norms[q];
    if qnorm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut scored: Vec<(usize, f64)> = (0..store.len())
        .into_par_iter()
        .filter(|&i| i != q && store.norms[i] > 0.0)
        .map(|i| (i, dot(query, store.row(i)) / (qnorm * store.norms[i])))
        .collect();
    let order = |a: &(usize, f64), b: &(usize, f64)| {
        b.1.total_cmp(&a.1)
            .then_with(|| store.words[a.0].cmp(&store.words[b.0]))
    };
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_by(order);
    Ok(scored
        .into_iter()
        .map(|(i, similarity)| Neighbor {
            word: store.words[i].clone(),
            similarity,
        })
        .collect())
}

/// A sentence vector with the number of tokens that had no word vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceVector {
    pub vector: Vec<f64>,
    pub oov: usize,
}

/// L2-normalized mean of the in-vocabulary token vectors.
pub fn sentence_embedding<S: AsRef<str>>(tokens: &[S], store: &VectorStore) -> Result<SentenceVector> {
    let mut sum = vec![0.0; store.dimension()];
    let mut found = 0usize;
    for token in tokens {
        match store.get(token.as_ref()) {
            Some(v) => {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                found += 1;
            }
            None => continue,
        }
    }
    if found == 0 {
        return Err(Error::AllOutOfVocabulary);
    }
    let oov = tokens.len() - found;
    if oov > 0 {
        log::debug!("{oov} of {} tokens have no vector", tokens.len());
    }
    // the mean and the sum normalize to the same direction
    let n = norm(&sum);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(SentenceVector {
        vector: sum.into_iter().map(|x| x / n).collect(),
        oov,
    })
}
