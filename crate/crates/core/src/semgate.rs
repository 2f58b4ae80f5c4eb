//! Sentence-similarity gate over perturbation records.
//!
//! Each record is scored with the cosine between the sentence embeddings of its
//! original and perturbed intents. A record passes when the score is strictly
//! higher than the threshold (0.80 by default).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, sentence_embedding, VectorStore};
use crate::error::{Error, Result};
use crate::perturb::{GateVerdict, PerturbationKind, PerturbationRecord};
use crate::preprocess::tokenize;

pub const DEFAULT_THRESHOLD: f64 = 0.80;

/// Thresholds of the sensitivity sweep.
pub const SWEEP_THRESHOLDS: [f64; 3] = [0.70, 0.80, 0.90];

/// Which intent of a record is being encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Original,
    Perturbed,
}

/// Turns an intent into a sentence vector.
pub trait SentenceEncoder: Send + Sync {
    fn encode(&self, record: &PerturbationRecord, side: Side) -> Result<Vec<f64>>;
}

/// Normalized mean of the word vectors of the intent tokens.
pub struct MeanEncoder<'a> {
    store: &'a VectorStore,
}

impl<'a> MeanEncoder<'a> {
    pub fn new(store: &'a VectorStore) -> Self {
        MeanEncoder { store }
    }
}

impl SentenceEncoder for MeanEncoder<'_> {
    fn encode(&self, record: &PerturbationRecord, side: Side) -> Result<Vec<f64>> {
        let text = match side {
            Side::Original => &record.original,
            Side::Perturbed => &record.perturbed,
        };
        Ok(sentence_embedding(&tokenize(text).tokens, self.store)?.vector)
    }
}

/// Embeddings computed elsewhere, one JSONL line `{"id", "vec"}` per intent.
///
/// Originals are keyed by the sample id, perturbed intents by
/// `<sample id>/<kind>` (for example `s12/omit_name`).
#[derive(Clone, Debug, Default)]
pub struct PrecomputedEncoder {
    vectors: HashMap<String, Vec<f64>>,
}

#[derive(Deserialize, Serialize)]
struct EmbeddingLine {
    id: String,
    vec: Vec<f64>,
}

impl PrecomputedEncoder {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut vectors = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: EmbeddingLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            vectors.insert(entry.id, entry.vec);
        }
        Ok(PrecomputedEncoder { vectors })
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<f64>) {
        self.vectors.insert(key.into(), vector);
    }

    pub fn key(record: &PerturbationRecord, side: Side) -> String {
        match side {
            Side::Original => record.sample_id.clone(),
            Side::Perturbed => format!("{}/{}", record.sample_id, record.kind),
        }
    }
}

impl SentenceEncoder for PrecomputedEncoder {
    fn encode(&self, record: &PerturbationRecord, side: Side) -> Result<Vec<f64>> {
        let key = PrecomputedEncoder::key(record, side);
        self.vectors
            .get(&key)
            .cloned()
            .ok_or(Error::OutOfVocabulary(key))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateConfig {
    pub threshold: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl GateConfig {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConfig(format!(
                "gate threshold must be in [0, 1], got {threshold}"
            )));
        }
        Ok(GateConfig { threshold })
    }
}

/// Fill in the similarity of one record; the verdict stays unevaluated.
pub fn score(record: &PerturbationRecord, encoder: &dyn SentenceEncoder) -> Result<PerturbationRecord> {
    let original = encoder.encode(record, Side::Original)?;
    let perturbed = encoder.encode(record, Side::Perturbed)?;
    Ok(PerturbationRecord {
        similarity: Some(cosine(&original, &perturbed)?),
        gate_pass: GateVerdict::Unevaluated,
        ..record.clone()
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scored {
    pub records: Vec<PerturbationRecord>,
    /// Records whose intents could not be encoded, verdict left unevaluated.
    pub unevaluable: Vec<PerturbationRecord>,
}

/// Score records in parallel, keeping input order.
pub fn score_all(records: &[PerturbationRecord], encoder: &dyn SentenceEncoder) -> Scored {
    let results: Vec<_> = records
        .par_iter()
        .map(|r| (r, score(r, encoder)))
        .collect();
    let mut scored = Scored::default();
    for (record, result) in results {
        match result {
            Ok(r) => scored.records.push(r),
            Err(e) => {
                log::warn!("record {} ({}) not encodable: {e}", record.sample_id, record.kind);
                scored.unevaluable.push(record.clone());
            }
        }
    }
    scored
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateOutcome {
    pub passed: Vec<PerturbationRecord>,
    pub failed: Vec<PerturbationRecord>,
}

/// Split scored records on `similarity > threshold`.
pub fn gate(records: &[PerturbationRecord], cfg: &GateConfig) -> Result<GateOutcome> {
    let mut outcome = GateOutcome::default();
    for record in records {
        let similarity = record
            .similarity
            .ok_or_else(|| Error::Unscored(record.sample_id.clone()))?;
        let mut record = record.clone();
        if similarity > cfg.threshold {
            record.gate_pass = GateVerdict::Pass;
            outcome.passed.push(record);
        } else {
            record.gate_pass = GateVerdict::Fail;
            outcome.failed.push(record);
        }
    }
    Ok(outcome)
}

/// Fraction of records whose similarity exceeds each threshold.
pub fn threshold_sweep(records: &[PerturbationRecord], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("threshold sweep needs scored records"));
    }
    let sims = records
        .iter()
        .map(|r| r.similarity.ok_or_else(|| Error::Unscored(r.sample_id.clone())))
        .collect::<Result<Vec<f64>>>()?;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let passing = sims.iter().filter(|&&s| s > t).count();
            (t, passing as f64 / sims.len() as f64)
        })
        .collect())
}

/// Similarity clipped to `[0, 1]` for reporting.
pub fn reported_similarity(raw: f64) -> f64 {
    raw.clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilaritySummary {
    pub kind: PerturbationKind,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
}

/// Mean and median of the reported similarity per kind, in kind order.
pub fn summarize(records: &[PerturbationRecord]) -> Vec<SimilaritySummary> {
    PerturbationKind::ALL
        .into_iter()
        .filter_map(|kind| {
            let mut sims: Vec<f64> = records
                .iter()
                .filter(|r| r.kind == kind)
                .filter_map(|r| r.similarity.map(reported_similarity))
                .collect();
            if sims.is_empty() {
                return None;
            }
            sims.sort_by(f64::total_cmp);
            let n = sims.len();
            let median = if n % 2 == 1 {
                sims[n / 2]
            } else {
                (sims[n / 2 - 1] + sims[n / 2]) / 2.0
            };
            Some(SimilaritySummary {
                kind,
                count: n,
                mean: sims.iter().sum::<f64>() / n as f64,
                median,
            })
        })
        .collect()
}

/// Sweep CSV with header `threshold,kind,pass_rate`.
pub fn write_sweep_csv(path: &Path, rows: &[(f64, PerturbationKind, f64)]) -> Result<()> {
    let mut out = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("threshold,kind,pass_rate\n");
    for (t, kind, rate) in rows {
        text.push_str(&format!("{t:.2},{kind},{rate:.6}\n"));
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Sweep each kind present in `records` separately.
pub fn sweep_by_kind(
    records: &[PerturbationRecord],
    thresholds: &[f64],
) -> Result<Vec<(f64, PerturbationKind, f64)>> {
    let mut rows = Vec::new();
    for kind in PerturbationKind::ALL {
        let subset: Vec<PerturbationRecord> =
            records.iter().filter(|r| r.kind == kind).cloned().collect();
        if subset.is_empty() {
            continue;
        }
        for (t, rate) in threshold_sweep(&subset, thresholds)? {
            rows.push((t, kind, rate));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, original: &str, perturbed: &str, sim: Option<f64>) -> PerturbationRecord {
        PerturbationRecord {
            sample_id: id.into(),
            kind: PerturbationKind::OmitAction,
            original: original.into(),
            perturbed: perturbed.into(),
            changed_positions: vec![0],
            similarity: sim,
            gate_pass: GateVerdict::Unevaluated,
        }
    }

    fn store(rows: &[(&str, &[f64])]) -> VectorStore {
        let mut s = VectorStore::new(rows[0].1.len());
        for (w, v) in rows {
            s.insert(*w, v).unwrap();
        }
        s
    }

    #[test]
    fn identical_intents_score_one() {
        let s = store(&[("push", &[1.0, 2.0]), ("eax", &[0.5, -1.0])]);
        let r = score(&rec("a", "push eax", "push eax", None), &MeanEncoder::new(&s)).unwrap();
        assert!((r.similarity.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.gate_pass, GateVerdict::Unevaluated);
    }

    #[test]
    fn omitting_the_mean_direction() {
        // a and m: m points along the mean of {a, m}, so dropping a keeps
        // the direction of m. cos(mean(a, m), m) by hand: a = (1, 0), m = (1, 1)
        // mean ∝ (2, 1); cos = 3 / (sqrt(5) sqrt(2))
        let s = store(&[("a", &[1.0, 0.0]), ("m", &[1.0, 1.0])]);
        let r = score(&rec("x", "a m", "m", None), &MeanEncoder::new(&s)).unwrap();
        let expected = 3.0 / (5.0f64.sqrt() * 2.0f64.sqrt());
        assert!((r.similarity.unwrap() - expected).abs() < 1e-12);
        assert!(r.similarity.unwrap() > 0.9);
    }

    #[test]
    fn substitution_closed_form() {
        // unit vectors with cos(store, save) = 0.9, "ptr" orthogonal to both
        let s = store(&[
            ("store", &[1.0, 0.0, 0.0]),
            ("save", &[0.9, 0.435_889_894_354_067_4, 0.0]),
            ("ptr", &[0.0, 0.0, 1.0]),
        ]);
        let r = score(&rec("x", "store ptr", "save ptr", None), &MeanEncoder::new(&s)).unwrap();
        // (u + p)·(v + p) / (|u + p| |v + p|) = (0.9 + 1) / (sqrt(2) sqrt(2))
        assert!((r.similarity.unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn unencodable_records_are_set_aside() {
        let s = store(&[("push", &[1.0, 0.0])]);
        let scored = score_all(
            &[rec("a", "push", "push", None), rec("b", "qqq", "zzz", None)],
            &MeanEncoder::new(&s),
        );
        assert_eq!(scored.records.len(), 1);
        assert_eq!(scored.unevaluable.len(), 1);
        assert_eq!(scored.unevaluable[0].gate_pass, GateVerdict::Unevaluated);
    }

    #[test]
    fn gate_partition() {
        let rs = vec![
            rec("a", "x", "y", Some(0.95)),
            rec("b", "x", "y", Some(0.79)),
            rec("c", "x", "y", Some(0.81)),
        ];
        let out = gate(&rs, &GateConfig::default()).unwrap();
        assert_eq!(out.passed.iter().map(|r| r.sample_id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(out.failed.iter().map(|r| r.sample_id.as_str()).collect::<Vec<_>>(), ["b"]);
        assert!(out.passed.iter().all(|r| r.gate_pass == GateVerdict::Pass));
        assert!(out.failed.iter().all(|r| r.gate_pass == GateVerdict::Fail));

        assert_eq!(gate(&rs, &GateConfig::new(0.0).unwrap()).unwrap().passed.len(), 3);
        assert_eq!(gate(&rs, &GateConfig::new(1.0).unwrap()).unwrap().failed.len(), 3);
        // strictly greater
        let at = vec![rec("d", "x", "y", Some(0.8))];
        assert_eq!(gate(&at, &GateConfig::default()).unwrap().failed.len(), 1);
        assert!(matches!(gate(&[rec("e", "x", "y", None)], &GateConfig::default()), Err(Error::Unscored(_))));
        assert!(GateConfig::new(1.2).is_err());
    }

    #[test]
    fn sweep_constant_similarity() {
        let rs: Vec<_> = (0..4).map(|i| rec(&i.to_string(), "x", "y", Some(0.85))).collect();
        let rates = threshold_sweep(&rs, &SWEEP_THRESHOLDS).unwrap();
        assert_eq!(rates, vec![(0.70, 1.0), (0.80, 1.0), (0.90, 0.0)]);
        assert!(threshold_sweep(&[], &SWEEP_THRESHOLDS).is_err());
    }

    #[test]
    fn precomputed_keys() {
        let mut enc = PrecomputedEncoder::default();
        enc.insert("s1", vec![1.0, 0.0]);
        enc.insert("s1/omit_action", vec![1.0, 1.0]);
        let r = score(&rec("s1", "a", "b", None), &enc).unwrap();
        assert!((r.similarity.unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(score(&rec("s2", "a", "b", None), &enc).is_err());
    }

    #[test]
    fn summary_mean_median() {
        let rs = vec![
            rec("a", "x", "y", Some(0.9)),
            rec("b", "x", "y", Some(1.2)),
            rec("c", "x", "y", Some(0.6)),
        ];
        let s = summarize(&rs);
        assert_eq!(s.len(), 1);
        assert!((s[0].median - 0.9).abs() < 1e-12);
        assert!((s[0].mean - (0.9 + 1.0 + 0.6) / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sweep_matches_brute_force_and_is_monotone(
            sims in proptest::collection::vec(0.0f64..1.0, 1..200),
            mut ts in proptest::collection::vec(0.0f64..1.0, 1..8),
        ) {
            ts.sort_by(f64::total_cmp);
            let rs: Vec<_> = sims.iter().enumerate().map(|(i, s)| rec(&i.to_string(), "x", "y", Some(*s))).collect();
            let rates = threshold_sweep(&rs, &ts).unwrap();
            for (t, rate) in &rates {
                let mut count = 0;
                for s in &sims {
                    if s > t {
                        count += 1;
                    }
                }
                prop_assert_eq!(*rate, count as f64 / sims.len() as f64);
            }
            for w in rates.windows(2) {
                prop_assert!(w[1].1 <= w[0].1);
            }
            let g = gate(&rs, &GateConfig { threshold: ts[0] }).unwrap();
            prop_assert_eq!(g.passed.len() + g.failed.len(), rs.len());
        }
    }
}
