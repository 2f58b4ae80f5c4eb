//! Intent/snippet datasets: loading, validation, seeded splitting and saving.
//!
//! JSONL is the canonical on-disk format, one `{"id", "intent", "snippet"}`
//! object per line. CSV files must carry an `id,intent,snippet` header. Multi
//! line snippets keep the two-character `\n` separator of the source data.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derived_rng, round_count};

/// Instruction separator inside a snippet: a backslash followed by `n`.
pub const LINE_SEPARATOR: &str = "\\n";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub intent: String,
    pub snippet: String,
    pub multi_line: bool,
}

impl Sample {
    pub fn new(
        id: impl Into<String>,
        intent: impl Into<String>,
        snippet: impl Into<String>,
    ) -> Self {
        let snippet = snippet.into();
        Sample {
            id: id.into(),
            intent: intent.into(),
            multi_line: snippet.contains(LINE_SEPARATOR),
            snippet,
        }
    }

    /// Snippet instructions, split on the separator and trimmed.
    pub fn instructions(&self) -> impl Iterator<Item = &str> {
        self.snippet
            .split(LINE_SEPARATOR)
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }
}

/// An ordered, id-unique collection of samples.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub name: String,
    samples: Vec<Sample>,
    index: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
    }
}

impl Corpus {
    pub fn new(name: impl Into<String>) -> Self {
        Corpus {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn from_samples(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let mut corpus = Corpus::new(name);
        for sample in samples {
            corpus.push(sample)?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        if self.index.contains_key(&sample.id) {
            return Err(Error::DuplicateId(sample.id));
        }
        self.index.insert(sample.id.clone(), self.samples.len());
        self.samples.push(sample);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.index.get(id).map(|&i| &self.samples[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    /// Replace the intent of `id`, keeping the snippet untouched.
    pub(crate) fn set_intent(&mut self, id: &str, intent: String) -> bool {
        match self.index.get(id) {
            Some(&i) => {
                self.samples[i].intent = intent;
                true
            }
            None => false,
        }
    }

    /// Keep only samples whose id satisfies `keep`, preserving order.
    pub fn retain_ids(&self, name: impl Into<String>, keep: impl Fn(&str) -> bool) -> Corpus {
        let samples = self
            .samples
            .iter()
            .filter(|s| keep(&s.id))
            .cloned()
            .collect();
        // ids are already unique
        Corpus::from_samples(name, samples).expect("subset of a valid corpus")
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    /// Guess from the file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Jsonl,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct Record {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    intent: String,
    snippet: String,
}

fn synthesized_id(row: usize) -> String {
    format!("{row:06}")
}

fn validate(record: Record, row: usize, line: usize) -> Result<Sample> {
    if record.intent.trim().is_empty() {
        return Err(Error::EmptyField {
            line,
            field: "intent",
        });
    }
    if record.snippet.trim().is_empty() {
        return Err(Error::EmptyField {
            line,
            field: "snippet",
        });
    }
    let id = match record.id {
        Some(id) if !id.trim().is_empty() => id,
        _ => synthesized_id(row),
    };
    Ok(Sample::new(id, record.intent, record.snippet))
}

pub fn load_corpus(path: &Path, format: Format) -> Result<Corpus> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = Corpus::new(name);
    match format {
        Format::Jsonl => {
            let mut row = 0;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                corpus.push(validate(record, row, i + 1)?)?;
                row += 1;
            }
        }
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
            let headers = reader.headers()?.clone();
            for required in ["intent", "snippet"] {
                if !headers.iter().any(|h| h == required) {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: 1,
                        message: format!("missing column {required:?}"),
                    });
                }
            }
            for (row, result) in reader.deserialize::<Record>().enumerate() {
                let line = row + 2;
                let record = result.map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                })?;
                corpus.push(validate(record, row, line)?)?;
            }
        }
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        Format::Jsonl => {
            for s in corpus {
                let record = Record {
                    id: Some(s.id.clone()),
                    intent: s.intent.clone(),
                    snippet: s.snippet.clone(),
                };
                serde_json::to_writer(&mut out, &record)?;
                out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
        }
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(&mut out);
            writer.write_record(["id", "intent", "snippet"])?;
            for s in corpus {
                writer.write_record([&s.id, &s.intent, &s.snippet])?;
            }
            writer.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_ratio: train,
            val_ratio: val,
            test_ratio: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 80/10/10 split.
    pub fn standard(seed: u64) -> Self {
        SplitSpec {
            train_ratio: 0.8,
            val_ratio: 0.1,
            test_ratio: 0.1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ratios = [self.train_ratio, self.val_ratio, self.test_ratio];
        if ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return Err(Error::InvalidSplit(format!(
                "ratios must lie in (0, 1), got {ratios:?}"
            )));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSplit(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` samples; rounding remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = round_count(self.val_ratio, n).min(n);
        let test = round_count(self.test_ratio, n).min(n - val);
        (n - val - test, val, test)
    }
}

/// Seeded train/validation/test partition.
///
/// Samples are sorted by id before shuffling, so the result depends only on the
/// set of samples and the seed, never on file order.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus, Corpus)> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty corpus"));
    }
    let mut order: Vec<&Sample> = corpus.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    order.shuffle(&mut derived_rng(spec.seed, &["split"]));

    let (n_train, n_val, _) = spec.sizes(order.len());
    let take = |name: &str, part: &[&Sample]| {
        Corpus::from_samples(
            format!("{}.{name}", corpus.name),
            part.iter().map(|s| (*s).clone()).collect(),
        )
    };
    Ok((
        take("train", &order[..n_train])?,
        take("val", &order[n_train..n_train + n_val])?,
        take("test", &order[n_train + n_val..])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn corpus(n: usize) -> Corpus {
        Corpus::from_samples(
            "c",
            (0..n)
                .map(|i| Sample::new(format!("s{i:04}"), format!("intent {i}"), "nop"))
                .collect(),
        )
        .unwrap()
    }

    fn ids(c: &Corpus) -> BTreeSet<String> {
        c.ids().map(String::from).collect()
    }

    #[test]
    fn loads_table_sample() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"s1","intent":"Zero out the EAX and ECX registers.","snippet":"xor ecx, ecx \\n mul ecx"}"#,
        )
        .unwrap();
        let c = load_corpus(&path, Format::Jsonl).unwrap();
        assert_eq!(c.len(), 1);
        let s = c.get("s1").unwrap();
        assert!(s.multi_line);
        assert_eq!(s.snippet, "xor ecx, ecx \\n mul ecx");
        assert_eq!(s.instructions().collect::<Vec<_>>(), ["xor ecx, ecx", "mul ecx"]);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path, Format::Jsonl).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"intent\":\"x\",\"snippet\":\"nop\"}\n{\"id\":\"a\",\"intent\":\"y\",\"snippet\":\"nop\"}\n",
        )
        .unwrap();
        match load_corpus(&path, Format::Jsonl) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"intent\":\"x\",\"snippet\":\"nop\"}\n{not json}\n",
        )
        .unwrap();
        match load_corpus(&path, Format::Jsonl) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        std::fs::write(&path, "{\"id\":\"a\",\"intent\":\"  \",\"snippet\":\"nop\"}\n").unwrap();
        assert!(matches!(
            load_corpus(&path, Format::Jsonl),
            Err(Error::EmptyField { field: "intent", line: 1 })
        ));
        std::fs::write(&path, "{\"id\":\"a\",\"intent\":\"x\",\"snippet\":\"\"}\n").unwrap();
        assert!(matches!(
            load_corpus(&path, Format::Jsonl),
            Err(Error::EmptyField { field: "snippet", .. })
        ));
    }

    #[test]
    fn missing_ids_are_synthesized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("noid.jsonl");
        std::fs::write(
            &path,
            "{\"intent\":\"push eax\",\"snippet\":\"push eax\"}\n{\"intent\":\"pop eax\",\"snippet\":\"pop eax\"}\n",
        )
        .unwrap();
        let c = load_corpus(&path, Format::Jsonl).unwrap();
        assert_eq!(c.ids().collect::<Vec<_>>(), ["000000", "000001"]);
    }

    #[test]
    fn csv_round_trip_with_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let c = Corpus::from_samples(
            "c",
            vec![
                Sample::new("a", "Move \"0x4\", then stop", "mov bl, 0x4 \\n hlt"),
                Sample::new("b", "Zero out EAX", "xor eax, eax"),
            ],
        )
        .unwrap();
        save_corpus(&c, &path, Format::Csv).unwrap();
        assert_eq!(load_corpus(&path, Format::Csv).unwrap(), c);
    }

    #[test]
    fn csv_requires_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nohdr.csv");
        std::fs::write(&path, "a,push eax,push eax\n").unwrap();
        assert!(matches!(load_corpus(&path, Format::Csv), Err(Error::Parse { .. })));
    }

    #[test]
    fn jsonl_round_trip_keeps_separator() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let c = Corpus::from_samples(
            "t",
            vec![
                Sample::new(
                    "1",
                    "Perform the xor between BL register and 0xBB and jump to the label formatting if the result is zero else move the current byte of the shellcode in the CL register.",
                    "xor bl, 0xBB \\n jz formatting \\n mov cl, byte [esi]",
                ),
                Sample::new("2", "Zero out the EAX and ECX registers.", "xor ecx, ecx \\n mul ecx"),
            ],
        )
        .unwrap();
        save_corpus(&c, &path, Format::Jsonl).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains(r#"xor ecx, ecx \\n mul ecx"#));
        assert_eq!(load_corpus(&path, Format::Jsonl).unwrap(), c);
    }

    #[test]
    fn empty_corpus_saves_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        save_corpus(&Corpus::new("e"), &path, Format::Jsonl).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert!(load_corpus(&path, Format::Jsonl).unwrap().is_empty());
    }

    #[test]
    fn split_sizes() {
        let (tr, va, te) = split_corpus(&corpus(10), &SplitSpec::standard(7)).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));
        assert_eq!(SplitSpec::standard(0).sizes(5900), (4720, 590, 590));
        // 0.1 * 15 = 1.5 rounds to 2 for val and test, leaving 11 for train
        assert_eq!(SplitSpec::standard(0).sizes(15), (11, 2, 2));
    }

    #[test]
    fn split_ignores_input_order() {
        let c = corpus(50);
        let mut reversed: Vec<Sample> = c.samples().to_vec();
        reversed.reverse();
        let r = Corpus::from_samples("r", reversed).unwrap();
        let spec = SplitSpec::standard(11);
        let a = split_corpus(&c, &spec).unwrap();
        let b = split_corpus(&r, &spec).unwrap();
        assert_eq!(ids(&a.0), ids(&b.0));
        assert_eq!(ids(&a.1), ids(&b.1));
        assert_eq!(ids(&a.2), ids(&b.2));
    }

    #[test]
    fn split_rejects_bad_ratios_and_empty_corpus() {
        assert!(SplitSpec::new(0.8, 0.1, 0.2, 0).is_err());
        assert!(SplitSpec::new(1.0, 0.0, 0.0, 0).is_err());
        assert!(split_corpus(&Corpus::new("e"), &SplitSpec::standard(1)).is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_is_a_deterministic_partition(n in 1usize..300, seed in proptest::prelude::any::<u64>()) {
            let c = corpus(n);
            let spec = SplitSpec::standard(seed);
            let (tr, va, te) = split_corpus(&c, &spec).unwrap();
            let (tr2, va2, te2) = split_corpus(&c, &spec).unwrap();
            proptest::prop_assert_eq!(&tr, &tr2);
            proptest::prop_assert_eq!(&va, &va2);
            proptest::prop_assert_eq!(&te, &te2);
            let mut all: Vec<String> = tr.ids().chain(va.ids()).chain(te.ids()).map(String::from).collect();
            all.sort();
            let mut expected: Vec<String> = c.ids().map(String::from).collect();
            expected.sort();
            proptest::prop_assert_eq!(all, expected);
        }
    }
}
