//! Size-preserving augmentation and the experiment matrix.
//!
//! Augmentation replaces the intents of a fraction `p` of a split with gated
//! perturbed intents; the split keeps its size and its snippets. The samples
//! chosen for a given seed form a prefix of one shuffled order, so the 25%
//! selection is contained in the 50% one, which is contained in the 100% one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::corpus::{save_corpus, Corpus, Format};
use crate::error::{Error, Result};
use crate::manifest::{relative, sha256_file, sha256_hex, CellEntry, Manifest};
use crate::perturb::{GateVerdict, PerturbationKind, PerturbationRecord};
use crate::preprocess::{is_punctuation, tokenize, Stopwords};
use crate::seed::{derived_rng, round_count};

/// A single perturbation kind or one of the two kind families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KindSelector {
    Single(PerturbationKind),
    /// Constrained substitution.
    Substitution,
    /// Any of the three omission categories, chosen per sample.
    Omission,
}

impl KindSelector {
    pub fn kinds(self) -> Vec<PerturbationKind> {
        match self {
            KindSelector::Single(kind) => vec![kind],
            KindSelector::Substitution => vec![PerturbationKind::SubstConstrained],
            KindSelector::Omission => vec![
                PerturbationKind::OmitAction,
                PerturbationKind::OmitStructure,
                PerturbationKind::OmitName,
            ],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            KindSelector::Single(kind) => kind.as_str(),
            KindSelector::Substitution => "substitution",
            KindSelector::Omission => "omission",
        }
    }
}

impl fmt::Display for KindSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for KindSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "substitution" => Ok(KindSelector::Substitution),
            "omission" => Ok(KindSelector::Omission),
            other => other.parse().map(KindSelector::Single),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentPlan {
    pub ratio_p: f64,
    pub selector: KindSelector,
    pub seed: u64,
    pub apply_to_validation: bool,
}

impl AugmentPlan {
    pub fn new(ratio_p: f64, selector: KindSelector, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ratio_p) {
            return Err(Error::InvalidConfig(format!(
                "augmentation ratio must be in [0, 1], got {ratio_p}"
            )));
        }
        Ok(AugmentPlan {
            ratio_p,
            selector,
            seed,
            apply_to_validation: true,
        })
    }
}

/// Passing records of the selector's kinds, grouped by sample id in kind order.
fn passing_by_id(
    records: &[PerturbationRecord],
    selector: KindSelector,
) -> BTreeMap<&str, Vec<&PerturbationRecord>> {
    let kinds = selector.kinds();
    let mut by_id: BTreeMap<&str, Vec<&PerturbationRecord>> = BTreeMap::new();
    for r in records {
        if r.gate_pass == GateVerdict::Pass && kinds.contains(&r.kind) {
            by_id.entry(r.sample_id.as_str()).or_default().push(r);
        }
    }
    for list in by_id.values_mut() {
        list.sort_by_key(|r| r.kind);
        list.dedup_by_key(|r| r.kind);
    }
    by_id
}

/// Ids of `split` that have a passing record for `selector`.
pub fn covered_ids(split: &Corpus, records: &[PerturbationRecord], selector: KindSelector) -> BTreeSet<String> {
    let by_id = passing_by_id(records, selector);
    split
        .ids()
        .filter(|id| by_id.contains_key(id))
        .map(str::to_string)
        .collect()
}

/// Replace exactly `round(p·N)` intents of `split` with perturbed ones.
pub fn augment_split(split: &Corpus, records: &[PerturbationRecord], plan: &AugmentPlan) -> Result<Corpus> {
    if !(0.0..=1.0).contains(&plan.ratio_p) {
        return Err(Error::InvalidConfig(format!(
            "augmentation ratio must be in [0, 1], got {}",
            plan.ratio_p
        )));
    }
    let needed = round_count(plan.ratio_p, split.len());
    let by_id = passing_by_id(records, plan.selector);
    let mut covered: Vec<&str> = split.ids().filter(|id| by_id.contains_key(id)).collect();
    if covered.len() < needed {
        return Err(Error::InsufficientCoverage {
            needed,
            available: covered.len(),
        });
    }
    // The order depends on the seed and family only, never on p or the
    // corpus name, so split files augmented one by one match the matrix.
    covered.sort_unstable();
    let label = plan.selector.label();
    covered.shuffle(&mut derived_rng(plan.seed, &["augment", label]));

    let mut out = split.clone();
    for id in &covered[..needed] {
        let options = &by_id[id];
        let pick = if options.len() == 1 {
            0
        } else {
            derived_rng(plan.seed, &["augment-kind", label, id]).gen_range(0..options.len())
        };
        out.set_intent(id, options[pick].perturbed.clone());
    }
    Ok(out)
}

/// Number of distinct lowercase non-stopword words in each variant.
pub fn vocab_growth(variants: &[Corpus], stopwords: &Stopwords) -> Vec<usize> {
    variants
        .iter()
        .map(|corpus| {
            corpus
                .iter()
                .flat_map(|s| tokenize(&s.intent).tokens)
                .filter(|t| !is_punctuation(t) && !stopwords.contains(t))
                .map(|t| t.to_lowercase())
                .collect::<BTreeSet<_>>()
                .len()
        })
        .collect()
}

/// Training ratios of the robustness-improvement experiments.
pub const TRAIN_RATIOS: [f64; 4] = [0.0, 0.25, 0.5, 1.0];

/// One experiment: a kind family at a training and a test perturbation ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentCell {
    pub selector: KindSelector,
    pub train_p: f64,
    pub test_p: f64,
}

impl ExperimentCell {
    pub fn dir_name(&self) -> String {
        format!(
            "train{:03}_test{:03}",
            (self.train_p * 100.0).round() as u32,
            (self.test_p * 100.0).round() as u32
        )
    }
}

/// Deduplicated cells for one family: baseline on clean and perturbed tests,
/// every training ratio against a perturbed test, and 50% against a clean test.
pub fn plan_cells(selector: KindSelector, ratios: &[f64]) -> Vec<ExperimentCell> {
    let allowed = |p: f64| ratios.iter().any(|&r| (r - p).abs() < 1e-12);
    let mut pairs: Vec<(f64, f64)> = vec![(0.0, 0.0), (0.0, 1.0)];
    pairs.extend(TRAIN_RATIOS.iter().map(|&p| (p, 1.0)));
    pairs.extend([(0.0, 0.0), (0.5, 0.0)]);
    let mut cells: Vec<ExperimentCell> = Vec::new();
    for (train_p, test_p) in pairs {
        if !allowed(train_p) {
            continue;
        }
        let cell = ExperimentCell {
            selector,
            train_p,
            test_p,
        };
        if !cells.contains(&cell) {
            cells.push(cell);
        }
    }
    cells
}

#[derive(Clone, Debug)]
pub struct MatrixSpec {
    pub families: Vec<KindSelector>,
    pub ratios: Vec<f64>,
    pub seed: u64,
    pub apply_to_validation: bool,
    /// Restrict each family's splits to samples that have a passing record, so
    /// fully perturbed splits exist and baselines compare like with like.
    pub restrict_to_covered: bool,
}

impl MatrixSpec {
    pub fn new(families: Vec<KindSelector>, seed: u64) -> Self {
        MatrixSpec {
            families,
            ratios: TRAIN_RATIOS.to_vec(),
            seed,
            apply_to_validation: true,
            restrict_to_covered: true,
        }
    }
}

/// The train, validation and test splits with their gated records.
pub struct Splits<'a> {
    pub train: &'a Corpus,
    pub val: &'a Corpus,
    pub test: &'a Corpus,
    pub records: &'a [PerturbationRecord],
}

fn write_cell(
    root: &Path,
    cell: &ExperimentCell,
    splits: &[Corpus; 3],
    records: &[PerturbationRecord],
    spec: &MatrixSpec,
) -> Result<CellEntry> {
    let dir = root.join(cell.selector.label()).join(cell.dir_name());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let plan = |p: f64| AugmentPlan {
        ratio_p: p,
        selector: cell.selector,
        seed: spec.seed,
        apply_to_validation: spec.apply_to_validation,
    };
    let val_p = if spec.apply_to_validation { cell.train_p } else { 0.0 };
    let outputs = [
        ("train.jsonl", augment_split(&splits[0], records, &plan(cell.train_p))?),
        ("val.jsonl", augment_split(&splits[1], records, &plan(val_p))?),
        ("test.jsonl", augment_split(&splits[2], records, &plan(cell.test_p))?),
    ];
    let mut paths = Vec::new();
    let mut digests = String::new();
    for (name, corpus) in &outputs {
        let path = dir.join(name);
        save_corpus(corpus, &path, Format::Jsonl)?;
        digests.push_str(&sha256_file(&path)?);
        paths.push(relative(root, &path));
    }
    Ok(CellEntry {
        kind: cell.selector.label().to_string(),
        train_p: cell.train_p,
        test_p: cell.test_p,
        seed: spec.seed,
        train: paths[0].clone(),
        val: paths[1].clone(),
        test: paths[2].clone(),
        digest: sha256_hex(digests.as_bytes()),
    })
}

/// Materialize every cell under `out_dir` and return the unsealed manifest.
///
/// Cells are written in parallel, each by a single worker into its own
/// directory; the manifest lists them in plan order.
pub fn build_matrix(splits: &Splits<'_>, spec: &MatrixSpec, out_dir: &Path) -> Result<Manifest> {
    if spec.families.is_empty() {
        return Err(Error::InvalidConfig("no perturbation family selected".into()));
    }
    let mut jobs = Vec::new();
    for &family in &spec.families {
        let has_any = splits
            .records
            .iter()
            .any(|r| r.gate_pass == GateVerdict::Pass && family.kinds().contains(&r.kind));
        if !has_any {
            return Err(Error::MissingRecords(format!("no passing records for {family}")));
        }
        let restrict = |c: &Corpus| {
            if spec.restrict_to_covered {
                let keep = covered_ids(c, splits.records, family);
                c.retain_ids(c.name.clone(), |id| keep.contains(id))
            } else {
                c.clone()
            }
        };
        let family_splits = [restrict(splits.train), restrict(splits.val), restrict(splits.test)];
        for cell in plan_cells(family, &spec.ratios) {
            jobs.push((cell, family_splits.clone()));
        }
    }
    let entries = jobs
        .par_iter()
        .map(|(cell, family_splits)| write_cell(out_dir, cell, family_splits, splits.records, spec))
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = Manifest::new("matrix", spec.seed);
    for entry in &entries {
        for rel in [&entry.train, &entry.val, &entry.test] {
            manifest.add_file(out_dir, &out_dir.join(rel))?;
        }
    }
    manifest.cells = entries;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;
    use proptest::prelude::*;

    fn corpus(n: usize) -> Corpus {
        Corpus::from_samples(
            "train",
            (0..n)
                .map(|i| Sample::new(format!("s{i:04}"), format!("move value {i} into eax"), "mov eax, 1"))
                .collect(),
        )
        .unwrap()
    }

    fn record(id: &str, kind: PerturbationKind, perturbed: &str) -> PerturbationRecord {
        PerturbationRecord {
            sample_id: id.into(),
            kind,
            original: String::new(),
            perturbed: perturbed.into(),
            changed_positions: vec![0],
            similarity: Some(0.9),
            gate_pass: GateVerdict::Pass,
        }
    }

    fn subst_records(c: &Corpus) -> Vec<PerturbationRecord> {
        c.iter()
            .map(|s| record(&s.id, PerturbationKind::SubstConstrained, &format!("shift {}", s.id)))
            .collect()
    }

    fn changed(a: &Corpus, b: &Corpus) -> BTreeSet<String> {
        a.iter()
            .zip(b.iter())
            .filter(|(x, y)| x.intent != y.intent)
            .map(|(x, _)| x.id.clone())
            .collect()
    }

    #[test]
    fn half_of_full_size_train_split() {
        let c = corpus(4720);
        let recs = subst_records(&c);
        let out = augment_split(&c, &recs, &AugmentPlan::new(0.5, KindSelector::Substitution, 3).unwrap()).unwrap();
        assert_eq!(out.len(), 4720);
        assert_eq!(changed(&c, &out).len(), 2360);
    }

    #[test]
    fn zero_and_full() {
        let c = corpus(40);
        let recs = subst_records(&c);
        let zero = augment_split(&c, &recs, &AugmentPlan::new(0.0, KindSelector::Substitution, 1).unwrap()).unwrap();
        assert_eq!(zero, c);
        let full = augment_split(&c, &recs, &AugmentPlan::new(1.0, KindSelector::Substitution, 1).unwrap()).unwrap();
        assert!(full.iter().all(|s| s.intent.starts_with("shift ")));
    }

    #[test]
    fn selections_nest() {
        let c = corpus(200);
        let recs = subst_records(&c);
        let sets: Vec<_> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&p| {
                let plan = AugmentPlan::new(p, KindSelector::Substitution, 9).unwrap();
                changed(&c, &augment_split(&c, &recs, &plan).unwrap())
            })
            .collect();
        assert!(sets[0].is_subset(&sets[1]) && sets[1].is_subset(&sets[2]));
    }

    #[test]
    fn coverage_shortfall_and_failing_records() {
        let c = corpus(10);
        let mut recs = subst_records(&c);
        for r in recs.iter_mut().skip(3) {
            r.gate_pass = GateVerdict::Fail;
        }
        let plan = AugmentPlan::new(0.5, KindSelector::Substitution, 1).unwrap();
        match augment_split(&c, &recs, &plan) {
            Err(Error::InsufficientCoverage { needed, available }) => assert_eq!((needed, available), (5, 3)),
            other => panic!("{other:?}"),
        }
        assert!(AugmentPlan::new(1.5, KindSelector::Substitution, 1).is_err());
    }

    #[test]
    fn omission_family_picks_available_categories() {
        let c = corpus(300);
        let mut recs = Vec::new();
        for (i, s) in c.iter().enumerate() {
            recs.push(record(&s.id, PerturbationKind::OmitAction, "A"));
            if i % 2 == 0 {
                recs.push(record(&s.id, PerturbationKind::OmitName, "N"));
            }
        }
        let plan = AugmentPlan::new(1.0, KindSelector::Omission, 5).unwrap();
        let out = augment_split(&c, &recs, &plan).unwrap();
        let odd_intents: BTreeSet<_> = out.iter().skip(1).step_by(2).map(|s| s.intent.as_str()).collect();
        assert_eq!(odd_intents, BTreeSet::from(["A"]));
        let even_n = out.iter().step_by(2).filter(|s| s.intent == "N").count();
        // uniform choice between two categories over 150 samples
        assert!((45..=105).contains(&even_n), "{even_n}");
    }

    #[test]
    fn growth_is_bounded_by_replaced_count() {
        let stop = Stopwords::default_english();
        let c = corpus(50);
        let recs = subst_records(&c);
        let plan = AugmentPlan::new(0.2, KindSelector::Substitution, 2).unwrap();
        let out = augment_split(&c, &recs, &plan).unwrap();
        let counts = vocab_growth(&[c.clone(), c.clone(), out.clone()], &stop);
        assert_eq!(counts[0], counts[1]);
        // set-union oracle over lowercase words
        let words = |corpus: &Corpus| -> BTreeSet<String> {
            corpus
                .iter()
                .flat_map(|s| s.intent.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
                .filter(|w| !stop.contains(w))
                .collect()
        };
        assert_eq!(counts[2], words(&out).len());
        assert!(counts[2] <= counts[0] + 10 + 1);
    }

    #[test]
    fn cell_inventory() {
        let cells = plan_cells(KindSelector::Substitution, &TRAIN_RATIOS);
        let pairs: Vec<_> = cells.iter().map(|c| (c.train_p, c.test_p)).collect();
        assert_eq!(pairs, vec![(0.0, 0.0), (0.0, 1.0), (0.25, 1.0), (0.5, 1.0), (1.0, 1.0), (0.5, 0.0)]);
        let baseline = plan_cells(KindSelector::Omission, &[0.0]);
        assert_eq!(baseline.len(), 2);
        assert!(baseline.iter().all(|c| c.train_p == 0.0));
        assert_eq!(cells[2].dir_name(), "train025_test100");
    }

    #[test]
    fn matrix_is_reproducible() {
        let all = corpus(60);
        let train = all.retain_ids("train", |id| id < "s0040");
        let val = all.retain_ids("val", |id| ("s0040".."s0050").contains(&id));
        let test = all.retain_ids("test", |id| id >= "s0050");
        let mut recs = subst_records(&all);
        recs.extend(all.iter().filter(|s| s.id.ends_with('1')).map(|s| record(&s.id, PerturbationKind::OmitName, "gone")));
        let splits = Splits { train: &train, val: &val, test: &test, records: &recs };
        let spec = MatrixSpec::new(vec![KindSelector::Substitution, KindSelector::Omission], 11);
        let run = || {
            let dir = tempfile::tempdir().unwrap();
            let mut m = build_matrix(&splits, &spec, dir.path()).unwrap();
            m.seal().unwrap();
            (m, dir)
        };
        let (m1, d1) = run();
        let (m2, _d2) = run();
        assert_eq!(m1.digest, m2.digest);
        assert_eq!(m1.cells.len(), 12);
        assert_eq!(m1.files.len(), 36);
        // omission splits only keep covered samples
        let omit_test = crate::corpus::load_corpus(&d1.path().join("omission/train000_test100/test.jsonl"), Format::Jsonl).unwrap();
        assert_eq!(omit_test.len(), 1);
        assert!(omit_test.iter().all(|s| s.intent == "gone"));

        let none = Splits { train: &train, val: &val, test: &test, records: &[] };
        assert!(matches!(
            build_matrix(&none, &spec, tempfile::tempdir().unwrap().path()),
            Err(Error::MissingRecords(_))
        ));
    }

    proptest! {
        #[test]
        fn size_count_and_snippets(n in 1usize..120, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let c = corpus(n);
            let recs = subst_records(&c);
            let out = augment_split(&c, &recs, &AugmentPlan::new(p, KindSelector::Substitution, seed).unwrap()).unwrap();
            prop_assert_eq!(out.len(), c.len());
            prop_assert_eq!(changed(&c, &out).len(), round_count(p, n));
            for (a, b) in c.iter().zip(out.iter()) {
                prop_assert_eq!(&a.snippet, &b.snippet);
                prop_assert_eq!(&a.id, &b.id);
            }
        }
    }
}
