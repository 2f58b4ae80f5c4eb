//! TOML pipeline configuration.
//!
//! Relative paths are resolved against the directory of the config file. The
//! seed has no default: every run must state it.
//!
//! ```toml
//! seed = 42
//! output = "out"
//!
//! [paths]
//! corpus = "corpus.jsonl"
//! vectors = "vectors.txt"
//!
//! [augment]
//! families = ["substitution", "omission"]
//! ratios = [0.0, 0.25, 0.5, 1.0]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::augment::{KindSelector, MatrixSpec, TRAIN_RATIOS};
use crate::corpus::SplitSpec;
use crate::error::{Error, Result};
use crate::manifest::sha256_hex;
use crate::metrics::syntax::{SyntaxChecker, GAS_TEMPLATE};
use crate::perturb::SubstitutionConfig;
use crate::semgate::{GateConfig, DEFAULT_THRESHOLD, SWEEP_THRESHOLDS};
use crate::vocab::DEFAULT_RATIO_THRESHOLD;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    /// Word vectors; needed for substitution and for the default gate encoder.
    pub vectors: Option<PathBuf>,
    /// General-English text for vocabulary mining; a shipped text otherwise.
    pub comparison: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub patterns: Option<PathBuf>,
    pub registers: Option<PathBuf>,
    /// A prebuilt vocabulary, skipping the mining step.
    pub vocabulary: Option<PathBuf>,
    /// JSONL part-of-speech tags that override the built-in tagger.
    pub tags: Option<PathBuf>,
    /// JSONL sentence embeddings that replace the mean-of-word-vectors encoder.
    pub embeddings: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubstitutionSection {
    pub ratio: f64,
    pub k: usize,
    pub tau: f64,
    /// Neighborhood size of the unconstrained variant.
    pub unconstrained_k: usize,
}

impl Default for SubstitutionSection {
    fn default() -> Self {
        let c = SubstitutionConfig::constrained(0);
        SubstitutionSection {
            ratio: c.ratio,
            k: c.k,
            tau: c.tau,
            unconstrained_k: SubstitutionConfig::unconstrained(0).k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSection {
    pub threshold: f64,
    pub sweep: Vec<f64>,
}

impl Default for GateSection {
    fn default() -> Self {
        GateSection {
            threshold: DEFAULT_THRESHOLD,
            sweep: SWEEP_THRESHOLDS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub families: Vec<String>,
    pub ratios: Vec<f64>,
    pub apply_to_validation: bool,
    pub restrict_to_covered: bool,
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection {
            families: vec!["substitution".into(), "omission".into()],
            ratios: TRAIN_RATIOS.to_vec(),
            apply_to_validation: true,
            restrict_to_covered: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckerSection {
    pub template: String,
    pub timeout_secs: f64,
}

impl Default for CheckerSection {
    fn default() -> Self {
        CheckerSection {
            template: GAS_TEMPLATE.into(),
            timeout_secs: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output: PathBuf,
    pub paths: Paths,
    #[serde(default)]
    pub vocab_threshold: Option<f64>,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub substitution: SubstitutionSection,
    #[serde(default)]
    pub gate: GateSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub checker: CheckerSection,
    /// SHA-256 of the config text, filled by [`PipelineConfig::load`].
    #[serde(skip)]
    pub digest: String,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.digest = sha256_hex(text.as_bytes());
        resolve(base, &mut cfg.output);
        let p = &mut cfg.paths;
        resolve(base, &mut p.corpus);
        for path in [
            &mut p.vectors,
            &mut p.comparison,
            &mut p.stopwords,
            &mut p.patterns,
            &mut p.registers,
            &mut p.vocabulary,
            &mut p.tags,
            &mut p.embeddings,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, path);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = PipelineConfig::parse(&text, base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check value ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        self.split_spec()?;
        self.substitution(false).validate()?;
        self.substitution(true).validate()?;
        self.gate_config()?;
        self.families()?;
        if self.augment.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidConfig("augment ratios must be in [0, 1]".into()));
        }
        if self.checker.timeout_secs <= 0.0 {
            return Err(Error::InvalidConfig("checker timeout must be positive".into()));
        }
        if self.paths.vectors.is_none() && self.paths.embeddings.is_none() {
            return Err(Error::InvalidConfig(
                "either paths.vectors or paths.embeddings is needed for the gate".into(),
            ));
        }
        let p = &self.paths;
        let inputs = [
            Some(&p.corpus),
            p.vectors.as_ref(),
            p.comparison.as_ref(),
            p.stopwords.as_ref(),
            p.patterns.as_ref(),
            p.registers.as_ref(),
            p.vocabulary.as_ref(),
            p.tags.as_ref(),
            p.embeddings.as_ref(),
        ];
        for path in inputs.into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::InvalidConfig(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(self.split.train, self.split.val, self.split.test, self.seed)
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn substitution(&self, unconstrained: bool) -> SubstitutionConfig {
        let s = &self.substitution;
        if unconstrained {
            SubstitutionConfig {
                ratio: s.ratio,
                k: s.unconstrained_k,
                ..SubstitutionConfig::unconstrained(self.seed)
            }
        } else {
            SubstitutionConfig {
                ratio: s.ratio,
                k: s.k,
                tau: s.tau,
                ..SubstitutionConfig::constrained(self.seed)
            }
        }
    }

    pub fn gate_config(&self) -> Result<GateConfig> {
        GateConfig::new(self.gate.threshold)
    }

    pub fn vocab_threshold(&self) -> f64 {
        self.vocab_threshold.unwrap_or(DEFAULT_RATIO_THRESHOLD)
    }

    pub fn families(&self) -> Result<Vec<KindSelector>> {
        if self.augment.families.is_empty() {
            return Err(Error::InvalidConfig("augment.families is empty".into()));
        }
        self.augment
            .families
            .iter()
            .map(|f| f.parse().map_err(|_| Error::InvalidConfig(format!("unknown family {f:?}"))))
            .collect()
    }

    pub fn matrix_spec(&self) -> Result<MatrixSpec> {
        Ok(MatrixSpec {
            families: self.families()?,
            ratios: self.augment.ratios.clone(),
            seed: self.seed,
            apply_to_validation: self.augment.apply_to_validation,
            restrict_to_covered: self.augment.restrict_to_covered,
        })
    }

    pub fn checker(&self) -> Result<SyntaxChecker> {
        Ok(SyntaxChecker::for_template(&self.checker.template)?
            .with_timeout(std::time::Duration::from_secs_f64(self.checker.timeout_secs)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "seed = 7\noutput = \"out\"\n[paths]\ncorpus = \"c.jsonl\"\nvectors = \"v.txt\"\n";

    #[test]
    fn defaults_and_resolution() {
        let cfg = PipelineConfig::parse(MINIMAL, Path::new("/work")).unwrap();
        assert_eq!(cfg.output, PathBuf::from("/work/out"));
        assert_eq!(cfg.paths.corpus, PathBuf::from("/work/c.jsonl"));
        assert_eq!(cfg.split_spec().unwrap().sizes(5900), (4720, 590, 590));
        assert_eq!(cfg.substitution(false).k, 20);
        assert_eq!(cfg.substitution(true).k, 50);
        assert!(!cfg.substitution(true).use_constraints);
        assert_eq!(cfg.gate_config().unwrap().threshold, 0.8);
        assert_eq!(cfg.families().unwrap(), vec![KindSelector::Substitution, KindSelector::Omission]);
        assert_eq!(cfg.digest.len(), 64);
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("seed = 7\n", "");
        assert!(matches!(PipelineConfig::parse(&text, Path::new(".")), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn validation_catches_bad_values_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::parse(MINIMAL, dir.path()).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(m)) if m.contains("does not exist")));

        let bad = format!("{MINIMAL}[split]\ntrain = 0.9\nval = 0.1\ntest = 0.1\n");
        let cfg = PipelineConfig::parse(&bad, dir.path()).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);

        let unknown = format!("{MINIMAL}[augment]\nfamilies = [\"shuffle\"]\n");
        let cfg = PipelineConfig::parse(&unknown, dir.path()).unwrap();
        assert!(cfg.families().is_err());

        assert!(PipelineConfig::parse("seed = 1\noutput = \"o\"\nbogus = 1\n[paths]\ncorpus = \"c\"\n", dir.path()).is_err());
    }
}
