//! Score perturbed intents with the mean-of-word-vectors encoder, gate them
//! at 0.8 and sweep the threshold.

use std::path::PathBuf;

use perturbe::corpus::{load_corpus, Format};
use perturbe::embedding::load_vectors;
use perturbe::pipeline::{mine_vocabulary, perturb_kinds, score_and_gate, SHIPPED_COMPARISON};
use perturbe::perturb::{PerturbationKind, Perturber, SubstitutionConfig};
use perturbe::postag::{Lexicon, LexiconTagger};
use perturbe::preprocess::Stopwords;
use perturbe::semgate::{summarize, sweep_by_kind, GateConfig, MeanEncoder, SWEEP_THRESHOLDS};
use perturbe::vocab::{RegisterList, DEFAULT_RATIO_THRESHOLD};

fn main() -> perturbe::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let corpus = load_corpus(&fixtures.join("shellcode.jsonl"), Format::Jsonl)?;
    let store = load_vectors(&fixtures.join("shellcode_vectors.txt"))?;
    let stopwords = Stopwords::default_english();
    let registers = RegisterList::default();
    let vocab = mine_vocabulary(&corpus, SHIPPED_COMPARISON, DEFAULT_RATIO_THRESHOLD, &stopwords, &registers)?;
    let tagger = LexiconTagger::new(Lexicon::shipped(), registers).with_vocabulary(&vocab);
    let perturber = Perturber::new(&vocab, &stopwords, &tagger).with_store(&store);

    let kinds = [
        PerturbationKind::SubstConstrained,
        PerturbationKind::OmitAction,
        PerturbationKind::OmitStructure,
        PerturbationKind::OmitName,
    ];
    let cfg = SubstitutionConfig::constrained(42);
    let (records, skipped) = perturb_kinds(&perturber, &corpus, &kinds, &cfg, &SubstitutionConfig::unconstrained(42))?;
    println!("{} records, {} skipped", records.len(), skipped.len());

    let gated = score_and_gate(&records, &MeanEncoder::new(&store), &GateConfig::default())?;
    println!(
        "passed {} / failed {} / unevaluable {}",
        gated.passed.len(),
        gated.failed.len(),
        gated.unevaluable.len()
    );
    for s in summarize(&gated.scored()) {
        println!("{:<18} n={:<4} mean={:.3} median={:.3}", s.kind.to_string(), s.count, s.mean, s.median);
    }
    for (t, kind, rate) in sweep_by_kind(&gated.scored(), &SWEEP_THRESHOLDS)? {
        println!("threshold {t:.2} {kind:<18} pass rate {rate:.3}");
    }
    if let Some(r) = gated.passed.first() {
        println!("\nexample: {:?}\n      -> {:?} ({:.3})", r.original, r.perturbed, r.similarity.unwrap_or(0.0));
    }
    Ok(())
}
