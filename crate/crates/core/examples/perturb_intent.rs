//! Constrained substitution and the three omission categories on one intent.

use std::path::PathBuf;

use perturbe::embedding::load_vectors;
use perturbe::perturb::{OmissionCategory, Perturber, SubstitutionConfig};
use perturbe::postag::{Lexicon, LexiconTagger};
use perturbe::preprocess::Stopwords;
use perturbe::seed::derived_rng;
use perturbe::vocab::{RegisterList, Vocabulary};

fn main() -> perturbe::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let store = load_vectors(&fixtures.join("table_vectors.txt"))?;
    let vocab = Vocabulary::load(&fixtures.join("table_vocab.json"))?;
    let stopwords = Stopwords::default_english();
    let tagger = LexiconTagger::new(Lexicon::shipped(), RegisterList::default()).with_vocabulary(&vocab);
    let perturber = Perturber::new(&vocab, &stopwords, &tagger).with_store(&store);

    let intent = "Store the pointer to shellcode in the ESI register";
    println!("original:     {intent}");

    let cfg = SubstitutionConfig::constrained(7);
    let mut rng = derived_rng(cfg.seed, &["example"]);
    match perturber.substitute("ex1", intent, &cfg, &mut rng)? {
        Ok(r) => println!("substitution: {}", r.perturbed),
        Err(why) => println!("substitution: skipped ({why})"),
    }
    for category in OmissionCategory::ALL {
        match perturber.omit("ex1", intent, category) {
            Ok(r) => println!("{:<13} {}", format!("{}:", r.kind), r.perturbed),
            Err(why) => println!("{:<13} skipped ({why})", format!("{category:?}:")),
        }
    }
    Ok(())
}
