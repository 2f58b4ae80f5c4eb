//! Mine structure and name words by comparing the corpus intents with
//! general-English prose.
//!
//! cargo run --example mine_vocabulary [corpus.jsonl] [comparison.txt]

use std::path::PathBuf;

use perturbe::corpus::{load_corpus, Format};
use perturbe::pipeline::{mine_vocabulary, SHIPPED_COMPARISON};
use perturbe::preprocess::Stopwords;
use perturbe::vocab::{RegisterList, DEFAULT_RATIO_THRESHOLD};

fn main() -> perturbe::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/shellcode.jsonl"));
    let comparison = match args.next() {
        Some(p) => std::fs::read_to_string(&p).map_err(|e| perturbe::Error::io(p, e))?,
        None => SHIPPED_COMPARISON.to_string(),
    };
    let corpus = load_corpus(&path, Format::from_path(&path))?;
    let vocab = mine_vocabulary(
        &corpus,
        &comparison,
        DEFAULT_RATIO_THRESHOLD,
        &Stopwords::default_english(),
        &RegisterList::default(),
    )?;
    println!("{} structure words:", vocab.structure_words.len());
    println!("  {}", vocab.structure_words.iter().cloned().collect::<Vec<_>>().join(" "));
    println!("{} name words:", vocab.name_words.len());
    println!("  {}", vocab.name_words.iter().cloned().collect::<Vec<_>>().join(" "));
    Ok(())
}
