//! Load an intent/snippet corpus, split it 80/10/10 and write the splits.
//!
//! cargo run --example split_corpus [corpus.jsonl]

use std::path::PathBuf;

use perturbe::corpus::{load_corpus, save_corpus, split_corpus, Format, SplitSpec};

fn main() -> perturbe::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/shellcode.jsonl"));
    let corpus = load_corpus(&path, Format::from_path(&path))?;
    let multi = corpus.iter().filter(|s| s.multi_line).count();
    let single = corpus.len() - multi;
    println!("{}: {} samples ({single} single-line, {multi} multi-line)", corpus.name, corpus.len());

    let spec = SplitSpec::standard(42);
    let (train, val, test) = split_corpus(&corpus, &spec)?;
    println!("train {} / val {} / test {}", train.len(), val.len(), test.len());

    let out = tempfile::tempdir().map_err(|e| perturbe::Error::io("tempdir", e))?;
    for split in [&train, &val, &test] {
        let file = out.path().join(format!("{}.jsonl", split.name));
        save_corpus(split, &file, Format::Jsonl)?;
        println!("wrote {}", file.display());
    }
    Ok(())
}
