//! Nearest neighbors and cosine similarities from a word-vector file.
//!
//! cargo run --example neighbors [vectors.txt] [word] [k]

use std::path::PathBuf;

use perturbe::embedding::{load_vectors, top_k_neighbors};

fn main() -> perturbe::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/table_vectors.txt"));
    let word = args.next().unwrap_or_else(|| "store".into());
    let k = args.next().and_then(|k| k.parse().ok()).unwrap_or(5);

    let store = load_vectors(&path)?;
    println!("{} words, dimension {}", store.len(), store.dimension());
    for n in top_k_neighbors(&word, k, &store)? {
        println!("{:>12}  {:.4}", n.word, n.similarity);
    }
    Ok(())
}
