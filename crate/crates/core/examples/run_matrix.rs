//! The whole pipeline from a TOML config: split, mine the vocabulary, perturb,
//! gate, and materialize every experiment cell with a manifest.
//!
//! cargo run --example run_matrix [config.toml]

use std::path::PathBuf;

use perturbe::config::PipelineConfig;
use perturbe::pipeline::run_matrix;

fn main() -> perturbe::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/matrix.toml"));
    let mut cfg = PipelineConfig::load(&path)?;
    let out = tempfile::tempdir().map_err(|e| perturbe::Error::io("tempdir", e))?;
    cfg.output = out.path().to_path_buf();

    let manifest = run_matrix(&cfg)?;
    for cell in &manifest.cells {
        println!("{:<14} train {:<4} test {:<4} {}", cell.kind, cell.train_p, cell.test_p, &cell.digest[..12]);
    }
    println!("{} files, manifest digest {}", manifest.files.len(), manifest.digest);
    Ok(())
}
