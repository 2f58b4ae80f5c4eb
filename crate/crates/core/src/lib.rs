//! Perturbation and augmentation toolkit for natural-language-to-code corpora.
//!
//! The crate turns a corpus of (intent, snippet) pairs into perturbed variants of
//! the intents, filters them with a sentence-similarity gate, assembles
//! size-preserving augmented training splits, and computes the robustness
//! metrics used to compare code generators on original and perturbed inputs.
//!
//! The pipeline, in the order the modules are usually used:
//!
//! - [`corpus`]: load, validate, split and save intent/snippet datasets.
//! - [`preprocess`]: tokenization, stopword filtering, `var#` standardization.
//! - [`vocab`]: mine programming-related words by corpus frequency comparison.
//! - [`embedding`]: word vector store, cosine similarity, neighbor search.
//! - [`postag`]: lexicon and rule based part-of-speech tagging.
//! - [`perturb`]: constrained word substitution and categorized word omission.
//! - [`semgate`]: sentence-embedding similarity gate and threshold sweeps.
//! - [`augment`]: size-preserving augmentation and the experiment matrix.
//! - [`metrics`]: SYN, SEM, ROB, Jensen-Shannon divergence, omission statistics.
//! - [`cli`]: the `perturbe` command-line surface.
//!
//! Runnable walkthroughs for each capability live in the crate's `examples/`
//! directory.

pub mod augment;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod perturb;
pub mod pipeline;
pub mod postag;
pub mod preprocess;
pub mod semgate;
pub mod seed;
pub mod vocab;

pub use error::{Error, Result};
