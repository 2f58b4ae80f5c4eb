//! Syntax checking of predicted snippets with an external assembler.
//!
//! Each prediction is wrapped in a scaffold (section header and entry label),
//! written to a temporary file and handed to the command built from a template
//! such as `as --32 {file} -o /dev/null`. Exit status 0 means the snippet is
//! syntactically valid.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::LINE_SEPARATOR;
use crate::error::{Error, Result};

use super::PredictionSet;

/// GNU assembler, Intel syntax, 32-bit.
pub const GAS_TEMPLATE: &str = "as --32 {file} -o /dev/null";
pub const GAS_SCAFFOLD: &str = ".intel_syntax noprefix\n.code32\n.text\n.globl _start\n_start:\n";

pub const NASM_TEMPLATE: &str = "nasm -f elf32 {file} -o /dev/null";
pub const NASM_SCAFFOLD: &str = "BITS 32\nsection .text\nglobal _start\n_start:\n";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq)]
pub struct SyntaxChecker {
    /// Command line with a `{file}` placeholder, split on whitespace.
    pub template: String,
    pub scaffold: String,
    pub timeout: Duration,
    pub parallelism: usize,
}

impl Default for SyntaxChecker {
    fn default() -> Self {
        SyntaxChecker::gas()
    }
}

impl SyntaxChecker {
    pub fn new(template: impl Into<String>, scaffold: impl Into<String>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{file}") {
            return Err(Error::InvalidConfig(format!(
                "checker template {template:?} has no {{file}} placeholder"
            )));
        }
        if template.split_whitespace().next().is_none() {
            return Err(Error::InvalidConfig("empty checker template".into()));
        }
        Ok(SyntaxChecker {
            template,
            scaffold: scaffold.into(),
            timeout: DEFAULT_TIMEOUT,
            parallelism: thread::available_parallelism().map_or(1, |n| n.get()),
        })
    }

    pub fn gas() -> Self {
        SyntaxChecker::new(GAS_TEMPLATE, GAS_SCAFFOLD).expect("valid built-in template")
    }

    pub fn nasm() -> Self {
        SyntaxChecker::new(NASM_TEMPLATE, NASM_SCAFFOLD).expect("valid built-in template")
    }

    /// Built-in scaffold matching the assembler named in `template`.
    pub fn for_template(template: &str) -> Result<Self> {
        let program = template.split_whitespace().next().unwrap_or_default();
        let scaffold = if program.ends_with("nasm") || program.ends_with("yasm") {
            NASM_SCAFFOLD
        } else {
            GAS_SCAFFOLD
        };
        SyntaxChecker::new(template, scaffold)
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    /// Check one snippet. Fails only when the checker cannot be run at all.
    pub fn check(&self, code: &str) -> Result<SyntaxVerdict> {
        let body = code.replace(LINE_SEPARATOR, "\n");
        if body.trim().is_empty() {
            return Ok(SyntaxVerdict::invalid("empty prediction"));
        }
        let mut file = tempfile::Builder::new()
            .prefix("snippet")
            .suffix(".s")
            .tempfile()
            .map_err(|e| Error::Checker(format!("cannot create scratch file: {e}")))?;
        let source = format!("{}{}\n", self.scaffold, body.trim_end());
        file.write_all(source.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| Error::Checker(format!("cannot write scratch file: {e}")))?;
        let path = file.path().to_string_lossy().into_owned();

        let mut words = self.template.split_whitespace().map(|w| w.replace("{file}", &path));
        let program = words.next().expect("validated template");
        let mut child = Command::new(&program)
            .args(words)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Checker(format!("cannot run {program:?}: {e}")))?;

        let deadline = Instant::now() + self.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(SyntaxVerdict::invalid(format!(
                        "timed out after {:.1}s",
                        self.timeout.as_secs_f64()
                    )));
                }
                Ok(None) => thread::sleep(Duration::from_millis(2)),
                Err(e) => return Err(Error::Checker(format!("waiting for {program:?}: {e}"))),
            }
        };
        let mut stderr = String::new();
        if let Some(mut pipe) = child.stderr.take() {
            let _ = pipe.read_to_string(&mut stderr);
        }
        Ok(if status.success() {
            SyntaxVerdict {
                valid: true,
                diagnostic: None,
            }
        } else {
            let message = stderr
                .lines()
                .find(|l| l.contains("rror"))
                .unwrap_or(stderr.trim())
                .to_string();
            SyntaxVerdict::invalid(format!("{status}: {message}"))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SyntaxVerdict {
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl SyntaxVerdict {
    fn invalid(why: impl Into<String>) -> Self {
        SyntaxVerdict {
            valid: false,
            diagnostic: Some(why.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntaxReport {
    pub syn: f64,
    pub verdicts: BTreeMap<String, SyntaxVerdict>,
}

/// Fraction of predictions the checker accepts, with per-id verdicts.
pub fn syntactic_accuracy(preds: &PredictionSet, checker: &SyntaxChecker) -> Result<SyntaxReport> {
    if preds.is_empty() {
        return Err(Error::EmptyInput("no predictions to check"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(checker.parallelism)
        .build()
        .map_err(|e| Error::Checker(e.to_string()))?;
    let entries: Vec<(&String, &String)> = preds.entries.iter().collect();
    let verdicts = pool.install(|| {
        entries
            .par_iter()
            .map(|(id, code)| checker.check(code).map(|v| ((*id).clone(), v)))
            .collect::<Result<BTreeMap<_, _>>>()
    })?;
    let valid = verdicts.values().filter(|v| v.valid).count();
    Ok(SyntaxReport {
        syn: valid as f64 / verdicts.len() as f64,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(pairs: &[(&str, &str)]) -> PredictionSet {
        PredictionSet::from_pairs("m", pairs.iter().copied())
    }

    #[test]
    fn template_needs_placeholder() {
        assert!(SyntaxChecker::new("as --32", GAS_SCAFFOLD).is_err());
        assert_eq!(SyntaxChecker::for_template("nasm -f elf32 {file}").unwrap().scaffold, NASM_SCAFFOLD);
    }

    #[test]
    fn exit_codes_decide() {
        let ok = SyntaxChecker::new("true {file}", "").unwrap();
        let bad = SyntaxChecker::new("false {file}", "").unwrap();
        let p = preds(&[("a", "nop"), ("b", "nop")]);
        assert_eq!(syntactic_accuracy(&p, &ok).unwrap().syn, 1.0);
        let report = syntactic_accuracy(&p, &bad).unwrap();
        assert_eq!(report.syn, 0.0);
        assert!(report.verdicts["a"].diagnostic.is_some());
    }

    #[test]
    fn empty_prediction_is_invalid() {
        let ok = SyntaxChecker::new("true {file}", "").unwrap();
        let report = syntactic_accuracy(&preds(&[("a", "nop"), ("b", "  ")]), &ok).unwrap();
        assert_eq!(report.syn, 0.5);
        assert!(!report.verdicts["b"].valid);
    }

    #[test]
    fn missing_binary_is_a_checker_error() {
        let c = SyntaxChecker::new("/nonexistent/assembler {file}", "").unwrap();
        let err = syntactic_accuracy(&preds(&[("a", "nop")]), &c).unwrap_err();
        assert!(matches!(err, Error::Checker(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn timeout_counts_as_failure() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("slow.sh");
        std::fs::write(&script, "#!/bin/sh\nsleep 5\n").unwrap();
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let c = SyntaxChecker::new(format!("{} {{file}}", script.display()), "")
            .unwrap()
            .with_timeout(Duration::from_millis(100));
        let start = Instant::now();
        let v = c.check("nop").unwrap();
        assert!(start.elapsed() < Duration::from_secs(3));
        assert!(!v.valid);
        assert!(v.diagnostic.unwrap().contains("timed out"));
    }
}
