//! Intent preprocessing: tokenization, stopword filtering and `var#`
//! standardization with its inverse.
//!
//! Tokens keep their case. Register names, hex literals, bracketed operands and
//! identifiers with underscores each stay a single token.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_PATTERNS: &str = include_str!("../data/patterns.txt");

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\[[^\]\n]*\]|0[xX][0-9A-Fa-f]+|[\p{L}\p{N}_]+(?:-[\p{L}\p{N}_]+)*|\S")
            .expect("token regex")
    })
}

/// Byte ranges of the tokens of `text`.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    token_regex()
        .find_iter(text)
        .map(|m| (m.start(), m.end()))
        .collect()
}

/// True for tokens that carry no letter or digit.
pub fn is_punctuation(token: &str) -> bool {
    !token.chars().any(|c| c.is_alphanumeric())
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TokenizedIntent {
    pub tokens: Vec<String>,
    pub source_id: String,
}

impl TokenizedIntent {
    pub fn new(source_id: impl Into<String>, text: &str) -> Self {
        TokenizedIntent {
            tokens: token_regex()
                .find_iter(text)
                .map(|m| m.as_str().to_string())
                .collect(),
            source_id: source_id.into(),
        }
    }

    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn tokenize(text: &str) -> TokenizedIntent {
    TokenizedIntent::new("", text)
}

/// Per-token edit applied by [`rewrite`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokenEdit {
    Keep,
    Replace(String),
    Remove,
}

/// Rebuild `text` after applying one edit per token.
///
/// Original spacing between surviving tokens is kept: each surviving token is
/// preceded by the gap that preceded it in the original text, except the first
/// one. Leading and trailing whitespace is dropped.
pub fn rewrite(text: &str, edits: &[TokenEdit]) -> String {
    let spans = token_spans(text);
    assert_eq!(spans.len(), edits.len(), "one edit per token");
    let mut out = String::with_capacity(text.len());
    let mut first = true;
    for (i, (&(start, end), edit)) in spans.iter().zip(edits).enumerate() {
        let piece = match edit {
            TokenEdit::Keep => &text[start..end],
            TokenEdit::Replace(s) => s.as_str(),
            TokenEdit::Remove => continue,
        };
        if !first {
            let gap_start = if i == 0 { start } else { spans[i - 1].1 };
            out.push_str(&text[gap_start..start]);
        }
        out.push_str(piece);
        first = false;
    }
    out
}

/// Case-insensitive stopword list.
#[derive(Clone, Debug, Default)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    pub fn empty() -> Self {
        Stopwords::default()
    }

    /// The shipped English list.
    pub fn default_english() -> Self {
        Stopwords::parse(DEFAULT_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str) -> Self {
        Stopwords {
            words: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Stopwords::parse(&text))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stopwords {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilteredIntent {
    pub kept: TokenizedIntent,
    pub original: TokenizedIntent,
}

impl FilteredIntent {
    /// Every token was a stopword.
    pub fn is_degenerate(&self) -> bool {
        self.kept.is_empty() && !self.original.is_empty()
    }
}

pub fn filter_stopwords(intent: &TokenizedIntent, stoplist: &Stopwords) -> FilteredIntent {
    let kept = TokenizedIntent {
        tokens: intent
            .tokens
            .iter()
            .filter(|t| !stoplist.contains(t))
            .cloned()
            .collect(),
        source_id: intent.source_id.clone(),
    };
    let filtered = FilteredIntent {
        kept,
        original: intent.clone(),
    };
    if filtered.is_degenerate() {
        log::warn!(
            "intent {:?} consists only of stopwords",
            intent.source_id
        );
    }
    filtered
}

/// Placeholder prefix used by standardization.
pub const PLACEHOLDER_PREFIX: &str = "var";

/// Originals replaced by `var0`, `var1`, ... in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StandardizationMap {
    entries: Vec<String>,
}

impl StandardizationMap {
    pub fn get(&self, index: usize) -> Option<&str> {
        self.entries.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &str)> {
        self.entries.iter().map(String::as_str).enumerate()
    }
}

/// Regex-driven standardizer.
///
/// Patterns are `name=regex` lines matched against whole tokens. A pattern whose
/// name starts with `after_` is contextual: it is matched against the previous
/// token, and the current token is standardized when it is a plain identifier
/// that is not a stopword (this catches `label formatting`).
#[derive(Clone, Debug)]
pub struct Standardizer {
    token_patterns: Vec<(String, Regex)>,
    context_patterns: Vec<(String, Regex)>,
    stopwords: Stopwords,
}

fn identifier_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z_][A-Za-z0-9_]*$").expect("identifier regex"))
}

impl Standardizer {
    pub fn parse(text: &str, stopwords: Stopwords) -> Result<Self> {
        let mut token_patterns = Vec::new();
        let mut context_patterns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, pattern) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("pattern line {}: expected name=regex", i + 1))
            })?;
            let regex = Regex::new(pattern.trim()).map_err(|e| {
                Error::InvalidConfig(format!("pattern line {}: {e}", i + 1))
            })?;
            let name = name.trim().to_string();
            if name.starts_with("after_") {
                context_patterns.push((name, regex));
            } else {
                token_patterns.push((name, regex));
            }
        }
        Ok(Standardizer {
            token_patterns,
            context_patterns,
            stopwords,
        })
    }

    pub fn load(path: &Path, stopwords: Stopwords) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Standardizer::parse(&text, stopwords)
    }

    pub fn with_defaults() -> Self {
        Standardizer::parse(DEFAULT_PATTERNS, Stopwords::default_english())
            .expect("shipped patterns are valid")
    }

    fn is_standardizable(&self, previous: Option<&str>, token: &str) -> bool {
        if self.token_patterns.iter().any(|(_, re)| re.is_match(token)) {
            return true;
        }
        match previous {
            Some(prev) => {
                identifier_regex().is_match(token)
                    && !self.stopwords.contains(token)
                    && self.context_patterns.iter().any(|(_, re)| re.is_match(prev))
            }
            None => false,
        }
    }

    pub fn standardize(&self, intent: &TokenizedIntent) -> (TokenizedIntent, StandardizationMap) {
        let mut map = StandardizationMap::default();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let mut tokens = Vec::with_capacity(intent.tokens.len());
        for (i, token) in intent.tokens.iter().enumerate() {
            let previous = i.checked_sub(1).map(|p| intent.tokens[p].as_str());
            if self.is_standardizable(previous, token) {
                let index = *seen.entry(token.as_str()).or_insert_with(|| {
                    map.entries.push(token.clone());
                    map.entries.len() - 1
                });
                tokens.push(format!("{PLACEHOLDER_PREFIX}{index}"));
            } else {
                tokens.push(token.clone());
            }
        }
        (
            TokenizedIntent {
                tokens,
                source_id: intent.source_id.clone(),
            },
            map,
        )
    }
}

/// Standardize with the shipped patterns and stopwords.
pub fn standardize(intent: &TokenizedIntent) -> (TokenizedIntent, StandardizationMap) {
    static DEFAULT: OnceLock<Standardizer> = OnceLock::new();
    DEFAULT
        .get_or_init(Standardizer::with_defaults)
        .standardize(intent)
}

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bvar(\d+)\b").expect("placeholder regex"))
}

/// Replace every `var#` in `code` with its original and collapse whitespace.
pub fn destandardize(code: &str, map: &StandardizationMap) -> Result<String> {
    let mut out = String::with_capacity(code.len());
    let mut last = 0;
    for caps in placeholder_regex().captures_iter(code) {
        let whole = caps.get(0).expect("match");
        let index: usize = caps[1]
            .parse()
            .map_err(|_| Error::UnknownPlaceholder(usize::MAX))?;
        let original = map.get(index).ok_or(Error::UnknownPlaceholder(index))?;
        out.push_str(&code[last..whole.start()]);
        out.push_str(original);
        last = whole.end();
    }
    out.push_str(&code[last..]);
    Ok(out.split_whitespace().collect::<Vec<_>>().join(" "))
}
