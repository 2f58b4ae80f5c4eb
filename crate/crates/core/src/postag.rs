//! Part-of-speech tagging for short imperative code descriptions.
//!
//! The default tagger is a lexicon of tag readings per word (most frequent
//! first) plus a few rules: numbers and name-like tokens are never verbs, a
//! clause-initial word with a verb reading is a verb (descriptions are
//! imperative), and unknown words fall back on suffix rules and then NOUN.
//! Exact replication with an external tagger goes through [`TagOverrides`].

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::is_punctuation;
use crate::vocab::{is_name_like, RegisterList, Vocabulary};

const DEFAULT_LEXICON: &str = include_str!("../data/tag_lexicon.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Pron,
    Prep,
    Conj,
    Det,
    Num,
    Sym,
    Other,
}

impl PosTag {
    pub const ALL: [PosTag; 11] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adj,
        PosTag::Adv,
        PosTag::Pron,
        PosTag::Prep,
        PosTag::Conj,
        PosTag::Det,
        PosTag::Num,
        PosTag::Sym,
        PosTag::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Verb => "VERB",
            PosTag::Adj => "ADJ",
            PosTag::Adv => "ADV",
            PosTag::Pron => "PRON",
            PosTag::Prep => "PREP",
            PosTag::Conj => "CONJ",
            PosTag::Det => "DET",
            PosTag::Num => "NUM",
            PosTag::Sym => "SYM",
            PosTag::Other => "OTHER",
        }
    }

    /// Content tags eligible for substitution.
    pub fn is_content(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Verb | PosTag::Adj | PosTag::Adv)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PosTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown POS tag {s:?}")))
    }
}

/// Anything that tags a token sequence, one tag per token.
pub trait PosTagger: Send + Sync {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag>;
}

/// Word readings, most frequent first.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    readings: HashMap<String, Vec<PosTag>>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lexicon = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line.split_once('\t').ok_or_else(|| {
                Error::InvalidConfig(format!("lexicon line {}: expected word<TAB>tag", i + 1))
            })?;
            let tag: PosTag = tag.parse()?;
            let entry = lexicon.readings.entry(word.to_lowercase()).or_default();
            if !entry.contains(&tag) {
                entry.push(tag);
            }
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::parse(&text)
    }

    pub fn shipped() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("shipped lexicon is valid")
    }

    pub fn readings(&self, word: &str) -> Option<&[PosTag]> {
        self.readings.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn has_verb_reading(&self, word: &str) -> bool {
        self.readings(word)
            .is_some_and(|r| r.contains(&PosTag::Verb))
    }
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?:0[xX][0-9A-Fa-f]+|[0-9]+(?:\.[0-9]+)?|[0-9A-Fa-f]+[hH])$")
            .expect("number regex")
    })
}

fn is_number(token: &str) -> bool {
    number_regex().is_match(token) && token.chars().next().is_some_and(|c| c.is_ascii_digit())
}

const CLAUSE_BREAKS: &[&str] = &[".", ";", ":", "!", "?"];
const COORDINATORS: &[&str] = &["and", "or", "then", ","];

/// Lexicon and rule based tagger.
#[derive(Clone, Debug)]
pub struct LexiconTagger {
    lexicon: Lexicon,
    registers: RegisterList,
    names: std::collections::HashSet<String>,
}

impl Default for LexiconTagger {
    fn default() -> Self {
        LexiconTagger::new(Lexicon::shipped(), RegisterList::default())
    }
}

impl LexiconTagger {
    pub fn new(lexicon: Lexicon, registers: RegisterList) -> Self {
        LexiconTagger {
            lexicon,
            registers,
            names: Default::default(),
        }
    }

    /// Treat the vocabulary's name words as symbols.
    pub fn with_vocabulary(mut self, vocab: &Vocabulary) -> Self {
        self.names = vocab.name_words.iter().cloned().collect();
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    fn fixed_tag(&self, token: &str) -> Option<PosTag> {
        if is_punctuation(token) {
            Some(PosTag::Sym)
        } else if is_number(token) {
            Some(PosTag::Num)
        } else if self.names.contains(token) || is_name_like(token, &self.registers) {
            Some(PosTag::Sym)
        } else {
            None
        }
    }

    fn suffix_tag(word: &str, after_determiner: bool, clause_initial: bool) -> PosTag {
        let w = word.to_lowercase();
        let ends = |s: &[&str]| s.iter().any(|x| w.len() > x.len() + 2 && w.ends_with(x));
        if ends(&["ly"]) {
            PosTag::Adv
        } else if ends(&["ing", "ed"]) {
            if clause_initial {
                PosTag::Verb
            } else if after_determiner {
                PosTag::Adj
            } else {
                PosTag::Noun
            }
        } else if ends(&["ize", "ise", "ify"]) {
            PosTag::Verb
        } else if ends(&["able", "ible", "ous", "ful", "ive", "less", "ical"]) {
            PosTag::Adj
        } else {
            PosTag::Noun
        }
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, tokens: &[String]) -> Vec<PosTag> {
        let fixed: Vec<Option<PosTag>> = tokens.iter().map(|t| self.fixed_tag(t)).collect();
        let mut tags = Vec::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            if let Some(tag) = fixed[i] {
                tags.push(tag);
                continue;
            }
            let prev = i.checked_sub(1).map(|p| tokens[p].to_lowercase());
            let prev = prev.as_deref();
            let clause_initial = prev.is_none_or(|p| CLAUSE_BREAKS.contains(&p));
            let readings = self.lexicon.readings(token);
            let has_verb = readings.is_some_and(|r| r.contains(&PosTag::Verb));

            if clause_initial && has_verb {
                tags.push(PosTag::Verb);
                continue;
            }
            // "... and move the byte", "then jump to ..."
            if has_verb && prev.is_some_and(|p| COORDINATORS.contains(&p)) {
                let next = tokens.get(i + 1);
                let next_is_object = next.is_some_and(|n| {
                    let n_lc = n.to_lowercase();
                    n_lc == "to"
                        || fixed[i + 1].is_some_and(|t| matches!(t, PosTag::Num | PosTag::Sym) && !is_punctuation(n))
                        || self.lexicon.readings(n).is_some_and(|r| {
                            matches!(r.first(), Some(PosTag::Det | PosTag::Pron))
                        })
                });
                if next_is_object {
                    tags.push(PosTag::Verb);
                    continue;
                }
            }
            let tag = match readings.and_then(|r| r.first().copied()) {
                Some(tag) => tag,
                None => {
                    let after_det = i > 0 && tags[i - 1] == PosTag::Det;
                    LexiconTagger::suffix_tag(token, after_det, clause_initial)
                }
            };
            tags.push(tag);
        }
        tags
    }
}

/// Externally produced tags keyed by sample id.
#[derive(Clone, Debug, Default)]
pub struct TagOverrides {
    tags: HashMap<String, Vec<PosTag>>,
}

#[derive(Deserialize)]
struct OverrideRecord {
    id: String,
    tags: Vec<String>,
}

impl TagOverrides {
    /// JSONL lines `{"id": str, "tags": [str]}`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut overrides = TagOverrides::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let record: OverrideRecord =
                serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            let tags = record
                .tags
                .iter()
                .map(|t| t.parse::<PosTag>())
                .collect::<Result<Vec<_>>>()
                .map_err(|e| parse_err(e.to_string()))?;
            overrides.tags.insert(record.id, tags);
        }
        Ok(overrides)
    }

    pub fn insert(&mut self, id: impl Into<String>, tags: Vec<PosTag>) {
        self.tags.insert(id.into(), tags);
    }

    /// Override for `id` when it is aligned with `tokens`.
    pub fn get(&self, id: &str, tokens: &[String]) -> Option<&[PosTag]> {
        match self.tags.get(id) {
            Some(tags) if tags.len() == tokens.len() => Some(tags),
            Some(tags) => {
                log::warn!(
                    "tag override for {id:?} has {} tags for {} tokens, ignored",
                    tags.len(),
                    tokens.len()
                );
                None
            }
            None => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

pub fn tag(tokens: &[String], tagger: &dyn PosTagger) -> Vec<PosTag> {
    tagger.tag(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PosTag::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn imperative_store() {
        let t = LexiconTagger::default();
        assert_eq!(
            t.tag(&toks(&["Store", "the", "shellcode", "pointer"])),
            [Verb, Det, Noun, Noun]
        );
        assert_eq!(
            t.tag(&toks(&["Store", "the", "shellcode", "pointer", "in", "the", "ESI", "register", "."])),
            [Verb, Det, Noun, Noun, Prep, Det, Sym, Noun, Sym]
        );
    }

    #[test]
    fn numbers_and_names() {
        let t = LexiconTagger::default();
        assert_eq!(t.tag(&toks(&["0x4"])), [Num]);
        assert_eq!(t.tag(&toks(&["copy", "0x4", "into", "the", "BL", "register"])), [Verb, Num, Prep, Det, Sym, Noun]);
        assert_eq!(t.tag(&toks(&["push", "[esi]", "_start"])), [Verb, Sym, Sym]);
        let v = Vocabulary::from_words(["register"], ["formatting"]);
        let t = t.with_vocabulary(&v);
        assert_eq!(t.tag(&toks(&["jump", "to", "formatting"])), [Verb, Prep, Sym]);
    }

    #[test]
    fn lexicon_lookup_sentence() {
        // oracle: clause-initial verb reading, then first reading of each word
        let t = LexiconTagger::default();
        let tokens = toks(&["push", "the", "contents", "onto", "the", "stack"]);
        let lex = t.lexicon();
        let oracle: Vec<PosTag> = tokens
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let r = lex.readings(w).unwrap();
                if i == 0 && r.contains(&Verb) { Verb } else { r[0] }
            })
            .collect();
        assert_eq!(oracle, [Verb, Det, Noun, Prep, Det, Noun]);
        assert_eq!(t.tag(&tokens), oracle);
    }

    #[test]
    fn stock_is_not_a_verb() {
        let t = LexiconTagger::default();
        assert_eq!(t.tag(&toks(&["Stock", "the", "shellcode"]))[0], Noun);
        assert_eq!(t.tag(&toks(&["Save", "the", "shellcode"]))[0], Verb);
    }

    #[test]
    fn coordinated_and_clause_initial_verbs() {
        let t = LexiconTagger::default();
        let tags = t.tag(&toks(&[
            "Perform", "the", "xor", "between", "BL", "register", "and", "0xBB", "and", "jump", "to",
            "the", "label", "formatting", ".", "Move", "the", "byte",
        ]));
        assert_eq!(tags[0], Verb);
        assert_eq!(tags[2], Noun);
        assert_eq!(tags[9], Verb);
        assert_eq!(tags[12], Noun);
        assert_eq!(tags[13], Noun);
        assert_eq!(tags[15], Verb);
        // "and call the function" vs "the system call"
        let tags = t.tag(&toks(&["make", "the", "system", "call", "and", "call", "the", "function"]));
        assert_eq!(tags[3], Noun);
        assert_eq!(tags[5], Verb);
    }

    #[test]
    fn unknown_words() {
        let t = LexiconTagger::default();
        assert_eq!(t.tag(&toks(&["the", "frobnicator"]))[1], Noun);
        assert_eq!(t.tag(&toks(&["quickly"]))[0], Adv);
        assert_eq!(t.tag(&toks(&["the", "obfuscated", "payload"]))[1], Adj);
    }

    #[test]
    fn overrides_need_alignment() {
        let mut o = TagOverrides::default();
        o.insert("a", vec![Noun, Noun]);
        assert_eq!(o.get("a", &toks(&["x", "y"])), Some(&[Noun, Noun][..]));
        assert_eq!(o.get("a", &toks(&["x"])), None);
        assert_eq!(o.get("b", &toks(&["x"])), None);
    }

    #[test]
    fn overrides_load_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tags.jsonl");
        std::fs::write(&path, "{\"id\":\"s1\",\"tags\":[\"VERB\",\"det\"]}\n").unwrap();
        let o = TagOverrides::load(&path).unwrap();
        assert_eq!(o.get("s1", &toks(&["a", "b"])), Some(&[Verb, Det][..]));
        std::fs::write(&path, "{\"id\":\"s1\",\"tags\":[\"VRB\"]}\n").unwrap();
        assert!(matches!(TagOverrides::load(&path), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn tag_names_round_trip() {
        for t in PosTag::ALL {
            assert_eq!(t.as_str().parse::<PosTag>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.as_str()));
        }
    }

    proptest! {
        #[test]
        fn aligned_deterministic_and_imperative(words in proptest::collection::vec(
            prop_oneof!["[a-z]{1,8}", Just("store".to_string()), Just("EAX".to_string()), Just("0x10".to_string()), Just(".".to_string())],
            1..15)) {
            let t = LexiconTagger::default();
            let tokens: Vec<String> = words;
            let a = t.tag(&tokens);
            prop_assert_eq!(a.len(), tokens.len());
            prop_assert_eq!(&a, &t.tag(&tokens));
            if t.lexicon().has_verb_reading(&tokens[0]) && !is_name_like(&tokens[0], &RegisterList::default()) && !is_number(&tokens[0]) {
                prop_assert_eq!(a[0], Verb);
            }
            for (tok, tag) in tokens.iter().zip(&a) {
                if is_number(tok) || tok == "EAX" {
                    prop_assert_ne!(*tag, Verb);
                }
            }
        }
    }
}
