//! Length units, segmentation and the corpus record type.
//!
//! Every unit treats whitespace as the separator. Words are maximal
//! non-whitespace runs, sentences are runs of words closed by a word ending
//! in `.`, `!` or `?` (unless that word is a known abbreviation), and
//! characters are the non-whitespace scalars. Model tokens are delegated to a
//! [`TokenSpanner`] supplied by the caller.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("the token unit needs a tokenizer adapter")]
    NoTokenizer,
    #[error("unit boundary {index} out of range (text has {count} units)")]
    Boundary { index: usize, count: usize },
    #[error("unknown length unit `{0}`")]
    UnknownUnit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Word,
    Sentence,
    Character,
    Token,
}

impl LengthUnit {
    pub const ALL: [LengthUnit; 4] = [
        LengthUnit::Word,
        LengthUnit::Sentence,
        LengthUnit::Character,
        LengthUnit::Token,
    ];

    /// One-letter code used inside rendered special tokens.
    pub fn code(self) -> char {
        match self {
            LengthUnit::Word => 'w',
            LengthUnit::Sentence => 's',
            LengthUnit::Character => 'c',
            LengthUnit::Token => 't',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|u| u.code() == c)
    }

    pub fn name(self) -> &'static str {
        match self {
            LengthUnit::Word => "word",
            LengthUnit::Sentence => "sentence",
            LengthUnit::Character => "character",
            LengthUnit::Token => "token",
        }
    }

    pub fn plural(self) -> &'static str {
        match self {
            LengthUnit::Word => "words",
            LengthUnit::Sentence => "sentences",
            LengthUnit::Character => "characters",
            LengthUnit::Token => "tokens",
        }
    }

    /// Coarse-to-fine rank; multi-unit families are emitted in this order.
    pub fn coarseness_rank(self) -> u8 {
        match self {
            LengthUnit::Sentence => 0,
            LengthUnit::Token => 1,
            LengthUnit::Word => 2,
            LengthUnit::Character => 3,
        }
    }
}

impl fmt::Display for LengthUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LengthUnit {
    type Err = TextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|u| u.name() == s || u.plural() == s || s.len() == 1 && s.starts_with(u.code()))
            .ok_or(TextError::UnknownUnit(s))
    }
}

/// Unit spans of a text, as byte ranges into the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub unit: LengthUnit,
    pub spans: Vec<Range<usize>>,
}

impl Segmentation {
    pub fn count(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Number of units that end at or before `offset`.
    pub fn units_before(&self, offset: usize) -> usize {
        self.spans.partition_point(|s| s.end <= offset)
    }

    /// Rebuilds the text from the spans and the separators between them.
    pub fn rejoin(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut cursor = 0;
        for span in &self.spans {
            out.push_str(&text[cursor..span.start]);
            out.push_str(&text[span.clone()]);
            cursor = span.end;
        }
        out.push_str(&text[cursor..]);
        out
    }
}

/// Splits text into model tokens for the `token` unit.
pub trait TokenSpanner: Send + Sync {
    fn spans(&self, text: &str) -> Vec<Range<usize>>;
}

pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.", "vs.", "etc.", "e.g.",
    "i.e.", "u.s.", "u.k.", "u.n.", "a.m.", "p.m.", "no.", "inc.", "ltd.", "co.", "corp.",
    "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.",
    "dec.",
];

#[derive(Clone)]
pub struct Segmenter {
    abbreviations: Vec<String>,
    tokenizer: Option<Arc<dyn TokenSpanner>>,
}

impl fmt::Debug for Segmenter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Segmenter")
            .field("abbreviations", &self.abbreviations.len())
            .field("tokenizer", &self.tokenizer.is_some())
            .finish()
    }
}

impl Default for Segmenter {
    fn default() -> Self {
        Self {
            abbreviations: DEFAULT_ABBREVIATIONS.iter().map(|s| s.to_string()).collect(),
            tokenizer: None,
        }
    }
}

impl Segmenter {
    pub fn with_abbreviations<I, S>(mut self, extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for a in extra {
            let a = a.as_ref().trim().to_lowercase();
            if !a.is_empty() && !self.abbreviations.contains(&a) {
                self.abbreviations.push(a);
            }
        }
        self
    }

    pub fn with_tokenizer(mut self, tokenizer: Arc<dyn TokenSpanner>) -> Self {
        self.tokenizer = Some(tokenizer);
        self
    }

    pub fn segment(&self, text: &str, unit: LengthUnit) -> Result<Segmentation, TextError> {
        let spans = match unit {
            LengthUnit::Word => word_spans(text),
            LengthUnit::Character => char_spans(text),
            LengthUnit::Sentence => self.sentence_spans(text),
            LengthUnit::Token => self
                .tokenizer
                .as_ref()
                .ok_or(TextError::NoTokenizer)?
                .spans(text),
        };
        Ok(Segmentation { unit, spans })
    }

    pub fn count(&self, text: &str, unit: LengthUnit) -> Result<usize, TextError> {
        Ok(self.segment(text, unit)?.count())
    }

    fn sentence_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start: Option<usize> = None;
        for word in word_spans(text) {
            let begin = *start.get_or_insert(word.start);
            if self.closes_sentence(&text[word.clone()]) {
                spans.push(begin..word.end);
                start = None;
            }
        }
        if let (Some(begin), Some(last)) = (start, spans_last_word_end(text)) {
            spans.push(begin..last);
        }
        spans
    }

    fn closes_sentence(&self, word: &str) -> bool {
        let core = word.trim_end_matches(['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}']);
        if !core.ends_with(['.', '!', '?']) {
            return false;
        }
        if core.ends_with(['!', '?']) {
            return true;
        }
        let bare = core
            .trim_start_matches(['"', '\'', '(', '[', '{', '\u{201c}', '\u{2018}'])
            .to_lowercase();
        !self.abbreviations.contains(&bare)
    }
}

fn spans_last_word_end(text: &str) -> Option<usize> {
    let trimmed = text.trim_end();
    (!trimmed.is_empty()).then_some(trimmed.len())
}

fn word_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

fn char_spans(text: &str) -> Vec<Range<usize>> {
    text.char_indices()
        .filter(|(_, c)| !c.is_whitespace())
        .map(|(i, c)| i..i + c.len_utf8())
        .collect()
}

/// Segments with the default abbreviation list. Fails only for the token unit.
pub fn segment(text: &str, unit: LengthUnit) -> Result<Segmentation, TextError> {
    Segmenter::default().segment(text, unit)
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Inserts `marker` at the boundary after the `index`-th unit.
///
/// Index `k < count` places the marker directly before unit `k`; index
/// `count` places it directly after the last unit.
pub fn insert_at_unit_boundary(
    text: &str,
    unit: LengthUnit,
    index: usize,
    marker: &str,
) -> Result<String, TextError> {
    insert_at_boundary(text, &segment(text, unit)?, index, marker)
}

/// [`insert_at_unit_boundary`] against a precomputed segmentation.
pub fn insert_at_boundary(
    text: &str,
    segmentation: &Segmentation,
    index: usize,
    marker: &str,
) -> Result<String, TextError> {
    let count = segmentation.count();
    if index > count {
        return Err(TextError::Boundary { index, count });
    }
    let at = match segmentation.spans.get(index) {
        Some(span) => span.start,
        None => segmentation.spans.last().map_or(0, |s| s.end),
    };
    let mut out = String::with_capacity(text.len() + marker.len());
    out.push_str(&text[..at]);
    out.push_str(marker);
    out.push_str(&text[at..]);
    Ok(out)
}

/// Byte offset to Unicode scalar offset.
pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Summarization,
    Dialogue,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "summarization" | "summary" => Ok(Task::Summarization),
            "dialogue" | "dialog" => Ok(Task::Dialogue),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub source: String,
    pub reference: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Example {
    pub fn new(id: impl Into<String>, source: impl Into<String>, reference: impl Into<String>, task: Task) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            reference: reference.into(),
            task,
            meta: BTreeMap::new(),
        }
    }

    /// Keeps at most `max_words` whitespace words of the reference.
    pub fn truncate_reference(&mut self, max_words: usize) -> bool {
        let spans = word_spans(&self.reference);
        if spans.len() <= max_words {
            return false;
        }
        let end = if max_words == 0 { 0 } else { spans[max_words - 1].end };
        self.reference.truncate(end);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CNNDM: &str = "Famous American foods created across United States. Connecticut diner claims creation of the hamburger. Onion rings were courtesy of cook at Pig Stand in Texas.";

    #[test]
    fn cnndm_highlight_has_25_words() {
        assert_eq!(segment(CNNDM, LengthUnit::Word).unwrap().count(), 25);
        assert_eq!(segment(CNNDM, LengthUnit::Sentence).unwrap().count(), 3);
    }

    #[test]
    fn empty_text_has_no_units() {
        for unit in [LengthUnit::Word, LengthUnit::Sentence, LengthUnit::Character] {
            let seg = segment("", unit).unwrap();
            assert_eq!(seg.count(), 0);
            assert!(seg.spans.is_empty());
        }
        assert_eq!(segment("  \n\t ", LengthUnit::Sentence).unwrap().count(), 0);
    }

    #[test]
    fn terminators_split_sentences() {
        assert_eq!(segment("One. Two! Three?", LengthUnit::Sentence).unwrap().count(), 3);
        assert_eq!(segment("No terminator at all", LengthUnit::Sentence).unwrap().count(), 1);
        assert_eq!(segment("He said \"stop.\" Then left", LengthUnit::Sentence).unwrap().count(), 2);
    }

    #[test]
    fn abbreviations_do_not_close_sentences() {
        let text = "Mr. Smith met Dr. Jones in the U.S. today. They talked.";
        let seg = segment(text, LengthUnit::Sentence).unwrap();
        assert_eq!(seg.count(), 2);
        assert_eq!(&text[seg.spans[0].clone()], "Mr. Smith met Dr. Jones in the U.S. today.");

        let custom = Segmenter::default().with_abbreviations(["approx."]);
        assert_eq!(custom.count("It is approx. ten. Yes.", LengthUnit::Sentence).unwrap(), 2);
    }

    #[test]
    fn characters_skip_whitespace() {
        let seg = segment("héllo wörld", LengthUnit::Character).unwrap();
        assert_eq!(seg.count(), 10);
        assert_eq!(seg.rejoin("héllo wörld"), "héllo wörld");
    }

    #[test]
    fn token_unit_needs_adapter() {
        assert_eq!(segment("a b", LengthUnit::Token), Err(TextError::NoTokenizer));

        struct Bytes;
        impl TokenSpanner for Bytes {
            fn spans(&self, text: &str) -> Vec<Range<usize>> {
                (0..text.len()).map(|i| i..i + 1).collect()
            }
        }
        let seg = Segmenter::default().with_tokenizer(Arc::new(Bytes));
        assert_eq!(seg.count("abc", LengthUnit::Token).unwrap(), 3);
    }

    #[test]
    fn hyphenated_and_numbers_are_single_words() {
        assert_eq!(count_words("black-and-white 3.14 U.S.-based"), 3);
    }

    #[test]
    fn insertion_follows_boundary_rule() {
        let w = LengthUnit::Word;
        assert_eq!(insert_at_unit_boundary("a b c", w, 1, "@").unwrap(), "a @b c");
        assert_eq!(insert_at_unit_boundary("a b c", w, 0, "@").unwrap(), "@a b c");
        assert_eq!(insert_at_unit_boundary("a b c", w, 3, "@").unwrap(), "a b c@");
        assert_eq!(
            insert_at_unit_boundary("a b c", w, 4, "@"),
            Err(TextError::Boundary { index: 4, count: 3 })
        );
    }

    #[test]
    fn units_parse_from_names_and_codes() {
        assert_eq!("words".parse::<LengthUnit>().unwrap(), LengthUnit::Word);
        assert_eq!("s".parse::<LengthUnit>().unwrap(), LengthUnit::Sentence);
        assert!("bytes".parse::<LengthUnit>().is_err());
    }

    #[test]
    fn truncation_keeps_leading_words() {
        let mut ex = Example::new("1", "src", "one two  three four", Task::Dialogue);
        assert!(ex.truncate_reference(2));
        assert_eq!(ex.reference, "one two");
        assert!(!ex.truncate_reference(5));
    }

    #[test]
    fn example_jsonl_shape() {
        let line = r#"{"id":"a","source":"s","reference":"r","task":"dialogue"}"#;
        let ex: Example = serde_json::from_str(line).unwrap();
        assert_eq!(ex.task, Task::Dialogue);
        assert!(ex.meta.is_empty());
        assert_eq!(serde_json::to_string(&ex).unwrap(), line);
    }
}
