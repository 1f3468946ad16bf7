//! Remaining-length special tokens: rendering, stream parsing and the
//! placement schedule.
//!
//! A token `(major, minor)` claims `stride * major + minor` units remain.
//! Periodic tokens always have `minor == 0` and render in the compact form.

use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{char_offset, LengthUnit};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TokenError {
    #[error("malformed token: minor {minor} is not below stride {stride}")]
    MinorOutOfRange { minor: u32, stride: usize },
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("malformed special token at char {offset}: `{fragment}`")]
    Parse { offset: usize, fragment: String },
    #[error("invalid token template `{template}`: {reason}")]
    Template { template: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpecialToken {
    pub unit: LengthUnit,
    pub major: u32,
    pub minor: u32,
}

impl SpecialToken {
    pub fn new(unit: LengthUnit, major: u32, minor: u32) -> Self {
        Self { unit, major, minor }
    }

    /// The token announcing `remaining` units under `stride`.
    pub fn for_remaining(unit: LengthUnit, remaining: usize, stride: usize) -> Self {
        Self {
            unit,
            major: (remaining / stride) as u32,
            minor: (remaining % stride) as u32,
        }
    }

    pub fn terminator(unit: LengthUnit) -> Self {
        Self::new(unit, 0, 0)
    }

    pub fn is_terminator(&self) -> bool {
        self.major == 0 && self.minor == 0
    }

    /// Units left until the target: `stride * major + minor`.
    pub fn remaining(&self, stride: usize) -> Result<usize, TokenError> {
        if stride == 0 {
            return Err(TokenError::ZeroStride);
        }
        if self.minor as usize >= stride {
            return Err(TokenError::MinorOutOfRange { minor: self.minor, stride });
        }
        Ok(stride * self.major as usize + self.minor as usize)
    }
}

impl fmt::Display for SpecialToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.minor == 0 {
            write!(f, "|{}>_{}", self.major, self.unit.code())
        } else {
            write!(f, "|{}><{}|_{}", self.major, self.minor, self.unit.code())
        }
    }
}

/// Units after which each token of a single family is placed.
///
/// The opening token sits at unit 0. The next token follows after
/// `effective % stride` units, or after a full stride when that remainder is
/// zero (the opening token then doubles as the first periodic marker). The
/// last entry is always the terminator at `effective`.
pub fn schedule(unit: LengthUnit, effective: usize, stride: usize) -> Vec<(usize, SpecialToken)> {
    assert!(stride >= 1, "stride must be at least 1");
    let mut out = vec![(0, SpecialToken::for_remaining(unit, effective, stride))];
    if effective == 0 {
        return out;
    }
    let first = effective % stride;
    let mut at = if first == 0 { stride } else { first };
    while at <= effective {
        out.push((at, SpecialToken::new(unit, ((effective - at) / stride) as u32, 0)));
        at += stride;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Lit(String),
    Unit,
    Major,
    Minor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderingSpec {
    pub template: String,
    pub compact: String,
}

/// Wire format of special tokens.
///
/// `template` renders tokens with a nonzero minor and must contain
/// `{unit}`, `{major}` and `{minor}`; `compact` renders `minor == 0` and
/// omits `{minor}`. Both start with the same literal sigil, which is how
/// malformed tokens are spotted while parsing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RenderingSpec", into = "RenderingSpec")]
pub struct TokenRendering {
    template: String,
    compact: String,
    full_pieces: Vec<Piece>,
    compact_pieces: Vec<Piece>,
    sigil: String,
    full_re: Regex,
    compact_re: Regex,
}

impl PartialEq for TokenRendering {
    fn eq(&self, other: &Self) -> bool {
        self.template == other.template && self.compact == other.compact
    }
}

impl Default for TokenRendering {
    fn default() -> Self {
        Self::new("<|len:{unit}:{major}:{minor}|>", "<|len:{unit}:{major}|>")
            .expect("default templates are valid")
    }
}

impl TryFrom<RenderingSpec> for TokenRendering {
    type Error = TokenError;

    fn try_from(spec: RenderingSpec) -> Result<Self, Self::Error> {
        Self::new(&spec.template, &spec.compact)
    }
}

impl From<TokenRendering> for RenderingSpec {
    fn from(r: TokenRendering) -> Self {
        RenderingSpec { template: r.template, compact: r.compact }
    }
}

fn split_template(template: &str) -> Result<Vec<Piece>, TokenError> {
    let bad = |reason: &str| TokenError::Template {
        template: template.to_string(),
        reason: reason.to_string(),
    };
    let mut pieces = Vec::new();
    let mut rest = template;
    while !rest.is_empty() {
        match rest.find('{') {
            Some(0) => {
                let close = rest.find('}').ok_or_else(|| bad("unclosed placeholder"))?;
                pieces.push(match &rest[1..close] {
                    "unit" => Piece::Unit,
                    "major" => Piece::Major,
                    "minor" => Piece::Minor,
                    _ => return Err(bad("unknown placeholder")),
                });
                rest = &rest[close + 1..];
            }
            Some(i) => {
                pieces.push(Piece::Lit(rest[..i].to_string()));
                rest = &rest[i..];
            }
            None => {
                pieces.push(Piece::Lit(rest.to_string()));
                rest = "";
            }
        }
    }
    if template.chars().any(char::is_whitespace) {
        return Err(bad("templates may not contain whitespace"));
    }
    if !matches!(pieces.first(), Some(Piece::Lit(_))) || !matches!(pieces.last(), Some(Piece::Lit(_))) {
        return Err(bad("templates must start and end with literal text"));
    }
    for pair in pieces.windows(2) {
        if !matches!(pair[0], Piece::Lit(_)) && !matches!(pair[1], Piece::Lit(_)) {
            return Err(bad("adjacent placeholders need a literal separator"));
        }
    }
    for p in [Piece::Unit, Piece::Major, Piece::Minor] {
        if pieces.iter().filter(|q| **q == p).count() > 1 {
            return Err(bad("placeholders may appear once"));
        }
    }
    Ok(pieces)
}

fn pieces_regex(pieces: &[Piece]) -> Regex {
    let mut re = String::from("^");
    for p in pieces {
        match p {
            Piece::Lit(s) => re.push_str(&regex::escape(s)),
            Piece::Unit => re.push_str("(?P<unit>[wsct])"),
            Piece::Major => re.push_str("(?P<major>[0-9]{1,10})"),
            Piece::Minor => re.push_str("(?P<minor>[0-9]{1,10})"),
        }
    }
    Regex::new(&re).expect("escaped template compiles")
}

impl TokenRendering {
    pub fn new(template: &str, compact: &str) -> Result<Self, TokenError> {
        let full_pieces = split_template(template)?;
        let compact_pieces = split_template(compact)?;
        let has = |ps: &[Piece], p: Piece| ps.contains(&p);
        if !(has(&full_pieces, Piece::Unit) && has(&full_pieces, Piece::Major) && has(&full_pieces, Piece::Minor)) {
            return Err(TokenError::Template {
                template: template.into(),
                reason: "needs {unit}, {major} and {minor}".into(),
            });
        }
        if !(has(&compact_pieces, Piece::Unit) && has(&compact_pieces, Piece::Major))
            || has(&compact_pieces, Piece::Minor)
        {
            return Err(TokenError::Template {
                template: compact.into(),
                reason: "needs {unit} and {major} but not {minor}".into(),
            });
        }
        let (Piece::Lit(a), Piece::Lit(b)) = (&full_pieces[0], &compact_pieces[0]) else {
            unreachable!("checked by split_template")
        };
        if a != b {
            return Err(TokenError::Template {
                template: compact.into(),
                reason: "both templates must share the leading literal".into(),
            });
        }
        Ok(Self {
            template: template.into(),
            compact: compact.into(),
            sigil: a.clone(),
            full_re: pieces_regex(&full_pieces),
            compact_re: pieces_regex(&compact_pieces),
            full_pieces,
            compact_pieces,
        })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn compact_template(&self) -> &str {
        &self.compact
    }

    pub fn sigil(&self) -> &str {
        &self.sigil
    }

    pub fn render(&self, token: &SpecialToken) -> String {
        let pieces = if token.minor == 0 { &self.compact_pieces } else { &self.full_pieces };
        let mut out = String::new();
        for p in pieces {
            match p {
                Piece::Lit(s) => out.push_str(s),
                Piece::Unit => out.push(token.unit.code()),
                Piece::Major => out.push_str(&token.major.to_string()),
                Piece::Minor => out.push_str(&token.minor.to_string()),
            }
        }
        out
    }

    /// Matches one token at the start of `text`, returning it and its byte length.
    pub fn match_at(&self, text: &str) -> Option<(SpecialToken, usize)> {
        for re in [&self.full_re, &self.compact_re] {
            if let Some(caps) = re.captures(text) {
                let unit = LengthUnit::from_code(caps["unit"].chars().next()?)?;
                let major = caps["major"].parse().ok()?;
                let minor = caps.name("minor").map_or(Some(0), |m| m.as_str().parse().ok())?;
                return Some((SpecialToken { unit, major, minor }, caps[0].len()));
            }
        }
        None
    }

    pub fn parse(&self, text: &str) -> Result<SpecialToken, TokenError> {
        match self.match_at(text) {
            Some((tok, len)) if len == text.len() => Ok(tok),
            _ => Err(TokenError::Parse { offset: 0, fragment: text.to_string() }),
        }
    }

    pub fn contains_sigil(&self, text: &str) -> bool {
        text.contains(&self.sigil)
    }
}

/// A token found in a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocatedToken {
    pub token: SpecialToken,
    /// Byte offset in the stripped text where the token stood.
    pub offset: usize,
    /// Char offset of the token in the original text.
    pub source_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedStream {
    pub tokens: Vec<LocatedToken>,
    pub stripped: String,
}

impl ParsedStream {
    pub fn tokens_of(&self, unit: LengthUnit) -> impl Iterator<Item = &LocatedToken> {
        self.tokens.iter().filter(move |t| t.token.unit == unit)
    }
}

/// Extracts tokens left to right and removes them from the text.
///
/// Each token takes one adjacent space with it: the following one when
/// present, else the preceding one. A token wedged between two
/// non-whitespace characters is replaced by a single space.
pub fn parse_stream(text: &str, rendering: &TokenRendering) -> Result<ParsedStream, TokenError> {
    scan(text, rendering, true)
}

/// Like [`parse_stream`] but leaves malformed fragments in place as text.
pub fn strip_lenient(text: &str, rendering: &TokenRendering) -> ParsedStream {
    scan(text, rendering, false).expect("lenient scan does not fail")
}

fn scan(text: &str, rendering: &TokenRendering, strict: bool) -> Result<ParsedStream, TokenError> {
    let sigil = rendering.sigil();
    let mut tokens = Vec::new();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    let mut search = 0;
    while let Some(rel) = text[search..].find(sigil) {
        let at = search + rel;
        let Some((token, len)) = rendering.match_at(&text[at..]) else {
            if strict {
                let end = text[at..]
                    .find(char::is_whitespace)
                    .map_or(text.len(), |e| at + e);
                return Err(TokenError::Parse {
                    offset: char_offset(text, at),
                    fragment: text[at..end].to_string(),
                });
            }
            search = at + sigil.len();
            continue;
        };
        out.push_str(&text[cursor..at]);
        let end = at + len;
        let next = text[end..].chars().next();
        let mut resume = end;
        if next == Some(' ') {
            resume += 1;
        } else if out.ends_with(' ') {
            out.pop();
        } else if next.is_some_and(|c| !c.is_whitespace())
            && out.chars().next_back().is_some_and(|c| !c.is_whitespace())
        {
            out.push(' ');
        }
        let offset = out.len();
        tokens.push(LocatedToken { token, offset, source_offset: char_offset(text, at) });
        cursor = resume;
        search = resume;
    }
    out.push_str(&text[cursor..]);
    Ok(ParsedStream { tokens, stripped: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const W: LengthUnit = LengthUnit::Word;

    #[test]
    fn remaining_arithmetic() {
        assert_eq!(SpecialToken::new(W, 2, 5).remaining(10), Ok(25));
        assert_eq!(SpecialToken::new(W, 0, 0).remaining(20), Ok(0));
        assert_eq!(SpecialToken::new(W, 3, 7).remaining(20), Ok(67));
        assert_eq!(
            SpecialToken::new(W, 1, 10).remaining(10),
            Err(TokenError::MinorOutOfRange { minor: 10, stride: 10 })
        );
    }

    #[test]
    fn default_rendering() {
        let r = TokenRendering::default();
        assert_eq!(r.render(&SpecialToken::new(W, 2, 5)), "<|len:w:2:5|>");
        assert_eq!(r.render(&SpecialToken::new(W, 1, 0)), "<|len:w:1|>");
        assert_eq!(r.render(&SpecialToken::new(LengthUnit::Sentence, 0, 0)), "<|len:s:0|>");
    }

    #[test]
    fn schedule_for_worked_examples() {
        let positions = |l, d| schedule(W, l, d).into_iter().map(|(p, t)| (p, t.major, t.minor)).collect::<Vec<_>>();
        assert_eq!(positions(25, 10), vec![(0, 2, 5), (5, 2, 0), (15, 1, 0), (25, 0, 0)]);
        assert_eq!(positions(23, 10), vec![(0, 2, 3), (3, 2, 0), (13, 1, 0), (23, 0, 0)]);
        assert_eq!(positions(1, 20), vec![(0, 0, 1), (1, 0, 0)]);
        // Remainder zero: no duplicate marker right after the opening one.
        assert_eq!(positions(20, 10), vec![(0, 2, 0), (10, 1, 0), (20, 0, 0)]);
        assert_eq!(positions(43, 20), vec![(0, 2, 3), (3, 2, 0), (23, 1, 0), (43, 0, 0)]);
    }

    #[test]
    fn parse_single_and_plain() {
        let r = TokenRendering::default();
        let p = parse_stream("<|len:w:0|>hi", &r).unwrap();
        assert_eq!(p.stripped, "hi");
        assert_eq!(p.tokens.len(), 1);
        assert_eq!(p.tokens[0].token, SpecialToken::new(W, 0, 0));
        assert_eq!(p.tokens[0].source_offset, 0);

        let p = parse_stream("no tokens here", &r).unwrap();
        assert!(p.tokens.is_empty());
        assert_eq!(p.stripped, "no tokens here");
    }

    #[test]
    fn malformed_token_reports_offset() {
        let r = TokenRendering::default();
        let err = parse_stream("ab <|len:w:2:|> cd", &r).unwrap_err();
        assert_eq!(err, TokenError::Parse { offset: 3, fragment: "<|len:w:2:|>".into() });
        let lenient = strip_lenient("ab <|len:w:2:|> <|len:w:1|> cd", &r);
        assert_eq!(lenient.stripped, "ab <|len:w:2:|> cd");
        assert_eq!(lenient.tokens.len(), 1);
    }

    #[test]
    fn wedged_token_becomes_space() {
        let r = TokenRendering::default();
        let p = parse_stream("one<|len:w:1|>two", &r).unwrap();
        assert_eq!(p.stripped, "one two");
    }

    #[test]
    fn full_form_with_zero_minor_is_accepted() {
        let r = TokenRendering::default();
        assert_eq!(r.parse("<|len:w:3:0|>").unwrap(), SpecialToken::new(W, 3, 0));
        assert!(r.parse("<|len:x:3|>").is_err());
        assert!(r.parse("<|len:w:3|> ").is_err());
    }

    #[test]
    fn templates_are_checked() {
        assert!(TokenRendering::new("[{unit}{major}:{minor}]", "[{unit}:{major}]").is_err());
        assert!(TokenRendering::new("<L {unit}:{major}:{minor}>", "<L {unit}:{major}>").is_err());
        assert!(TokenRendering::new("<{unit}:{major}:{minor}>", "[{unit}:{major}]").is_err());
        assert!(TokenRendering::new("<{unit}:{major}:{minor}>", "<{unit}:{major}:{minor}>").is_err());
        let custom = TokenRendering::new("[[{unit}|{major}|{minor}]]", "[[{unit}|{major}]]").unwrap();
        let t = SpecialToken::new(LengthUnit::Character, 12, 3);
        assert_eq!(custom.render(&t), "[[c|12|3]]");
        assert_eq!(custom.parse("[[c|12|3]]").unwrap(), t);
    }

    #[test]
    fn rendering_round_trips_through_serde() {
        let r = TokenRendering::default();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"template":"<|len:{unit}:{major}:{minor}|>","compact":"<|len:{unit}:{major}|>"}"#);
        let back: TokenRendering = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<TokenRendering>(r#"{"template":"x","compact":"y"}"#).is_err());
    }

    fn any_unit() -> impl Strategy<Value = LengthUnit> {
        prop::sample::select(LengthUnit::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(unit in any_unit(), major in 0u32..1_000_000, minor in 0u32..1_000_000) {
            let r = TokenRendering::default();
            let t = SpecialToken::new(unit, major, minor);
            let s = r.render(&t);
            prop_assert!(!s.chars().any(char::is_whitespace));
            prop_assert_eq!(r.parse(&s).unwrap(), t);
        }

        #[test]
        fn schedule_decreases_to_zero(effective in 0usize..500, stride in 1usize..50) {
            let sched = schedule(W, effective, stride);
            prop_assert_eq!(sched[0].1.remaining(stride).unwrap(), effective);
            prop_assert!(sched.last().unwrap().1.is_terminator());
            for pair in sched.windows(2) {
                let (p0, t0) = pair[0];
                let (p1, t1) = pair[1];
                prop_assert!(p1 > p0);
                prop_assert_eq!(t0.remaining(stride).unwrap() - (p1 - p0), t1.remaining(stride).unwrap());
            }
        }
    }
}
