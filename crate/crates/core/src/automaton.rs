//! Counter automaton checking that a token-bearing text honours the
//! remaining-length protocol.

use serde::{Deserialize, Serialize};

use crate::config::HanselConfig;
use crate::text::{char_offset, LengthUnit, Segmentation};
use crate::token::{parse_stream, LocatedToken, ParsedStream, TokenError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Parse,
    Segmentation,
    UnexpectedUnit,
    MissingOpening,
    OpeningNotAtStart,
    Malformed,
    Spacing,
    Count,
    NonPeriodic,
    AfterTerminator,
    MissingTerminator,
    ResidualExceeded,
    UnexpectedToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Char offset into the checked text.
    pub position: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AutomatonVerdict {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl AutomatonVerdict {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self { ok: violations.is_empty(), violations }
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Checks every configured unit family of a token-bearing text.
pub fn validate(text: &str, cfg: &HanselConfig) -> AutomatonVerdict {
    let parsed = match parse_stream(text, &cfg.rendering) {
        Ok(p) => p,
        Err(e) => return parse_failure(e),
    };
    let mut violations = Vec::new();
    for t in &parsed.tokens {
        if !cfg.units.contains(&t.token.unit) {
            violations.push(Violation {
                position: t.source_offset,
                kind: ViolationKind::UnexpectedUnit,
                detail: format!("token {} has unit {} which is not configured", t.token, t.token.unit),
            });
        }
    }
    let segmenter = cfg.segmenter();
    for unit in cfg.families() {
        match segmenter.segment(&parsed.stripped, unit) {
            Ok(seg) => check_family(
                &parsed,
                &seg,
                cfg.stride_for(unit),
                cfg.max_residual,
                text,
                &mut violations,
            ),
            Err(e) => violations.push(Violation {
                position: 0,
                kind: ViolationKind::Segmentation,
                detail: e.to_string(),
            }),
        }
    }
    AutomatonVerdict::from_violations(violations)
}

/// Checks that a text carries no special tokens at all.
pub fn validate_plain(text: &str, cfg: &HanselConfig) -> AutomatonVerdict {
    match parse_stream(text, &cfg.rendering) {
        Err(e) => parse_failure(e),
        Ok(parsed) => AutomatonVerdict::from_violations(
            parsed
                .tokens
                .iter()
                .map(|t| Violation {
                    position: t.source_offset,
                    kind: ViolationKind::UnexpectedToken,
                    detail: format!("special token {} in a record without length tokens", t.token),
                })
                .collect(),
        ),
    }
}

fn parse_failure(e: TokenError) -> AutomatonVerdict {
    let position = match &e {
        TokenError::Parse { offset, .. } => *offset,
        _ => 0,
    };
    AutomatonVerdict::from_violations(vec![Violation {
        position,
        kind: ViolationKind::Parse,
        detail: e.to_string(),
    }])
}

fn check_family(
    parsed: &ParsedStream,
    seg: &Segmentation,
    stride: usize,
    max_residual: usize,
    text: &str,
    out: &mut Vec<Violation>,
) {
    let unit = seg.unit;
    let tokens: Vec<&LocatedToken> = parsed.tokens_of(unit).collect();
    let mut push = |position: usize, kind: ViolationKind, detail: String| {
        out.push(Violation { position, kind, detail })
    };
    let Some(opening) = tokens.first() else {
        push(0, ViolationKind::MissingOpening, format!("no {unit} tokens found"));
        return;
    };
    let claim = |t: &LocatedToken| stride * t.token.major as usize + t.token.minor as usize;

    if opening.token.minor as usize >= stride {
        push(
            opening.source_offset,
            ViolationKind::Malformed,
            format!("opening token {} has minor >= stride {stride}", opening.token),
        );
    }
    let opening_at = seg.units_before(opening.offset);
    if opening_at != 0 {
        push(
            opening.source_offset,
            ViolationKind::OpeningNotAtStart,
            format!("opening {unit} token follows {opening_at} {}", unit.plural()),
        );
    }
    let effective = claim(opening);
    let mut remaining = effective;
    let mut prev_at = opening_at;
    let mut terminated_at = (remaining == 0).then_some(opening_at);

    for (i, t) in tokens.iter().enumerate().skip(1) {
        let at = seg.units_before(t.offset);
        if terminated_at.is_some() {
            push(
                t.source_offset,
                ViolationKind::AfterTerminator,
                format!("token {} after the terminator", t.token),
            );
            continue;
        }
        let gap = at - prev_at;
        let expected_gap = if i == 1 && effective % stride != 0 {
            effective % stride
        } else {
            stride
        };
        if gap != expected_gap {
            push(
                t.source_offset,
                ViolationKind::Spacing,
                format!("{gap} {} since previous token, expected {expected_gap}", unit.plural()),
            );
        }
        if t.token.minor != 0 {
            push(
                t.source_offset,
                ViolationKind::NonPeriodic,
                format!("periodic token {} carries a nonzero minor", t.token),
            );
        }
        let claimed = claim(t);
        if remaining.checked_sub(gap) != Some(claimed) {
            push(
                t.source_offset,
                ViolationKind::Count,
                format!(
                    "token claims {claimed} remaining but {remaining} - {gap} {} were emitted",
                    unit.plural()
                ),
            );
        }
        remaining = claimed;
        prev_at = at;
        if claimed == 0 {
            terminated_at = Some(at);
        }
    }

    match terminated_at {
        None => push(
            char_offset(text, text.len()),
            ViolationKind::MissingTerminator,
            format!("stream ends with {remaining} {} still claimed", unit.plural()),
        ),
        Some(at) => {
            let residual = seg.count() - at;
            if residual > max_residual {
                push(
                    char_offset(text, text.len()),
                    ViolationKind::ResidualExceeded,
                    format!("residual {residual} > max residual {max_residual}"),
                );
            }
        }
    }
}

/// Units of `unit` each token is preceded by, in stream order.
pub fn token_positions(parsed: &ParsedStream, seg: &Segmentation) -> Vec<usize> {
    parsed.tokens_of(seg.unit).map(|t| seg.units_before(t.offset)).collect()
}

/// The remaining-length claims of one family, in order.
pub fn claims(parsed: &ParsedStream, unit: LengthUnit, stride: usize) -> Vec<usize> {
    parsed
        .tokens_of(unit)
        .map(|t| stride * t.token.major as usize + t.token.minor as usize)
        .collect()
}
