//! Building hansel, gretel and vanilla training records.
//!
//! * hansel: the reference interleaved with remaining-length tokens, prompt
//!   without a length clause (the opening token carries the length).
//! * gretel: the reference verbatim, prompt with a length clause.
//! * vanilla: the reference verbatim, prompt without length information.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, HanselConfig};
use crate::text::{char_offset, Example, LengthUnit, Segmentation, Task, TextError};
use crate::token::{schedule, SpecialToken};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("example `{0}` has an empty reference")]
    EmptyReference(String),
    #[error("example `{id}`: residual {residual} not allowed (max residual {max}, length {length})")]
    Residual { id: String, residual: usize, max: usize, length: usize },
    #[error("example `{0}`: reference already contains special-token markup")]
    ContainsMarkup(String),
    #[error("duplicate example id `{0}`")]
    DuplicateId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Hansel,
    Gretel,
    Vanilla,
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Framework::Hansel => "hansel",
            Framework::Gretel => "gretel",
            Framework::Vanilla => "vanilla",
        })
    }
}

impl FromStr for Framework {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hansel" => Ok(Framework::Hansel),
            "gretel" => Ok(Framework::Gretel),
            "vanilla" => Ok(Framework::Vanilla),
            other => Err(format!("unknown framework `{other}`")),
        }
    }
}

/// How an inference context is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMode {
    /// Length clause plus the opening special token as generation prefix.
    Hansel,
    /// Length clause only.
    Gretel,
    /// No length information.
    Vanilla,
    /// A vanilla-trained model prompted with the length clause.
    VanillaStar,
}

impl From<Framework> for InferenceMode {
    fn from(f: Framework) -> Self {
        match f {
            Framework::Hansel => InferenceMode::Hansel,
            Framework::Gretel => InferenceMode::Gretel,
            Framework::Vanilla => InferenceMode::Vanilla,
        }
    }
}

/// One training record. Offsets are Unicode scalar offsets into `output`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub id: String,
    pub framework: Framework,
    pub task: Task,
    pub source: String,
    pub prompt: String,
    pub output: String,
    /// Reference length in the primary unit (finest unit in multi-unit mode).
    pub target_length: usize,
    pub effective_length: usize,
    pub residual: usize,
    /// Char offset of the terminating token; hansel records only.
    pub mask_anchor: Option<usize>,
    /// Model tokens to mask before the anchor; hansel records only.
    pub mask_n: Option<usize>,
    /// Unit name, or comma-joined family names in multi-unit mode.
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_lengths: Option<BTreeMap<LengthUnit, usize>>,
}

impl AugmentedExample {
    pub fn units(&self) -> Result<Vec<LengthUnit>, TextError> {
        self.unit.split(',').map(str::parse).collect()
    }

    /// Prompt and output as one training stream.
    pub fn training_text(&self) -> String {
        format!("{} {}", self.prompt, self.output)
    }
}

fn unit_label(units: &[LengthUnit]) -> String {
    units.iter().map(|u| u.name()).collect::<Vec<_>>().join(",")
}

/// One token placed in a text: before unit `index`, or after the last unit
/// when `index == count`.
struct Placement {
    family: usize,
    index: usize,
    token: SpecialToken,
}

/// Renders `text` with tokens inserted, returning the output and the byte
/// offset at which each placement's token starts.
fn interleave(
    text: &str,
    segs: &[&Segmentation],
    placements: &[Placement],
    cfg: &HanselConfig,
) -> (String, Vec<usize>) {
    // (byte offset, at end, family, order)
    let mut keyed: Vec<(usize, bool, usize, usize)> = placements
        .iter()
        .enumerate()
        .map(|(order, p)| {
            let seg = segs[p.family];
            match seg.spans.get(p.index) {
                Some(span) => (span.start, false, p.family, order),
                None => (seg.spans.last().map_or(0, |s| s.end), true, p.family, order),
            }
        })
        .collect();
    keyed.sort_by_key(|&(offset, _, family, order)| (offset, family, order));

    let mut out = String::with_capacity(text.len() + placements.len() * 16);
    let mut starts = vec![0; placements.len()];
    let mut cursor = 0;
    for (offset, at_end, _, order) in keyed {
        out.push_str(&text[cursor..offset]);
        cursor = offset;
        let rendered = cfg.rendering.render(&placements[order].token);
        if at_end {
            out.push(' ');
            starts[order] = out.len();
            out.push_str(&rendered);
        } else {
            starts[order] = out.len();
            out.push_str(&rendered);
            out.push(' ');
        }
    }
    out.push_str(&text[cursor..]);
    (out, starts)
}

fn check_reference(ex: &Example, cfg: &HanselConfig) -> Result<(), AugmentError> {
    if ex.reference.trim().is_empty() {
        return Err(AugmentError::EmptyReference(ex.id.clone()));
    }
    if cfg.rendering.contains_sigil(&ex.reference) {
        return Err(AugmentError::ContainsMarkup(ex.id.clone()));
    }
    Ok(())
}

/// Hansel record for the primary unit with `residual` units left after the
/// terminating token.
pub fn augment_hansel(
    ex: &Example,
    cfg: &HanselConfig,
    residual: usize,
) -> Result<AugmentedExample, AugmentError> {
    check_reference(ex, cfg)?;
    let unit = cfg.unit();
    let stride = cfg.stride_for(unit);
    if stride == 0 {
        return Err(ConfigError::Stride(0).into());
    }
    let seg = cfg.segmenter().segment(&ex.reference, unit)?;
    let length = seg.count();
    if length == 0 {
        return Err(AugmentError::EmptyReference(ex.id.clone()));
    }
    if residual > cfg.max_residual || residual >= length {
        return Err(AugmentError::Residual {
            id: ex.id.clone(),
            residual,
            max: cfg.max_residual,
            length,
        });
    }
    let effective = length - residual;
    let placements: Vec<Placement> = schedule(unit, effective, stride)
        .into_iter()
        .map(|(index, token)| Placement { family: 0, index, token })
        .collect();
    let (output, starts) = interleave(&ex.reference, &[&seg], &placements, cfg);
    let anchor = char_offset(&output, *starts.last().expect("schedule ends with a terminator"));
    Ok(AugmentedExample {
        id: ex.id.clone(),
        framework: Framework::Hansel,
        task: ex.task,
        source: ex.source.clone(),
        prompt: cfg.prompts.base(ex.task).to_string(),
        output,
        target_length: length,
        effective_length: effective,
        residual,
        mask_anchor: Some(anchor),
        mask_n: Some(cfg.mask_n),
        unit: unit.name().to_string(),
        target_lengths: None,
    })
}

/// Hansel record with one token family per configured unit.
///
/// Families are emitted coarse to fine; tokens due at the same boundary
/// follow that order. A single-unit config gives the same record as
/// [`augment_hansel`] with residual 0.
pub fn augment_multi_unit(ex: &Example, cfg: &HanselConfig) -> Result<AugmentedExample, AugmentError> {
    if !cfg.is_multi_unit() {
        return augment_hansel(ex, cfg, 0);
    }
    check_reference(ex, cfg)?;
    let families = cfg.families();
    let segmenter = cfg.segmenter();
    let segs = families
        .iter()
        .map(|u| segmenter.segment(&ex.reference, *u))
        .collect::<Result<Vec<_>, _>>()?;
    if segs.iter().any(Segmentation::is_empty) {
        return Err(AugmentError::EmptyReference(ex.id.clone()));
    }
    let mut placements = Vec::new();
    for (family, (unit, seg)) in families.iter().zip(&segs).enumerate() {
        let stride = cfg.stride_for(*unit);
        if stride == 0 {
            return Err(ConfigError::Stride(0).into());
        }
        placements.extend(
            schedule(*unit, seg.count(), stride)
                .into_iter()
                .map(|(index, token)| Placement { family, index, token }),
        );
    }
    let seg_refs: Vec<&Segmentation> = segs.iter().collect();
    let (output, starts) = interleave(&ex.reference, &seg_refs, &placements, cfg);
    let finest = segs.len() - 1;
    let terminator = placements
        .iter()
        .rposition(|p| p.family == finest && p.token.is_terminator())
        .expect("every family ends with a terminator");
    let length = segs[finest].count();
    Ok(AugmentedExample {
        id: ex.id.clone(),
        framework: Framework::Hansel,
        task: ex.task,
        source: ex.source.clone(),
        prompt: cfg.prompts.base(ex.task).to_string(),
        output: output.clone(),
        target_length: length,
        effective_length: length,
        residual: 0,
        mask_anchor: Some(char_offset(&output, starts[terminator])),
        mask_n: Some(cfg.mask_n),
        unit: unit_label(&families),
        target_lengths: Some(families.iter().zip(&segs).map(|(u, s)| (*u, s.count())).collect()),
    })
}

fn lengths(ex: &Example, cfg: &HanselConfig) -> Result<Vec<(LengthUnit, usize)>, AugmentError> {
    check_reference(ex, cfg)?;
    let segmenter = cfg.segmenter();
    let out = cfg
        .families()
        .into_iter()
        .map(|u| Ok((u, segmenter.count(&ex.reference, u)?)))
        .collect::<Result<Vec<_>, TextError>>()?;
    if out.iter().any(|(_, n)| *n == 0) {
        return Err(AugmentError::EmptyReference(ex.id.clone()));
    }
    Ok(out)
}

fn plain_record(
    ex: &Example,
    cfg: &HanselConfig,
    framework: Framework,
    prompt: String,
    targets: &[(LengthUnit, usize)],
) -> AugmentedExample {
    let length = targets.last().map_or(0, |t| t.1);
    AugmentedExample {
        id: ex.id.clone(),
        framework,
        task: ex.task,
        source: ex.source.clone(),
        prompt,
        output: ex.reference.clone(),
        target_length: length,
        effective_length: length,
        residual: 0,
        mask_anchor: None,
        mask_n: None,
        unit: unit_label(&cfg.families()),
        target_lengths: (targets.len() > 1).then(|| targets.iter().copied().collect()),
    }
}

pub fn augment_gretel(ex: &Example, cfg: &HanselConfig) -> Result<AugmentedExample, AugmentError> {
    let targets = lengths(ex, cfg)?;
    let prompt = cfg.prompts.with_length(ex.task, &targets);
    Ok(plain_record(ex, cfg, Framework::Gretel, prompt, &targets))
}

pub fn augment_vanilla(ex: &Example, cfg: &HanselConfig) -> Result<AugmentedExample, AugmentError> {
    let targets = lengths(ex, cfg)?;
    let prompt = cfg.prompts.base(ex.task).to_string();
    Ok(plain_record(ex, cfg, Framework::Vanilla, prompt, &targets))
}

// Distinct streams so residual draws do not shift when the mix changes.
const RESIDUAL_SELECT_STREAM: u64 = 0x7265_7369_6475_616c;
const RESIDUAL_VALUE_STREAM: u64 = 0x7661_6c75_6573_0001;
const MIX_STREAM: u64 = 0x6d69_7800_0000_0001;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Residual per example id.
///
/// `round(residual_fraction * eligible)` examples among those with at least
/// `max_residual + 1` units are chosen at random; the chosen ones get
/// residuals 1..=max_residual in equal shares (a shuffled cycle), everything
/// else gets 0.
pub fn assign_residuals(
    corpus: &[Example],
    cfg: &HanselConfig,
) -> Result<BTreeMap<String, usize>, AugmentError> {
    let mut out: BTreeMap<String, usize> = BTreeMap::new();
    let unit = cfg.unit();
    let segmenter = cfg.segmenter();
    let mut eligible = Vec::new();
    for ex in corpus {
        if out.insert(ex.id.clone(), 0).is_some() {
            return Err(AugmentError::DuplicateId(ex.id.clone()));
        }
        if cfg.max_residual > 0 && segmenter.count(&ex.reference, unit)? > cfg.max_residual {
            eligible.push(ex.id.as_str());
        }
    }
    if cfg.max_residual == 0 || eligible.is_empty() {
        return Ok(out);
    }
    let take = ((cfg.residual_fraction * eligible.len() as f64).round() as usize).min(eligible.len());
    eligible.shuffle(&mut rng(cfg.seed, RESIDUAL_SELECT_STREAM));
    let chosen = &mut eligible[..take];
    chosen.shuffle(&mut rng(cfg.seed, RESIDUAL_VALUE_STREAM));
    for (i, id) in chosen.iter().enumerate() {
        out.insert((*id).to_string(), 1 + i % cfg.max_residual);
    }
    Ok(out)
}

/// Splits `total` over `fractions` with the largest-remainder method.
/// Ties go to the earlier bucket.
pub fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let sum: f64 = fractions.iter().sum();
    if total == 0 || sum <= 0.0 {
        return vec![0; fractions.len()];
    }
    let quotas: Vec<f64> = fractions.iter().map(|f| f / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: String,
    pub framework: Framework,
    pub residual: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub target: Framework,
    pub total: usize,
    pub counts: BTreeMap<Framework, usize>,
    pub residual_counts: BTreeMap<usize, usize>,
    pub seed: u64,
    pub warnings: Vec<String>,
    pub provenance: Vec<Provenance>,
}

/// Builds the training mix for `target` and its manifest.
///
/// hansel: `vanilla_fraction` vanilla, then `gretel_fraction` of the rest
/// gretel, remainder hansel. gretel: `vanilla_fraction` vanilla, rest gretel.
/// vanilla: everything vanilla. Records keep corpus order.
pub fn compose_mix(
    corpus: &[Example],
    cfg: &HanselConfig,
    target: Framework,
) -> Result<(Vec<AugmentedExample>, MixManifest), AugmentError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(AugmentError::EmptyCorpus);
    }
    let mut seen = HashSet::new();
    for ex in corpus {
        if !seen.insert(ex.id.as_str()) {
            return Err(AugmentError::DuplicateId(ex.id.clone()));
        }
    }

    let v = cfg.vanilla_fraction;
    let (buckets, fractions): (Vec<Framework>, Vec<f64>) = match target {
        Framework::Hansel => (
            vec![Framework::Vanilla, Framework::Gretel, Framework::Hansel],
            vec![v, (1.0 - v) * cfg.gretel_fraction, (1.0 - v) * (1.0 - cfg.gretel_fraction)],
        ),
        Framework::Gretel => (vec![Framework::Vanilla, Framework::Gretel], vec![v, 1.0 - v]),
        Framework::Vanilla => (vec![Framework::Vanilla], vec![1.0]),
    };
    let n = corpus.len();
    let sizes = largest_remainder(n, &fractions);
    let mut warnings = Vec::new();
    for ((fw, f), size) in buckets.iter().zip(&fractions).zip(&sizes) {
        if *f > 0.0 && *size == 0 {
            warnings.push(format!(
                "corpus of {n} is too small for the {fw} share {:.3}; bucket left empty",
                f
            ));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(cfg.seed, MIX_STREAM));
    let mut assignment = vec![Framework::Vanilla; n];
    let mut cursor = 0;
    for (fw, size) in buckets.iter().zip(&sizes) {
        for &i in &order[cursor..cursor + size] {
            assignment[i] = *fw;
        }
        cursor += size;
    }

    let hansel_examples: Vec<Example> = corpus
        .iter()
        .zip(&assignment)
        .filter(|(_, fw)| **fw == Framework::Hansel)
        .map(|(ex, _)| ex.clone())
        .collect();
    let residuals = if cfg.is_multi_unit() {
        BTreeMap::new()
    } else {
        assign_residuals(&hansel_examples, cfg)?
    };

    let mut records = Vec::with_capacity(n);
    let mut counts = BTreeMap::new();
    let mut residual_counts = BTreeMap::new();
    let mut provenance = Vec::with_capacity(n);
    for (ex, fw) in corpus.iter().zip(&assignment) {
        let record = match fw {
            Framework::Hansel if cfg.is_multi_unit() => augment_multi_unit(ex, cfg)?,
            Framework::Hansel => augment_hansel(ex, cfg, residuals.get(&ex.id).copied().unwrap_or(0))?,
            Framework::Gretel => augment_gretel(ex, cfg)?,
            Framework::Vanilla => augment_vanilla(ex, cfg)?,
        };
        *counts.entry(*fw).or_insert(0) += 1;
        if *fw == Framework::Hansel {
            *residual_counts.entry(record.residual).or_insert(0) += 1;
        }
        provenance.push(Provenance { id: ex.id.clone(), framework: *fw, residual: record.residual });
        records.push(record);
    }
    for fw in &buckets {
        counts.entry(*fw).or_insert(0);
    }
    let manifest = MixManifest {
        target,
        total: n,
        counts,
        residual_counts,
        seed: cfg.seed,
        warnings,
        provenance,
    };
    Ok((records, manifest))
}

/// Context handed to a generator: source, prompt and (hansel) the opening token.
pub fn build_inference_context(
    source: &str,
    task: Task,
    target_length: usize,
    mode: InferenceMode,
    cfg: &HanselConfig,
) -> String {
    build_inference_context_multi(source, task, &[(cfg.unit(), target_length)], mode, cfg)
}

pub fn build_inference_context_multi(
    source: &str,
    task: Task,
    targets: &[(LengthUnit, usize)],
    mode: InferenceMode,
    cfg: &HanselConfig,
) -> String {
    let mut targets = targets.to_vec();
    targets.sort_by_key(|(u, _)| u.coarseness_rank());
    let prompt = match mode {
        InferenceMode::Vanilla => cfg.prompts.base(task).to_string(),
        _ => cfg.prompts.with_length(task, &targets),
    };
    let mut context = format!("{source}\n{prompt}");
    if mode == InferenceMode::Hansel {
        for (unit, length) in &targets {
            let token = SpecialToken::for_remaining(*unit, *length, cfg.stride_for(*unit));
            context.push(' ');
            context.push_str(&cfg.rendering.render(&token));
        }
    }
    context
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::validate;
    use crate::token::parse_stream;

    const CNNDM: &str = "Famous American foods created across United States. Connecticut diner claims creation of the hamburger. Onion rings were courtesy of cook at Pig Stand in Texas.";
    const ORCA_SOURCE: &str = "The orca (Orcinus orca), or killer whale, is a toothed whale that is the largest member of the oceanic dolphin family. It is the only extant species in the genus Orcinus. Orcas are recognizable by their black-and-white patterned body.";
    const ORCA_SUMMARY: &str = "Orcas are the largest member of the oceanic dolphin family. They are also known as killer whales.";

    fn cnndm() -> Example {
        Example::new("cnndm-0", "article", CNNDM, Task::Summarization)
    }

    fn orca() -> Example {
        Example::new("orca", ORCA_SOURCE, ORCA_SUMMARY, Task::Summarization)
    }

    #[test]
    fn hansel_golden_residual_zero() {
        let cfg = HanselConfig::default().with_stride(10, 0);
        let rec = augment_hansel(&cnndm(), &cfg, 0).unwrap();
        assert_eq!(
            rec.output,
            "<|len:w:2:5|> Famous American foods created across <|len:w:2|> United States. Connecticut diner claims creation of the hamburger. Onion <|len:w:1|> rings were courtesy of cook at Pig Stand in Texas. <|len:w:0|>"
        );
        assert_eq!((rec.target_length, rec.effective_length, rec.residual), (25, 25, 0));
        assert_eq!(rec.mask_anchor, Some(rec.output.find("<|len:w:0|>").unwrap()));
        assert_eq!(rec.mask_n, Some(10));
        assert_eq!(rec.prompt, "Summarize.");
    }

    #[test]
    fn hansel_golden_residual_two() {
        let cfg = HanselConfig::default().with_stride(10, 2);
        let rec = augment_hansel(&cnndm(), &cfg, 2).unwrap();
        assert_eq!(
            rec.output,
            "<|len:w:2:3|> Famous American foods <|len:w:2|> created across United States. Connecticut diner claims creation of the <|len:w:1|> hamburger. Onion rings were courtesy of cook at Pig Stand <|len:w:0|> in Texas."
        );
        assert_eq!((rec.target_length, rec.effective_length, rec.residual), (25, 23, 2));
        assert!(validate(&rec.output, &cfg).ok);
    }

    #[test]
    fn orca_training_example_with_residual_one() {
        let cfg = HanselConfig::default().with_stride(10, 1);
        let rec = augment_hansel(&orca(), &cfg, 1).unwrap();
        assert_eq!(
            rec.output,
            "<|len:w:1:6|> Orcas are the largest member of <|len:w:1|> the oceanic dolphin family. They are also known as killer <|len:w:0|> whales."
        );
    }

    #[test]
    fn one_word_reference() {
        let cfg = HanselConfig::default().with_stride(20, 0);
        let ex = Example::new("hi", "s", "Hi.", Task::Dialogue);
        let rec = augment_hansel(&ex, &cfg, 0).unwrap();
        assert_eq!(rec.output, "<|len:w:0:1|> Hi. <|len:w:0|>");
        assert_eq!(rec.prompt, "Reply.");
    }

    #[test]
    fn hansel_errors() {
        let cfg = HanselConfig::default().with_stride(10, 2);
        let empty = Example::new("e", "s", "  ", Task::Dialogue);
        assert_eq!(augment_hansel(&empty, &cfg, 0), Err(AugmentError::EmptyReference("e".into())));
        assert!(matches!(augment_hansel(&cnndm(), &cfg, 3), Err(AugmentError::Residual { .. })));
        let short = Example::new("s", "s", "two words", Task::Dialogue);
        assert!(matches!(augment_hansel(&short, &cfg, 2), Err(AugmentError::Residual { .. })));
        let marked = Example::new("m", "s", "a <|len:w:0|>", Task::Dialogue);
        assert_eq!(augment_hansel(&marked, &cfg, 0), Err(AugmentError::ContainsMarkup("m".into())));
    }

    #[test]
    fn gretel_and_vanilla_prompts() {
        let cfg = HanselConfig::default();
        let g = augment_gretel(&orca(), &cfg).unwrap();
        assert_eq!(g.prompt, "Summarize. Answer in 17 words.");
        assert_eq!(g.output, ORCA_SUMMARY);
        assert_eq!(g.target_length, 17);
        assert_eq!(g.mask_anchor, None);

        let v = augment_vanilla(&orca(), &cfg).unwrap();
        assert_eq!(v.prompt, "Summarize.");
        assert_eq!(v.output.as_bytes(), ORCA_SUMMARY.as_bytes());

        let dialogue = Example::new(
            "mw",
            "A: I actually need a place that has free wifi and is in the south part of town.",
            "There are 5 guesthouses and 1 hotel that fit your needs, would you like me to book one?",
            Task::Dialogue,
        );
        let g = augment_gretel(&dialogue, &cfg).unwrap();
        assert_eq!(g.target_length, 18);
        assert_eq!(g.prompt, "Reply in 18 words.");
        assert_eq!(augment_vanilla(&dialogue, &cfg).unwrap().prompt, "Reply.");

        let one = Example::new("1", "s", "Yes.", Task::Summarization);
        assert_eq!(augment_gretel(&one, &cfg).unwrap().prompt, "Summarize. Answer in 1 words.");
        let none = Example::new("0", "s", "", Task::Summarization);
        assert!(augment_vanilla(&none, &cfg).is_err());
    }

    #[test]
    fn multi_unit_two_families() {
        let mut cfg = HanselConfig::default().with_stride(20, 0);
        cfg.units = vec![LengthUnit::Sentence, LengthUnit::Word];
        cfg.unit_strides.insert(LengthUnit::Sentence, 5);
        let ex = Example::new("m", "s", "Hi. Bye now.", Task::Dialogue);
        let rec = augment_multi_unit(&ex, &cfg).unwrap();
        assert_eq!(rec.output, "<|len:s:0:2|> <|len:w:0:3|> Hi. Bye now. <|len:s:0|> <|len:w:0|>");
        assert_eq!(rec.unit, "sentence,word");
        assert_eq!(rec.mask_anchor, Some(rec.output.find("<|len:w:0|>").unwrap()));
        assert!(validate(&rec.output, &cfg).ok);

        cfg.unit_strides.insert(LengthUnit::Sentence, 1);
        let rec = augment_multi_unit(&ex, &cfg);
        // stride 1 with residual 0 is valid; a sentence token follows "Hi."
        let rec = rec.unwrap();
        assert_eq!(
            rec.output,
            "<|len:s:2|> <|len:w:0:3|> Hi. <|len:s:1|> Bye now. <|len:s:0|> <|len:w:0|>"
        );
        assert!(validate(&rec.output, &cfg).ok);
        assert_eq!(parse_stream(&rec.output, &cfg.rendering).unwrap().stripped, "Hi. Bye now.");
    }

    #[test]
    fn multi_unit_order_ignores_config_order() {
        let mut cfg = HanselConfig::default().with_stride(20, 0);
        cfg.units = vec![LengthUnit::Word, LengthUnit::Sentence];
        let ex = Example::new("m", "s", "Hi. Bye now.", Task::Dialogue);
        assert!(augment_multi_unit(&ex, &cfg).unwrap().output.starts_with("<|len:s:0:2|> <|len:w:0:3|>"));
    }

    #[test]
    fn single_unit_multi_is_plain_hansel() {
        let cfg = HanselConfig::default().with_stride(10, 0);
        assert_eq!(augment_multi_unit(&cnndm(), &cfg), augment_hansel(&cnndm(), &cfg, 0));
    }

    #[test]
    fn multi_unit_prompt_clause() {
        let cfg = HanselConfig::default();
        let ctx = build_inference_context_multi(
            "A: Have you any round-neck sweater?",
            Task::Dialogue,
            &[(LengthUnit::Word, 20), (LengthUnit::Sentence, 4)],
            InferenceMode::Gretel,
            &cfg,
        );
        assert!(ctx.ends_with("Reply in 4 sentences and 20 words."));
    }

    #[test]
    fn inference_contexts() {
        let cfg = HanselConfig::default().with_stride(10, 1);
        let ctx = build_inference_context(ORCA_SOURCE, Task::Summarization, 23, InferenceMode::Hansel, &cfg);
        assert_eq!(ctx, format!("{ORCA_SOURCE}\nSummarize. Answer in 23 words. <|len:w:2:3|>"));
        let ctx = build_inference_context(ORCA_SOURCE, Task::Summarization, 23, InferenceMode::Gretel, &cfg);
        assert!(ctx.ends_with("Summarize. Answer in 23 words."));
        let ctx = build_inference_context(ORCA_SOURCE, Task::Summarization, 23, InferenceMode::VanillaStar, &cfg);
        assert!(ctx.ends_with("Summarize. Answer in 23 words."));
        let ctx = build_inference_context(ORCA_SOURCE, Task::Summarization, 5, InferenceMode::Vanilla, &cfg);
        assert!(ctx.ends_with("\nSummarize."));
        assert!(!ctx.contains("<|len"));

        let cfg20 = HanselConfig::default().with_stride(20, 1);
        let ctx = build_inference_context("src", Task::Summarization, 20, InferenceMode::Hansel, &cfg20);
        assert!(ctx.ends_with(" <|len:w:1|>"));
    }

    fn synthetic(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| {
                let words = 1 + (i * 7919) % 60;
                let reference = (0..words).map(|j| format!("w{}", j % 13)).collect::<Vec<_>>().join(" ");
                Example::new(format!("ex{i}"), "source", reference, Task::Summarization)
            })
            .collect()
    }

    #[test]
    fn mix_ratios() {
        let corpus = synthetic(1000);
        let cfg = HanselConfig::default();
        let (records, manifest) = compose_mix(&corpus, &cfg, Framework::Hansel).unwrap();
        assert_eq!(manifest.counts[&Framework::Vanilla], 200);
        assert_eq!(manifest.counts[&Framework::Gretel], 160);
        assert_eq!(manifest.counts[&Framework::Hansel], 640);
        assert_eq!(records.len(), 1000);
        assert!(records.iter().zip(&corpus).all(|(r, e)| r.id == e.id));

        let (_, manifest) = compose_mix(&corpus, &cfg, Framework::Gretel).unwrap();
        assert_eq!(manifest.counts[&Framework::Vanilla], 200);
        assert_eq!(manifest.counts[&Framework::Gretel], 800);

        let no_vanilla = HanselConfig { vanilla_fraction: 0.0, ..cfg.clone() };
        let (_, manifest) = compose_mix(&corpus, &no_vanilla, Framework::Gretel).unwrap();
        assert_eq!(manifest.counts[&Framework::Vanilla], 0);
        assert_eq!(manifest.counts[&Framework::Gretel], 1000);
    }

    #[test]
    fn tiny_corpus_warns() {
        let corpus = synthetic(1);
        let (records, manifest) = compose_mix(&corpus, &HanselConfig::default(), Framework::Hansel).unwrap();
        assert_eq!(records[0].framework, Framework::Hansel);
        assert_eq!(manifest.warnings.len(), 2);
    }

    #[test]
    fn mix_rejects_duplicates_and_empty() {
        let mut corpus = synthetic(3);
        corpus[2].id = corpus[0].id.clone();
        assert!(matches!(
            compose_mix(&corpus, &HanselConfig::default(), Framework::Hansel),
            Err(AugmentError::DuplicateId(_))
        ));
        assert_eq!(
            compose_mix(&[], &HanselConfig::default(), Framework::Hansel).unwrap_err(),
            AugmentError::EmptyCorpus
        );
    }

    #[test]
    fn residuals_zero_when_disabled() {
        let cfg = HanselConfig::default().with_stride(10, 0);
        let res = assign_residuals(&synthetic(500), &cfg).unwrap();
        assert!(res.values().all(|r| *r == 0));
    }

    #[test]
    fn residual_share_with_delta_one() {
        let corpus: Vec<Example> = (0..1000)
            .map(|i| Example::new(format!("{i}"), "s", "a b c d e", Task::Dialogue))
            .collect();
        let cfg = HanselConfig::default().with_stride(10, 1);
        let res = assign_residuals(&corpus, &cfg).unwrap();
        assert_eq!(res.values().filter(|r| **r == 1).count(), 200);
        assert!(res.values().all(|r| *r <= 1));
    }

    #[test]
    fn short_references_keep_zero_residual() {
        let corpus: Vec<Example> = (0..100)
            .map(|i| Example::new(format!("{i}"), "s", "a b", Task::Dialogue))
            .collect();
        let cfg = HanselConfig::default().with_stride(10, 5);
        assert!(assign_residuals(&corpus, &cfg).unwrap().values().all(|r| *r == 0));
    }

    #[test]
    fn largest_remainder_cases() {
        assert_eq!(largest_remainder(1000, &[0.2, 0.16, 0.64]), vec![200, 160, 640]);
        assert_eq!(largest_remainder(7, &[0.2, 0.16, 0.64]), vec![1, 1, 5]);
        assert_eq!(largest_remainder(1, &[0.2, 0.16, 0.64]), vec![0, 0, 1]);
        assert_eq!(largest_remainder(3, &[0.5, 0.5]), vec![2, 1]);
        assert_eq!(largest_remainder(5, &[0.0, 1.0]), vec![0, 5]);
    }

    #[test]
    fn mix_is_deterministic() {
        let corpus = synthetic(300);
        let cfg = HanselConfig { seed: 42, ..HanselConfig::default().with_stride(10, 3) };
        let a = compose_mix(&corpus, &cfg, Framework::Hansel).unwrap();
        let b = compose_mix(&corpus, &cfg, Framework::Hansel).unwrap();
        assert_eq!(a, b);
        let other = HanselConfig { seed: 43, ..cfg };
        assert_ne!(a.1.provenance, compose_mix(&corpus, &other, Framework::Hansel).unwrap().1.provenance);
    }
}
