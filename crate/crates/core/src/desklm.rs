//! Desk-scale generators: an exact rule follower and a smoothed n-gram
//! model trained on augmented records.

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{AugmentedExample, InferenceMode};
use crate::config::HanselConfig;
use crate::generate::{GenerationError, GenerationRequest, Generator};
use crate::text::LengthUnit;
use crate::token::{schedule, RenderingSpec, SpecialToken, TokenRendering};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const MODEL_VERSION: u32 = 1;

/// What happens once the terminating token has been emitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualBehavior {
    StopAtZero,
    /// Keep going to the end of the current sentence, at most `max_residual`
    /// more words.
    #[default]
    FinishSentence,
}

const FILLER: &[&str] = &[
    "the", "report", "said", "local", "council", "plans", "new", "bridge", "river", "market", "was",
    "opened", "by", "mayor", "in", "spring", "after", "years", "of", "delay", "residents", "welcomed",
    "move", "while", "critics", "questioned", "cost", "and", "timing", "officials", "expect", "traffic",
    "to", "ease", "over", "coming", "months", "weather", "permitting",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleFollowerConfig {
    pub lexicon: Vec<String>,
    /// Sentence lengths are uniform on `sentence_min..=sentence_max` words.
    pub sentence_min: usize,
    pub sentence_max: usize,
    pub residual_behavior: ResidualBehavior,
    pub seed: u64,
}

impl Default for RuleFollowerConfig {
    fn default() -> Self {
        Self {
            lexicon: FILLER.iter().map(|w| w.to_string()).collect(),
            sentence_min: 4,
            sentence_max: 18,
            residual_behavior: ResidualBehavior::FinishSentence,
            seed: 0,
        }
    }
}

/// Reads the remaining-length claim of the opening token that ends `context`.
pub fn opening_claim(context: &str, cfg: &HanselConfig) -> Result<usize, GenerationError> {
    let unit = cfg.unit();
    if cfg.is_multi_unit() || unit != LengthUnit::Word {
        return Err(GenerationError::Protocol(format!(
            "desk generators count words only, config uses {}",
            cfg.families().iter().map(|u| u.name()).collect::<Vec<_>>().join(",")
        )));
    }
    let last = context
        .split_whitespace()
        .last()
        .ok_or_else(|| GenerationError::Protocol("empty context".into()))?;
    let token = cfg
        .rendering
        .parse(last)
        .map_err(|_| GenerationError::Protocol(format!("context does not end with an opening token: `{last}`")))?;
    let stride = cfg.stride_for(unit);
    if token.unit != unit || token.minor as usize >= stride {
        return Err(GenerationError::Protocol(format!("invalid opening token {token} for stride {stride}")));
    }
    Ok(token.major as usize * stride + token.minor as usize)
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Emits exactly the claimed number of words with every mandated token.
#[derive(Debug, Clone)]
pub struct RuleFollower {
    hansel: HanselConfig,
    cfg: RuleFollowerConfig,
}

impl RuleFollower {
    pub fn new(hansel: HanselConfig, cfg: RuleFollowerConfig) -> Result<Self, GenerationError> {
        if cfg.lexicon.is_empty() || cfg.sentence_min == 0 || cfg.sentence_min > cfg.sentence_max {
            return Err(GenerationError::Failed("rule follower needs a lexicon and 1 <= sentence_min <= sentence_max".into()));
        }
        if hansel.is_multi_unit() || hansel.unit() != LengthUnit::Word {
            return Err(GenerationError::Protocol("rule follower counts words only".into()));
        }
        Ok(Self { hansel, cfg })
    }

    pub fn hansel_config(&self) -> &HanselConfig {
        &self.hansel
    }

    /// Continuation of `context` (which ends with the opening token),
    /// excluding that token.
    pub fn rule_follow(&self, context: &str, seed: u64) -> Result<String, GenerationError> {
        let effective = opening_claim(context, &self.hansel)?;
        let stride = self.hansel.stride_for(LengthUnit::Word);
        let seed = seed ^ self.cfg.seed.rotate_left(17);
        let mut lengths = seeded(seed, 1);
        let mut picks = seeded(seed, 2);

        // Sentence lengths are drawn on demand from their own stream, so the
        // words produced before the terminator never depend on the residual bound.
        let mut left_in_sentence = 0usize;
        let mut next_word = |lengths: &mut ChaCha8Rng| {
            if left_in_sentence == 0 {
                left_in_sentence = lengths.random_range(self.cfg.sentence_min..=self.cfg.sentence_max);
            }
            left_in_sentence -= 1;
            let mut w = self.cfg.lexicon.choose(&mut picks).expect("non-empty lexicon").clone();
            if left_in_sentence == 0 {
                w.push('.');
            }
            (w, left_in_sentence)
        };

        let marks: BTreeMap<usize, SpecialToken> = schedule(LengthUnit::Word, effective, stride).into_iter().collect();
        let mut pieces: Vec<String> = Vec::with_capacity(effective + effective / stride + 4);
        let mut left = 0;
        for k in 0..effective {
            if k > 0 {
                if let Some(t) = marks.get(&k) {
                    pieces.push(self.hansel.rendering.render(t));
                }
            }
            let (w, l) = next_word(&mut lengths);
            pieces.push(w);
            left = l;
        }
        if effective > 0 {
            pieces.push(self.hansel.rendering.render(&SpecialToken::terminator(LengthUnit::Word)));
        }
        if self.cfg.residual_behavior == ResidualBehavior::FinishSentence {
            for _ in 0..left.min(self.hansel.max_residual) {
                pieces.push(next_word(&mut lengths).0);
            }
        }
        Ok(pieces.join(" "))
    }
}

impl Generator for RuleFollower {
    fn mode(&self) -> InferenceMode {
        InferenceMode::Hansel
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, GenerationError> {
        self.rule_follow(request.context, request.seed)
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NgramError {
    #[error("order must be at least 1")]
    Order,
    #[error("smoothing constant must be positive, got {0}")]
    Alpha(f64),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("malformed model: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NgramConfig {
    pub order: usize,
    pub alpha: f64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self { order: 3, alpha: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    Free,
    ProtocolAssisted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContextRow {
    context: Vec<u32>,
    total: u64,
    /// (token id, count), sorted by id.
    next: Vec<(u32, u32)>,
}

/// On-disk count table.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NgramTable {
    version: u32,
    order: usize,
    alpha: f64,
    rendering: RenderingSpec,
    vocab: Vec<String>,
    rows: Vec<ContextRow>,
}

/// Additively smoothed n-gram model; contexts never seen in training back
/// off to the longest seen suffix.
#[derive(Debug, Clone)]
pub struct NgramModel {
    table: NgramTable,
    index: HashMap<String, u32>,
    lookup: HashMap<Vec<u32>, usize>,
    special: Vec<bool>,
    plain: Vec<u32>,
}

const BOS_ID: u32 = 0;
const EOS_ID: u32 = 1;

impl NgramModel {
    fn from_table(table: NgramTable) -> Result<Self, NgramError> {
        if table.version != MODEL_VERSION {
            return Err(NgramError::Version(table.version));
        }
        if table.order == 0 {
            return Err(NgramError::Order);
        }
        if table.alpha.is_nan() || table.alpha <= 0.0 {
            return Err(NgramError::Alpha(table.alpha));
        }
        if table.vocab.get(BOS_ID as usize).map(String::as_str) != Some(BOS)
            || table.vocab.get(EOS_ID as usize).map(String::as_str) != Some(EOS)
        {
            return Err(NgramError::Malformed("vocabulary must start with <s> and </s>".into()));
        }
        let rendering = TokenRendering::try_from(table.rendering.clone())
            .map_err(|e| NgramError::Malformed(e.to_string()))?;
        let n = table.vocab.len() as u32;
        for row in &table.rows {
            if row.context.len() >= table.order || row.context.iter().chain(row.next.iter().map(|(w, _)| w)).any(|&w| w >= n) {
                return Err(NgramError::Malformed("row out of range".into()));
            }
        }
        let index = table.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let lookup = table.rows.iter().enumerate().map(|(i, r)| (r.context.clone(), i)).collect();
        let special: Vec<bool> = table.vocab.iter().map(|w| rendering.parse(w).is_ok()).collect();
        let plain = (2..n).filter(|&i| !special[i as usize]).collect();
        Ok(Self { table, index, lookup, special, plain })
    }

    pub fn order(&self) -> usize {
        self.table.order
    }

    pub fn alpha(&self) -> f64 {
        self.table.alpha
    }

    pub fn vocab(&self) -> &[String] {
        &self.table.vocab
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Number of tokens a prediction ranges over (everything except `<s>`).
    fn outcomes(&self) -> usize {
        self.table.vocab.len() - 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.table).expect("count table serialises")
    }

    pub fn from_json(json: &str) -> Result<Self, NgramError> {
        let table: NgramTable = serde_json::from_str(json).map_err(|e| NgramError::Malformed(e.to_string()))?;
        Self::from_table(table)
    }

    /// Raw count of `word` following `context` (exact context, no backoff).
    pub fn count(&self, context: &[&str], word: &str) -> u32 {
        let Some(ctx) = context.iter().map(|w| self.id(w)).collect::<Option<Vec<u32>>>() else {
            return 0;
        };
        let (Some(&row), Some(w)) = (self.lookup.get(&ctx), self.id(word)) else {
            return 0;
        };
        let next = &self.table.rows[row].next;
        next.binary_search_by_key(&w, |p| p.0).map_or(0, |i| next[i].1)
    }

    fn row_for(&self, history: &[Option<u32>]) -> &ContextRow {
        let max = (self.table.order - 1).min(history.len());
        for k in (0..=max).rev() {
            let suffix = &history[history.len() - k..];
            if let Some(ctx) = suffix.iter().copied().collect::<Option<Vec<u32>>>() {
                if let Some(&i) = self.lookup.get(&ctx) {
                    return &self.table.rows[i];
                }
            }
        }
        &self.table.rows[self.lookup[&Vec::new()]]
    }

    fn history(&self, words: &[&str]) -> Vec<Option<u32>> {
        std::iter::once(Some(BOS_ID)).chain(words.iter().map(|w| self.id(w))).collect()
    }

    /// Next-token distribution after `words` (a `<s>` is prepended), indexed by
    /// vocabulary id; `<s>` itself always gets 0.
    pub fn distribution(&self, words: &[&str]) -> Vec<f64> {
        let row = self.row_for(&self.history(words));
        let denom = row.total as f64 + self.table.alpha * self.outcomes() as f64;
        let mut p = vec![self.table.alpha / denom; self.table.vocab.len()];
        p[BOS_ID as usize] = 0.0;
        for &(w, c) in &row.next {
            p[w as usize] += c as f64 / denom;
        }
        p
    }

    fn sample(&self, history: &[Option<u32>], rng: &mut ChaCha8Rng, allow: impl Fn(u32) -> bool) -> u32 {
        let row = self.row_for(history);
        let smoothing = self.table.alpha * self.outcomes() as f64;
        for _ in 0..256 {
            let u = rng.random::<f64>() * (row.total as f64 + smoothing);
            let w = if u < row.total as f64 {
                let mut acc = 0u64;
                let target = u as u64;
                row.next
                    .iter()
                    .find(|(_, c)| {
                        acc += u64::from(*c);
                        target < acc
                    })
                    .map_or(EOS_ID, |p| p.0)
            } else {
                rng.random_range(1..self.table.vocab.len() as u32)
            };
            if allow(w) {
                return w;
            }
        }
        let pool: Vec<u32> = self.plain.iter().copied().filter(|&w| allow(w)).collect();
        *pool.choose(rng).unwrap_or(&EOS_ID)
    }

    /// Continuation of `context`, whose last line is the n-gram history.
    ///
    /// Free mode samples until `</s>` or `max_len` pieces. Protocol-assisted
    /// mode forces every mandated token, bans `</s>` and stray tokens before
    /// the terminator, then allows at most `max_residual` words, stopping
    /// early at `</s>` or a sentence end.
    pub fn generate(
        &self,
        context: &str,
        max_len: usize,
        mode: GenerationMode,
        cfg: &HanselConfig,
        seed: u64,
    ) -> Result<String, GenerationError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prompt_line = context.rsplit('\n').next().unwrap_or(context);
        let prompt: Vec<&str> = prompt_line.split_whitespace().collect();
        let mut history = self.history(&prompt);
        let mut out: Vec<String> = Vec::new();
        let emit = |w: String, history: &mut Vec<Option<u32>>, out: &mut Vec<String>| {
            history.push(self.id(&w));
            out.push(w);
        };
        match mode {
            GenerationMode::Free => {
                while out.len() < max_len {
                    let w = self.sample(&history, &mut rng, |w| w != BOS_ID);
                    if w == EOS_ID {
                        break;
                    }
                    emit(self.table.vocab[w as usize].clone(), &mut history, &mut out);
                }
            }
            GenerationMode::ProtocolAssisted => {
                let effective = opening_claim(context, cfg)?;
                let stride = cfg.stride_for(LengthUnit::Word);
                let marks: BTreeMap<usize, SpecialToken> =
                    schedule(LengthUnit::Word, effective, stride).into_iter().collect();
                let plain_word = |w: u32| w > EOS_ID && !self.special[w as usize];
                for k in 0..effective {
                    if k > 0 {
                        if let Some(t) = marks.get(&k) {
                            emit(cfg.rendering.render(t), &mut history, &mut out);
                        }
                    }
                    let w = self.sample(&history, &mut rng, plain_word);
                    emit(self.table.vocab[w as usize].clone(), &mut history, &mut out);
                }
                if effective > 0 {
                    emit(cfg.rendering.render(&SpecialToken::terminator(LengthUnit::Word)), &mut history, &mut out);
                }
                for _ in 0..cfg.max_residual {
                    let w = self.sample(&history, &mut rng, |w| w != BOS_ID && !self.special[w as usize]);
                    if w == EOS_ID {
                        break;
                    }
                    let word = self.table.vocab[w as usize].clone();
                    let ends = word.ends_with(['.', '!', '?']);
                    emit(word, &mut history, &mut out);
                    if ends {
                        break;
                    }
                }
            }
        }
        Ok(out.join(" "))
    }
}

/// Counts every context of length `0..order` over `<s> prompt output </s>`.
pub fn train_ngram(
    records: &[AugmentedExample],
    cfg: &NgramConfig,
    rendering: &TokenRendering,
) -> Result<NgramModel, NgramError> {
    if cfg.order == 0 {
        return Err(NgramError::Order);
    }
    if cfg.alpha.is_nan() || cfg.alpha <= 0.0 {
        return Err(NgramError::Alpha(cfg.alpha));
    }
    if records.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    let mut vocab: Vec<String> = vec![BOS.into(), EOS.into()];
    let mut index: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
    let mut counts: HashMap<Vec<u32>, HashMap<u32, u32>> = HashMap::new();
    counts.insert(Vec::new(), HashMap::new());
    for rec in records {
        let mut stream = vec![BOS_ID];
        for w in rec.training_text().split_whitespace() {
            let id = *index.entry(w.to_string()).or_insert_with(|| {
                vocab.push(w.to_string());
                vocab.len() as u32 - 1
            });
            stream.push(id);
        }
        stream.push(EOS_ID);
        for j in 1..stream.len() {
            for k in 0..cfg.order.min(j + 1) {
                *counts.entry(stream[j - k..j].to_vec()).or_default().entry(stream[j]).or_insert(0) += 1;
            }
        }
    }
    let mut rows: Vec<ContextRow> = counts
        .into_iter()
        .map(|(context, next)| {
            let mut next: Vec<(u32, u32)> = next.into_iter().collect();
            next.sort_unstable();
            ContextRow { context, total: next.iter().map(|p| u64::from(p.1)).sum(), next }
        })
        .collect();
    rows.sort_by(|a, b| a.context.len().cmp(&b.context.len()).then_with(|| a.context.cmp(&b.context)));
    NgramModel::from_table(NgramTable {
        version: MODEL_VERSION,
        order: cfg.order,
        alpha: cfg.alpha,
        rendering: rendering.clone().into(),
        vocab,
        rows,
    })
}

/// An n-gram model bound to a decoding mode and context style.
#[derive(Debug, Clone)]
pub struct NgramGenerator {
    pub model: NgramModel,
    pub hansel: HanselConfig,
    pub mode: GenerationMode,
    pub context_mode: InferenceMode,
    pub max_len: usize,
}

impl NgramGenerator {
    pub fn new(model: NgramModel, hansel: HanselConfig, mode: GenerationMode, context_mode: InferenceMode) -> Self {
        let max_len = hansel.max_tokens;
        let context_mode = if mode == GenerationMode::ProtocolAssisted { InferenceMode::Hansel } else { context_mode };
        Self { model, hansel, mode, context_mode, max_len }
    }
}

impl Generator for NgramGenerator {
    fn mode(&self) -> InferenceMode {
        self.context_mode
    }

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, GenerationError> {
        self.model.generate(request.context, self.max_len, self.mode, &self.hansel, request.seed)
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}
