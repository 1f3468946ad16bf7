//! Length-control and overlap metrics, infinite-generation accounting,
//! sweeps and corpus statistics.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::build_inference_context;
use crate::config::HanselConfig;
use crate::corpus::GenerationRecord;
use crate::generate::{request_seed, GenerationRequest, Generator};
use crate::text::{Example, LengthUnit, Segmenter, TextError};
use crate::token::{strip_lenient, TokenRendering};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no scorable records (all {0} flagged as infinite or empty input)")]
    NoData(usize),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("target list is empty")]
    NoTargets,
    #[error(transparent)]
    Text(#[from] TextError),
}

/// Scoring knobs.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub unit: LengthUnit,
    /// Generations at or beyond this many whitespace pieces hit the cap.
    pub max_tokens: usize,
    /// Consecutive recurrences of a 4-gram that count as a loop.
    pub repeat_threshold: usize,
    pub max_period: usize,
    pub stem: bool,
    pub rendering: TokenRendering,
    pub segmenter: Segmenter,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self::from_config(&HanselConfig::default())
    }
}

impl EvalOptions {
    pub fn from_config(cfg: &HanselConfig) -> Self {
        Self {
            unit: cfg.unit(),
            max_tokens: cfg.max_tokens,
            repeat_threshold: 8,
            max_period: 64,
            stem: false,
            rendering: cfg.rendering.clone(),
            segmenter: cfg.segmenter(),
        }
    }
}

/// One generation paired with its target, tokens already stripped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub generated: String,
    pub target_length: usize,
    pub reference: Option<String>,
    pub infinite_flag: bool,
    pub unit: LengthUnit,
}

impl EvalRecord {
    pub fn from_raw(
        id: impl Into<String>,
        raw: &str,
        target_length: usize,
        reference: Option<String>,
        opts: &EvalOptions,
    ) -> Self {
        Self {
            id: id.into(),
            generated: strip_lenient(raw, &opts.rendering).stripped,
            target_length,
            reference,
            infinite_flag: detect_infinite(raw, opts),
            unit: opts.unit,
        }
    }

    pub fn from_generation(rec: &GenerationRecord, opts: &EvalOptions) -> Self {
        let mut out = Self::from_raw(&rec.id, &rec.generated, rec.target_length, rec.reference.clone(), opts);
        if let Some(unit) = rec.unit {
            out.unit = unit;
        }
        out
    }

    pub fn length(&self, segmenter: &Segmenter) -> Result<usize, TextError> {
        segmenter.count(&self.generated, self.unit)
    }
}

/// Mean absolute length error over records not flagged as infinite.
pub fn mae(records: &[EvalRecord]) -> Result<f64, EvalError> {
    mae_with(records, &Segmenter::default())
}

pub fn mae_with(records: &[EvalRecord], segmenter: &Segmenter) -> Result<f64, EvalError> {
    let mut total = 0.0;
    let mut n = 0usize;
    for r in records.iter().filter(|r| !r.infinite_flag) {
        let len = r.length(segmenter)?;
        total += len.abs_diff(r.target_length) as f64;
        n += 1;
    }
    if n == 0 {
        return Err(EvalError::NoData(records.len()));
    }
    Ok(total / n as f64)
}

/// True when the generation hit the length cap or loops: some 4-gram recurs
/// at a fixed stride `repeat_threshold` times in a row.
pub fn detect_infinite(generated: &str, opts: &EvalOptions) -> bool {
    let words: Vec<&str> = generated.split_whitespace().collect();
    if words.len() >= opts.max_tokens {
        return true;
    }
    has_repetition_loop(&words, 4, opts.repeat_threshold, opts.max_period)
}

fn has_repetition_loop(words: &[&str], gram: usize, repeats: usize, max_period: usize) -> bool {
    if repeats == 0 {
        return false;
    }
    for period in 1..=max_period {
        // Periodic span of length >= (repeats - 1) * period + gram.
        let need = (repeats - 1) * period + gram;
        if need > words.len() {
            break;
        }
        let mut run = 0usize;
        for j in 0..words.len() - period {
            if words[j] == words[j + period] {
                run += 1;
                if run + period >= need {
                    return true;
                }
            } else {
                run = 0;
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    #[serde(rename = "rouge1")]
    R1,
    #[serde(rename = "rouge2")]
    R2,
    #[serde(rename = "rougeL")]
    RL,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when the reference has no scorable tokens.
    pub degenerate: bool,
}

impl RougeScore {
    fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        let precision = if candidate == 0 { 0.0 } else { overlap as f64 / candidate as f64 };
        let recall = if reference == 0 { 0.0 } else { overlap as f64 / reference as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1, degenerate: false }
    }
}

/// Lowercased whitespace words with non-alphanumeric characters removed.
pub fn rouge_tokens(text: &str, stem: bool) -> Vec<String> {
    let words = text.split_whitespace().filter_map(|w| {
        let cleaned: String = w.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
        (!cleaned.is_empty()).then_some(cleaned)
    });
    if stem {
        stem_all(words)
    } else {
        words.collect()
    }
}

#[cfg(feature = "stemming")]
fn stem_all(words: impl Iterator<Item = String>) -> Vec<String> {
    let stemmer = rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English);
    words.map(|w| stemmer.stem(&w).into_owned()).collect()
}

#[cfg(not(feature = "stemming"))]
fn stem_all(words: impl Iterator<Item = String>) -> Vec<String> {
    words.collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_from_tokens(candidate: &[String], reference: &[String], variant: RougeVariant) -> RougeScore {
    if reference.is_empty() {
        return RougeScore { degenerate: true, ..Default::default() };
    }
    match variant {
        RougeVariant::R1 | RougeVariant::R2 => {
            let n = if variant == RougeVariant::R1 { 1 } else { 2 };
            let c = ngram_counts(candidate, n);
            let r = ngram_counts(reference, n);
            let overlap = c.iter().map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0))).sum();
            RougeScore::from_counts(
                overlap,
                candidate.len().saturating_sub(n - 1),
                reference.len().saturating_sub(n - 1),
            )
        }
        RougeVariant::RL => {
            RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
        }
    }
}

pub fn rouge(candidate: &str, reference: &str, variant: RougeVariant, stem: bool) -> RougeScore {
    rouge_from_tokens(&rouge_tokens(candidate, stem), &rouge_tokens(reference, stem), variant)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mae: Option<f64>,
    pub n_scored: usize,
    pub n_infinite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: Option<f64>,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    #[serde(rename = "rougeL")]
    pub rouge_l: Option<f64>,
    pub n_scored: usize,
    pub n_infinite: usize,
    pub per_target: BTreeMap<usize, TargetStats>,
}

/// Aggregates a record set. ROUGE averages the F1 of scored records that
/// carry a reference.
pub fn evaluate(records: &[EvalRecord], opts: &EvalOptions) -> Result<EvalReport, EvalError> {
    let mut per_target: BTreeMap<usize, (f64, usize, usize)> = BTreeMap::new();
    let mut err_sum = 0.0;
    let mut n_scored = 0;
    let mut n_infinite = 0;
    let mut rouge_sums = [0.0f64; 3];
    let mut n_rouge = 0;
    for r in records {
        let slot = per_target.entry(r.target_length).or_insert((0.0, 0, 0));
        if r.infinite_flag {
            n_infinite += 1;
            slot.2 += 1;
            continue;
        }
        let err = r.length(&opts.segmenter)?.abs_diff(r.target_length) as f64;
        err_sum += err;
        n_scored += 1;
        slot.0 += err;
        slot.1 += 1;
        if let Some(reference) = &r.reference {
            let c = rouge_tokens(&r.generated, opts.stem);
            let t = rouge_tokens(reference, opts.stem);
            for (sum, v) in rouge_sums.iter_mut().zip([RougeVariant::R1, RougeVariant::R2, RougeVariant::RL]) {
                *sum += rouge_from_tokens(&c, &t, v).f1;
            }
            n_rouge += 1;
        }
    }
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    Ok(EvalReport {
        mae: mean(err_sum, n_scored),
        rouge1: mean(rouge_sums[0], n_rouge),
        rouge2: mean(rouge_sums[1], n_rouge),
        rouge_l: mean(rouge_sums[2], n_rouge),
        n_scored,
        n_infinite,
        per_target: per_target
            .into_iter()
            .map(|(t, (s, n, inf))| (t, TargetStats { mae: mean(s, n), n_scored: n, n_infinite: inf }))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub target: usize,
    pub mae: Option<f64>,
    pub mean_length: Option<f64>,
    pub n_scored: usize,
    pub n_infinite: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSweep {
    pub rows: Vec<TargetRow>,
    /// Every generation, in target-then-source order.
    #[serde(skip)]
    pub records: Vec<EvalRecord>,
}

impl TargetSweep {
    pub fn mean_mae(&self) -> Option<f64> {
        let maes: Vec<f64> = self.rows.iter().filter_map(|r| r.mae).collect();
        (!maes.is_empty()).then(|| maes.iter().sum::<f64>() / maes.len() as f64)
    }

    pub fn row(&self, target: usize) -> Option<&TargetRow> {
        self.rows.iter().find(|r| r.target == target)
    }
}

pub const DEFAULT_TARGETS: [usize; 5] = [5, 20, 50, 80, 130];

/// Asks `generator` for every (source, target) pair and scores each target.
pub fn sweep_targets(
    generator: &dyn Generator,
    sources: &[Example],
    targets: &[usize],
    cfg: &HanselConfig,
    opts: &EvalOptions,
) -> Result<TargetSweep, EvalError> {
    if targets.is_empty() {
        return Err(EvalError::NoTargets);
    }
    if sources.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut rows = Vec::with_capacity(targets.len());
    let mut all = Vec::new();
    for &target in targets {
        let outputs = run_target(generator, sources, target, cfg);
        let mut records = Vec::new();
        let mut failed = 0;
        for (ex, out) in sources.iter().zip(outputs) {
            match out {
                Ok(text) => records.push(EvalRecord::from_raw(&ex.id, &text, target, Some(ex.reference.clone()), opts)),
                Err(_) => failed += 1,
            }
        }
        let report = evaluate(&records, opts)?;
        let mut len_sum = 0usize;
        for r in records.iter().filter(|r| !r.infinite_flag) {
            len_sum += r.length(&opts.segmenter)?;
        }
        rows.push(TargetRow {
            target,
            mae: report.mae,
            mean_length: (report.n_scored > 0).then(|| len_sum as f64 / report.n_scored as f64),
            n_scored: report.n_scored,
            n_infinite: report.n_infinite,
            n_failed: failed,
        });
        all.extend(records);
    }
    Ok(TargetSweep { rows, records: all })
}

fn run_target(
    generator: &dyn Generator,
    sources: &[Example],
    target: usize,
    cfg: &HanselConfig,
) -> Vec<Result<String, crate::generate::GenerationError>> {
    let one = |ex: &Example| {
        let context = build_inference_context(&ex.source, ex.task, target, generator.mode(), cfg);
        generator.generate(&GenerationRequest {
            id: &ex.id,
            context: &context,
            target_length: target,
            seed: request_seed(cfg.seed, &ex.id, target),
        })
    };
    #[cfg(not(target_arch = "wasm32"))]
    if generator.concurrent_safe() && sources.len() > 64 {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(16);
        let chunk = sources.len().div_ceil(workers);
        return std::thread::scope(|scope| {
            let handles: Vec<_> = sources
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(one).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("generator thread panicked")).collect()
        });
    }
    sources.iter().map(one).collect()
}

/// Table-2-style matrix: one row per named sweep, one column per target.
pub fn target_table(sweeps: &[(&str, &TargetSweep)]) -> String {
    let targets: Vec<usize> = sweeps.first().map(|(_, s)| s.rows.iter().map(|r| r.target).collect()).unwrap_or_default();
    let width = sweeps.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "model");
    for t in &targets {
        let _ = write!(out, " {:>9}", t);
    }
    out.push('\n');
    for (name, sweep) in sweeps {
        let _ = write!(out, "{:<width$}", name);
        for t in &targets {
            match sweep.row(*t).and_then(|r| r.mae) {
                Some(m) => {
                    let _ = write!(out, " {:>9.2}", m);
                }
                None => {
                    let _ = write!(out, " {:>9}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// `target,<name>_mae,<name>_infinite,...` rows.
pub fn target_csv(sweeps: &[(&str, &TargetSweep)]) -> String {
    let mut out = String::from("target");
    for (name, _) in sweeps {
        let _ = write!(out, ",{name}_mae,{name}_infinite");
    }
    out.push('\n');
    let targets: Vec<usize> = sweeps.first().map(|(_, s)| s.rows.iter().map(|r| r.target).collect()).unwrap_or_default();
    for t in targets {
        let _ = write!(out, "{t}");
        for (_, sweep) in sweeps {
            let row = sweep.row(t);
            let mae = row.and_then(|r| r.mae).map(|m| format!("{m:.6}")).unwrap_or_default();
            let _ = write!(out, ",{mae},{}", row.map_or(0, |r| r.n_infinite));
        }
        out.push('\n');
    }
    out
}

/// Whitespace-separated columns for gnuplot: target then one MAE per sweep.
pub fn target_gnuplot(sweeps: &[(&str, &TargetSweep)]) -> String {
    let mut out = String::from("# target");
    for (name, _) in sweeps {
        let _ = write!(out, " {name}");
    }
    out.push('\n');
    let targets: Vec<usize> = sweeps.first().map(|(_, s)| s.rows.iter().map(|r| r.target).collect()).unwrap_or_default();
    for t in targets {
        let _ = write!(out, "{t}");
        for (_, sweep) in sweeps {
            match sweep.row(t).and_then(|r| r.mae) {
                Some(m) => {
                    let _ = write!(out, " {m:.6}");
                }
                None => out.push_str(" NaN"),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub delta: usize,
    pub residual_max: usize,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub deltas: Vec<usize>,
    pub residuals: Vec<usize>,
    pub cells: Vec<GridCell>,
}

impl HyperGrid {
    pub fn get(&self, delta: usize, residual_max: usize) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.delta == delta && c.residual_max == residual_max)
            .map(|c| c.mae)
    }

    /// Table-4 shape: one row per stride, one column per residual bound.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:>6}", "delta");
        for r in &self.residuals {
            let _ = write!(out, " {:>8}", format!("d={r}"));
        }
        out.push('\n');
        for d in &self.deltas {
            let _ = write!(out, "{d:>6}");
            for r in &self.residuals {
                let _ = write!(out, " {:>8.3}", self.get(*d, *r).unwrap_or(f64::NAN));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,residual_max,mae\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{:.6}", c.delta, c.residual_max, c.mae);
        }
        out
    }
}

/// Full stride x residual-bound grid; `cell` runs one augment, simulate and
/// evaluate pass for the given configuration and returns its MAE.
pub fn sweep_hyperparams<E>(
    deltas: &[usize],
    residuals: &[usize],
    base: &HanselConfig,
    mut cell: impl FnMut(&HanselConfig) -> Result<f64, E>,
) -> Result<HyperGrid, E> {
    let mut cells = Vec::with_capacity(deltas.len() * residuals.len());
    for &delta in deltas {
        for &residual_max in residuals {
            let cfg = base.clone().with_stride(delta, residual_max);
            cells.push(GridCell { delta, residual_max, mae: cell(&cfg)? });
        }
    }
    Ok(HyperGrid { deltas: deltas.to_vec(), residuals: residuals.to_vec(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub mean: f64,
    pub std: f64,
    pub max: usize,
    pub min: usize,
    pub count: usize,
}

/// Population statistics of reference lengths.
pub fn corpus_stats(corpus: &[Example], unit: LengthUnit, segmenter: &Segmenter) -> Result<CorpusStats, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let lengths = corpus
        .iter()
        .map(|ex| segmenter.count(&ex.reference, unit))
        .collect::<Result<Vec<_>, _>>()?;
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<usize>() as f64 / n;
    let var = lengths.iter().map(|&l| (l as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(CorpusStats {
        mean,
        std: var.sqrt(),
        max: *lengths.iter().max().expect("non-empty"),
        min: *lengths.iter().min().expect("non-empty"),
        count: lengths.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Task;

    fn rec(generated: &str, target: usize) -> EvalRecord {
        EvalRecord::from_raw("r", generated, target, None, &EvalOptions::default())
    }

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn mae_hand_cases() {
        assert_eq!(mae(&[rec(&words(5), 5), rec(&words(10), 12)]).unwrap(), 1.0);
        assert_eq!(mae(&[rec(&words(3), 3), rec(&words(7), 7)]).unwrap(), 0.0);
    }

    #[test]
    fn mae_strips_tokens_and_skips_flagged() {
        let r = rec("<|len:w:0:2|> a b <|len:w:0|>", 2);
        assert_eq!(r.generated, "a b");
        let mut flagged = rec(&words(50), 1);
        flagged.infinite_flag = true;
        assert_eq!(mae(&[r.clone(), flagged.clone()]).unwrap(), 0.0);
        assert_eq!(mae(&[flagged]), Err(EvalError::NoData(1)));
        assert_eq!(mae(&[]), Err(EvalError::NoData(0)));
    }

    #[test]
    fn repetition_and_cap() {
        let opts = EvalOptions::default();
        assert!(detect_infinite(&vec!["yes"; 50].join(" "), &opts));
        assert!(!detect_infinite("I would love to go to the park with you this afternoon if the weather stays nice and warm for us.", &opts));
        let loop3 = "a b c ".repeat(20);
        assert!(detect_infinite(&loop3, &opts));
        let sentence = "the model keeps saying the same sentence again and again . ";
        assert!(detect_infinite(&sentence.repeat(9), &opts));
        assert!(!detect_infinite(&sentence.repeat(2), &opts));
        let capped = EvalOptions { max_tokens: 30, ..EvalOptions::default() };
        assert!(detect_infinite(&words(30), &capped));
        assert!(!detect_infinite(&words(29), &capped));
    }

    #[test]
    fn repetition_threshold_boundary() {
        let opts = EvalOptions::default();
        // 4-gram "x x x x" recurring at stride 1: 8 times needs 11 words.
        assert!(detect_infinite(&["x"; 11].join(" "), &opts));
        assert!(!detect_infinite(&["x"; 10].join(" "), &opts));
    }

    #[test]
    fn rouge_identity_and_disjoint() {
        for v in [RougeVariant::R1, RougeVariant::R2, RougeVariant::RL] {
            assert_eq!(rouge("The cat sat on the mat.", "the cat sat on the mat", v, false).f1, 1.0);
            assert_eq!(rouge("alpha beta gamma", "delta epsilon zeta", v, false).f1, 0.0);
        }
        let empty = rouge("anything", "  ...  ", RougeVariant::R1, false);
        assert!(empty.degenerate);
        assert_eq!(empty.f1, 0.0);
    }

    #[test]
    fn rouge_l_small_case() {
        let s = rouge("the cat sat", "the cat ran fast", RougeVariant::RL, false);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 0.5).abs() < 1e-12);
        assert!((s.f1 - 4.0 / 7.0).abs() < 1e-12);
        let r2 = rouge("the cat sat", "the cat ran fast", RougeVariant::R2, false);
        assert!((r2.f1 - 2.0 * 0.5 * (1.0 / 3.0) / (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[cfg(feature = "stemming")]
    #[test]
    fn stemming_toggle() {
        assert!(rouge("running dogs", "run dog", RougeVariant::R1, false).f1 < 1.0);
        assert_eq!(rouge("running dogs", "run dog", RougeVariant::R1, true).f1, 1.0);
    }

    #[test]
    fn report_accounting() {
        let opts = EvalOptions::default();
        let mut records = vec![
            EvalRecord::from_raw("a", &words(5), 5, Some(words(5)), &opts),
            EvalRecord::from_raw("b", &words(8), 10, Some(words(10)), &opts),
            EvalRecord::from_raw("c", &vec!["again"; 40].join(" "), 10, None, &opts),
        ];
        records[1].unit = LengthUnit::Word;
        let report = evaluate(&records, &opts).unwrap();
        assert_eq!(report.n_scored, 2);
        assert_eq!(report.n_infinite, 1);
        assert_eq!(report.mae, Some(1.0));
        assert_eq!(report.per_target[&10].n_infinite, 1);
        assert_eq!(report.per_target[&10].mae, Some(2.0));
        assert_eq!(report.per_target[&5].mae, Some(0.0));
        assert!(report.rouge_l.unwrap() > 0.8);
    }

    #[test]
    fn stats_population() {
        let corpus = vec![
            Example::new("a", "", "x", Task::Dialogue),
            Example::new("b", "", words(179), Task::Dialogue),
        ];
        let s = corpus_stats(&corpus, LengthUnit::Word, &Segmenter::default()).unwrap();
        assert_eq!((s.min, s.max, s.count), (1, 179, 2));
        assert_eq!(s.mean, 90.0);
        assert_eq!(s.std, 89.0);
        let flat: Vec<Example> = (0..5).map(|i| Example::new(format!("{i}"), "", "a b c", Task::Dialogue)).collect();
        assert_eq!(corpus_stats(&flat, LengthUnit::Word, &Segmenter::default()).unwrap().std, 0.0);
        assert_eq!(corpus_stats(&[], LengthUnit::Word, &Segmenter::default()), Err(EvalError::EmptyCorpus));
    }

    #[test]
    fn grid_shapes() {
        let grid = sweep_hyperparams::<()>(&[10, 20, 40], &[0, 1, 3, 5], &HanselConfig::default(), |cfg| {
            Ok(cfg.max_residual as f64 / 2.0)
        })
        .unwrap();
        assert_eq!(grid.cells.len(), 12);
        assert_eq!(grid.get(20, 3), Some(1.5));
        assert_eq!(grid.to_csv().lines().count(), 13);
        assert_eq!(grid.to_table().lines().count(), 4);
    }
}
