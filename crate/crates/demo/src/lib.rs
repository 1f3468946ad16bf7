//! Browser demo: augment a reference, check a token stream, and compare
//! desk-scale generators across target lengths. Every export takes plain
//! values and returns a JSON string.

use hansel_core::augment::{augment_hansel, compose_mix, InferenceMode};
use hansel_core::desklm::{train_ngram, GenerationMode, NgramConfig, NgramGenerator, RuleFollower, RuleFollowerConfig};
use hansel_core::eval::{sweep_targets, EvalOptions, DEFAULT_TARGETS};
use hansel_core::generate::Generator;
use hansel_core::synth::{synthetic_corpus, SyntheticSpec};
use hansel_core::{validate, AutomatonVerdict, Example, Framework, HanselConfig, Task};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct AugmentView {
    pub output: String,
    pub length: usize,
    /// Words preceding each token, opening token included.
    pub positions: Vec<usize>,
    pub valid: bool,
}

pub fn augment(reference: &str, delta: usize, residual: usize) -> Result<AugmentView, String> {
    let cfg = HanselConfig::default().with_stride(delta, residual);
    let ex = Example::new("demo", "", reference, Task::Summarization);
    let rec = augment_hansel(&ex, &cfg, residual).map_err(|e| e.to_string())?;
    let mut words = 0;
    let mut positions = Vec::new();
    for piece in rec.output.split_whitespace() {
        if cfg.rendering.parse(piece).is_ok() {
            positions.push(words);
        } else {
            words += 1;
        }
    }
    Ok(AugmentView {
        valid: validate(&rec.output, &cfg).ok,
        output: rec.output,
        length: rec.target_length,
        positions,
    })
}

pub fn check(text: &str, delta: usize, residual_max: usize) -> Result<AutomatonVerdict, String> {
    let cfg = HanselConfig::default().with_stride(delta, residual_max);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(validate(text, &cfg))
}

#[derive(Debug, Serialize)]
pub struct Series {
    pub name: String,
    pub mae: Vec<Option<f64>>,
    pub n_infinite: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub targets: Vec<usize>,
    pub series: Vec<Series>,
}

/// Trains hansel and gretel n-grams on a small synthetic corpus and scores
/// them, plus the rule follower, on held-out sources.
pub fn compare(seed: u64, train: usize, eval: usize) -> Result<Comparison, String> {
    if train == 0 || eval == 0 {
        return Err("train and eval sizes must be positive".into());
    }
    let cfg = HanselConfig { seed, ..Default::default() };
    let mut corpus = synthetic_corpus(&SyntheticSpec { n: train + eval, seed, ..Default::default() });
    let sources = corpus.split_off(train);
    let opts = EvalOptions::from_config(&cfg);
    let ngram = |fw: Framework, mode: GenerationMode| -> Result<NgramGenerator, String> {
        let (mix, _) = compose_mix(&corpus, &cfg, fw).map_err(|e| e.to_string())?;
        let model = train_ngram(&mix, &NgramConfig::default(), &cfg.rendering).map_err(|e| e.to_string())?;
        Ok(NgramGenerator::new(model, cfg.clone(), mode, InferenceMode::from(fw)))
    };
    let rule = RuleFollower::new(cfg.clone(), RuleFollowerConfig { seed, ..Default::default() }).map_err(|e| e.to_string())?;
    let hansel = ngram(Framework::Hansel, GenerationMode::ProtocolAssisted)?;
    let gretel = ngram(Framework::Gretel, GenerationMode::Free)?;
    let generators: [(&str, &dyn Generator); 3] =
        [("rule follower", &rule), ("hansel n-gram", &hansel), ("gretel n-gram", &gretel)];
    let mut series = Vec::new();
    for (name, g) in generators {
        let sweep = sweep_targets(g, &sources, &DEFAULT_TARGETS, &cfg, &opts).map_err(|e| e.to_string())?;
        series.push(Series {
            name: name.to_string(),
            mae: sweep.rows.iter().map(|r| r.mae).collect(),
            n_infinite: sweep.rows.iter().map(|r| r.n_infinite).collect(),
        });
    }
    Ok(Comparison { targets: DEFAULT_TARGETS.to_vec(), series })
}

fn json<T: Serialize>(value: Result<T, String>) -> Result<String, String> {
    value.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

#[wasm_bindgen]
pub fn augment_text(reference: &str, delta: usize, residual: usize) -> Result<String, String> {
    json(augment(reference, delta, residual))
}

#[wasm_bindgen]
pub fn validate_text(text: &str, delta: usize, residual_max: usize) -> Result<String, String> {
    json(check(text, delta, residual_max))
}

#[wasm_bindgen]
pub fn compare_generators(seed: u32, train: usize, eval: usize) -> Result<String, String> {
    json(compare(u64::from(seed), train, eval))
}
