//! Source sets and generators for `simulate` and `sweep`.

use hansel_core::augment::{compose_mix, InferenceMode};
use hansel_core::desklm::{
    train_ngram, GenerationMode, NgramGenerator, NgramModel, ResidualBehavior, RuleFollower,
};
use hansel_core::generate::Generator;
use hansel_core::synth::{synthetic_corpus, SyntheticSpec};
use hansel_core::{Example, Framework, HanselConfig};

use crate::args::{DeskArgs, GeneratorKind};
use crate::failure::Failure;
use crate::output::load_examples;
use crate::settings::Settings;

pub struct DeskData {
    pub train: Vec<Example>,
    pub sources: Vec<Example>,
    pub targets: Vec<usize>,
}

/// Loads the given corpora, or splits one synthetic corpus seeded by the
/// protocol seed into training and held-out parts.
pub fn load(settings: &Settings, args: &DeskArgs) -> Result<DeskData, Failure> {
    let eval_size = args.eval_size.unwrap_or(settings.desk.eval_size);
    let train_size = settings.desk.train_size;
    let mut synthetic = synthetic_corpus(&SyntheticSpec {
        n: train_size + eval_size,
        seed: settings.hansel.seed,
        ..Default::default()
    });
    let held_out = synthetic.split_off(train_size);
    let train = match &args.train {
        Some(p) => load_examples(p, None, None)?,
        None => synthetic,
    };
    let sources = match &args.input {
        Some(p) => load_examples(p, args.format, None)?,
        None => held_out,
    };
    if sources.is_empty() {
        return Err(Failure::usage("no sources to generate for"));
    }
    let targets = if args.targets.is_empty() { settings.desk.targets.clone() } else { args.targets.clone() };
    if targets.is_empty() {
        return Err(Failure::usage("no targets given"));
    }
    Ok(DeskData { train, sources, targets })
}

// Built once per command, so variant size does not matter.
#[allow(clippy::large_enum_variant)]
pub enum Built {
    Rule(RuleFollower),
    Ngram(NgramGenerator),
}

impl Built {
    pub fn generator(&self) -> &dyn Generator {
        match self {
            Built::Rule(g) => g,
            Built::Ngram(g) => g,
        }
    }

    pub fn model(&self) -> Option<&NgramModel> {
        match self {
            Built::Rule(_) => None,
            Built::Ngram(g) => Some(&g.model),
        }
    }
}

pub fn build(
    kind: GeneratorKind,
    cfg: &HanselConfig,
    settings: &Settings,
    train: &[Example],
    stop_at_zero: bool,
) -> Result<Built, Failure> {
    let ngram = |framework: Framework, mode: GenerationMode, context: InferenceMode| -> Result<Built, Failure> {
        let (records, _) = compose_mix(train, cfg, framework).map_err(|e| Failure::failed(e.to_string()))?;
        let model = train_ngram(&records, &settings.ngram, &cfg.rendering).map_err(|e| Failure::usage(e.to_string()))?;
        Ok(Built::Ngram(NgramGenerator::new(model, cfg.clone(), mode, context)))
    };
    match kind {
        GeneratorKind::Rule => {
            let mut rf = settings.rule_follower.clone();
            if stop_at_zero {
                rf.residual_behavior = ResidualBehavior::StopAtZero;
            }
            RuleFollower::new(cfg.clone(), rf).map(Built::Rule).map_err(|e| Failure::usage(e.to_string()))
        }
        GeneratorKind::NgramHansel => ngram(Framework::Hansel, GenerationMode::ProtocolAssisted, InferenceMode::Hansel),
        GeneratorKind::NgramHanselFree => ngram(Framework::Hansel, GenerationMode::Free, InferenceMode::Hansel),
        GeneratorKind::NgramGretel => ngram(Framework::Gretel, GenerationMode::Free, InferenceMode::Gretel),
    }
}
