use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hansel_core::{Framework, LengthUnit};

#[derive(Debug, Parser)]
#[command(name = "hansel", version, about = "Remaining-length token augmentation and length-control evaluation")]
pub struct Cli {
    /// TOML file with defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a training mix from a reference corpus.
    Augment(AugmentArgs),
    /// Check augmented records against the token protocol.
    Validate(ValidateArgs),
    /// Score generations: MAE, ROUGE, infinite-generation counts.
    Evaluate(EvaluateArgs),
    /// Length-target or stride/residual sweeps over a desk generator.
    Sweep(SweepArgs),
    /// Run a desk generator and write generations for `evaluate`.
    Simulate(SimulateArgs),
    /// Reference-length statistics of a corpus.
    Stats(StatsArgs),
    /// Score generations with an LLM judge.
    Judge(JudgeArgs),
    /// Write a synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// One JSON example per line.
    Jsonl,
    /// One dialogue per line, utterances terminated by `__eou__`.
    Dialogue,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to `dialogue` for .txt files, `jsonl` otherwise.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Truncate references to this many words on ingestion.
    #[arg(long)]
    pub max_words: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProtocolArgs {
    /// Token stride in units.
    #[arg(long)]
    pub delta: Option<usize>,
    /// Largest residual allowed after the terminating token.
    #[arg(long)]
    pub residual_max: Option<usize>,
    /// Length unit(s), coarse to fine for multi-unit mode.
    #[arg(long = "unit", value_delimiter = ',')]
    pub units: Vec<LengthUnit>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_parser = parse_framework, default_value = "hansel")]
    pub framework: Framework,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Share of eligible hansel records that get a nonzero residual.
    #[arg(long)]
    pub residual_fraction: Option<f64>,
    /// Output JSONL; a `.manifest.json` is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Augmented JSONL.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Write the per-record report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Generation JSONL (id, generated, target_length, optional reference).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub unit: Option<LengthUnit>,
    /// Porter-stem words before ROUGE.
    #[arg(long)]
    pub stem: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    /// Exact rule follower.
    Rule,
    /// N-gram trained on the hansel mix, tokens forced by the protocol.
    NgramHansel,
    /// N-gram trained on the hansel mix, emitting its own tokens.
    NgramHanselFree,
    /// N-gram trained on the gretel mix, free sampling.
    NgramGretel,
}

impl GeneratorKind {
    pub fn label(self) -> &'static str {
        match self {
            GeneratorKind::Rule => "rule",
            GeneratorKind::NgramHansel => "ngram-hansel",
            GeneratorKind::NgramHanselFree => "ngram-hansel-free",
            GeneratorKind::NgramGretel => "ngram-gretel",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DeskArgs {
    /// Sources to generate for; defaults to a held-out synthetic corpus.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// N-gram training corpus; defaults to the synthetic corpus.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Number of sources drawn when no --input is given.
    #[arg(long)]
    pub eval_size: Option<usize>,
    /// Target lengths, comma-separated; defaults to 5,20,50,80,130.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<usize>,
    /// Rule follower stops right at the terminating token instead of
    /// finishing its sentence (at most --residual-max words).
    #[arg(long)]
    pub stop_at_zero: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "rule")]
    pub mode: GeneratorKind,
    #[command(flatten)]
    pub desk: DeskArgs,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also save the trained n-gram count table.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Generators compared in a target sweep.
    #[arg(long = "generator", value_enum, value_delimiter = ',', default_values = ["rule"])]
    pub generators: Vec<GeneratorKind>,
    #[command(flatten)]
    pub desk: DeskArgs,
    /// Strides; more than one (or several --residual-max) gives a grid sweep.
    #[arg(long, value_delimiter = ',')]
    pub delta: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub residual_max: Vec<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for table, CSV, JSON (and gnuplot) files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub unit: Option<LengthUnit>,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// Generation JSONL with `source` and `task` on every line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Template,
    Dialogue,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "template")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_framework(s: &str) -> Result<Framework, String> {
    s.parse()
}
