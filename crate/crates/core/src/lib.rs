//! Remaining-length special-token augmentation and length-control evaluation.
//!
//! Reference outputs are interleaved with tokens announcing how many units
//! (words, sentences, characters or model tokens) remain, and generators are
//! scored on how closely they land on a requested length.

pub mod augment;
pub mod automaton;
pub mod config;
pub mod corpus;
pub mod desklm;
pub mod eval;
pub mod generate;
pub mod judge;
pub mod synth;
pub mod text;
pub mod token;

pub use augment::{AugmentedExample, Framework, MixManifest};
pub use automaton::{validate, AutomatonVerdict, Violation, ViolationKind};
pub use config::HanselConfig;
pub use text::{Example, LengthUnit, Segmentation, Task};
pub use token::{parse_stream, SpecialToken, TokenRendering};
