use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{LengthUnit, Segmenter, Task};
use crate::token::TokenRendering;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("delta must be at least 1 (got {0})")]
    Stride(usize),
    #[error("residual_max {residual} must be smaller than delta {stride} for unit {unit}")]
    Residual { residual: usize, stride: usize, unit: LengthUnit },
    #[error("{name} must lie in [0, 1] (got {value})")]
    Fraction { name: &'static str, value: f64 },
    #[error("at least one length unit is required")]
    NoUnits,
    #[error("length unit {0} listed twice")]
    DuplicateUnit(LengthUnit),
    #[error("prompt template for {0:?} must contain `{{length}}`")]
    PromptTemplate(Task),
}

/// Prompt wording for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskPrompt {
    /// Prompt without length information.
    pub base: String,
    /// Prompt with a `{length}` placeholder, e.g. "17 words".
    pub with_length: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplates {
    pub summarization: TaskPrompt,
    pub dialogue: TaskPrompt,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            summarization: TaskPrompt {
                base: "Summarize.".into(),
                with_length: "Summarize. Answer in {length}.".into(),
            },
            dialogue: TaskPrompt {
                base: "Reply.".into(),
                with_length: "Reply in {length}.".into(),
            },
        }
    }
}

impl PromptTemplates {
    pub fn for_task(&self, task: Task) -> &TaskPrompt {
        match task {
            Task::Summarization => &self.summarization,
            Task::Dialogue => &self.dialogue,
        }
    }

    pub fn base(&self, task: Task) -> &str {
        &self.for_task(task).base
    }

    /// Prompt stating the target length(s), e.g. "Summarize. Answer in 17 words."
    /// or "Reply in 4 sentences and 20 words."
    pub fn with_length(&self, task: Task, targets: &[(LengthUnit, usize)]) -> String {
        let phrase = targets
            .iter()
            .map(|(unit, n)| format!("{n} {}", unit.plural()))
            .collect::<Vec<_>>()
            .join(" and ");
        self.for_task(task).with_length.replace("{length}", &phrase)
    }
}

/// Augmentation parameters shared by the augmenter, validator and generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HanselConfig {
    /// Stride between periodic tokens.
    #[serde(rename = "delta")]
    pub stride: usize,
    /// Largest number of units allowed after the terminating token.
    #[serde(rename = "residual_max")]
    pub max_residual: usize,
    pub residual_fraction: f64,
    /// Model tokens before the terminator that downstream training masks.
    pub mask_n: usize,
    pub units: Vec<LengthUnit>,
    /// Per-unit stride overrides for multi-unit augmentation.
    #[serde(rename = "unit_delta", skip_serializing_if = "BTreeMap::is_empty")]
    pub unit_strides: BTreeMap<LengthUnit, usize>,
    pub rendering: TokenRendering,
    pub seed: u64,
    pub vanilla_fraction: f64,
    /// Share of the non-vanilla examples that become gretel records in a hansel mix.
    #[serde(rename = "gretel_within_nonvanilla")]
    pub gretel_fraction: f64,
    pub max_tokens: usize,
    pub prompts: PromptTemplates,
    /// Extra sentence-unit abbreviations on top of the built-in list.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub abbreviations: Vec<String>,
}

impl Default for HanselConfig {
    fn default() -> Self {
        Self {
            stride: 20,
            max_residual: 1,
            residual_fraction: 0.2,
            mask_n: 10,
            units: vec![LengthUnit::Word],
            unit_strides: BTreeMap::new(),
            rendering: TokenRendering::default(),
            seed: 0,
            vanilla_fraction: 0.2,
            gretel_fraction: 0.2,
            max_tokens: 1722,
            prompts: PromptTemplates::default(),
            abbreviations: Vec::new(),
        }
    }
}

impl HanselConfig {
    pub fn with_stride(mut self, stride: usize, max_residual: usize) -> Self {
        self.stride = stride;
        self.max_residual = max_residual;
        self
    }

    pub fn stride_for(&self, unit: LengthUnit) -> usize {
        self.unit_strides.get(&unit).copied().unwrap_or(self.stride)
    }

    /// Primary (first listed) unit.
    pub fn unit(&self) -> LengthUnit {
        self.units.first().copied().unwrap_or(LengthUnit::Word)
    }

    /// Units ordered coarse to fine.
    pub fn families(&self) -> Vec<LengthUnit> {
        let mut units = self.units.clone();
        units.sort_by_key(|u| u.coarseness_rank());
        units
    }

    pub fn is_multi_unit(&self) -> bool {
        self.units.len() > 1
    }

    pub fn segmenter(&self) -> Segmenter {
        Segmenter::default().with_abbreviations(&self.abbreviations)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.units.is_empty() {
            return Err(ConfigError::NoUnits);
        }
        for (i, unit) in self.units.iter().enumerate() {
            if self.units[..i].contains(unit) {
                return Err(ConfigError::DuplicateUnit(*unit));
            }
            let stride = self.stride_for(*unit);
            if stride == 0 {
                return Err(ConfigError::Stride(stride));
            }
            if self.max_residual >= stride {
                return Err(ConfigError::Residual {
                    residual: self.max_residual,
                    stride,
                    unit: *unit,
                });
            }
        }
        if self.stride == 0 {
            return Err(ConfigError::Stride(0));
        }
        for (name, value) in [
            ("residual_fraction", self.residual_fraction),
            ("vanilla_fraction", self.vanilla_fraction),
            ("gretel_within_nonvanilla", self.gretel_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Fraction { name, value });
            }
        }
        for task in [Task::Summarization, Task::Dialogue] {
            if !self.prompts.for_task(task).with_length.contains("{length}") {
                return Err(ConfigError::PromptTemplate(task));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reported_settings() {
        let cfg = HanselConfig::default();
        assert_eq!(cfg.stride, 20);
        assert_eq!(cfg.max_residual, 1);
        assert_eq!(cfg.residual_fraction, 0.2);
        assert_eq!(cfg.mask_n, 10);
        assert_eq!(cfg.vanilla_fraction, 0.2);
        assert_eq!(cfg.gretel_fraction, 0.2);
        assert_eq!(cfg.max_tokens, 1722);
        cfg.validate().unwrap();
    }

    #[test]
    fn residual_must_stay_below_stride() {
        let cfg = HanselConfig::default().with_stride(10, 10);
        assert!(matches!(cfg.validate(), Err(ConfigError::Residual { .. })));
        let cfg = HanselConfig::default().with_stride(0, 0);
        assert!(matches!(cfg.validate(), Err(ConfigError::Stride(0))));
        let mut cfg = HanselConfig { units: vec![LengthUnit::Sentence, LengthUnit::Word], ..Default::default() };
        cfg.unit_strides.insert(LengthUnit::Sentence, 1);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fractions_are_bounded() {
        let cfg = HanselConfig { vanilla_fraction: 1.5, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(ConfigError::Fraction { .. })));
    }

    #[test]
    fn families_run_coarse_to_fine() {
        let cfg = HanselConfig {
            units: vec![LengthUnit::Word, LengthUnit::Sentence],
            ..Default::default()
        };
        assert_eq!(cfg.families(), vec![LengthUnit::Sentence, LengthUnit::Word]);
    }

    #[test]
    fn prompt_clauses() {
        let p = PromptTemplates::default();
        assert_eq!(
            p.with_length(Task::Summarization, &[(LengthUnit::Word, 17)]),
            "Summarize. Answer in 17 words."
        );
        assert_eq!(p.with_length(Task::Dialogue, &[(LengthUnit::Word, 18)]), "Reply in 18 words.");
        assert_eq!(
            p.with_length(Task::Dialogue, &[(LengthUnit::Sentence, 4), (LengthUnit::Word, 20)]),
            "Reply in 4 sentences and 20 words."
        );
        assert_eq!(
            p.with_length(Task::Summarization, &[(LengthUnit::Word, 1)]),
            "Summarize. Answer in 1 words."
        );
    }

    #[test]
    fn toml_style_field_names() {
        let json = r#"{"delta": 10, "residual_max": 2, "units": ["sentence", "word"], "unit_delta": {"sentence": 5}}"#;
        let cfg: HanselConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.stride, 10);
        assert_eq!(cfg.max_residual, 2);
        assert_eq!(cfg.stride_for(LengthUnit::Sentence), 5);
        assert_eq!(cfg.stride_for(LengthUnit::Word), 10);
        assert_eq!(cfg.mask_n, 10);
    }
}
