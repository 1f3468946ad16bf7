//! Configuration file sections and flag overrides.

use std::path::Path;

use hansel_core::desklm::{NgramConfig, RuleFollowerConfig};
use hansel_core::judge::JudgeConfig;
use hansel_core::HanselConfig;
use serde::{Deserialize, Serialize};

use crate::args::ProtocolArgs;
use crate::failure::{Failure, ResultExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub stem: bool,
    pub repeat_threshold: usize,
    pub max_period: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { stem: false, repeat_threshold: 8, max_period: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskSection {
    /// Size of the synthetic training corpus when none is given.
    pub train_size: usize,
    /// Size of the held-out synthetic source set when none is given.
    pub eval_size: usize,
    pub targets: Vec<usize>,
}

impl Default for DeskSection {
    fn default() -> Self {
        Self { train_size: 1000, eval_size: 100, targets: hansel_core::eval::DEFAULT_TARGETS.to_vec() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub hansel: HanselConfig,
    pub eval: EvalSection,
    pub desk: DeskSection,
    pub rule_follower: RuleFollowerConfig,
    pub ngram: NgramConfig,
    pub judge: JudgeConfig,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).io_ctx(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }

    /// Applies protocol flags on top of the file values and checks the result.
    pub fn apply(&mut self, flags: &ProtocolArgs) -> Result<(), Failure> {
        let h = &mut self.hansel;
        if let Some(d) = flags.delta {
            h.stride = d;
        }
        if let Some(r) = flags.residual_max {
            h.max_residual = r;
        }
        if !flags.units.is_empty() {
            h.units = flags.units.clone();
        }
        if let Some(s) = flags.seed {
            h.seed = s;
        }
        self.check()
    }

    pub fn check(&self) -> Result<(), Failure> {
        self.hansel.validate().map_err(|e| Failure::usage(e.to_string()))
    }

    /// Stable digest of the resolved settings.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("settings serialise");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
