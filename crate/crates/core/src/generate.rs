//! The interface evaluation sweeps drive generators through.

use thiserror::Error;

use crate::augment::InferenceMode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerationError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("generation failed: {0}")]
    Failed(String),
}

#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub id: &'a str,
    pub context: &'a str,
    pub target_length: usize,
    /// Per-request seed; see [`request_seed`].
    pub seed: u64,
}

/// Produces a continuation of an inference context.
pub trait Generator: Send + Sync {
    /// Which kind of context this generator expects.
    fn mode(&self) -> InferenceMode;

    fn generate(&self, request: &GenerationRequest<'_>) -> Result<String, GenerationError>;

    /// Whether `generate` may be called from several threads at once.
    fn concurrent_safe(&self) -> bool {
        false
    }
}

/// Stable per-request seed derived from a base seed, record id and target.
pub fn request_seed(base: u64, id: &str, target: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.as_bytes().iter().chain(&target.to_le_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(base ^ splitmix(h))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_spread() {
        assert_eq!(request_seed(1, "a", 5), request_seed(1, "a", 5));
        assert_ne!(request_seed(1, "a", 5), request_seed(1, "a", 6));
        assert_ne!(request_seed(1, "a", 5), request_seed(2, "a", 5));
        assert_ne!(request_seed(1, "a", 5), request_seed(1, "b", 5));
    }
}
