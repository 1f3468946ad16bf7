//! Deterministic synthetic corpora built from sentence templates.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::text::{Example, Task};

const NOUNS: &[&str] = &[
    "council", "river", "teacher", "market", "engine", "village", "report", "garden", "doctor", "bridge",
    "company", "station", "farmer", "museum", "court", "storm", "school", "harbor", "train", "library",
    "festival", "painter", "hospital", "team", "mayor", "forest", "factory", "student", "road", "island",
];
const ADJECTIVES: &[&str] = &[
    "old", "local", "quiet", "busy", "new", "small", "famous", "northern", "bright", "rural", "large",
    "careful", "young", "public", "early", "remote",
];
const VERBS: &[&str] = &[
    "visited", "opened", "closed", "praised", "repaired", "described", "funded", "moved", "found",
    "joined", "studied", "reported", "built", "crossed", "named", "welcomed",
];
const PLACES: &[&str] = &[
    "Texas", "Ohio", "Paris", "Lagos", "Oslo", "Lima", "Kyoto", "Dublin", "Cairo", "Denver", "Quebec",
    "Perth",
];
const TIMES: &[&str] = &[
    "yesterday", "today", "recently", "again", "later", "early", "overnight", "finally", "twice",
];
const NAMES: &[&str] = &[
    "Maria", "Chen", "Omar", "Ines", "Tomas", "Aiko", "Ravi", "Lena", "Kofi", "Sara", "Ivan", "Noor",
];

/// 26 sentence patterns. `N` noun, `A` adjective, `V` verb, `P` place,
/// `T` time word, `Q` person; anything else is literal.
pub const TEMPLATES: [&str; 26] = [
    "The A N V the N",
    "Q V the N in P",
    "A N V T",
    "The N in P was V T",
    "Officials said the N V the A N",
    "Q and Q V the N",
    "A N were V near the N",
    "The N V a A N in P last week",
    "Q V T",
    "Residents of P V the N",
    "The A N V after the storm",
    "Q said the N was A",
    "The N V the N and the N",
    "Police V a N near P",
    "The N has V A N for years",
    "Q V the A N in P T",
    "Experts V the N",
    "The A N in P V the A N on Monday",
    "A N V the N while Q V the N",
    "Q never V the N",
    "The N V",
    "Visitors to P V the A N",
    "The N was V by Q",
    "A A N V the N in P",
    "Q V that the N in P was A and A",
    "The N of P V the N T",
];

fn fill(template: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
    template
        .split_whitespace()
        .map(|slot| {
            let pool = match slot {
                "N" => NOUNS,
                "A" => ADJECTIVES,
                "V" => VERBS,
                "P" => PLACES,
                "T" => TIMES,
                "Q" => NAMES,
                literal => return literal.to_string(),
            };
            pool.choose(rng).expect("non-empty pool").to_string()
        })
        .collect()
}

/// Words of exactly `length` words made of whole template sentences, the
/// last one cut short if needed. Every sentence ends with a period.
pub fn template_text(length: usize, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<String> = Vec::with_capacity(length);
    while words.len() < length {
        let template = TEMPLATES.choose(rng).expect("templates");
        let mut sentence = fill(template, rng);
        sentence.truncate(length - words.len());
        if let Some(last) = sentence.last_mut() {
            last.push('.');
        }
        words.extend(sentence);
    }
    words.join(" ")
}

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub n: usize,
    pub seed: u64,
    pub task: Task,
    pub min_len: usize,
    pub max_len: usize,
    /// Median reference length in words.
    pub median: f64,
    /// Log-scale spread.
    pub sigma: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            seed: 0,
            task: Task::Summarization,
            min_len: 3,
            max_len: 150,
            median: 24.0,
            sigma: 0.55,
        }
    }
}

/// A reference-length draw from the right-skewed length distribution.
fn draw_length(dist: &LogNormal<f64>, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> usize {
    (dist.sample(rng).round() as usize).clamp(spec.min_len, spec.max_len)
}

/// Template corpus with short documents as sources.
pub fn synthetic_corpus(spec: &SyntheticSpec) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dist = LogNormal::new(spec.median.ln(), spec.sigma).expect("valid log-normal");
    (0..spec.n)
        .map(|i| {
            let length = draw_length(&dist, spec, &mut rng);
            let source_len = rng.random_range(40..=120);
            let source = template_text(source_len, &mut rng);
            let reference = template_text(length, &mut rng);
            Example::new(format!("synth-{i:05}"), source, reference, spec.task)
        })
        .collect()
}

/// DailyDialog-style lines: utterances each followed by ` __eou__`.
/// Final-utterance lengths are log-normal with the given mean and spread.
pub fn dialogue_lines(n: usize, seed: u64, mean: f64, std: f64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma2 = (1.0 + (std / mean).powi(2)).ln();
    let dist = LogNormal::new(mean.ln() - sigma2 / 2.0, sigma2.sqrt()).expect("valid log-normal");
    (0..n)
        .map(|_| {
            let turns = rng.random_range(2..=6);
            let mut line = String::new();
            for t in 0..turns {
                let len = if t + 1 == turns {
                    (dist.sample(&mut rng).round() as usize).max(1)
                } else {
                    rng.random_range(3..=15)
                };
                line.push_str(&template_text(len, &mut rng));
                line.push_str(" __eou__ ");
            }
            line.trim_end().to_string()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::count_words;

    #[test]
    fn exact_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1, 3, 7, 25, 150] {
            let t = template_text(len, &mut rng);
            assert_eq!(count_words(&t), len);
            assert!(t.ends_with('.'));
        }
    }

    #[test]
    fn corpus_is_deterministic_and_bounded() {
        let spec = SyntheticSpec { n: 2000, ..Default::default() };
        let a = synthetic_corpus(&spec);
        assert_eq!(a, synthetic_corpus(&spec));
        let lens: Vec<usize> = a.iter().map(|e| count_words(&e.reference)).collect();
        assert!(lens.iter().all(|&l| (3..=150).contains(&l)));
        let mean = lens.iter().sum::<usize>() as f64 / lens.len() as f64;
        assert!((22.0..34.0).contains(&mean), "mean {mean}");
        assert!(*lens.iter().max().unwrap() > 80);
    }

    #[test]
    fn dialogue_format() {
        let lines = dialogue_lines(50, 1, 11.73, 9.38);
        assert_eq!(lines.len(), 50);
        assert!(lines.iter().all(|l| l.ends_with("__eou__")));
    }
}
