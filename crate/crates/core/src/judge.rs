//! LLM-judge quality scoring with per-task categories, strict score
//! parsing, retries and an on-disk response cache.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::Task;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge unavailable after {attempts} attempts: {message}")]
    Unavailable { attempts: usize, message: String },
    #[error("could not read a {category} score from judge output {raw:?}: {reason}")]
    Parse { category: String, raw: String, reason: String },
    #[error("source and generated text must be non-empty")]
    EmptyInput,
    #[error("missing API key: environment variable {0} is not set")]
    MissingKey(String),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: usize,
    pub retry_backoff_ms: u64,
    pub cache_dir: Option<PathBuf>,
    pub temperature: f64,
    pub max_in_flight: usize,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key_env: "HANSEL_JUDGE_API_KEY".into(),
            timeout_secs: 60,
            max_retries: 3,
            retry_backoff_ms: 500,
            cache_dir: None,
            temperature: 0.0,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Category {
    pub name: &'static str,
    pub max: u8,
    pub criteria: &'static str,
    pub steps: &'static str,
}

const SUMMARIZATION: [Category; 4] = [
    Category {
        name: "coherence",
        max: 5,
        criteria: "Coherence (1-5) - the collective quality of all sentences. The summary should be well-structured and well-organized, building from sentence to sentence to a coherent body of information about a topic.",
        steps: "1. Read the source carefully and identify its main topic and key points.\n2. Read the summary and check whether it covers the main topic and key points in a clear and logical order.\n3. Assign a coherence score from 1 to 5.",
    },
    Category {
        name: "consistency",
        max: 5,
        criteria: "Consistency (1-5) - the factual alignment between the summary and the source. A consistent summary contains only statements entailed by the source and no hallucinated facts.",
        steps: "1. Read the source carefully and identify the main facts and details it presents.\n2. Read the summary and check each claim against the source.\n3. Assign a consistency score from 1 to 5.",
    },
    Category {
        name: "fluency",
        max: 3,
        criteria: "Fluency (1-3) - the quality of the summary in terms of grammar, spelling, punctuation, word choice and sentence structure.",
        steps: "1. Read the summary and note grammatical or stylistic problems.\n2. Assign a fluency score from 1 to 3.",
    },
    Category {
        name: "relevance",
        max: 5,
        criteria: "Relevance (1-5) - selection of important content from the source. The summary should include only important information and no redundancies or excess information.",
        steps: "1. Read the summary and the source carefully.\n2. Compare them and identify the main points of the source.\n3. Check how well the summary covers those points and how much irrelevant or redundant content it contains.\n4. Assign a relevance score from 1 to 5.",
    },
];

const DIALOGUE: [Category; 4] = [
    Category {
        name: "naturalness",
        max: 5,
        criteria: "Naturalness (1-5) - how natural the response is: is it something a person would naturally say in this conversation?",
        steps: "1. Read the conversation history and the response.\n2. Judge whether the response sounds like something a person would say.\n3. Assign a naturalness score from 1 to 5.",
    },
    Category {
        name: "coherence",
        max: 5,
        criteria: "Coherence (1-5) - whether the response serves as a valid continuation of the conversation history.",
        steps: "1. Read the conversation history and identify where it stands.\n2. Read the response and check that it follows on from the history.\n3. Assign a coherence score from 1 to 5.",
    },
    Category {
        name: "engagingness",
        max: 3,
        criteria: "Engagingness (1-3) - whether the response is dull or interesting.",
        steps: "1. Read the conversation history and the response.\n2. Decide whether the response is dull, somewhat interesting or interesting.\n3. Assign an engagingness score from 1 to 3.",
    },
    Category {
        name: "groundedness",
        max: 5,
        criteria: "Groundedness (1-5) - how well the response uses the facts and context given in the conversation history.",
        steps: "1. Read the conversation history and note the facts it establishes.\n2. Check whether the response uses or stays consistent with them.\n3. Assign a groundedness score from 1 to 5.",
    },
];

pub fn categories(task: Task) -> &'static [Category] {
    match task {
        Task::Summarization => &SUMMARIZATION,
        Task::Dialogue => &DIALOGUE,
    }
}

/// Criteria, evaluation steps and a one-field form to fill in.
pub fn geval_prompt(category: &Category, task: Task, source: &str, generated: &str) -> String {
    let (what, source_label, output_label) = match task {
        Task::Summarization => ("one summary written for a news article", "Source Text", "Summary"),
        Task::Dialogue => ("one response written for a conversation", "Conversation History", "Response"),
    };
    let title = {
        let mut c = category.name.chars();
        c.next().map(|f| f.to_uppercase().chain(c).collect::<String>()).unwrap_or_default()
    };
    format!(
        "You will be given {what}.\n\nYour task is to rate the {output} on one metric.\n\nEvaluation Criteria:\n\n{criteria}\n\nEvaluation Steps:\n\n{steps}\n\n{source_label}:\n\n{source}\n\n{output_label}:\n\n{generated}\n\nEvaluation Form (scores ONLY):\n\n- {title}:",
        output = output_label.to_lowercase(),
        criteria = category.criteria,
        steps = category.steps,
    )
}

fn score_pattern() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:[a-z]+\s*[:=]\s*)?(\d+)(?:\s*/\s*\d+)?\s*\.?\s*$").expect("valid score pattern")
    })
}

/// Accepts a bare integer, optionally labelled (`Coherence: 4`) or written
/// as `4/5`. Anything else, or a value outside `1..=max`, is an error.
pub fn parse_score(raw: &str, category: &Category) -> Result<u8, JudgeError> {
    let err = |reason: String| JudgeError::Parse {
        category: category.name.to_string(),
        raw: raw.to_string(),
        reason,
    };
    let caps = score_pattern().captures(raw).ok_or_else(|| err("not a bare score".into()))?;
    let value: u64 = caps[1].parse().map_err(|_| err("score does not fit".into()))?;
    if value < 1 || value > u64::from(category.max) {
        return Err(err(format!("{value} is outside 1-{}", category.max)));
    }
    Ok(value as u8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityScore {
    pub task: Task,
    pub scores: BTreeMap<String, u8>,
    /// Mean of the raw category scores.
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

/// Sends one chat-completions request and returns the reply text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use super::*;

    pub struct HttpTransport {
        agent: ureq::Agent,
        endpoint: String,
        api_key: String,
    }

    impl HttpTransport {
        /// Reads the API key from the configured environment variable.
        pub fn from_config(cfg: &JudgeConfig) -> Result<Self, JudgeError> {
            let api_key =
                std::env::var(&cfg.api_key_env).map_err(|_| JudgeError::MissingKey(cfg.api_key_env.clone()))?;
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
                .build()
                .into();
            Ok(Self { agent, endpoint: cfg.endpoint.clone(), api_key })
        }
    }

    impl ChatTransport for HttpTransport {
        fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
            let mut response = self
                .agent
                .post(&self.endpoint)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(request)
                .map_err(|e| TransportError(e.to_string()))?;
            let body: serde_json::Value =
                response.body_mut().read_json().map_err(|e| TransportError(e.to_string()))?;
            body["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| TransportError(format!("no message content in response: {body}")))
        }
    }
}

pub struct Judge<T: ChatTransport> {
    cfg: JudgeConfig,
    transport: T,
    tmp_counter: AtomicUsize,
}

impl<T: ChatTransport> Judge<T> {
    pub fn new(cfg: JudgeConfig, transport: T) -> Self {
        Self { cfg, transport, tmp_counter: AtomicUsize::new(0) }
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn cache_path(&self, prompt: &str) -> Option<PathBuf> {
        let dir = self.cfg.cache_dir.as_ref()?;
        let mut h = Sha256::new();
        h.update(self.cfg.model.as_bytes());
        h.update([0]);
        h.update(prompt.as_bytes());
        let key: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Some(dir.join(format!("{key}.txt")))
    }

    fn ask(&self, prompt: &str) -> Result<String, JudgeError> {
        let path = self.cache_path(prompt);
        if let Some(p) = &path {
            match std::fs::read_to_string(p) {
                Ok(cached) => return Ok(cached),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
        }
        let request = ChatRequest {
            model: self.cfg.model.clone(),
            temperature: self.cfg.temperature,
            messages: vec![ChatMessage { role: "user".into(), content: prompt.to_string() }],
        };
        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        let mut reply = None;
        for attempt in 0..attempts {
            match self.transport.complete(&request) {
                Ok(text) => {
                    reply = Some(text);
                    break;
                }
                Err(e) => last = e.0,
            }
            if attempt + 1 < attempts && self.cfg.retry_backoff_ms > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.retry_backoff_ms << attempt.min(6)));
            }
        }
        let reply = reply.ok_or(JudgeError::Unavailable { attempts, message: last })?;
        if let Some(p) = &path {
            self.write_atomic(p, &reply)?;
        }
        Ok(reply)
    }

    fn write_atomic(&self, path: &std::path::Path, contents: &str) -> std::io::Result<()> {
        let dir = path.parent().expect("cache files live in a directory");
        std::fs::create_dir_all(dir)?;
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".tmp-{}-{n}", std::process::id()));
        std::fs::write(&tmp, contents)?;
        std::fs::rename(&tmp, path)
    }

    /// One request per category; every category must yield an in-scale score.
    pub fn judge(&self, source: &str, generated: &str, task: Task) -> Result<QualityScore, JudgeError> {
        if source.trim().is_empty() || generated.trim().is_empty() {
            return Err(JudgeError::EmptyInput);
        }
        let mut scores = BTreeMap::new();
        for category in categories(task) {
            let raw = self.ask(&geval_prompt(category, task, source, generated))?;
            scores.insert(category.name.to_string(), parse_score(&raw, category)?);
        }
        let average = scores.values().map(|&s| f64::from(s)).sum::<f64>() / scores.len() as f64;
        Ok(QualityScore { task, scores, average })
    }

    /// Judges many records with at most `max_in_flight` running at once.
    /// Results keep input order.
    pub fn judge_all(&self, items: &[(String, String, Task)]) -> Vec<Result<QualityScore, JudgeError>> {
        let workers = self.cfg.max_in_flight.max(1).min(items.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<QualityScore, JudgeError>>>> = items.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some((source, generated, task)) = items.get(i) else { break };
                    let r = self.judge(source, generated, *task);
                    *slots[i].lock().expect("slot lock") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().expect("slot lock").expect("every item judged"))
            .collect()
    }
}
