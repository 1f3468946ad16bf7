//! Reading inputs, writing outputs atomically, run records.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use hansel_core::corpus::{read_dialogue_lines, read_examples, read_jsonl};
use hansel_core::Example;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::InputFormat;
use crate::failure::{Failure, ResultExt};
use crate::settings::Settings;

pub fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).io_ctx(|| format!("opening {}", path.display()))
}

pub fn load_examples(path: &Path, format: Option<InputFormat>, max_words: Option<usize>) -> Result<Vec<Example>, Failure> {
    let format = format.unwrap_or(if path.extension().is_some_and(|e| e == "txt") {
        InputFormat::Dialogue
    } else {
        InputFormat::Jsonl
    });
    let reader = open(path)?;
    let mut examples = match format {
        InputFormat::Jsonl => read_examples(reader, usize::MAX),
        InputFormat::Dialogue => read_dialogue_lines(reader),
    }
    .io_ctx(|| format!("reading {}", path.display()))?;
    if let Some(n) = max_words {
        for ex in &mut examples {
            ex.truncate_reference(n);
        }
    }
    Ok(examples)
}

pub fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    read_jsonl(open(path)?).io_ctx(|| format!("reading {}", path.display()))
}

/// Writes via a temporary file in the target directory, renamed on success.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).io_ctx(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).io_ctx(|| format!("temporary file in {}", dir.display()))?;
    tmp.write_all(bytes).io_ctx(|| format!("writing {}", path.display()))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))
            .io_ctx(|| format!("writing {}", path.display()))?;
    }
    tmp.persist(path).io_ctx(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    hansel_core::corpus::write_jsonl(&mut buf, items).expect("in-memory write");
    buf
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serialisable");
    v.push(b'\n');
    v
}

/// `path` with `suffix` appended to its file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Timing and provenance of one invocation, written as `<output>.run.json`.
/// It varies between runs; every other output is a pure function of inputs,
/// settings and seed.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub command: String,
    pub args: Vec<String>,
    pub config_sha256: String,
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
    pub outputs: Vec<String>,
}

pub struct RunClock {
    started: Instant,
    wall: u128,
}

impl RunClock {
    pub fn start() -> Self {
        let wall = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis());
        Self { started: Instant::now(), wall }
    }

    pub fn finish(&self, command: &str, settings: &Settings, anchor: &Path, outputs: &[&Path]) -> Result<(), Failure> {
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
        let id = Sha256::digest(format!("{}:{nanos}", std::process::id()).as_bytes());
        let record = RunRecord {
            run_id: id.iter().take(8).map(|b| format!("{b:02x}")).collect(),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config_sha256: settings.digest(),
            started_unix_ms: self.wall,
            elapsed_ms: self.started.elapsed().as_millis(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        write_atomic(&sidecar(anchor, ".run.json"), &json_bytes(&record))
    }
}
