//! JSONL reading and writing.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{Example, LengthUnit, Task};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: reference is empty")]
    EmptyReference { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CorpusError::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Reads a corpus, checking ids and references, and truncates references to
/// `max_words` words.
pub fn read_examples<R: BufRead>(reader: R, max_words: usize) -> Result<Vec<Example>, CorpusError> {
    let mut out: Vec<Example> = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let mut ex: Example = serde_json::from_str(&line).map_err(|e| CorpusError::Line {
            line: lineno,
            message: e.to_string(),
        })?;
        if ex.reference.trim().is_empty() {
            return Err(CorpusError::EmptyReference { line: lineno });
        }
        if !ids.insert(ex.id.clone()) {
            return Err(CorpusError::DuplicateId { line: lineno, id: ex.id });
        }
        ex.truncate_reference(max_words);
        out.push(ex);
    }
    Ok(out)
}

/// Reads DailyDialog-style text: one dialogue per line, each utterance
/// followed by `__eou__`. The last utterance is the reference, the earlier
/// ones (newline-joined) the source.
pub fn read_dialogue_lines<R: BufRead>(reader: R) -> Result<Vec<Example>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut turns: Vec<&str> = line
            .split("__eou__")
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .collect();
        let Some(reply) = turns.pop() else {
            return Err(CorpusError::EmptyReference { line: i + 1 });
        };
        out.push(Example::new(format!("dialogue-{:05}", i + 1), turns.join("\n"), reply, Task::Dialogue));
    }
    Ok(out)
}

/// One generation to be scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    /// Raw generated text, special tokens included.
    pub generated: String,
    pub target_length: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<LengthUnit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn malformed_line_reports_number() {
        let input = "{\"id\":\"a\",\"source\":\"s\",\"reference\":\"r\",\"task\":\"dialogue\"}\n\nnot json\n";
        match read_examples(input.as_bytes(), 100) {
            Err(CorpusError::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_empty_references_rejected() {
        let dup = "{\"id\":\"a\",\"source\":\"s\",\"reference\":\"r\",\"task\":\"dialogue\"}\n{\"id\":\"a\",\"source\":\"s\",\"reference\":\"q\",\"task\":\"dialogue\"}\n";
        assert!(matches!(read_examples(dup.as_bytes(), 100), Err(CorpusError::DuplicateId { line: 2, .. })));
        let empty = "{\"id\":\"a\",\"source\":\"s\",\"reference\":\" \",\"task\":\"dialogue\"}\n";
        assert!(matches!(read_examples(empty.as_bytes(), 100), Err(CorpusError::EmptyReference { line: 1 })));
    }

    #[test]
    fn dialogue_lines_split_on_eou() {
        let input = "Hi there . __eou__ Hello ! How are you ? __eou__\n\nFine . __eou__\n";
        let ex = read_dialogue_lines(input.as_bytes()).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].source, "Hi there .");
        assert_eq!(ex[0].reference, "Hello ! How are you ?");
        assert_eq!(ex[1].source, "");
        assert_eq!(ex[1].id, "dialogue-00003");
        assert!(matches!(read_dialogue_lines("__eou__\n".as_bytes()), Err(CorpusError::EmptyReference { line: 1 })));
    }

    #[test]
    fn truncates_at_ingestion() {
        let line = "{\"id\":\"a\",\"source\":\"s\",\"reference\":\"a b c d\",\"task\":\"summarization\"}\n";
        let ex = read_examples(line.as_bytes(), 2).unwrap();
        assert_eq!(ex[0].reference, "a b");
    }

    #[test]
    fn generation_records_round_trip() {
        let rec = GenerationRecord {
            id: "x".into(),
            generated: "a b".into(),
            target_length: 2,
            reference: None,
            source: None,
            task: None,
            unit: None,
            mode: None,
        };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&rec)).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "{\"id\":\"x\",\"generated\":\"a b\",\"target_length\":2}\n");
        let back: Vec<GenerationRecord> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![rec]);
    }
}
