//! Append-only judgment journal, one JSON object per line.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mfr_core::judgments::GradeScale;
use serde::{Deserialize, Serialize};

use crate::AssessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentEvent {
    pub topic_id: String,
    pub item_id: String,
    pub assessor: String,
    pub grade: u8,
    /// Milliseconds since the Unix epoch. Informational only; replay order is file order.
    pub timestamp: u64,
}

impl JudgmentEvent {
    pub fn now(topic_id: &str, item_id: &str, assessor: &str, grade: u8) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        JudgmentEvent {
            topic_id: topic_id.to_string(),
            item_id: item_id.to_string(),
            assessor: assessor.to_string(),
            grade,
            timestamp,
        }
    }
}

/// (assessor, topic, item) -> grade
pub type Latest = BTreeMap<(String, String, String), u8>;

/// Fold events in order; later events overwrite earlier ones.
pub fn latest_wins<'a>(events: impl IntoIterator<Item = &'a JudgmentEvent>) -> Latest {
    let mut out = Latest::new();
    for e in events {
        out.insert((e.assessor.clone(), e.topic_id.clone(), e.item_id.clone()), e.grade);
    }
    out
}

/// Parse journal text. Returns the events and the byte length of the intact
/// prefix. A final line without a newline that fails to parse is a torn write
/// (never acknowledged) and is dropped; any other bad line is an error.
pub fn parse_journal(text: &str, source: &str) -> Result<(Vec<JudgmentEvent>, usize), AssessError> {
    let mut events = Vec::new();
    let mut offset = 0;
    for (n, line) in text.split_inclusive('\n').enumerate() {
        let complete = line.ends_with('\n');
        let body = line.trim_end();
        if body.is_empty() {
            offset += line.len();
            continue;
        }
        let parsed = serde_json::from_str::<JudgmentEvent>(body)
            .map_err(|e| e.to_string())
            .and_then(|ev| match GradeScale::Arqmath.check(i64::from(ev.grade)) {
                Ok(_) => Ok(ev),
                Err(e) => Err(e.to_string()),
            });
        match (parsed, complete) {
            (Ok(ev), true) => {
                events.push(ev);
                offset += line.len();
            }
            (_, false) => break,
            (Err(reason), true) => {
                return Err(AssessError::Core(mfr_core::Error::MalformedLine {
                    path: source.to_string(),
                    line: n + 1,
                    reason,
                }))
            }
        }
    }
    Ok((events, offset))
}

pub struct Journal {
    file: File,
    path: PathBuf,
}

impl Journal {
    /// Open (creating if needed) and replay. A torn tail is truncated away so
    /// the next append starts on a clean line.
    pub fn open(path: &Path) -> Result<(Journal, Vec<JudgmentEvent>), AssessError> {
        let io = |source| AssessError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;
        let (events, intact) = parse_journal(&text, &path.display().to_string())?;
        if intact < text.len() {
            file.set_len(intact as u64).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        Ok((
            Journal {
                file,
                path: path.to_path_buf(),
            },
            events,
        ))
    }

    /// Append one event and force it to disk before returning.
    pub fn append(&mut self, event: &JudgmentEvent) -> Result<(), AssessError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let io = |source| AssessError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.flush().map_err(io)?;
        self.file.sync_data().map_err(io)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
