//! Append-only JSONL persistence of session events.
//!
//! One file per session, `<session_id>.events.jsonl`, one event per LF
//! terminated line: `{"seq":1,"at":...,"type":"join","data":{...}}`.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use coregulate_core::{SessionEvent, SessionId};

pub const LOG_SUFFIX: &str = ".events.jsonl";

pub fn log_path(data_dir: &Path, session: &SessionId) -> PathBuf {
    data_dir.join(format!("{session}{LOG_SUFFIX}"))
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("sequence gap: expected seq {expected}, got {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("corrupt record on line {line}: {message}")]
    CorruptRecord { line: usize, message: String },
    #[error("log already exists: {0}")]
    AlreadyExists(PathBuf),
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
}

/// When an append counts as written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// `fsync` data before acknowledging.
    #[default]
    Sync,
    /// Flush to the OS only; survives process crashes, not power loss.
    Flush,
}

pub fn encode(event: &SessionEvent) -> String {
    serde_json::to_string(event).expect("session events always serialize")
}

pub fn decode(line: &str) -> Result<SessionEvent, serde_json::Error> {
    serde_json::from_str(line)
}

/// A final line that was cut short by an interrupted append.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TornTail {
    pub line: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub events: Vec<SessionEvent>,
    pub torn_tail: Option<TornTail>,
    /// Length of the valid prefix of the file, in bytes.
    pub valid_len: u64,
}

/// Parses a whole log. An unparseable final line without a terminating
/// newline is dropped with a warning; any other bad line is an error.
pub fn replay_bytes(bytes: &[u8]) -> Result<Replayed, LogError> {
    let mut events: Vec<SessionEvent> = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    let mut torn_tail = None;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, terminated) = match rest.iter().position(|b| *b == b'\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let parsed = std::str::from_utf8(line)
            .map_err(|e| e.to_string())
            .and_then(|text| decode(text).map_err(|e| e.to_string()));
        match parsed {
            Ok(event) => {
                let expected = events.last().map_or(1, |e| e.seq + 1);
                if event.seq != expected {
                    return Err(LogError::CorruptRecord {
                        line: line_no,
                        message: format!("expected seq {expected}, found {}", event.seq),
                    });
                }
                events.push(event);
            }
            Err(_) if !terminated => {
                tracing::warn!(line = line_no, bytes = line.len(), "discarding torn final log record");
                torn_tail = Some(TornTail {
                    line: line_no,
                    bytes: line.len(),
                });
                break;
            }
            Err(message) => return Err(LogError::CorruptRecord { line: line_no, message }),
        }
        offset += line.len() + usize::from(terminated);
    }
    Ok(Replayed {
        events,
        torn_tail,
        valid_len: offset as u64,
    })
}

pub fn replay(path: &Path) -> Result<Replayed, LogError> {
    replay_bytes(&std::fs::read(path)?)
}

/// Single-writer handle on a session log.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
    durability: Durability,
}

impl EventLog {
    /// Creates a new, empty log. Fails if the file already exists.
    pub fn create(path: impl Into<PathBuf>, durability: Durability) -> Result<Self, LogError> {
        let path = path.into();
        let file = match OpenOptions::new().append(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => return Err(LogError::AlreadyExists(path)),
            Err(e) => return Err(e.into()),
        };
        if durability == Durability::Sync {
            if let Some(dir) = path.parent() {
                // Persist the directory entry too; best effort on platforms without dir fsync.
                let _ = File::open(dir).and_then(|d| d.sync_all());
            }
        }
        Ok(Self {
            path,
            file,
            next_seq: 1,
            durability,
        })
    }

    /// Reopens an existing log for appending, repairing a torn tail.
    pub fn open(path: impl Into<PathBuf>, durability: Durability) -> Result<(Self, Replayed), LogError> {
        let path = path.into();
        let bytes = std::fs::read(&path)?;
        let replayed = replay_bytes(&bytes)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        if replayed.valid_len < bytes.len() as u64 {
            file.set_len(replayed.valid_len)?;
        }
        let mut log = Self {
            path,
            file,
            next_seq: replayed.events.last().map_or(1, |e| e.seq + 1),
            durability,
        };
        if replayed.valid_len > 0 && bytes[replayed.valid_len as usize - 1] != b'\n' {
            // Complete final record that lost only its newline.
            log.file.write_all(b"\n")?;
        }
        Ok((log, replayed))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Writes one record; returns its seq once it is durable.
    pub fn append(&mut self, event: &SessionEvent) -> Result<u64, LogError> {
        if event.seq != self.next_seq {
            return Err(LogError::SequenceGap {
                expected: self.next_seq,
                found: event.seq,
            });
        }
        let mut line = encode(event);
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        match self.durability {
            Durability::Sync => self.file.sync_data()?,
            Durability::Flush => self.file.flush()?,
        }
        self.next_seq += 1;
        Ok(event.seq)
    }
}
