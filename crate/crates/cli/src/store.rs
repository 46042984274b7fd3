//! Append-only JSON-Lines session store with an in-memory id index.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{DateTime, Utc};
use iat_core::session::{validate_session, Session};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Ui,
    Simulator,
    Import,
}

impl std::str::FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Source, String> {
        match s {
            "ui" => Ok(Source::Ui),
            "simulator" => Ok(Source::Simulator),
            "import" => Ok(Source::Import),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub session: Session,
    pub received_at: DateTime<Utc>,
    pub source: Source,
}

/// Listing entry: the record envelope without trial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSummary {
    pub session_id: String,
    pub participant_id: String,
    pub attempt: u8,
    pub strategy_id: u8,
    pub received_at: DateTime<Utc>,
    pub source: Source,
}

#[derive(Debug, thiserror::Error)]
pub enum InsertError {
    #[error("session {0} is already stored")]
    Duplicate(String),
    #[error("store write failed: {0}")]
    Io(#[from] std::io::Error),
}

struct Inner {
    file: File,
    records: Vec<StoreRecord>,
    index: HashMap<String, usize>,
}

pub struct Store {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl Store {
    /// Opens or creates the store file and loads every record into memory.
    pub fn open(path: impl AsRef<Path>) -> anyhow::Result<Store> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .with_context(|| format!("cannot open store {}", path.display()))?;

        let mut records = Vec::new();
        let mut index = HashMap::new();
        for (n, line) in BufReader::new(&file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: StoreRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("{}: skipping unreadable line {}: {e}", path.display(), n + 1);
                    continue;
                }
            };
            let violations = validate_session(&record.session);
            if !violations.is_empty() {
                bail!("{}: line {} holds an invalid session: {}", path.display(), n + 1, violations.join("; "));
            }
            if index.insert(record.session.session_id.clone(), records.len()).is_some() {
                bail!("{}: duplicate session_id {} on line {}", path.display(), record.session.session_id, n + 1);
            }
            records.push(record);
        }

        // A crash mid-append can leave a final line without its newline.
        let len = file.seek(SeekFrom::End(0))?;
        if len > 0 {
            file.seek(SeekFrom::Start(len - 1))?;
            let mut last = [0u8];
            file.read_exact(&mut last)?;
            if last[0] != b'\n' {
                file.write_all(b"\n")?;
            }
        }
        Ok(Store {
            path,
            inner: Mutex::new(Inner { file, records, index }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends a validated session; the whole line goes out in one write.
    pub fn insert(&self, session: Session, source: Source) -> Result<StoreRecord, InsertError> {
        let mut inner = self.inner.lock();
        if inner.index.contains_key(&session.session_id) {
            return Err(InsertError::Duplicate(session.session_id));
        }
        let record = StoreRecord {
            session,
            received_at: Utc::now(),
            source,
        };
        let mut line = serde_json::to_vec(&record).expect("record serialization is infallible");
        line.push(b'\n');
        inner.file.write_all(&line)?;
        inner.file.flush()?;
        let at = inner.records.len();
        inner.index.insert(record.session.session_id.clone(), at);
        inner.records.push(record.clone());
        Ok(record)
    }

    pub fn get(&self, session_id: &str) -> Option<StoreRecord> {
        let inner = self.inner.lock();
        inner.index.get(session_id).map(|&i| inner.records[i].clone())
    }

    pub fn list(&self) -> Vec<StoredSummary> {
        self.inner
            .lock()
            .records
            .iter()
            .map(|r| StoredSummary {
                session_id: r.session.session_id.clone(),
                participant_id: r.session.participant_id.clone(),
                attempt: r.session.attempt,
                strategy_id: r.session.strategy_id,
                received_at: r.received_at,
                source: r.source,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
