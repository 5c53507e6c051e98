//! Sessions on disk: one append-only JSON-lines log per session.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use rand::RngCore;

use crate::error::ServiceError;
use crate::session::{Event, LogLine, Session};

pub type SessionHandle = Arc<Mutex<Session>>;

/// 128 random bits, URL-safe base64 without padding.
pub fn new_session_id() -> String {
    let mut bytes = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut bytes);
    URL_SAFE_NO_PAD.encode(bytes)
}

pub fn is_valid_id(id: &str) -> bool {
    id.len() == 22 && URL_SAFE_NO_PAD.decode(id).is_ok_and(|b| b.len() == 16)
}

/// Reads every event of a log file in order.
pub fn read_log(path: &Path) -> Result<Vec<Event>, ServiceError> {
    let corrupt = |message: String| ServiceError::CorruptLog {
        path: path.display().to_string(),
        message,
    };
    let mut events = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: LogLine = serde_json::from_str(&line).map_err(|e| corrupt(format!("line {}: {e}", n + 1)))?;
        if l.seq != events.len() as u64 {
            return Err(corrupt(format!("line {}: expected seq {}, found {}", n + 1, events.len(), l.seq)));
        }
        events.push(l.event);
    }
    Ok(events)
}

pub struct SessionStore {
    dir: PathBuf,
    open: Mutex<HashMap<String, SessionHandle>>,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(SessionStore {
            dir,
            open: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn write_line(&self, file: &mut File, seq: u64, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(&LogLine { seq, event: event.clone() })
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push('\n');
        file.write_all(line.as_bytes())?;
        file.sync_data()?;
        Ok(())
    }

    /// Starts a log with its CREATED event.
    pub fn create(&self, created: Event) -> Result<SessionHandle, ServiceError> {
        let session = Session::from_created(&created)?;
        let mut file = OpenOptions::new().write(true).create_new(true).open(self.log_path(&session.id))?;
        self.write_line(&mut file, 0, &created)?;
        let handle = Arc::new(Mutex::new(session));
        let id = handle.lock().expect("fresh lock").id.clone();
        self.open.lock().expect("store lock").insert(id, handle.clone());
        Ok(handle)
    }

    /// The live session, replayed from disk on first access.
    pub fn get(&self, id: &str) -> Result<SessionHandle, ServiceError> {
        if !is_valid_id(id) {
            return Err(ServiceError::SessionNotFound(id.to_string()));
        }
        let mut open = self.open.lock().expect("store lock");
        if let Some(h) = open.get(id) {
            return Ok(h.clone());
        }
        let path = self.log_path(id);
        if !path.exists() {
            return Err(ServiceError::SessionNotFound(id.to_string()));
        }
        let session = Session::replay(&read_log(&path)?)?;
        let handle = Arc::new(Mutex::new(session));
        open.insert(id.to_string(), handle.clone());
        Ok(handle)
    }

    /// Writes `event` to the log, then folds it into `session`. The caller
    /// holds the session lock, so the log order is the state order.
    pub fn append(&self, session: &mut Session, event: Event) -> Result<(), ServiceError> {
        let mut probe = session.clone();
        probe.apply(&event)?;
        let mut file = OpenOptions::new().append(true).open(self.log_path(&session.id))?;
        self.write_line(&mut file, session.events, &event)?;
        *session = probe;
        Ok(())
    }

    /// Drops cached sessions so the next access replays the log.
    pub fn evict_all(&self) {
        self.open.lock().expect("store lock").clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_22_url_safe_chars() {
        let a = new_session_id();
        assert!(is_valid_id(&a));
        assert!(a.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'));
        assert_ne!(a, new_session_id());
        assert!(!is_valid_id("../../etc/passwd"));
        assert!(!is_valid_id(""));
    }
}
