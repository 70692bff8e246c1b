//! File-backed session store. Each session owns two files in the data
//! directory: an append-only `{id}.events.ndjson` log and a `{id}.session.json`
//! snapshot that is replaced atomically.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use reqagent_agents::{EventKind, EventSink};
use reqagent_core::clock::Clock;
use reqagent_core::{FeedbackEntry, SessionRecord, StoredFeedback};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    Running,
    Completed,
    Failed,
}

impl SessionState {
    pub fn is_finished(self) -> bool {
        matches!(self, SessionState::Completed | SessionState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// 1-based, gapless within a session.
    pub sequence_no: u64,
    pub kind: EventKind,
    pub payload: Value,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Snapshot {
    state: SessionState,
    session: SessionRecord,
}

/// What `GET /sessions/{id}` returns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub state: SessionState,
    pub event_count: u64,
    pub session: SessionRecord,
}

struct Inner {
    state: SessionState,
    record: SessionRecord,
    events: Vec<SessionEvent>,
}

pub struct SessionHandle {
    id: String,
    dir: PathBuf,
    inner: Mutex<Inner>,
    last_seq: watch::Sender<u64>,
}

fn events_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.events.ndjson"))
}

fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.session.json"))
}

impl SessionHandle {
    fn new(
        dir: PathBuf,
        state: SessionState,
        record: SessionRecord,
        events: Vec<SessionEvent>,
    ) -> Self {
        let last = events.last().map_or(0, |e| e.sequence_no);
        Self {
            id: record.id.clone(),
            dir,
            inner: Mutex::new(Inner {
                state,
                record,
                events,
            }),
            last_seq: watch::Sender::new(last),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> SessionState {
        self.lock().state
    }

    pub fn record(&self) -> SessionRecord {
        self.lock().record.clone()
    }

    pub fn view(&self) -> SessionView {
        let inner = self.lock();
        SessionView {
            id: self.id.clone(),
            state: inner.state,
            event_count: inner.events.len() as u64,
            session: inner.record.clone(),
        }
    }

    pub fn events(&self) -> Vec<SessionEvent> {
        self.lock().events.clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.last_seq.subscribe()
    }

    fn write_snapshot(&self, inner: &Inner) -> io::Result<()> {
        let snapshot = Snapshot {
            state: inner.state,
            session: inner.record.clone(),
        };
        let mut file = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer_pretty(&mut file, &snapshot)?;
        file.as_file().sync_all()?;
        file.persist(snapshot_path(&self.dir, &self.id))
            .map_err(|e| e.error)?;
        Ok(())
    }

    /// Appends to the log file first, then publishes to readers.
    pub fn append_event(
        &self,
        kind: EventKind,
        payload: Value,
        timestamp: DateTime<Utc>,
    ) -> io::Result<SessionEvent> {
        let mut inner = self.lock();
        let event = SessionEvent {
            sequence_no: inner.events.len() as u64 + 1,
            kind,
            payload,
            timestamp,
        };
        let mut line = serde_json::to_string(&event)?;
        line.push('\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(events_path(&self.dir, &self.id))?;
        file.write_all(line.as_bytes())?;
        inner.events.push(event.clone());
        drop(inner);
        self.last_seq.send_replace(event.sequence_no);
        Ok(event)
    }

    pub fn set_state(&self, state: SessionState) -> io::Result<()> {
        let mut inner = self.lock();
        inner.state = state;
        self.write_snapshot(&inner)
    }

    /// Stores the pipeline's result, keeping feedback that arrived meanwhile.
    pub fn finish(&self, mut record: SessionRecord, state: SessionState) -> io::Result<()> {
        let mut inner = self.lock();
        record.feedback = std::mem::take(&mut inner.record.feedback);
        inner.record = record;
        inner.state = state;
        self.write_snapshot(&inner)
    }

    pub fn add_feedback(&self, entry: FeedbackEntry) -> io::Result<StoredFeedback> {
        let mut inner = self.lock();
        let stored = StoredFeedback {
            id: format!("FB-{:03}", inner.record.feedback.len() + 1),
            entry,
        };
        inner.record.feedback.push(stored.clone());
        self.write_snapshot(&inner)?;
        Ok(stored)
    }

    /// Events with `sequence_no >= from` and whether the stream is over. Once
    /// a terminal event is logged, a cursor past the end yields that last event.
    pub fn replay(&self, from: u64) -> (Vec<SessionEvent>, bool) {
        let inner = self.lock();
        let terminal = inner.events.last().is_some_and(|e| e.kind.is_terminal());
        let batch: Vec<SessionEvent> = inner
            .events
            .iter()
            .filter(|e| e.sequence_no >= from)
            .cloned()
            .collect();
        if batch.is_empty() && terminal {
            return (inner.events.last().cloned().into_iter().collect(), true);
        }
        (batch, terminal)
    }
}

/// All sessions under one data directory.
pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
}

impl SessionStore {
    /// Loads every persisted session. Sessions whose worker did not finish
    /// before the previous shutdown are marked failed with an `interrupted` error.
    pub fn open(dir: impl Into<PathBuf>, clock: &dyn Clock) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".session.json"))
            .collect();
        paths.sort();
        let mut sessions = BTreeMap::new();
        for path in paths {
            let snapshot: Snapshot =
                serde_json::from_slice(&std::fs::read(&path)?).map_err(|e| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{}: {e}", path.display()),
                    )
                })?;
            let log = events_path(&dir, &snapshot.session.id);
            let events = match std::fs::read_to_string(&log) {
                Ok(text) => text
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(serde_json::from_str)
                    .collect::<Result<Vec<SessionEvent>, _>>()
                    .map_err(|e| {
                        io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("{}: {e}", log.display()),
                        )
                    })?,
                Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
                Err(e) => return Err(e),
            };
            let state = snapshot.state;
            let handle = SessionHandle::new(dir.clone(), state, snapshot.session, events);
            if !state.is_finished() {
                handle.append_event(
                    EventKind::Error,
                    json!({"kind": "interrupted", "message": "service stopped before the run finished"}),
                    clock.now(),
                )?;
                handle.set_state(SessionState::Failed)?;
            }
            sessions.insert(handle.id.clone(), Arc::new(handle));
        }
        Ok(Self {
            dir,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn create(&self, record: SessionRecord) -> io::Result<Arc<SessionHandle>> {
        let handle = Arc::new(SessionHandle::new(
            self.dir.clone(),
            SessionState::Created,
            record,
            Vec::new(),
        ));
        handle.write_snapshot(&handle.lock())?;
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(handle.id.clone(), handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect()
    }
}

/// Pipeline sink writing into a session log. Terminal events are held back
/// until [`SessionSink::release`] so readers that see them also see the
/// finished snapshot.
pub struct SessionSink {
    handle: Arc<SessionHandle>,
    clock: Arc<dyn Clock>,
    held: Mutex<Vec<(EventKind, Value)>>,
}

impl SessionSink {
    pub fn new(handle: Arc<SessionHandle>, clock: Arc<dyn Clock>) -> Self {
        Self {
            handle,
            clock,
            held: Mutex::new(Vec::new()),
        }
    }

    fn write(&self, kind: EventKind, payload: Value) {
        if let Err(e) = self.handle.append_event(kind, payload, self.clock.now()) {
            eprintln!("session {}: cannot append event: {e}", self.handle.id());
        }
    }

    pub fn release(&self) {
        let held = std::mem::take(&mut *self.held.lock().unwrap_or_else(|p| p.into_inner()));
        for (kind, payload) in held {
            self.write(kind, payload);
        }
    }
}

impl EventSink for SessionSink {
    fn emit(&self, kind: EventKind, payload: Value) {
        if kind.is_terminal() {
            self.held
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .push((kind, payload));
        } else {
            self.write(kind, payload);
        }
    }
}
