//! Task state behind a single writer lock. Every mutation is appended to a
//! JSON-lines journal before it is applied; a full snapshot is written every
//! `snapshot_every` events so reopening replays only the journal tail.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};
use simmc_core::corpus::Corpus;
use thiserror::Error;

use crate::clock::Clock;
use crate::task::{AnnotationTask, Flag, Lease, Overlay, ParaphraseSubmission, TaskState};
use crate::validate::{validate_paraphrases, TurnRejection};

pub const DEFAULT_LEASE_TTL_MS: u64 = 30 * 60 * 1000;
pub const DEFAULT_SNAPSHOT_EVERY: u64 = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreConfig {
    pub lease_ttl_ms: u64,
    /// Approve accepted submissions immediately; otherwise they wait for
    /// [`TaskStore::approve`].
    pub auto_approve: bool,
    pub snapshot_every: u64,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            lease_ttl_ms: DEFAULT_LEASE_TTL_MS,
            auto_approve: true,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        }
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("storage error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("corrupt journal {path} line {line}: {source}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("corrupt snapshot {path}: {source}")]
    CorruptSnapshot { path: PathBuf, source: serde_json::Error },
    #[error("dialog {dialog_id} names snapshot {snapshot_id}, which the corpus lacks")]
    MissingSnapshot { dialog_id: String, snapshot_id: String },
    #[error("worker id must not be empty")]
    EmptyWorker,
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {task_id} is not leased to {worker_id}")]
    LeaseMismatch {
        task_id: String,
        worker_id: String,
        holder: Option<String>,
    },
    #[error("task {task_id} is {state}; cannot {action}")]
    InvalidState {
        task_id: String,
        state: TaskState,
        action: &'static str,
    },
    #[error("task {task_id} has {expected} turns but {got} paraphrases were sent")]
    TurnCount {
        task_id: String,
        expected: usize,
        got: usize,
    },
    #[error("{} turn(s) failed entity retention", .0.len())]
    Rejected(Vec<TurnRejection>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Event {
    Enqueued { task: Box<AnnotationTask> },
    Leased { task_id: String, lease: Lease },
    Submitted { submission: ParaphraseSubmission },
    Approved { task_id: String },
    Flagged { task_id: String, flag: Flag },
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    seq: u64,
    at: u64,
    event: Event,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct State {
    seq: u64,
    /// Enqueue order; oldest first.
    tasks: Vec<AnnotationTask>,
    submissions: BTreeMap<String, ParaphraseSubmission>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    overlays: HashMap<String, (usize, usize)>,
}

impl State {
    fn reindex(&mut self) {
        self.index.clear();
        self.overlays.clear();
        for i in 0..self.tasks.len() {
            self.index_task(i);
        }
    }

    fn index_task(&mut self, i: usize) {
        let t = &self.tasks[i];
        self.index.insert(t.task_id.clone(), i);
        for (j, s) in t.snapshots.iter().enumerate() {
            self.overlays.entry(s.snapshot.snapshot_id.clone()).or_insert((i, j));
        }
    }

    fn task(&self, id: &str) -> Option<&AnnotationTask> {
        self.index.get(id).map(|&i| &self.tasks[i])
    }

    fn task_mut(&mut self, id: &str) -> Option<&mut AnnotationTask> {
        self.index.get(id).map(|&i| &mut self.tasks[i])
    }

    fn apply(&mut self, rec: Record) {
        self.seq = rec.seq;
        match rec.event {
            Event::Enqueued { task } => {
                if !self.index.contains_key(&task.task_id) {
                    self.tasks.push(*task);
                    self.index_task(self.tasks.len() - 1);
                }
            }
            Event::Leased { task_id, lease } => {
                if let Some(t) = self.task_mut(&task_id) {
                    t.state = TaskState::Leased;
                    t.lease = Some(lease);
                }
            }
            Event::Submitted { submission } => {
                if let Some(t) = self.task_mut(&submission.task_id) {
                    t.state = TaskState::Submitted;
                    t.lease = None;
                }
                self.submissions.insert(submission.task_id.clone(), submission);
            }
            Event::Approved { task_id } => {
                if let Some(t) = self.task_mut(&task_id) {
                    t.state = TaskState::Approved;
                }
            }
            Event::Flagged { task_id, flag } => {
                if let Some(t) = self.task_mut(&task_id) {
                    t.state = TaskState::Open;
                    t.lease = None;
                    t.flags.push(flag);
                }
            }
        }
    }
}

struct Journal {
    path: PathBuf,
    snapshot_path: PathBuf,
    file: File,
    since_snapshot: u64,
}

impl Journal {
    fn append(&mut self, records: &[Record]) -> Result<(), StoreError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("journal records serialize");
            buf.push(b'\n');
        }
        let io = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(&buf).map_err(io)?;
        self.file.sync_data().map_err(io)?;
        self.since_snapshot += records.len() as u64;
        Ok(())
    }

    fn write_snapshot(&mut self, state: &State) -> Result<(), StoreError> {
        let tmp = self.snapshot_path.with_extension("snapshot.tmp");
        let io = |source| StoreError::Io {
            path: self.snapshot_path.clone(),
            source,
        };
        let bytes = serde_json::to_vec(state).expect("state serializes");
        fs::write(&tmp, bytes).map_err(io)?;
        fs::rename(&tmp, &self.snapshot_path).map_err(io)?;
        self.since_snapshot = 0;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub open: usize,
    pub leased: usize,
    pub submitted: usize,
    pub approved: usize,
    pub flagged: usize,
}

struct Inner {
    state: State,
    journal: Option<Journal>,
}

pub struct TaskStore {
    inner: RwLock<Inner>,
    clock: Arc<dyn Clock>,
    config: StoreConfig,
}

pub fn snapshot_path(journal: &Path) -> PathBuf {
    let mut p = journal.as_os_str().to_owned();
    p.push(".snapshot");
    PathBuf::from(p)
}

fn read_snapshot(path: &Path) -> Result<State, StoreError> {
    match fs::read(path) {
        Ok(bytes) => {
            let mut s: State = serde_json::from_slice(&bytes).map_err(|source| StoreError::CorruptSnapshot {
                path: path.to_path_buf(),
                source,
            })?;
            s.reindex();
            Ok(s)
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(State::default()),
        Err(source) => Err(StoreError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Replays journal records newer than the snapshot and returns how many were
/// applied plus the byte length of the intact prefix. A final line without a
/// newline is a write cut short by a crash and is dropped.
fn replay(path: &Path, state: &mut State) -> Result<(u64, u64), StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((0, 0)),
        Err(source) => {
            return Err(StoreError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut n = 0usize;
    let mut replayed = 0;
    let mut intact = 0u64;
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if read == 0 {
            break;
        }
        n += 1;
        let complete = line.ends_with('\n');
        if line.trim().is_empty() {
            if complete {
                intact += read as u64;
            }
            continue;
        }
        let rec: Record = match serde_json::from_str(line.trim_end()) {
            Ok(r) => r,
            Err(_) if !complete => break,
            Err(source) => {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: n,
                    source,
                })
            }
        };
        if !complete {
            break;
        }
        intact += read as u64;
        if rec.seq > state.seq {
            state.apply(rec);
            replayed += 1;
        }
    }
    Ok((replayed, intact))
}

impl TaskStore {
    pub fn in_memory(config: StoreConfig, clock: Arc<dyn Clock>) -> Self {
        Self {
            inner: RwLock::new(Inner {
                state: State::default(),
                journal: None,
            }),
            clock,
            config,
        }
    }

    /// Opens (or creates) a journal at `path`, restoring state from
    /// `<path>.snapshot` plus the journal records after it.
    pub fn open(path: impl AsRef<Path>, config: StoreConfig, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let snap = snapshot_path(&path);
        let mut state = read_snapshot(&snap)?;
        let (replayed, intact) = replay(&path, &mut state)?;
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        if file.metadata().map_err(io)?.len() > intact {
            file.set_len(intact).map_err(io)?;
        }
        Ok(Self {
            inner: RwLock::new(Inner {
                state,
                journal: Some(Journal {
                    path,
                    snapshot_path: snap,
                    file,
                    since_snapshot: replayed,
                }),
            }),
            clock,
            config,
        })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn now(&self) -> u64 {
        self.clock.now_ms()
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Inner> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Journals then applies `events`; nothing is applied if the write fails.
    fn commit(&self, inner: &mut Inner, events: Vec<Event>) -> Result<(), StoreError> {
        if events.is_empty() {
            return Ok(());
        }
        let at = self.clock.now_ms();
        let base = inner.state.seq;
        let records: Vec<Record> = events
            .into_iter()
            .enumerate()
            .map(|(i, event)| Record {
                seq: base + 1 + i as u64,
                at,
                event,
            })
            .collect();
        if let Some(j) = inner.journal.as_mut() {
            j.append(&records)?;
        }
        for r in records {
            inner.state.apply(r);
        }
        if let Some(j) = inner.journal.as_mut() {
            if self.config.snapshot_every > 0 && j.since_snapshot >= self.config.snapshot_every {
                j.write_snapshot(&inner.state)?;
            }
        }
        Ok(())
    }

    /// Adds one open task per dialog whose task id is not present yet and
    /// returns the total number of tasks.
    pub fn enqueue(&self, corpus: &Corpus) -> Result<usize, StoreError> {
        let snaps = corpus.snapshot_index();
        let mut inner = self.write();
        let mut events = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for d in &corpus.dialogs {
            if inner.state.index.contains_key(&d.dialog_id) || !seen.insert(d.dialog_id.as_str()) {
                continue;
            }
            let task = AnnotationTask::from_dialog(d, |id| snaps.get(id).copied()).ok_or_else(|| {
                StoreError::MissingSnapshot {
                    dialog_id: d.dialog_id.clone(),
                    snapshot_id: d
                        .snapshot_ids
                        .iter()
                        .find(|id| !snaps.contains_key(id.as_str()))
                        .cloned()
                        .unwrap_or_default(),
                }
            })?;
            events.push(Event::Enqueued { task: Box::new(task) });
        }
        self.commit(&mut inner, events)?;
        Ok(inner.state.tasks.len())
    }

    /// Leases the oldest open, unflagged task to `worker_id`. A worker that
    /// already holds a live lease gets that task back unchanged.
    pub fn next_task(&self, worker_id: &str) -> Result<Option<AnnotationTask>, StoreError> {
        if worker_id.trim().is_empty() {
            return Err(StoreError::EmptyWorker);
        }
        let now = self.clock.now_ms();
        let mut inner = self.write();
        if let Some(t) = inner
            .state
            .tasks
            .iter()
            .find(|t| t.active_lease(now).is_some_and(|l| l.worker_id == worker_id))
        {
            return Ok(Some(t.clone()));
        }
        let Some(task_id) = inner
            .state
            .tasks
            .iter()
            .find(|t| t.state_at(now) == TaskState::Open && t.flags.is_empty())
            .map(|t| t.task_id.clone())
        else {
            return Ok(None);
        };
        let lease = Lease {
            worker_id: worker_id.to_string(),
            expires_at: now.saturating_add(self.config.lease_ttl_ms),
        };
        self.commit(
            &mut inner,
            vec![Event::Leased {
                task_id: task_id.clone(),
                lease,
            }],
        )?;
        Ok(inner.state.task(&task_id).cloned())
    }

    pub fn task(&self, task_id: &str) -> Option<AnnotationTask> {
        let now = self.clock.now_ms();
        self.read().state.task(task_id).map(|t| t.view_at(now))
    }

    pub fn tasks(&self) -> Vec<AnnotationTask> {
        let now = self.clock.now_ms();
        self.read().state.tasks.iter().map(|t| t.view_at(now)).collect()
    }

    pub fn len(&self) -> usize {
        self.read().state.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_lease(task: &AnnotationTask, worker_id: &str, now: u64, action: &'static str) -> Result<(), StoreError> {
        let state = task.state_at(now);
        if matches!(state, TaskState::Submitted | TaskState::Approved) {
            return Err(StoreError::InvalidState {
                task_id: task.task_id.clone(),
                state,
                action,
            });
        }
        match task.active_lease(now) {
            Some(l) if l.worker_id == worker_id => Ok(()),
            holder => Err(StoreError::LeaseMismatch {
                task_id: task.task_id.clone(),
                worker_id: worker_id.to_string(),
                holder: holder.map(|l| l.worker_id.clone()),
            }),
        }
    }

    /// Validates and records a paraphrase set from the lease holder. Returns
    /// the task state afterwards.
    pub fn submit(&self, task_id: &str, worker_id: &str, paraphrases: Vec<String>) -> Result<TaskState, StoreError> {
        let now = self.clock.now_ms();
        let mut inner = self.write();
        let task = inner
            .state
            .task(task_id)
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))?;
        Self::check_lease(task, worker_id, now, "submit")?;
        if paraphrases.len() != task.turns.len() {
            return Err(StoreError::TurnCount {
                task_id: task_id.to_string(),
                expected: task.turns.len(),
                got: paraphrases.len(),
            });
        }
        let rejected = validate_paraphrases(&task.turns, &paraphrases);
        if !rejected.is_empty() {
            return Err(StoreError::Rejected(rejected));
        }
        let mut events = vec![Event::Submitted {
            submission: ParaphraseSubmission {
                task_id: task_id.to_string(),
                worker_id: worker_id.to_string(),
                paraphrases,
                submitted_at: now,
            },
        }];
        if self.config.auto_approve {
            events.push(Event::Approved {
                task_id: task_id.to_string(),
            });
        }
        self.commit(&mut inner, events)?;
        Ok(inner.state.task(task_id).expect("task exists").state)
    }

    /// Moves a submitted task to approved.
    pub fn approve(&self, task_id: &str) -> Result<(), StoreError> {
        let now = self.clock.now_ms();
        let mut inner = self.write();
        let task = inner
            .state
            .task(task_id)
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))?;
        let state = task.state_at(now);
        if state != TaskState::Submitted {
            return Err(StoreError::InvalidState {
                task_id: task_id.to_string(),
                state,
                action: "approve",
            });
        }
        self.commit(
            &mut inner,
            vec![Event::Approved {
                task_id: task_id.to_string(),
            }],
        )
    }

    /// Records that the lease holder found the dialog flow broken. The lease
    /// is released and the task is no longer handed out.
    pub fn flag(&self, task_id: &str, worker_id: &str, reason: &str) -> Result<(), StoreError> {
        let now = self.clock.now_ms();
        let mut inner = self.write();
        let task = inner
            .state
            .task(task_id)
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))?;
        Self::check_lease(task, worker_id, now, "flag")?;
        self.commit(
            &mut inner,
            vec![Event::Flagged {
                task_id: task_id.to_string(),
                flag: Flag {
                    worker_id: worker_id.to_string(),
                    reason: reason.to_string(),
                    at: now,
                },
            }],
        )
    }

    pub fn progress(&self) -> Progress {
        let now = self.clock.now_ms();
        let inner = self.read();
        let mut p = Progress {
            total: inner.state.tasks.len(),
            ..Progress::default()
        };
        for t in &inner.state.tasks {
            if !t.flags.is_empty() {
                p.flagged += 1;
                continue;
            }
            match t.state_at(now) {
                TaskState::Open => p.open += 1,
                TaskState::Leased => p.leased += 1,
                TaskState::Submitted => p.submitted += 1,
                TaskState::Approved => p.approved += 1,
            }
        }
        p
    }

    pub fn overlay(&self, snapshot_id: &str) -> Option<Overlay> {
        let inner = self.read();
        inner
            .state
            .overlays
            .get(snapshot_id)
            .map(|&(i, j)| inner.state.tasks[i].snapshots[j].overlay.clone())
    }

    /// Submissions of tasks that are submitted or approved, by task id.
    pub fn accepted_submissions(&self) -> Vec<ParaphraseSubmission> {
        let inner = self.read();
        inner
            .state
            .submissions
            .values()
            .filter(|s| {
                inner
                    .state
                    .task(&s.task_id)
                    .is_some_and(|t| matches!(t.state, TaskState::Submitted | TaskState::Approved))
            })
            .cloned()
            .collect()
    }

    /// Writes a snapshot now, regardless of `snapshot_every`.
    pub fn checkpoint(&self) -> Result<(), StoreError> {
        let mut inner = self.write();
        let Inner { state, journal } = &mut *inner;
        match journal.as_mut() {
            Some(j) => j.write_snapshot(state),
            None => Ok(()),
        }
    }
}
