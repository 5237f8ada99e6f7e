//! Background batch extraction.
//!
//! Files from every job go through one FIFO queue served by a fixed pool of
//! worker threads. Counters are atomics so progress polls never wait on a
//! worker. With a jobs directory configured, each job is recorded as
//! `<id>.json` plus an append-only `<id>.files.jsonl` of finished files, and
//! unfinished work is re-queued when the manager starts again.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{ExtractorBackend, HedgeLexicon};
use crate::ingest::content_hash;
use crate::pipeline::process_bytes;
use crate::store::{write_atomic, ReviewStore};

pub const MAX_BATCH_FILES: usize = 5_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JobError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("batch of {count} files exceeds the limit of {limit}")]
    BatchLimitExceeded { count: usize, limit: usize },
    #[error("unknown schema `{0}`")]
    UnknownSchema(String),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("job is already {0:?}")]
    AlreadyTerminal(JobState),
    #[error("io: {0}")]
    Io(String),
}

impl From<io::Error> for JobError {
    fn from(e: io::Error) -> Self {
        JobError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Completed,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Completed | JobState::Failed | JobState::Cancelled)
    }
}

/// Where a file's bytes live: a spooled upload or an in-memory buffer.
/// Only spooled files survive a restart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileSource {
    Path(PathBuf),
    #[serde(skip)]
    Inline(Arc<Vec<u8>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub filename: String,
    pub source: FileSource,
}

impl FileRef {
    pub fn path(filename: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        FileRef {
            filename: filename.into(),
            source: FileSource::Path(path.into()),
        }
    }

    pub fn inline(filename: impl Into<String>, bytes: Vec<u8>) -> Self {
        FileRef {
            filename: filename.into(),
            source: FileSource::Inline(Arc::new(bytes)),
        }
    }

    fn read(&self) -> io::Result<Vec<u8>> {
        match &self.source {
            FileSource::Path(p) => fs::read(p),
            FileSource::Inline(b) => Ok(b.as_ref().clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileState {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStatus {
    pub index: usize,
    pub filename: String,
    pub state: FileState,
    pub report_id: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub filename: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobProgress {
    pub job_id: String,
    pub state: JobState,
    pub total: usize,
    pub done: usize,
    pub failed: usize,
    pub files: Vec<FileStatus>,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct JobHeader {
    job_id: String,
    schema_id: String,
    created_at: DateTime<Utc>,
    state: JobState,
    files: Vec<FileRef>,
    skipped: Vec<SkippedFile>,
}

struct Job {
    header: JobHeader,
    state: Mutex<JobState>,
    done: AtomicUsize,
    failed: AtomicUsize,
    statuses: Mutex<Vec<FileStatus>>,
    finishing: AtomicBool,
}

impl Job {
    fn total(&self) -> usize {
        self.header.files.len()
    }

    fn progress(&self) -> JobProgress {
        // State first: a terminal state read here implies the counters read
        // after it are final.
        let state = *self.state.lock().expect("lock");
        JobProgress {
            job_id: self.header.job_id.clone(),
            state,
            total: self.total(),
            done: self.done.load(Ordering::SeqCst),
            failed: self.failed.load(Ordering::SeqCst),
            files: self.statuses.lock().expect("lock").clone(),
            skipped: self.header.skipped.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobConfig {
    pub workers: usize,
    /// Directory for job state; `None` keeps jobs in memory only.
    pub jobs_dir: Option<PathBuf>,
    pub max_files: usize,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            workers: 2,
            jobs_dir: None,
            max_files: MAX_BATCH_FILES,
        }
    }
}

struct Shared {
    store: Arc<ReviewStore>,
    backend: Arc<dyn ExtractorBackend>,
    hedges: Arc<HedgeLexicon>,
    jobs_dir: Option<PathBuf>,
    max_files: usize,
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    queue: Mutex<VecDeque<(Arc<Job>, usize)>>,
    wake: Condvar,
    shutdown: AtomicBool,
}

pub struct JobManager {
    shared: Arc<Shared>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl JobManager {
    pub fn new(
        store: Arc<ReviewStore>,
        backend: Arc<dyn ExtractorBackend>,
        hedges: Arc<HedgeLexicon>,
        config: JobConfig,
    ) -> Result<Self, JobError> {
        if let Some(dir) = &config.jobs_dir {
            fs::create_dir_all(dir)?;
        }
        let shared = Arc::new(Shared {
            store,
            backend,
            hedges,
            jobs_dir: config.jobs_dir.clone(),
            max_files: config.max_files,
            jobs: RwLock::default(),
            queue: Mutex::default(),
            wake: Condvar::new(),
            shutdown: AtomicBool::new(false),
        });
        if let Some(dir) = &config.jobs_dir {
            resume(&shared, dir)?;
        }
        let workers = (0..config.workers.max(1))
            .map(|i| {
                let shared = shared.clone();
                thread::Builder::new()
                    .name(format!("extract-{i}"))
                    .spawn(move || worker(&shared))
                    .expect("spawn worker")
            })
            .collect();
        Ok(JobManager {
            shared,
            workers: Mutex::new(workers),
        })
    }

    /// Queues a batch. Files whose content duplicates an earlier file in the
    /// same batch are skipped and not counted in `total`.
    pub fn submit(&self, files: Vec<FileRef>, schema_id: &str) -> Result<String, JobError> {
        if files.is_empty() {
            return Err(JobError::EmptyBatch);
        }
        if files.len() > self.shared.max_files {
            return Err(JobError::BatchLimitExceeded {
                count: files.len(),
                limit: self.shared.max_files,
            });
        }
        self.shared
            .store
            .schema(schema_id)
            .map_err(|_| JobError::UnknownSchema(schema_id.to_string()))?;

        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut skipped = Vec::new();
        for f in files {
            let hash = match f.read() {
                Ok(bytes) => content_hash(&bytes),
                // Unreadable files are kept so they surface as per-file
                // failures.
                Err(_) => format!("unreadable:{}", kept.len()),
            };
            if seen.insert(hash) {
                kept.push(f);
            } else {
                skipped.push(SkippedFile {
                    filename: f.filename,
                    reason: "duplicate content in batch".into(),
                });
            }
        }

        let job_id = format!("job_{:016x}", rand::random::<u64>());
        let header = JobHeader {
            job_id: job_id.clone(),
            schema_id: schema_id.to_string(),
            created_at: Utc::now(),
            state: JobState::Queued,
            files: kept,
            skipped,
        };
        let job = Arc::new(new_job(header, &HashMap::new()));
        persist_header(&self.shared, &job)?;
        self.shared.jobs.write().expect("lock").insert(job_id.clone(), job.clone());
        enqueue(&self.shared, &job);
        Ok(job_id)
    }

    pub fn progress(&self, job_id: &str) -> Result<JobProgress, JobError> {
        Ok(self.job(job_id)?.progress())
    }

    pub fn list(&self) -> Vec<JobProgress> {
        let mut all: Vec<JobProgress> = self.shared.jobs.read().expect("lock").values().map(|j| j.progress()).collect();
        all.sort_by(|a, b| a.job_id.cmp(&b.job_id));
        all
    }

    fn job(&self, job_id: &str) -> Result<Arc<Job>, JobError> {
        self.shared
            .jobs
            .read()
            .expect("lock")
            .get(job_id)
            .cloned()
            .ok_or_else(|| JobError::UnknownJob(job_id.to_string()))
    }

    /// Stops a job: no new files start, the in-flight file finishes and
    /// finished records are kept.
    pub fn cancel(&self, job_id: &str) -> Result<JobProgress, JobError> {
        let job = self.job(job_id)?;
        {
            let mut state = job.state.lock().expect("lock");
            if state.is_terminal() {
                return Err(JobError::AlreadyTerminal(*state));
            }
            *state = JobState::Cancelled;
        }
        self.shared
            .queue
            .lock()
            .expect("lock")
            .retain(|(j, _)| j.header.job_id != job_id);
        persist_header(&self.shared, &job)?;
        Ok(job.progress())
    }

    /// Polls until the job is terminal or the timeout passes.
    pub fn wait(&self, job_id: &str, timeout: Duration) -> Result<JobProgress, JobError> {
        let deadline = Instant::now() + timeout;
        loop {
            let p = self.progress(job_id)?;
            if p.state.is_terminal() || Instant::now() >= deadline {
                return Ok(p);
            }
            thread::sleep(Duration::from_millis(5));
        }
    }

    /// Stops the workers after their current file.
    pub fn shutdown(&self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        self.shared.wake.notify_all();
        for h in self.workers.lock().expect("lock").drain(..) {
            let _ = h.join();
        }
    }
}

impl Drop for JobManager {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn new_job(header: JobHeader, finished: &HashMap<usize, FileStatus>) -> Job {
    let statuses: Vec<FileStatus> = header
        .files
        .iter()
        .enumerate()
        .map(|(index, f)| {
            finished.get(&index).cloned().unwrap_or(FileStatus {
                index,
                filename: f.filename.clone(),
                state: FileState::Pending,
                report_id: None,
                error: None,
            })
        })
        .collect();
    let count = |s: FileState| statuses.iter().filter(|f| f.state == s).count();
    Job {
        state: Mutex::new(header.state),
        done: AtomicUsize::new(count(FileState::Done)),
        failed: AtomicUsize::new(count(FileState::Failed)),
        statuses: Mutex::new(statuses),
        finishing: AtomicBool::new(false),
        header,
    }
}

fn enqueue(shared: &Shared, job: &Arc<Job>) {
    let pending: Vec<usize> = job
        .statuses
        .lock()
        .expect("lock")
        .iter()
        .filter(|s| s.state == FileState::Pending)
        .map(|s| s.index)
        .collect();
    if pending.is_empty() {
        finish_if_complete(shared, job);
        return;
    }
    let mut q = shared.queue.lock().expect("lock");
    q.extend(pending.into_iter().map(|i| (job.clone(), i)));
    drop(q);
    shared.wake.notify_all();
}

fn worker(shared: &Shared) {
    loop {
        let task = {
            let mut q = shared.queue.lock().expect("lock");
            loop {
                if shared.shutdown.load(Ordering::SeqCst) {
                    return;
                }
                if let Some(t) = q.pop_front() {
                    break t;
                }
                q = shared.wake.wait(q).expect("lock");
            }
        };
        let (job, index) = task;
        {
            let mut state = job.state.lock().expect("lock");
            match *state {
                JobState::Queued => *state = JobState::Running,
                JobState::Running => {}
                _ => continue,
            }
        }
        if job.header.state == JobState::Queued {
            let _ = persist_header(shared, &job);
        }
        let status = process_file(shared, &job, index);
        let counter = if status.state == FileState::Done { &job.done } else { &job.failed };
        job.statuses.lock().expect("lock")[index] = status.clone();
        counter.fetch_add(1, Ordering::SeqCst);
        if let Err(e) = persist_file(shared, &job, &status) {
            log::error!("cannot record progress of {}: {e}", job.header.job_id);
        }
        finish_if_complete(shared, &job);
    }
}

fn finish_if_complete(shared: &Shared, job: &Arc<Job>) {
    let finished = job.done.load(Ordering::SeqCst) + job.failed.load(Ordering::SeqCst);
    if finished < job.total() {
        return;
    }
    if job.state.lock().expect("lock").is_terminal() || job.finishing.swap(true, Ordering::SeqCst) {
        return;
    }
    // Exports are written before the terminal state is published, so a
    // caller that sees Completed can download them.
    if job.done.load(Ordering::SeqCst) > 0 {
        if let Err(e) = shared.store.regenerate_exports(&job.header.job_id) {
            log::error!("export for {} failed: {e}", job.header.job_id);
        }
    }
    {
        let mut state = job.state.lock().expect("lock");
        if state.is_terminal() {
            return;
        }
        *state = JobState::Completed;
    }
    let _ = persist_header(shared, job);
}

fn process_file(shared: &Shared, job: &Job, index: usize) -> FileStatus {
    let file = &job.header.files[index];
    let mut status = FileStatus {
        index,
        filename: file.filename.clone(),
        state: FileState::Failed,
        report_id: None,
        error: None,
    };
    match extract_one(shared, &job.header, file) {
        Ok(report_id) => {
            status.state = FileState::Done;
            status.report_id = Some(report_id);
        }
        Err(e) => {
            log::warn!("{}: {e}", file.filename);
            status.error = Some(e);
        }
    }
    status
}

/// Ingest, extract and store one file. Re-running a file whose record
/// already exists is a no-op that returns the existing id.
fn extract_one(shared: &Shared, header: &JobHeader, file: &FileRef) -> Result<String, String> {
    let bytes = file.read().map_err(|e| format!("cannot read {}: {e}", file.filename))?;
    let schema = shared.store.schema(&header.schema_id).map_err(|e| e.to_string())?;
    process_bytes(
        &shared.store,
        shared.backend.as_ref(),
        &shared.hedges,
        &schema,
        &file.filename,
        &bytes,
        &header.job_id,
    )
    .map(|p| p.report_id)
    .map_err(|e| e.to_string())
}

fn persist_header(shared: &Shared, job: &Job) -> Result<(), JobError> {
    let Some(dir) = &shared.jobs_dir else {
        return Ok(());
    };
    if job.header.files.iter().any(|f| matches!(f.source, FileSource::Inline(_))) {
        return Ok(());
    }
    let mut header = job.header.clone();
    header.state = *job.state.lock().expect("lock");
    let body = serde_json::to_vec_pretty(&header).expect("serialisable");
    write_atomic(&dir.join(format!("{}.json", header.job_id)), &body)?;
    Ok(())
}

fn persist_file(shared: &Shared, job: &Job, status: &FileStatus) -> io::Result<()> {
    let Some(dir) = &shared.jobs_dir else {
        return Ok(());
    };
    if job.header.files.iter().any(|f| matches!(f.source, FileSource::Inline(_))) {
        return Ok(());
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(format!("{}.files.jsonl", job.header.job_id)))?;
    let mut line = serde_json::to_vec(status).map_err(io::Error::other)?;
    line.push(b'\n');
    f.write_all(&line)
}

/// Reloads persisted jobs; unfinished files of non-terminal jobs are queued
/// again. A file that was in flight at crash time simply runs again.
fn resume(shared: &Arc<Shared>, dir: &Path) -> Result<(), JobError> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if !name.ends_with(".json") {
            continue;
        }
        let header: JobHeader = match serde_json::from_slice(&fs::read(&path)?) {
            Ok(h) => h,
            Err(e) => {
                log::warn!("skipping unreadable job file {}: {e}", path.display());
                continue;
            }
        };
        let mut finished = HashMap::new();
        if let Ok(text) = fs::read_to_string(dir.join(format!("{}.files.jsonl", header.job_id))) {
            for line in text.lines() {
                if let Ok(s) = serde_json::from_str::<FileStatus>(line) {
                    finished.insert(s.index, s);
                }
            }
        }
        let terminal = header.state.is_terminal();
        let job = Arc::new(new_job(header, &finished));
        if !terminal {
            *job.state.lock().expect("lock") = JobState::Queued;
            enqueue(shared, &job);
        }
        shared.jobs.write().expect("lock").insert(job.header.job_id.clone(), job);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::RuleBasedBackend;
    use crate::schema::default_schema;

    fn manager(workers: usize) -> (Arc<ReviewStore>, JobManager) {
        let store = Arc::new(ReviewStore::in_memory());
        store.register_schema(default_schema());
        let config = JobConfig {
            workers,
            ..JobConfig::default()
        };
        let m = JobManager::new(store.clone(), Arc::new(RuleBasedBackend), Arc::new(HedgeLexicon::default()), config)
            .unwrap();
        (store, m)
    }

    fn texts(n: usize) -> Vec<FileRef> {
        (0..n)
            .map(|i| FileRef::inline(format!("r{i}.txt"), format!("Report {i}. The POD is clear.").into_bytes()))
            .collect()
    }

    #[test]
    fn limits() {
        let (_, m) = manager(1);
        assert_eq!(m.submit(vec![], "endometriosis_tvus"), Err(JobError::EmptyBatch));
        let too_many = (0..MAX_BATCH_FILES + 1).map(|i| FileRef::path(format!("{i}"), "/nonexistent")).collect();
        assert_eq!(
            m.submit(too_many, "endometriosis_tvus"),
            Err(JobError::BatchLimitExceeded { count: 5001, limit: 5000 })
        );
        assert_eq!(m.submit(texts(1), "nope"), Err(JobError::UnknownSchema("nope".into())));
        assert!(matches!(m.progress("job_x"), Err(JobError::UnknownJob(_))));
    }

    #[test]
    fn duplicates_are_skipped() {
        let (_, m) = manager(2);
        let mut files = texts(3);
        files.push(FileRef::inline("copy.txt", b"Report 0. The POD is clear.".to_vec()));
        let id = m.submit(files, "endometriosis_tvus").unwrap();
        let p = m.wait(&id, Duration::from_secs(10)).unwrap();
        assert_eq!((p.state, p.total, p.done, p.failed), (JobState::Completed, 3, 3, 0));
        assert_eq!(p.skipped.len(), 1);
        assert_eq!(p.skipped[0].filename, "copy.txt");
    }

    #[test]
    fn per_file_failures_do_not_fail_the_job() {
        let (store, m) = manager(2);
        let mut files = texts(2);
        files.push(FileRef::inline("broken.pdf", b"%PDF-1.5 garbage".to_vec()));
        files.push(FileRef::path("gone.txt", "/nonexistent/gone.txt"));
        let id = m.submit(files, "endometriosis_tvus").unwrap();
        let p = m.wait(&id, Duration::from_secs(10)).unwrap();
        assert_eq!((p.state, p.done, p.failed), (JobState::Completed, 2, 2));
        assert!(p.files.iter().filter(|f| f.state == FileState::Failed).all(|f| f.error.is_some()));
        assert_eq!(store.report_ids().len(), 2);
    }

    #[test]
    fn cancel_semantics() {
        let (_, m) = manager(1);
        let id = m.submit(texts(2), "endometriosis_tvus").unwrap();
        let done = m.wait(&id, Duration::from_secs(10)).unwrap();
        assert_eq!(done.state, JobState::Completed);
        assert_eq!(m.cancel(&id), Err(JobError::AlreadyTerminal(JobState::Completed)));
        assert!(matches!(m.cancel("job_missing"), Err(JobError::UnknownJob(_))));
    }

    #[test]
    fn cancel_before_start_keeps_done_zero() {
        let store = Arc::new(ReviewStore::in_memory());
        store.register_schema(default_schema());
        let m = JobManager::new(
            store,
            Arc::new(RuleBasedBackend),
            Arc::new(HedgeLexicon::default()),
            JobConfig::default(),
        )
        .unwrap();
        // Stop the workers so the job cannot start.
        m.shutdown();
        let id = m.submit(texts(3), "endometriosis_tvus").unwrap();
        assert_eq!(m.progress(&id).unwrap().state, JobState::Queued);
        let p = m.cancel(&id).unwrap();
        assert_eq!((p.state, p.done), (JobState::Cancelled, 0));
    }

    #[test]
    fn restart_resumes_unfinished_jobs() {
        let dir = tempfile::tempdir().unwrap();
        let spool = dir.path().join("spool");
        fs::create_dir_all(&spool).unwrap();
        let files: Vec<FileRef> = (0..4)
            .map(|i| {
                let p = spool.join(format!("r{i}.txt"));
                fs::write(&p, format!("Report {i}. The POD is clear.")).unwrap();
                FileRef::path(format!("r{i}.txt"), p)
            })
            .collect();
        let jobs_dir = dir.path().join("jobs");
        let data = dir.path().join("data");
        let config = || JobConfig {
            workers: 2,
            jobs_dir: Some(jobs_dir.clone()),
            max_files: MAX_BATCH_FILES,
        };
        let id = {
            let store = Arc::new(ReviewStore::open(&data).unwrap());
            store.register_schema(default_schema());
            let m = JobManager::new(store, Arc::new(RuleBasedBackend), Arc::new(HedgeLexicon::default()), config())
                .unwrap();
            m.shutdown();
            m.submit(files, "endometriosis_tvus").unwrap()
        };
        let store = Arc::new(ReviewStore::open(&data).unwrap());
        store.register_schema(default_schema());
        let m = JobManager::new(store.clone(), Arc::new(RuleBasedBackend), Arc::new(HedgeLexicon::default()), config())
            .unwrap();
        let p = m.wait(&id, Duration::from_secs(10)).unwrap();
        assert_eq!((p.state, p.done), (JobState::Completed, 4), "{:?}", p.files);
        assert_eq!(store.report_ids().len(), 4);
        assert!(data.join("exports").join(format!("{id}_machine.csv")).exists());
    }
}
