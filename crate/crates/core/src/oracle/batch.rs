use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Oracle, OracleConfig, OracleError, OracleRequest, RequestHints};

/// One JSONL line of a run transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub key: String,
    pub sample_id: String,
    pub round: u8,
    pub image: String,
    pub prompt: String,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
    pub latency_ms: u64,
}

/// An oracle plus batching policy and an optional append-only transcript.
pub struct OracleClient {
    oracle: Box<dyn Oracle>,
    max_concurrency: usize,
    max_tokens: u32,
    temperature: f64,
    transcript: Option<(PathBuf, Mutex<BufWriter<File>>)>,
}

impl OracleClient {
    pub fn new(oracle: Box<dyn Oracle>, max_concurrency: usize) -> Self {
        OracleClient { oracle, max_concurrency: max_concurrency.max(1), max_tokens: 64, temperature: 0.0, transcript: None }
    }

    pub fn from_config(oracle: Box<dyn Oracle>, cfg: &OracleConfig) -> Self {
        OracleClient { max_tokens: cfg.max_tokens, temperature: cfg.temperature, ..Self::new(oracle, cfg.max_concurrency) }
    }

    /// Builds a request carrying this client's decoding parameters.
    pub fn request(&self, image_ref: impl Into<PathBuf>, prompt: impl Into<String>, hints: RequestHints) -> OracleRequest {
        OracleRequest {
            image_ref: image_ref.into(),
            prompt: prompt.into(),
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            hints,
        }
    }

    /// Appends every request/response pair to `path` as JSONL.
    pub fn with_transcript(mut self, path: &Path) -> std::io::Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.transcript = Some((path.to_path_buf(), Mutex::new(BufWriter::new(file))));
        Ok(self)
    }

    pub fn transcript_path(&self) -> Option<&Path> {
        self.transcript.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn describe(&self) -> String {
        self.oracle.describe()
    }

    pub fn max_concurrency(&self) -> usize {
        self.max_concurrency
    }

    pub fn answer(&self, req: &OracleRequest) -> Result<String, OracleError> {
        let (res, ms) = timed(self.oracle.as_ref(), req);
        self.log(std::iter::once((req, &res, ms)));
        res
    }

    /// Answers every request with at most `max_concurrency` in flight. Results are
    /// positionally aligned with `reqs`; failures stay in their slot.
    pub fn answer_batch(&self, reqs: &[OracleRequest]) -> Vec<Result<String, OracleError>> {
        if reqs.is_empty() {
            return Vec::new();
        }
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        let workers = self.max_concurrency.min(reqs.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let next = &next;
                let oracle = self.oracle.as_ref();
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= reqs.len() {
                        break;
                    }
                    let (res, ms) = timed(oracle, &reqs[i]);
                    if tx.send((i, res, ms)).is_err() {
                        break;
                    }
                });
            }
        });
        drop(tx);
        let mut slots: Vec<Option<(Result<String, OracleError>, u64)>> = vec![None; reqs.len()];
        for (i, res, ms) in rx {
            slots[i] = Some((res, ms));
        }
        let done: Vec<(Result<String, OracleError>, u64)> =
            slots.into_iter().map(|s| s.expect("every request answered")).collect();
        self.log(reqs.iter().zip(done.iter()).map(|(r, (res, ms))| (r, res, *ms)));
        done.into_iter().map(|(res, _)| res).collect()
    }

    fn log<'a>(&self, entries: impl Iterator<Item = (&'a OracleRequest, &'a Result<String, OracleError>, u64)>) {
        let Some((path, w)) = &self.transcript else { return };
        let mut w = w.lock().expect("transcript lock poisoned");
        for (req, res, ms) in entries {
            let rec = TranscriptRecord {
                key: req.key(),
                sample_id: req.hints.sample_id.clone(),
                round: req.hints.round,
                image: req.image_ref.to_string_lossy().into_owned(),
                prompt: req.prompt.clone(),
                response: res.as_ref().ok().cloned(),
                error: res.as_ref().err().map(|e| e.to_string()),
                latency_ms: ms,
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            if let Err(e) = writeln!(w, "{line}") {
                log::warn!("cannot append to transcript {}: {e}", path.display());
            }
        }
        let _ = w.flush();
    }
}

fn timed(oracle: &dyn Oracle, req: &OracleRequest) -> (Result<String, OracleError>, u64) {
    let start = Instant::now();
    let res = oracle.answer(req);
    (res, start.elapsed().as_millis() as u64)
}
