//! Client for a remote coherence model speaking the `/score` JSON protocol.
//!
//! ```text
//! POST /score  {"pairs": [["context", "candidate"], ...]}
//! 200          {"scores": [0.83, ...]}
//! ```
//!
//! Requests carry at most [`BATCH_LIMIT`] pairs. Responses must align 1:1 with
//! the request and every score must lie in `[0, 1]`.

use std::fmt;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use lru::LruCache;
use serde::{Deserialize, Serialize};

pub const BATCH_LIMIT: usize = 64;
pub const SCORE_PATH: &str = "/score";

#[derive(Debug, Clone, PartialEq)]
pub enum ExternalErrorKind {
    Timeout,
    Transport,
    Status(u16),
    Malformed,
    LengthMismatch { expected: usize, found: usize },
    OutOfRange { value: f64 },
    EmptyRequest,
}

#[derive(Debug, Clone, thiserror::Error)]
pub struct ExternalError {
    pub kind: ExternalErrorKind,
    pub message: String,
    /// Position of the offending pair in the caller's list, when known.
    pub interval: Option<usize>,
}

impl ExternalError {
    fn new(kind: ExternalErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            interval: None,
        }
    }

    pub fn is_retryable(&self) -> bool {
        match self.kind {
            ExternalErrorKind::Timeout | ExternalErrorKind::Transport => true,
            ExternalErrorKind::Status(code) => code == 429 || code >= 500,
            _ => false,
        }
    }
}

impl fmt::Display for ExternalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExternalErrorKind::Timeout => write!(f, "external scorer timed out: {}", self.message),
            ExternalErrorKind::Transport => write!(f, "external scorer unreachable: {}", self.message),
            ExternalErrorKind::Status(code) => write!(f, "external scorer returned HTTP {code}: {}", self.message),
            ExternalErrorKind::Malformed => write!(f, "malformed scorer response: {}", self.message),
            ExternalErrorKind::LengthMismatch { expected, found } => {
                write!(f, "scorer returned {found} scores for {expected} pairs")
            }
            ExternalErrorKind::OutOfRange { value } => write!(f, "score out of range: {value}"),
            ExternalErrorKind::EmptyRequest => f.write_str("no pairs to score"),
        }
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<[&'a str; 2]>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

type CacheKey = (String, String, String);

/// LRU cache keyed on `(endpoint, context, candidate)`, shareable across
/// scorers and threads. Capacity 0 disables caching.
#[derive(Debug)]
pub struct ScoreCache {
    inner: Option<Mutex<LruCache<CacheKey, f64>>>,
}

impl ScoreCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: NonZeroUsize::new(capacity).map(|c| Mutex::new(LruCache::new(c))),
        }
    }

    fn lock(&self) -> Option<std::sync::MutexGuard<'_, LruCache<CacheKey, f64>>> {
        // a poisoned cache only loses memoized values
        self.inner.as_ref().map(|m| m.lock().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn get(&self, endpoint: &str, a: &str, b: &str) -> Option<f64> {
        let key = (endpoint.to_string(), a.to_string(), b.to_string());
        self.lock()?.get(&key).copied()
    }

    pub fn put(&self, endpoint: &str, a: &str, b: &str, score: f64) {
        if let Some(mut cache) = self.lock() {
            cache.put((endpoint.to_string(), a.to_string(), b.to_string()), score);
        }
    }

    pub fn len(&self) -> usize {
        self.lock().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    /// Base URL of the server; `/score` is appended unless already present.
    pub url: String,
    pub timeout: Duration,
    /// Additional attempts for retryable failures.
    pub max_retries: u32,
    pub cache_capacity: usize,
    pub auth_token: Option<String>,
}

impl ExternalConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout: Duration::from_secs(30),
            max_retries: 2,
            cache_capacity: 100_000,
            auth_token: None,
        }
    }
}

#[derive(Clone)]
pub struct ExternalScorer {
    endpoint: String,
    agent: ureq::Agent,
    config: ExternalConfig,
    cache: Arc<ScoreCache>,
    requests: Arc<AtomicUsize>,
}

impl fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalScorer")
            .field("endpoint", &self.endpoint)
            .field("requests", &self.request_count())
            .finish_non_exhaustive()
    }
}

impl ExternalScorer {
    pub fn new(config: ExternalConfig) -> Self {
        let cache = Arc::new(ScoreCache::new(config.cache_capacity));
        Self::with_cache(config, cache)
    }

    pub fn with_cache(config: ExternalConfig, cache: Arc<ScoreCache>) -> Self {
        let trimmed = config.url.trim_end_matches('/');
        let endpoint = if trimmed.ends_with(SCORE_PATH) {
            trimmed.to_string()
        } else {
            format!("{trimmed}{SCORE_PATH}")
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint,
            agent,
            config,
            cache,
            requests: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Number of HTTP requests issued so far (retries included).
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    /// Scores `pairs` in order, serving cached pairs locally and sending the
    /// rest in batches of at most [`BATCH_LIMIT`].
    pub fn score_batch(&self, pairs: &[(&str, &str)]) -> Result<Vec<f64>, ExternalError> {
        if pairs.is_empty() {
            return Err(ExternalError::new(ExternalErrorKind::EmptyRequest, ""));
        }
        let mut scores: Vec<Option<f64>> = pairs
            .iter()
            .map(|(a, b)| self.cache.get(&self.endpoint, a, b))
            .collect();
        let misses: Vec<usize> = (0..pairs.len()).filter(|&i| scores[i].is_none()).collect();

        for chunk in misses.chunks(BATCH_LIMIT) {
            let batch: Vec<(&str, &str)> = chunk.iter().map(|&i| pairs[i]).collect();
            let fetched = self.send_with_retry(&batch).map_err(|mut e| {
                e.interval = e.interval.map(|j| chunk[j]);
                e
            })?;
            for (&i, score) in chunk.iter().zip(fetched) {
                let (a, b) = pairs[i];
                self.cache.put(&self.endpoint, a, b, score);
                scores[i] = Some(score);
            }
        }
        Ok(scores.into_iter().map(|s| s.expect("every pair scored")).collect())
    }

    fn send_with_retry(&self, batch: &[(&str, &str)]) -> Result<Vec<f64>, ExternalError> {
        let mut attempt = 0;
        loop {
            match self.send(batch) {
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    log::warn!("{e}; retrying ({}/{})", attempt + 1, self.config.max_retries);
                    std::thread::sleep(Duration::from_millis(50 << attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn send(&self, batch: &[(&str, &str)]) -> Result<Vec<f64>, ExternalError> {
        debug_assert!(batch.len() <= BATCH_LIMIT);
        let body = ScoreRequest {
            pairs: batch.iter().map(|&(a, b)| [a, b]).collect(),
        };
        let mut request = self.agent.post(&self.endpoint);
        if let Some(token) = &self.config.auth_token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut response = request.send_json(&body).map_err(transport_error)?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(ExternalError::new(ExternalErrorKind::Status(status), text));
        }
        let parsed: ScoreResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| ExternalError::new(ExternalErrorKind::Malformed, e.to_string()))?;
        if parsed.scores.len() != batch.len() {
            return Err(ExternalError::new(
                ExternalErrorKind::LengthMismatch {
                    expected: batch.len(),
                    found: parsed.scores.len(),
                },
                "",
            ));
        }
        if let Some((j, &value)) = parsed
            .scores
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || !(0.0..=1.0).contains(*v))
        {
            let mut err = ExternalError::new(ExternalErrorKind::OutOfRange { value }, "");
            err.interval = Some(j);
            return Err(err);
        }
        Ok(parsed.scores)
    }
}

fn transport_error(e: ureq::Error) -> ExternalError {
    match e {
        ureq::Error::Timeout(t) => ExternalError::new(ExternalErrorKind::Timeout, t.to_string()),
        ureq::Error::StatusCode(code) => ExternalError::new(ExternalErrorKind::Status(code), ""),
        ureq::Error::Json(e) => ExternalError::new(ExternalErrorKind::Malformed, e.to_string()),
        other => ExternalError::new(ExternalErrorKind::Transport, other.to_string()),
    }
}
