//! Coherence scoring of consecutive utterance pairs.
//!
//! Every backend maps a pair `(context, candidate)` to a score in `[0, 1]`;
//! higher means more topically related. [`ScorerKind::score_dialogue`] turns a
//! dialogue of `k` utterances into a [`CoherenceProfile`] of `k - 1` scores.

mod embedding;
mod external;
mod lexical;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, Utterance};

pub use embedding::{load_embedding_table, EmbeddingError, EmbeddingScorer, EmbeddingTable, OOV_SCORE};
pub use external::{
    ExternalConfig, ExternalError, ExternalErrorKind, ExternalScorer, ScoreCache, BATCH_LIMIT, SCORE_PATH,
};
pub use lexical::{LexicalModel, LexicalScorer};

#[derive(Debug, thiserror::Error)]
pub enum ScorerError {
    #[error("dialogue `{id}` too short to score: {len} utterance(s)")]
    TooShort { id: String, len: usize },
    #[error("interval {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<ScorerError>,
    },
    #[error(transparent)]
    External(#[from] ExternalError),
    #[error("score {value} at interval {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
}

impl ScorerError {
    /// Whether retrying the same request could succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            ScorerError::External(e) => e.is_retryable(),
            ScorerError::Pair { source, .. } => source.is_retryable(),
            _ => false,
        }
    }
}

/// Per-interval coherence scores of one dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceProfile {
    pub dialogue_id: String,
    scores: Vec<f64>,
    /// Intervals whose score fell back to a neutral value (embedding OOV).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallbacks: Vec<usize>,
}

impl CoherenceProfile {
    pub fn new(dialogue_id: impl Into<String>, scores: Vec<f64>) -> Result<Self, ScorerError> {
        if let Some((index, &value)) = scores
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || !(0.0..=1.0).contains(*v))
        {
            return Err(ScorerError::OutOfRange { index, value });
        }
        Ok(Self {
            dialogue_id: dialogue_id.into(),
            scores,
            fallbacks: Vec::new(),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// A configured scoring backend.
#[derive(Debug, Clone)]
pub enum ScorerKind {
    Lexical(LexicalScorer),
    Embedding(EmbeddingScorer),
    External(ExternalScorer),
}

impl ScorerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScorerKind::Lexical(_) => "lexical",
            ScorerKind::Embedding(_) => "embedding",
            ScorerKind::External(_) => "external",
        }
    }

    /// Scores a single pair. `u1` is the context, `u2` the candidate next turn.
    ///
    /// The lexical backend fits its IDF over the two utterances alone; inside
    /// [`score_dialogue`](Self::score_dialogue) it uses the whole dialogue.
    pub fn score_pair(&self, u1: &Utterance, u2: &Utterance) -> Result<f64, ScorerError> {
        match self {
            ScorerKind::Lexical(s) => Ok(s.score_pair(&u1.text, &u2.text)),
            ScorerKind::Embedding(s) => Ok(s.score_pair(&u1.text, &u2.text).0),
            ScorerKind::External(s) => {
                let scores = s.score_batch(&[(u1.text.as_str(), u2.text.as_str())])?;
                Ok(scores[0])
            }
        }
    }

    pub fn score_dialogue(&self, d: &Dialogue) -> Result<CoherenceProfile, ScorerError> {
        if d.len() < 2 {
            return Err(ScorerError::TooShort {
                id: d.id.clone(),
                len: d.len(),
            });
        }
        let pairs = d
            .utterances
            .windows(2)
            .map(|w| (w[0].text.as_str(), w[1].text.as_str()));
        match self {
            ScorerKind::Lexical(s) => {
                let model = s.fit(d.utterances.iter().map(|u| u.text.as_str()));
                let scores = (0..d.len() - 1).map(|i| model.score(i, i + 1)).collect();
                CoherenceProfile::new(&d.id, scores)
            }
            ScorerKind::Embedding(s) => {
                let mut fallbacks = Vec::new();
                let scores = pairs
                    .enumerate()
                    .map(|(i, (a, b))| {
                        let (score, fallback) = s.score_pair(a, b);
                        if fallback {
                            fallbacks.push(i);
                        }
                        score
                    })
                    .collect();
                let mut profile = CoherenceProfile::new(&d.id, scores)?;
                profile.fallbacks = fallbacks;
                Ok(profile)
            }
            ScorerKind::External(s) => {
                let pairs: Vec<_> = pairs.collect();
                let scores = s.score_batch(&pairs).map_err(|e| match e.interval {
                    Some(index) => ScorerError::Pair {
                        index,
                        source: Box::new(ScorerError::External(e)),
                    },
                    None => ScorerError::External(e),
                })?;
                CoherenceProfile::new(&d.id, scores)
            }
        }
    }
}

/// Command-line scorer selector: `lexical | embedding:<vector-file> | external:<url>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    Lexical,
    Embedding(PathBuf),
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid scorer `{0}`: expected `lexical`, `embedding:<vector-file>` or `external:<url>`")]
pub struct InvalidScorerSpec(pub String);

impl FromStr for ScorerSpec {
    type Err = InvalidScorerSpec;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || InvalidScorerSpec(s.to_string());
        match s.split_once(':') {
            None if s == "lexical" => Ok(ScorerSpec::Lexical),
            Some(("embedding", path)) if !path.is_empty() => Ok(ScorerSpec::Embedding(path.into())),
            Some(("external", url)) if !url.is_empty() => Ok(ScorerSpec::External(url.to_string())),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Lexical => f.write_str("lexical"),
            ScorerSpec::Embedding(p) => write!(f, "embedding:{}", p.display()),
            ScorerSpec::External(u) => write!(f, "external:{u}"),
        }
    }
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF   // kana
        | 0x3400..=0x4DBF // ext A
        | 0x4E00..=0x9FFF // unified ideographs
        | 0xAC00..=0xD7AF // hangul syllables
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FA1F)
}

/// Lowercased alphanumeric tokens. Runs of non-alphanumeric characters split
/// tokens; CJK characters are emitted one per token since those scripts do
/// not delimit words with spaces.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(c.to_string());
        } else if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}
