//! Dialogue corpora: domain types, the raw `__eou__` distribution format, and
//! the canonical JSONL interchange format.
//!
//! Raw format (one dialogue per line):
//!
//! ```text
//! Hi ! __eou__ Hello . __eou__
//! ```
//!
//! with optional sidecar streams holding one line per dialogue: space-separated
//! act integers (`1` inform, `2` question, `3` directive, `4` commissive) and a
//! single integer topic id.
//!
//! Canonical JSONL (one dialogue per line):
//!
//! ```json
//! {"id":"d1","utterances":[{"text":"a","act":"question"}],"topic":"3","boundaries":[]}
//! ```
//!
//! A boundary index `i` marks a topic shift between utterance `i` and `i + 1`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Token separating utterances in the raw distribution format.
pub const EOU: &str = "__eou__";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("{stream} stream has {found} lines, text stream has {expected}")]
    LineCountMismatch {
        stream: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {acts} act labels for {utterances} utterances")]
    ActCountMismatch {
        line: usize,
        acts: usize,
        utterances: usize,
    },
    #[error("line {line}: unknown dialogue act `{label}`")]
    UnknownAct { line: usize, label: String },
    #[error("line {line}: invalid topic id `{value}`")]
    InvalidTopic { line: usize, value: String },
    #[error("line {line}: utterance {index} is empty")]
    EmptyUtterance { line: usize, index: usize },
    #[error("line {line}: dialogue has no utterances")]
    EmptyDialogue { line: usize },
    #[error("line {line}: malformed JSON: {message}")]
    Json { line: usize, message: String },
    #[error("dialogue `{id}`: boundary index {index} out of range (must be < {limit})")]
    BoundaryOutOfRange { id: String, index: usize, limit: usize },
    #[error("duplicate dialogue id `{0}`")]
    DuplicateId(String),
    #[error("dialogue id must be non-empty")]
    EmptyId,
    #[error("invalid utterance: {0}")]
    Invalid(String),
}

/// Functional label of an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DialogueAct {
    Question,
    Inform,
    Directive,
    Commissive,
}

impl DialogueAct {
    pub const ALL: [DialogueAct; 4] = [
        DialogueAct::Inform,
        DialogueAct::Question,
        DialogueAct::Directive,
        DialogueAct::Commissive,
    ];

    /// Decodes the integer convention of the raw act stream.
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(DialogueAct::Inform),
            2 => Some(DialogueAct::Question),
            3 => Some(DialogueAct::Directive),
            4 => Some(DialogueAct::Commissive),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DialogueAct::Inform => 1,
            DialogueAct::Question => 2,
            DialogueAct::Directive => 3,
            DialogueAct::Commissive => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DialogueAct::Question => "question",
            DialogueAct::Inform => "inform",
            DialogueAct::Directive => "directive",
            DialogueAct::Commissive => "commissive",
        }
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown dialogue act `{0}`")]
pub struct UnknownAct(pub String);

impl FromStr for DialogueAct {
    type Err = UnknownAct;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "question" => Ok(DialogueAct::Question),
            "inform" => Ok(DialogueAct::Inform),
            "directive" => Ok(DialogueAct::Directive),
            "commissive" => Ok(DialogueAct::Commissive),
            _ => Err(UnknownAct(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub act: Option<DialogueAct>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<String>,
}

impl Utterance {
    /// Builds an utterance from text, trimming surrounding whitespace.
    pub fn new(text: impl AsRef<str>) -> Result<Self, CorpusError> {
        let text = text.as_ref().trim();
        if text.is_empty() {
            return Err(CorpusError::Invalid("utterance text is empty".into()));
        }
        Ok(Self {
            text: text.to_string(),
            act: None,
            speaker: None,
        })
    }

    pub fn with_act(mut self, act: DialogueAct) -> Self {
        self.act = Some(act);
        self
    }

    pub fn with_speaker(mut self, speaker: impl Into<String>) -> Self {
        self.speaker = Some(speaker.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub utterances: Vec<Utterance>,
    pub topic: Option<String>,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, utterances: Vec<Utterance>, topic: Option<String>) -> Result<Self, CorpusError> {
        let dialogue = Self {
            id: id.into(),
            utterances,
            topic,
        };
        dialogue.validate()?;
        Ok(dialogue)
    }

    /// Convenience constructor for tests and synthetic data.
    pub fn from_texts<S: AsRef<str>>(id: impl Into<String>, texts: &[S]) -> Result<Self, CorpusError> {
        let utterances = texts.iter().map(Utterance::new).collect::<Result<_, _>>()?;
        Self::new(id, utterances, None)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// True when every utterance carries a dialogue act.
    pub fn has_acts(&self) -> bool {
        !self.utterances.is_empty() && self.utterances.iter().all(|u| u.act.is_some())
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.id.is_empty() {
            return Err(CorpusError::EmptyId);
        }
        if self.utterances.is_empty() {
            return Err(CorpusError::Invalid(format!(
                "dialogue `{}` has no utterances",
                self.id
            )));
        }
        for (i, u) in self.utterances.iter().enumerate() {
            if u.text.trim().is_empty() {
                return Err(CorpusError::Invalid(format!(
                    "dialogue `{}`: utterance {i} is empty",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A dialogue together with its gold topic boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDialogue {
    pub dialogue: Dialogue,
    pub boundaries: BTreeSet<usize>,
}

impl AnnotatedDialogue {
    pub fn new(dialogue: Dialogue, boundaries: BTreeSet<usize>) -> Result<Self, CorpusError> {
        let limit = dialogue.len().saturating_sub(1);
        if let Some(&index) = boundaries.iter().find(|&&b| b >= limit) {
            return Err(CorpusError::BoundaryOutOfRange {
                id: dialogue.id.clone(),
                index,
                limit,
            });
        }
        Ok(Self { dialogue, boundaries })
    }

    pub fn unannotated(dialogue: Dialogue) -> Self {
        Self {
            dialogue,
            boundaries: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.dialogue.id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub language: String,
    dialogues: Vec<Dialogue>,
}

impl Corpus {
    pub fn new(
        name: impl Into<String>,
        language: impl Into<String>,
        dialogues: Vec<Dialogue>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(dialogues.len());
        for d in &dialogues {
            if !seen.insert(d.id.as_str()) {
                return Err(CorpusError::DuplicateId(d.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            language: language.into(),
            dialogues,
        })
    }

    pub fn from_annotated(
        name: impl Into<String>,
        language: impl Into<String>,
        items: impl IntoIterator<Item = AnnotatedDialogue>,
    ) -> Result<Self, CorpusError> {
        Self::new(name, language, items.into_iter().map(|a| a.dialogue).collect())
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn utterance_count(&self) -> usize {
        self.dialogues.iter().map(Dialogue::len).sum()
    }

    /// Topic labels present in the corpus.
    pub fn topics(&self) -> BTreeSet<&str> {
        self.dialogues.iter().filter_map(|d| d.topic.as_deref()).collect()
    }

    /// SHA-256 over the canonical JSONL serialization.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for d in &self.dialogues {
            let record = CanonicalRecord::from_parts(d, &BTreeSet::new());
            // serialization of these plain structs cannot fail
            let line = serde_json::to_string(&record).expect("serializable record");
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

fn read_lines<R: BufRead>(reader: R) -> Result<Vec<String>, CorpusError> {
    let mut lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    // a trailing blank line is an artifact of the final newline, nothing more
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    Ok(lines)
}

fn split_utterances(line: &str, line_no: usize) -> Result<Vec<Utterance>, CorpusError> {
    let mut pieces: Vec<&str> = line.split(EOU).collect();
    if pieces.last().is_some_and(|p| p.trim().is_empty()) {
        pieces.pop();
    }
    if pieces.is_empty() {
        return Err(CorpusError::EmptyDialogue { line: line_no });
    }
    pieces
        .into_iter()
        .enumerate()
        .map(|(index, text)| Utterance::new(text).map_err(|_| CorpusError::EmptyUtterance { line: line_no, index }))
        .collect()
}

fn parse_acts(line: &str, line_no: usize) -> Result<Vec<DialogueAct>, CorpusError> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<u8>()
                .ok()
                .and_then(DialogueAct::from_code)
                .ok_or_else(|| CorpusError::UnknownAct {
                    line: line_no,
                    label: tok.to_string(),
                })
        })
        .collect()
}

/// Parses the raw `__eou__` distribution format.
///
/// Dialogue ids are zero-padded line indices so lexical and numeric order agree.
pub fn parse_raw_dialog_corpus<T, A, P>(
    name: &str,
    language: &str,
    text: T,
    acts: Option<A>,
    topics: Option<P>,
) -> Result<Corpus, CorpusError>
where
    T: BufRead,
    A: BufRead,
    P: BufRead,
{
    let text_lines = read_lines(text)?;
    let act_lines = acts.map(read_lines).transpose()?;
    let topic_lines = topics.map(read_lines).transpose()?;

    let expected = text_lines.len();
    for (stream, lines) in [("act", &act_lines), ("topic", &topic_lines)] {
        if let Some(lines) = lines {
            if lines.len() != expected {
                return Err(CorpusError::LineCountMismatch {
                    stream,
                    expected,
                    found: lines.len(),
                });
            }
        }
    }

    let width = expected.max(1).to_string().len();
    let mut dialogues = Vec::with_capacity(expected);
    for (idx, line) in text_lines.iter().enumerate() {
        let line_no = idx + 1;
        let mut utterances = split_utterances(line, line_no)?;
        if let Some(act_lines) = &act_lines {
            let acts = parse_acts(&act_lines[idx], line_no)?;
            if acts.len() != utterances.len() {
                return Err(CorpusError::ActCountMismatch {
                    line: line_no,
                    acts: acts.len(),
                    utterances: utterances.len(),
                });
            }
            for (u, act) in utterances.iter_mut().zip(acts) {
                u.act = Some(act);
            }
        }
        let topic = match &topic_lines {
            Some(lines) => {
                let raw = lines[idx].trim();
                match raw.parse::<u32>() {
                    Ok(id) => Some(id.to_string()),
                    Err(_) => {
                        return Err(CorpusError::InvalidTopic {
                            line: line_no,
                            value: raw.to_string(),
                        })
                    }
                }
            }
            None => None,
        };
        dialogues.push(Dialogue::new(format!("{idx:0width$}"), utterances, topic)?);
    }
    Corpus::new(name, language, dialogues)
}

#[derive(Serialize)]
struct CanonicalRecord<'a> {
    id: &'a str,
    utterances: &'a [Utterance],
    #[serde(skip_serializing_if = "Option::is_none")]
    topic: Option<&'a str>,
    boundaries: Vec<usize>,
}

impl<'a> CanonicalRecord<'a> {
    fn from_parts(d: &'a Dialogue, boundaries: &BTreeSet<usize>) -> Self {
        Self {
            id: &d.id,
            utterances: &d.utterances,
            topic: d.topic.as_deref(),
            boundaries: boundaries.iter().copied().collect(),
        }
    }
}

#[derive(Deserialize)]
struct CanonicalRecordIn {
    id: String,
    utterances: Vec<Utterance>,
    #[serde(default)]
    topic: Option<String>,
    #[serde(default)]
    boundaries: Vec<usize>,
}

/// Parses one canonical JSONL record. `line` is 1-based and used for diagnostics.
pub fn parse_canonical_line(json: &str, line: usize) -> Result<AnnotatedDialogue, CorpusError> {
    let record: CanonicalRecordIn = serde_json::from_str(json).map_err(|e| CorpusError::Json {
        line,
        message: e.to_string(),
    })?;
    let utterances = record
        .utterances
        .into_iter()
        .enumerate()
        .map(|(index, u)| {
            let text = u.text.trim();
            if text.is_empty() {
                return Err(CorpusError::EmptyUtterance { line, index });
            }
            Ok(Utterance {
                text: text.to_string(),
                ..u
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if utterances.is_empty() {
        return Err(CorpusError::EmptyDialogue { line });
    }
    let dialogue = Dialogue::new(record.id, utterances, record.topic)?;
    AnnotatedDialogue::new(dialogue, record.boundaries.into_iter().collect())
}

/// Parses a canonical JSONL stream. Blank lines are ignored; ids must be unique.
pub fn parse_canonical_jsonl<R: BufRead>(reader: R) -> Result<Vec<AnnotatedDialogue>, CorpusError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = parse_canonical_line(&line, idx + 1)?;
        if !seen.insert(item.dialogue.id.clone()) {
            return Err(CorpusError::DuplicateId(item.dialogue.id));
        }
        out.push(item);
    }
    Ok(out)
}

/// Serializes one dialogue per line with a fixed key order
/// (`id`, `utterances`, `topic`, `boundaries`).
pub fn write_canonical_jsonl<W: Write>(items: &[AnnotatedDialogue], mut writer: W) -> Result<(), CorpusError> {
    for item in items {
        let record = CanonicalRecord::from_parts(&item.dialogue, &item.boundaries);
        serde_json::to_writer(&mut writer, &record).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}
