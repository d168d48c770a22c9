//! Word-vector coherence: mean-pooled token vectors compared by cosine,
//! mapped from `[-1, 1]` onto `[0, 1]` via `(cos + 1) / 2`.

use std::collections::HashMap;
use std::io::{self, BufRead};
use std::sync::Arc;

use super::tokenize;

/// Score assigned when either utterance has no in-vocabulary token.
pub const OOV_SCORE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension { line: usize, expected: usize, found: usize },
    #[error("line {line}: non-numeric field `{field}`")]
    NonNumeric { line: usize, field: String },
    #[error("line {line}: token without vector components")]
    MissingVector { line: usize },
    #[error("vector file is empty")]
    Empty,
}

/// Token-to-vector lookup with a fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Number of records that replaced an earlier vector for the same token.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// `None` signals an out-of-vocabulary token.
    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index
            .get(token)
            .map(|&slot| &self.data[slot * self.dim..(slot + 1) * self.dim])
    }

    /// Entries in token order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        let mut tokens: Vec<(&String, &usize)> = self.index.iter().collect();
        tokens.sort();
        tokens
            .into_iter()
            .map(|(t, &slot)| (t.as_str(), &self.data[slot * self.dim..(slot + 1) * self.dim]))
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut builder: Option<Builder> = None;
        for (line, (token, vector)) in entries.into_iter().enumerate() {
            let b = builder.get_or_insert_with(|| Builder::new(vector.len()));
            b.insert(token.into(), &vector, line + 1)?;
        }
        builder.map(Builder::finish).ok_or(EmbeddingError::Empty)?
    }
}

struct Builder {
    table: EmbeddingTable,
}

impl Builder {
    fn new(dim: usize) -> Self {
        Self {
            table: EmbeddingTable {
                dim,
                index: HashMap::new(),
                data: Vec::new(),
                duplicates: 0,
            },
        }
    }

    fn insert(&mut self, token: String, vector: &[f32], line: usize) -> Result<(), EmbeddingError> {
        let t = &mut self.table;
        if vector.len() != t.dim {
            return Err(EmbeddingError::Dimension {
                line,
                expected: t.dim,
                found: vector.len(),
            });
        }
        match t.index.get(&token) {
            Some(&slot) => {
                t.data[slot * t.dim..(slot + 1) * t.dim].copy_from_slice(vector);
                t.duplicates += 1;
            }
            None => {
                t.index.insert(token, t.index.len());
                t.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<EmbeddingTable, EmbeddingError> {
        if self.table.dim == 0 {
            return Err(EmbeddingError::MissingVector { line: 1 });
        }
        Ok(self.table)
    }
}

fn is_count_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok())
}

/// Loads a whitespace-separated word-vector text file: one token followed by
/// `d` floats per line, `d` inferred from the first record. A leading
/// `<count> <dim>` header line is skipped. Duplicate tokens keep the last
/// vector and are counted in [`EmbeddingTable::duplicates`].
pub fn load_embedding_table<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut builder: Option<Builder> = None;
    let mut vector = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if line_no == 1 && is_count_header(&fields) {
            continue;
        }
        let (token, rest) = fields.split_first().expect("non-empty");
        if rest.is_empty() {
            return Err(EmbeddingError::MissingVector { line: line_no });
        }
        vector.clear();
        for field in rest {
            let v: f32 = field.parse().map_err(|_| EmbeddingError::NonNumeric {
                line: line_no,
                field: field.to_string(),
            })?;
            if !v.is_finite() {
                return Err(EmbeddingError::NonNumeric {
                    line: line_no,
                    field: field.to_string(),
                });
            }
            vector.push(v);
        }
        builder
            .get_or_insert_with(|| Builder::new(vector.len()))
            .insert(token.to_string(), &vector, line_no)?;
    }
    builder.map(Builder::finish).ok_or(EmbeddingError::Empty)?
}

/// Mean-pooling cosine scorer over a shared vector table.
#[derive(Debug, Clone)]
pub struct EmbeddingScorer {
    table: Arc<EmbeddingTable>,
}

impl EmbeddingScorer {
    pub fn new(table: Arc<EmbeddingTable>) -> Self {
        Self { table }
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    /// Unweighted mean of the known token vectors; `None` when every token is OOV.
    pub fn pool(&self, text: &str) -> Option<Vec<f64>> {
        let mut sum = vec![0.0f64; self.table.dim];
        let mut known = 0usize;
        for tok in tokenize(text) {
            if let Some(v) = self.table.get(&tok) {
                for (s, &x) in sum.iter_mut().zip(v) {
                    *s += f64::from(x);
                }
                known += 1;
            }
        }
        (known > 0).then(|| {
            let n = known as f64;
            sum.iter_mut().for_each(|s| *s /= n);
            sum
        })
    }

    /// Returns the score and whether it is the OOV fallback.
    pub fn score_pair(&self, a: &str, b: &str) -> (f64, bool) {
        let (Some(x), Some(y)) = (self.pool(a), self.pool(b)) else {
            return (OOV_SCORE, true);
        };
        let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
        let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            return (OOV_SCORE, true);
        }
        let cos = (dot / (nx * ny)).clamp(-1.0, 1.0);
        (((cos + 1.0) / 2.0).clamp(0.0, 1.0), false)
    }
}
