//! TF-IDF cosine coherence with document-local IDF.
//!
//! Each utterance of a dialogue is a document; IDF is computed over the `k`
//! utterances of that dialogue only, so no external corpus statistics are
//! needed. With raw term counts as TF:
//!
//! ```text
//! idf(t) = ln((1 + k) / (1 + df(t))) + 1
//! ```
//!
//! All weights are positive, so the cosine already lies in `[0, 1]`.

use std::collections::BTreeMap;

use super::tokenize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LexicalScorer;

impl LexicalScorer {
    /// Fits TF-IDF vectors over the given utterances.
    pub fn fit<'a>(&self, texts: impl IntoIterator<Item = &'a str>) -> LexicalModel {
        let counts: Vec<BTreeMap<String, f64>> = texts
            .into_iter()
            .map(|t| {
                let mut tf = BTreeMap::new();
                for tok in tokenize(t) {
                    *tf.entry(tok).or_insert(0.0) += 1.0;
                }
                tf
            })
            .collect();

        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for tf in &counts {
            for term in tf.keys() {
                *df.entry(term.as_str()).or_insert(0) += 1;
            }
        }
        let k = counts.len() as f64;
        let idf: BTreeMap<&str, f64> = df
            .into_iter()
            .map(|(term, n)| (term, ((1.0 + k) / (1.0 + n as f64)).ln() + 1.0))
            .collect();

        let vectors = counts
            .iter()
            .map(|tf| {
                let weighted: Vec<(String, f64)> = tf
                    .iter()
                    .map(|(term, &c)| (term.clone(), c * idf[term.as_str()]))
                    .collect();
                let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
                (weighted, norm)
            })
            .collect();
        LexicalModel { vectors }
    }

    pub fn score_pair(&self, a: &str, b: &str) -> f64 {
        self.fit([a, b]).score(0, 1)
    }
}

/// TF-IDF vectors of one dialogue, terms in sorted order.
#[derive(Debug, Clone)]
pub struct LexicalModel {
    vectors: Vec<(Vec<(String, f64)>, f64)>,
}

impl LexicalModel {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Cosine between utterances `i` and `j`. Utterances without tokens score 0.
    pub fn score(&self, i: usize, j: usize) -> f64 {
        let (a, na) = &self.vectors[i];
        let (b, nb) = &self.vectors[j];
        if *na == 0.0 || *nb == 0.0 {
            return 0.0;
        }
        let mut dot = 0.0;
        let (mut x, mut y) = (a.iter().peekable(), b.iter().peekable());
        while let (Some((ta, wa)), Some((tb, wb))) = (x.peek(), y.peek()) {
            match ta.cmp(tb) {
                std::cmp::Ordering::Less => {
                    x.next();
                }
                std::cmp::Ordering::Greater => {
                    y.next();
                }
                std::cmp::Ordering::Equal => {
                    dot += wa * wb;
                    x.next();
                    y.next();
                }
            }
        }
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}
