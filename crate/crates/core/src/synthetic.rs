//! Synthetic segmentation corpora with known boundaries.
//!
//! Every dialogue concatenates a few topic blocks. Each topic owns a disjoint
//! content vocabulary; a small filler vocabulary is shared by all topics. The
//! companion embedding table places each topic's words around a random
//! centroid, so topics are separated in vector space too.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{AnnotatedDialogue, Dialogue};
use crate::scorer::EmbeddingTable;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub dialogues: usize,
    pub topics: usize,
    pub vocab_per_topic: usize,
    pub filler_words: usize,
    pub blocks: RangeInclusive<usize>,
    pub block_len: RangeInclusive<usize>,
    pub content_words: RangeInclusive<usize>,
    pub filler_per_utterance: RangeInclusive<usize>,
    pub embedding_dim: usize,
    /// Standard deviation of a word vector around its topic centroid,
    /// relative to the centroid norm.
    pub word_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dialogues: 500,
            topics: 10,
            vocab_per_topic: 8,
            filler_words: 8,
            blocks: 2..=4,
            block_len: 2..=3,
            content_words: 6..=10,
            filler_per_utterance: 3..=6,
            embedding_dim: 32,
            word_noise: 0.3,
            seed: 0,
        }
    }
}

pub fn topic_word(topic: usize, j: usize) -> String {
    format!("t{topic}w{j}")
}

pub fn filler_word(j: usize) -> String {
    format!("f{j}")
}

/// Annotated dialogues; reference boundaries sit after the last utterance of
/// every block but the final one. Consecutive blocks never share a topic.
pub fn generate_corpus(config: &SyntheticConfig) -> Vec<AnnotatedDialogue> {
    assert!(config.topics >= 2, "need at least two topics");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let fillers: Vec<String> = (0..config.filler_words).map(filler_word).collect();
    let width = config.dialogues.max(1).to_string().len();
    (0..config.dialogues)
        .map(|n| {
            let blocks = rng.random_range(config.blocks.clone());
            let mut texts = Vec::new();
            let mut boundaries = BTreeSet::new();
            let mut prev_topic = None;
            for b in 0..blocks {
                let topic = loop {
                    let t = rng.random_range(0..config.topics);
                    if Some(t) != prev_topic {
                        break t;
                    }
                };
                prev_topic = Some(topic);
                for _ in 0..rng.random_range(config.block_len.clone()) {
                    texts.push(utterance(config, topic, &fillers, &mut rng));
                }
                if b + 1 < blocks {
                    boundaries.insert(texts.len() - 1);
                }
            }
            let dialogue =
                Dialogue::from_texts(format!("syn{n:0width$}"), &texts).expect("generated text is non-empty");
            AnnotatedDialogue::new(dialogue, boundaries).expect("boundaries within range")
        })
        .collect()
}

fn utterance<R: Rng>(config: &SyntheticConfig, topic: usize, fillers: &[String], rng: &mut R) -> String {
    let mut words: Vec<String> = (0..rng.random_range(config.content_words.clone()))
        .map(|_| topic_word(topic, rng.random_range(0..config.vocab_per_topic)))
        .collect();
    for _ in 0..rng.random_range(config.filler_per_utterance.clone()) {
        if let Some(f) = fillers.choose(rng) {
            let at = rng.random_range(0..=words.len());
            words.insert(at, f.clone());
        }
    }
    words.join(" ")
}

/// Vectors for every topic and filler word. Filler vectors are pure noise at
/// the same scale as the per-word topic noise.
pub fn generate_embeddings(config: &SyntheticConfig) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_e11b);
    let dim = config.embedding_dim;
    let scale = 1.0 / (dim as f64).sqrt();
    let gaussian = |rng: &mut ChaCha8Rng, s: f64| -> Vec<f64> {
        (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * s).collect()
    };
    let mut entries = Vec::new();
    for t in 0..config.topics {
        let centroid = gaussian(&mut rng, scale);
        for j in 0..config.vocab_per_topic {
            let noise = gaussian(&mut rng, scale * config.word_noise);
            let v = centroid.iter().zip(&noise).map(|(c, e)| (c + e) as f32).collect();
            entries.push((topic_word(t, j), v));
        }
    }
    for j in 0..config.filler_words {
        let v = gaussian(&mut rng, scale * config.word_noise)
            .into_iter()
            .map(|x| x as f32)
            .collect();
        entries.push((filler_word(j), v));
    }
    EmbeddingTable::from_entries(entries).expect("non-empty table with fixed dimension")
}
