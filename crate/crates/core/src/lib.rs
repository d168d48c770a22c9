//! Unsupervised dialogue topic segmentation: utterance-pair coherence
//! scoring, TextTiling boundary inference, evaluation metrics and coherence
//! training-data generation.

pub mod corpus;
pub mod metrics;
pub mod pairgen;
pub mod report;
pub mod scorer;
pub mod segmenter;
pub mod synthetic;

pub use corpus::{AnnotatedDialogue, Corpus, CorpusError, Dialogue, DialogueAct, Utterance};
pub use metrics::{evaluate, EvalReport, MetricError};
pub use pairgen::{generate_triplets, split_triplets, GenConfig, TripletInstance, TripletSet};
pub use report::{segment_dialogues, SegmentReport, SegmentSummary};
pub use scorer::{CoherenceProfile, ScorerError, ScorerKind, ScorerSpec};
pub use segmenter::{segment, DepthProfile, Segmentation};
