//! Coherence-ranking training data.
//!
//! Each positive is an adjacent pair `(u_i, u_{i+1})` of one dialogue. It is
//! paired with two negatives replacing `u_{i+1}`:
//!
//! * `neg_same`: an utterance of the same dialogue at index `j` with
//!   `j ∉ {i-1, i, i+1}`;
//! * `neg_cross`: an utterance of a different dialogue.
//!
//! The implied ordering is `CS(s, pos) > CS(s, neg_same) > CS(s, neg_cross)`.
//! With act flows enabled (and acts present) only question→inform and
//! directive→commissive pairs are positives and `neg_same` must carry an act
//! different from `pos`. With the topic constraint enabled `neg_cross` comes
//! from a dialogue labelled with a different topic.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dialogue, DialogueAct};

/// Resampling attempts per cross-dialogue negative before the positive is skipped.
pub const RETRY_BUDGET: usize = 16;

const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, thiserror::Error)]
pub enum PairgenError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("cross-dialogue negatives need at least two dialogues")]
    SingleDialogue,
    #[error("topic constraint unsatisfiable: every dialogue has topic `{0}`")]
    UnsatisfiableTopicConstraint(String),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("cannot split {found} {unit}s into 3 folds")]
    TooFewForSplit { found: usize, unit: SplitUnit },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed triplet: {message}")]
    Json { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitUnit {
    #[default]
    Instance,
    Dialogue,
}

impl fmt::Display for SplitUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitUnit::Instance => "instance",
            SplitUnit::Dialogue => "dialogue",
        })
    }
}

impl FromStr for SplitUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instance" => Ok(SplitUnit::Instance),
            "dialogue" => Ok(SplitUnit::Dialogue),
            other => Err(format!("unknown split unit `{other}` (expected instance or dialogue)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    fn validate(&self) -> Result<(), PairgenError> {
        let r = self.as_array();
        let ok = r.iter().all(|x| x.is_finite() && *x >= 0.0) && (r.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(PairgenError::InvalidRatios(r))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub use_act_flows: bool,
    pub use_topic_constraint: bool,
    pub seed: u64,
    pub split_ratios: SplitRatios,
    pub split_unit: SplitUnit,
}

impl GenConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            use_act_flows: true,
            use_topic_constraint: true,
            seed,
            split_ratios: SplitRatios::default(),
            split_unit: SplitUnit::Instance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UtteranceRef {
    pub dialogue: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub anchor: UtteranceRef,
    pub pos: UtteranceRef,
    pub neg_same: UtteranceRef,
    pub neg_cross: UtteranceRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletInstance {
    pub anchor: String,
    pub pos: String,
    pub neg_same: String,
    pub neg_cross: String,
    pub meta: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SkipCounts {
    /// Positives in dialogues with fewer than four utterances.
    pub dialogue_too_short: usize,
    /// Positives with no legal same-dialogue negative.
    pub no_same_dialogue_negative: usize,
    /// Positives whose cross-dialogue draw exhausted the retry budget.
    pub no_cross_dialogue_negative: usize,
    /// Adjacent pairs rejected by the act-flow filter (not counted as skips
    /// of positives).
    pub not_act_flow: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.dialogue_too_short + self.no_same_dialogue_negative + self.no_cross_dialogue_negative
    }

    fn merge(&mut self, o: &SkipCounts) {
        self.dialogue_too_short += o.dialogue_too_short;
        self.no_same_dialogue_negative += o.no_same_dialogue_negative;
        self.no_cross_dialogue_negative += o.no_cross_dialogue_negative;
        self.not_act_flow += o.not_act_flow;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripletSet {
    pub instances: Vec<TripletInstance>,
    pub skipped: SkipCounts,
}

impl TripletSet {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Ranking pairs after expanding each instance into (pos, neg_same) and
    /// (pos, neg_cross).
    pub fn ranking_pair_count(&self) -> usize {
        2 * self.instances.len()
    }
}

pub fn is_act_flow(first: DialogueAct, second: DialogueAct) -> bool {
    matches!(
        (first, second),
        (DialogueAct::Question, DialogueAct::Inform) | (DialogueAct::Directive, DialogueAct::Commissive)
    )
}

fn acts_active(config: &GenConfig, d: &Dialogue) -> bool {
    config.use_act_flows && d.has_acts()
}

fn topic_active<'a>(config: &GenConfig, d: &'a Dialogue) -> Option<&'a str> {
    d.topic.as_deref().filter(|_| config.use_topic_constraint)
}

fn act(d: &Dialogue, i: usize) -> DialogueAct {
    d.utterances[i].act.expect("acts checked present")
}

/// Generates triplets for every dialogue. Dialogue `i` draws from its own
/// ChaCha stream `i` under `config.seed`, so the result is independent of
/// scheduling; output is ordered by dialogue id, then anchor index.
pub fn generate_triplets(corpus: &Corpus, config: &GenConfig) -> Result<TripletSet, PairgenError> {
    let dialogues = corpus.dialogues();
    match dialogues.len() {
        0 => return Err(PairgenError::EmptyCorpus),
        1 => return Err(PairgenError::SingleDialogue),
        _ => {}
    }
    if config.use_topic_constraint && dialogues.iter().all(|d| d.topic.is_some()) {
        let topics = corpus.topics();
        if topics.len() == 1 {
            let only = topics.into_iter().next().unwrap_or_default();
            return Err(PairgenError::UnsatisfiableTopicConstraint(only.to_string()));
        }
    }

    let per_dialogue: Vec<(Vec<TripletInstance>, SkipCounts)> = (0..dialogues.len())
        .into_par_iter()
        .map(|di| generate_for_dialogue(dialogues, di, config))
        .collect();

    let mut set = TripletSet::default();
    for (instances, skipped) in per_dialogue {
        set.instances.extend(instances);
        set.skipped.merge(&skipped);
    }
    set.instances.sort_by(|a, b| {
        (&a.meta.anchor.dialogue, a.meta.anchor.index).cmp(&(&b.meta.anchor.dialogue, b.meta.anchor.index))
    });
    Ok(set)
}

fn generate_for_dialogue(dialogues: &[Dialogue], di: usize, config: &GenConfig) -> (Vec<TripletInstance>, SkipCounts) {
    let d = &dialogues[di];
    let k = d.len();
    let mut skipped = SkipCounts::default();
    let mut out = Vec::new();
    if k < 2 {
        return (out, skipped);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(di as u64);

    let with_acts = acts_active(config, d);
    let positives: Vec<usize> = (0..k - 1)
        .filter(|&i| !with_acts || is_act_flow(act(d, i), act(d, i + 1)))
        .collect();
    skipped.not_act_flow = (k - 1) - positives.len();
    if k < 4 {
        skipped.dialogue_too_short = positives.len();
        return (out, skipped);
    }

    let topic = topic_active(config, d);
    for i in positives {
        let candidates: Vec<usize> = (0..k)
            .filter(|&j| j + 1 < i || j > i + 1)
            .filter(|&j| !with_acts || act(d, j) != act(d, i + 1))
            .collect();
        let Some(&j) = candidates.choose(&mut rng) else {
            skipped.no_same_dialogue_negative += 1;
            continue;
        };
        let Some((m, jm)) = draw_cross(dialogues, di, topic, &mut rng) else {
            skipped.no_cross_dialogue_negative += 1;
            continue;
        };
        let other = &dialogues[m];
        let uref = |dialogue: &Dialogue, index| UtteranceRef {
            dialogue: dialogue.id.clone(),
            index,
        };
        out.push(TripletInstance {
            anchor: d.utterances[i].text.clone(),
            pos: d.utterances[i + 1].text.clone(),
            neg_same: d.utterances[j].text.clone(),
            neg_cross: other.utterances[jm].text.clone(),
            meta: Provenance {
                anchor: uref(d, i),
                pos: uref(d, i + 1),
                neg_same: uref(d, j),
                neg_cross: uref(other, jm),
            },
        });
    }
    (out, skipped)
}

fn draw_cross<R: Rng>(dialogues: &[Dialogue], di: usize, topic: Option<&str>, rng: &mut R) -> Option<(usize, usize)> {
    for _ in 0..RETRY_BUDGET {
        // uniform over the other n - 1 dialogues
        let mut m = rng.random_range(0..dialogues.len() - 1);
        if m >= di {
            m += 1;
        }
        let other = &dialogues[m];
        if let Some(t) = topic {
            match other.topic.as_deref() {
                Some(ot) if ot != t => {}
                _ => continue,
            }
        }
        return Some((m, rng.random_range(0..other.len())));
    }
    None
}

/// A constraint an emitted triplet fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownDialogue(String),
    IndexOutOfRange(UtteranceRef),
    TextMismatch(&'static str),
    NotAdjacent,
    NegSameWrongDialogue,
    NegSameTooClose { anchor: usize, neg: usize },
    NegCrossSameDialogue,
    NotActFlow,
    NegSameSharesAct,
    NegCrossSharesTopic,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownDialogue(id) => write!(f, "unknown dialogue `{id}`"),
            Violation::IndexOutOfRange(r) => write!(f, "index {} out of range in `{}`", r.index, r.dialogue),
            Violation::TextMismatch(field) => write!(f, "{field} text differs from its provenance"),
            Violation::NotAdjacent => f.write_str("anchor and pos are not adjacent"),
            Violation::NegSameWrongDialogue => f.write_str("neg_same is from another dialogue"),
            Violation::NegSameTooClose { anchor, neg } => write!(f, "neg_same index {neg} within 1 of anchor {anchor}"),
            Violation::NegCrossSameDialogue => f.write_str("neg_cross is from the anchor's dialogue"),
            Violation::NotActFlow => f.write_str("anchor/pos act bigram is not a dialogue-act flow"),
            Violation::NegSameSharesAct => f.write_str("neg_same has the same act as pos"),
            Violation::NegCrossSharesTopic => f.write_str("neg_cross dialogue shares the anchor's topic"),
        }
    }
}

/// Post-hoc checker for triplets against their source corpus.
pub struct Auditor<'a> {
    by_id: HashMap<&'a str, &'a Dialogue>,
    config: &'a GenConfig,
}

impl<'a> Auditor<'a> {
    pub fn new(corpus: &'a Corpus, config: &'a GenConfig) -> Self {
        Self {
            by_id: corpus.dialogues().iter().map(|d| (d.id.as_str(), d)).collect(),
            config,
        }
    }

    fn resolve(&self, r: &UtteranceRef, text: &str, field: &'static str) -> Result<&'a Dialogue, Violation> {
        let d = *self
            .by_id
            .get(r.dialogue.as_str())
            .ok_or_else(|| Violation::UnknownDialogue(r.dialogue.clone()))?;
        let u = d
            .utterances
            .get(r.index)
            .ok_or_else(|| Violation::IndexOutOfRange(r.clone()))?;
        if u.text != text {
            return Err(Violation::TextMismatch(field));
        }
        Ok(d)
    }

    pub fn check(&self, t: &TripletInstance) -> Result<(), Violation> {
        let m = &t.meta;
        let source = self.resolve(&m.anchor, &t.anchor, "anchor")?;
        self.resolve(&m.pos, &t.pos, "pos")?;
        self.resolve(&m.neg_same, &t.neg_same, "neg_same")?;
        let cross = self.resolve(&m.neg_cross, &t.neg_cross, "neg_cross")?;

        if m.pos.dialogue != m.anchor.dialogue || m.pos.index != m.anchor.index + 1 {
            return Err(Violation::NotAdjacent);
        }
        if m.neg_same.dialogue != m.anchor.dialogue {
            return Err(Violation::NegSameWrongDialogue);
        }
        if m.neg_same.index.abs_diff(m.anchor.index) < 2 {
            return Err(Violation::NegSameTooClose {
                anchor: m.anchor.index,
                neg: m.neg_same.index,
            });
        }
        if m.neg_cross.dialogue == m.anchor.dialogue {
            return Err(Violation::NegCrossSameDialogue);
        }
        if acts_active(self.config, source) {
            if !is_act_flow(act(source, m.anchor.index), act(source, m.pos.index)) {
                return Err(Violation::NotActFlow);
            }
            if act(source, m.neg_same.index) == act(source, m.pos.index) {
                return Err(Violation::NegSameSharesAct);
            }
        }
        if let Some(topic) = topic_active(self.config, source) {
            if cross.topic.as_deref().is_none_or(|t| t == topic) {
                return Err(Violation::NegCrossSharesTopic);
            }
        }
        Ok(())
    }

    /// Every failing instance with its position.
    pub fn audit(&self, instances: &[TripletInstance]) -> Vec<(usize, Violation)> {
        instances
            .iter()
            .enumerate()
            .filter_map(|(i, t)| self.check(t).err().map(|v| (i, v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Splits {
    pub train: Vec<TripletInstance>,
    pub val: Vec<TripletInstance>,
    pub test: Vec<TripletInstance>,
}

impl Splits {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

/// Largest-remainder apportionment of `n` items over the ratios.
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut remaining = n - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[i] += 1;
        remaining -= 1;
    }
    sizes
}

/// Deterministic train/val/test partition. Each fold keeps the canonical
/// instance order.
pub fn split_triplets(set: &TripletSet, config: &GenConfig) -> Result<Splits, PairgenError> {
    config.split_ratios.validate()?;
    let ratios = config.split_ratios.as_array();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SPLIT_STREAM);

    // fold of every instance index
    let fold: Vec<usize> = match config.split_unit {
        SplitUnit::Instance => {
            let n = set.instances.len();
            if n < 3 {
                return Err(PairgenError::TooFewForSplit {
                    found: n,
                    unit: SplitUnit::Instance,
                });
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut fold = vec![0; n];
            assign_folds(&order, apportion(n, ratios), |item, f| fold[item] = f);
            fold
        }
        SplitUnit::Dialogue => {
            let ids: BTreeSet<&str> = set.instances.iter().map(|t| t.meta.anchor.dialogue.as_str()).collect();
            if ids.len() < 3 {
                return Err(PairgenError::TooFewForSplit {
                    found: ids.len(),
                    unit: SplitUnit::Dialogue,
                });
            }
            let mut order: Vec<&str> = ids.into_iter().collect();
            order.shuffle(&mut rng);
            let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
            assign_folds(&order, apportion(order.len(), ratios), |id, f| {
                by_id.insert(id, f);
            });
            set.instances
                .iter()
                .map(|t| by_id[t.meta.anchor.dialogue.as_str()])
                .collect()
        }
    };

    let mut splits = Splits::default();
    for (t, f) in set.instances.iter().zip(fold) {
        match f {
            0 => splits.train.push(t.clone()),
            1 => splits.val.push(t.clone()),
            _ => splits.test.push(t.clone()),
        }
    }
    Ok(splits)
}

fn assign_folds<T: Copy>(order: &[T], sizes: [usize; 3], mut assign: impl FnMut(T, usize)) {
    let mut it = order.iter();
    for (f, &size) in sizes.iter().enumerate() {
        for &item in it.by_ref().take(size) {
            assign(item, f);
        }
    }
}

pub fn write_triplets_jsonl<W: Write>(instances: &[TripletInstance], mut writer: W) -> Result<(), PairgenError> {
    for t in instances {
        serde_json::to_writer(&mut writer, t).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_triplets_jsonl<R: BufRead>(reader: R) -> Result<Vec<TripletInstance>, PairgenError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| PairgenError::Json {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

/// Everything needed to re-derive a generated training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub config: GenConfig,
    pub seed: u64,
    pub corpus_name: String,
    pub corpus_checksum: String,
    pub dialogues: usize,
    pub instances: usize,
    pub ranking_pairs: usize,
    pub skipped: SkipCounts,
    pub split_sizes: [usize; 3],
}

impl GenerationManifest {
    pub fn new(corpus: &Corpus, config: &GenConfig, set: &TripletSet, splits: &Splits) -> Self {
        Self {
            config: config.clone(),
            seed: config.seed,
            corpus_name: corpus.name.clone(),
            corpus_checksum: corpus.checksum(),
            dialogues: corpus.len(),
            instances: set.len(),
            ranking_pairs: set.ranking_pair_count(),
            skipped: set.skipped,
            split_sizes: splits.sizes(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Utterance;
    use DialogueAct::*;

    fn dialogue(id: &str, acts: &[DialogueAct], topic: Option<&str>) -> Dialogue {
        let utterances = acts
            .iter()
            .enumerate()
            .map(|(i, &a)| Utterance::new(format!("{id} u{i}")).unwrap().with_act(a))
            .collect();
        Dialogue::new(id, utterances, topic.map(String::from)).unwrap()
    }

    fn plain(id: &str, k: usize) -> Dialogue {
        let texts: Vec<String> = (0..k).map(|i| format!("{id} u{i}")).collect();
        Dialogue::from_texts(id, &texts).unwrap()
    }

    #[test]
    fn toy_corpus_single_flow() {
        // dialogue A: Q I I D I → only (0,1) is a flow; u2 shares pos's act
        let a = dialogue("A", &[Question, Inform, Inform, Directive, Inform], Some("1"));
        let b = dialogue("B", &[Inform, Inform, Inform], Some("2"));
        let corpus = Corpus::new("toy", "en", vec![a, b]).unwrap();
        let set = generate_triplets(&corpus, &GenConfig::new(5)).unwrap();
        assert_eq!(set.len(), 1);
        let t = &set.instances[0];
        assert_eq!(t.meta.anchor.index, 0);
        // legal: j ∉ {-1,0,1}, act(j) != Inform → only index 3
        assert_eq!(t.meta.neg_same.index, 3);
        assert_eq!(t.meta.neg_cross.dialogue, "B");
    }

    #[test]
    fn without_flows_every_adjacent_pair_is_positive() {
        let a = dialogue("A", &[Question, Inform, Inform, Directive, Inform, Commissive], None);
        let b = plain("B", 4);
        let corpus = Corpus::new("toy", "en", vec![a, b]).unwrap();
        let mut config = GenConfig::new(1);
        config.use_act_flows = false;
        let set = generate_triplets(&corpus, &config).unwrap();
        let from_a = set.instances.iter().filter(|t| t.meta.anchor.dialogue == "A").count();
        assert_eq!(from_a, 5);
        assert_eq!(set.len(), 5 + 3);
    }

    #[test]
    fn short_dialogues_are_counted() {
        let corpus = Corpus::new("c", "zh", vec![plain("A", 3), plain("B", 2), plain("C", 5)]).unwrap();
        let set = generate_triplets(&corpus, &GenConfig::new(0)).unwrap();
        assert_eq!(set.skipped.dialogue_too_short, 2 + 1);
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn single_dialogue_and_single_topic_errors() {
        let one = Corpus::new("c", "en", vec![plain("A", 5)]).unwrap();
        assert!(matches!(
            generate_triplets(&one, &GenConfig::new(0)),
            Err(PairgenError::SingleDialogue)
        ));
        let same = Corpus::new(
            "c",
            "en",
            vec![
                dialogue("A", &[Question; 5], Some("x")),
                dialogue("B", &[Question; 5], Some("x")),
            ],
        )
        .unwrap();
        assert!(matches!(
            generate_triplets(&same, &GenConfig::new(0)),
            Err(PairgenError::UnsatisfiableTopicConstraint(_))
        ));
        let mut config = GenConfig::new(0);
        config.use_topic_constraint = false;
        assert!(generate_triplets(&same, &config).is_ok());
        let empty = Corpus::new("c", "en", vec![]).unwrap();
        assert!(matches!(
            generate_triplets(&empty, &config),
            Err(PairgenError::EmptyCorpus)
        ));
    }

    #[test]
    fn apportion_exact_and_rounded() {
        let r = SplitRatios::default().as_array();
        assert_eq!(apportion(10, r), [8, 1, 1]);
        assert_eq!(apportion(7, r), [5, 1, 1]);
        assert_eq!(apportion(3, r), [3, 0, 0]);
        assert_eq!(apportion(0, r), [0, 0, 0]);
    }

    #[test]
    fn instance_split_sizes_and_determinism() {
        let corpus = Corpus::new("c", "en", (0..4).map(|i| plain(&format!("d{i}"), 4)).collect()).unwrap();
        let mut config = GenConfig::new(9);
        config.use_topic_constraint = false;
        let mut set = generate_triplets(&corpus, &config).unwrap();
        set.instances.truncate(10);
        let a = split_triplets(&set, &config).unwrap();
        assert_eq!(a.sizes(), [8, 1, 1]);
        assert_eq!(a, split_triplets(&set, &config).unwrap());
        set.instances.truncate(2);
        assert!(matches!(
            split_triplets(&set, &config),
            Err(PairgenError::TooFewForSplit { found: 2, .. })
        ));
    }

    #[test]
    fn invalid_ratios_rejected() {
        let mut config = GenConfig::new(0);
        config.split_ratios = SplitRatios {
            train: 0.9,
            val: 0.2,
            test: 0.1,
        };
        let set = TripletSet::default();
        assert!(matches!(
            split_triplets(&set, &config),
            Err(PairgenError::InvalidRatios(_))
        ));
    }

    #[test]
    fn triplet_jsonl_round_trip_and_errors() {
        let corpus = Corpus::new("c", "en", vec![plain("A", 5), plain("B", 5)]).unwrap();
        let set = generate_triplets(&corpus, &GenConfig::new(2)).unwrap();
        let mut buf = Vec::new();
        write_triplets_jsonl(&set.instances, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with("{\"anchor\":"));
        assert_eq!(read_triplets_jsonl(buf.as_slice()).unwrap(), set.instances);
        let err = read_triplets_jsonl("\n{\"anchor\": 1}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, PairgenError::Json { line: 2, .. }));
    }

    #[test]
    fn auditor_flags_tampering() {
        let corpus = Corpus::new("c", "en", vec![plain("A", 6), plain("B", 6)]).unwrap();
        let config = GenConfig::new(4);
        let set = generate_triplets(&corpus, &config).unwrap();
        let auditor = Auditor::new(&corpus, &config);
        assert!(auditor.audit(&set.instances).is_empty());

        let mut t = set.instances[0].clone();
        t.meta.neg_cross = t.meta.neg_same.clone();
        t.neg_cross = t.neg_same.clone();
        assert_eq!(auditor.check(&t), Err(Violation::NegCrossSameDialogue));

        let mut t = set.instances[0].clone();
        t.meta.neg_same.index = t.meta.anchor.index + 1;
        t.neg_same = t.pos.clone();
        assert!(matches!(auditor.check(&t), Err(Violation::NegSameTooClose { .. })));

        let mut t = set.instances[0].clone();
        t.pos = "edited".into();
        assert_eq!(auditor.check(&t), Err(Violation::TextMismatch("pos")));
    }

    #[test]
    fn output_independent_of_thread_count() {
        let corpus = Corpus::new(
            "c",
            "en",
            (0..40).map(|i| plain(&format!("d{i:02}"), 4 + i % 7)).collect(),
        )
        .unwrap();
        let config = GenConfig::new(13);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| generate_triplets(&corpus, &config).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    proptest::proptest! {
        #[test]
        fn jsonl_round_trip(seed in 0u64..1000, sizes in proptest::collection::vec(2usize..9, 2..6)) {
            let dialogues = sizes.iter().enumerate().map(|(i, &k)| plain(&format!("p{i}"), k)).collect();
            let corpus = Corpus::new("c", "en", dialogues).unwrap();
            let set = generate_triplets(&corpus, &GenConfig::new(seed)).unwrap();
            let mut buf = Vec::new();
            write_triplets_jsonl(&set.instances, &mut buf).unwrap();
            proptest::prop_assert_eq!(read_triplets_jsonl(buf.as_slice()).unwrap(), set.instances);
        }
    }
}
