//! Segmentation metrics: Pk, WindowDiff, boundary macro-F1 and the average
//! depth-score variance.
//!
//! A dialogue of `n` utterances has `n - 1` intervals; boundary `b` separates
//! utterances `b` and `b + 1`. A probe of width `k` spans positions
//! `(i, i + k)` for `i` in `0..n - k` and covers intervals `i..i + k`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::AnnotatedDialogue;
use crate::segmenter::{mean_and_variance, DepthProfile, Segmentation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("no probes: dialogue length {n} must exceed window size {k_win}")]
    NoProbes { n: usize, k_win: usize },
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("{refs} references but {hyps} hypotheses")]
    AlignmentMismatch { refs: usize, hyps: usize },
    #[error("reference `{reference}` paired with hypothesis `{hypothesis}`")]
    IdMismatch { reference: String, hypothesis: String },
    #[error("dialogue `{id}`: hypothesis boundary {index} out of range (must be < {limit})")]
    BoundaryOutOfRange { id: String, index: usize, limit: usize },
    #[error("nothing to evaluate")]
    Empty,
}

/// Half the mean reference segment length, rounded and floored at 1.
pub fn default_window(n: usize, ref_boundaries: usize) -> usize {
    let segments = ref_boundaries + 1;
    ((n as f64 / (2.0 * segments as f64)).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProbeCounts {
    pub probes: usize,
    pub pk_errors: usize,
    pub wd_errors: usize,
}

impl std::ops::AddAssign for ProbeCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.probes += rhs.probes;
        self.pk_errors += rhs.pk_errors;
        self.wd_errors += rhs.wd_errors;
    }
}

fn prefix_counts(n: usize, boundaries: &BTreeSet<usize>) -> Vec<usize> {
    // prefix[j] = number of boundaries among intervals 0..j
    let mut prefix = vec![0usize; n];
    let mut acc = 0;
    for j in 0..n.saturating_sub(1) {
        if boundaries.contains(&j) {
            acc += 1;
        }
        prefix[j + 1] = acc;
    }
    prefix
}

fn check_boundaries(id: &str, n: usize, boundaries: &BTreeSet<usize>) -> Result<(), MetricError> {
    let limit = n.saturating_sub(1);
    match boundaries.iter().find(|&&b| b >= limit) {
        Some(&index) => Err(MetricError::BoundaryOutOfRange {
            id: id.to_string(),
            index,
            limit,
        }),
        None => Ok(()),
    }
}

/// Pk and WindowDiff disagreement counts for one dialogue.
pub fn probe_counts(
    n: usize,
    reference: &BTreeSet<usize>,
    hypothesis: &BTreeSet<usize>,
    k_win: usize,
) -> Result<ProbeCounts, MetricError> {
    if k_win == 0 {
        return Err(MetricError::ZeroWindow);
    }
    if n <= k_win {
        return Err(MetricError::NoProbes { n, k_win });
    }
    let r = prefix_counts(n, reference);
    let h = prefix_counts(n, hypothesis);
    let mut counts = ProbeCounts {
        probes: n - k_win,
        ..Default::default()
    };
    for i in 0..n - k_win {
        let in_ref = r[i + k_win] - r[i];
        let in_hyp = h[i + k_win] - h[i];
        if (in_ref == 0) != (in_hyp == 0) {
            counts.pk_errors += 1;
        }
        if in_ref != in_hyp {
            counts.wd_errors += 1;
        }
    }
    Ok(counts)
}

fn dialogue_counts(
    reference: &AnnotatedDialogue,
    hyp: &Segmentation,
    k_win: Option<usize>,
) -> Result<ProbeCounts, MetricError> {
    let n = reference.dialogue.len();
    check_boundaries(&hyp.dialogue_id, n, &hyp.boundaries)?;
    let k = k_win.unwrap_or_else(|| default_window(n, reference.boundaries.len()));
    probe_counts(n, &reference.boundaries, &hyp.boundaries, k)
}

/// Pk error of one dialogue; `k_win` defaults to [`default_window`].
pub fn pk(reference: &AnnotatedDialogue, hyp: &Segmentation, k_win: Option<usize>) -> Result<f64, MetricError> {
    let c = dialogue_counts(reference, hyp, k_win)?;
    Ok(c.pk_errors as f64 / c.probes as f64)
}

/// WindowDiff error of one dialogue; `k_win` defaults to [`default_window`].
pub fn window_diff(
    reference: &AnnotatedDialogue,
    hyp: &Segmentation,
    k_win: Option<usize>,
) -> Result<f64, MetricError> {
    let c = dialogue_counts(reference, hyp, k_win)?;
    Ok(c.wd_errors as f64 / c.probes as f64)
}

fn check_alignment(refs: &[AnnotatedDialogue], hyps: &[Segmentation]) -> Result<(), MetricError> {
    if refs.len() != hyps.len() {
        return Err(MetricError::AlignmentMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    for (r, h) in refs.iter().zip(hyps) {
        if r.id() != h.dialogue_id {
            return Err(MetricError::IdMismatch {
                reference: r.id().to_string(),
                hypothesis: h.dialogue_id.clone(),
            });
        }
        check_boundaries(&h.dialogue_id, r.dialogue.len(), &h.boundaries)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
        // a class that is neither predicted nor present is matched perfectly
        if tp + fp + fn_ == 0 {
            1.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    }

    pub fn boundary_f1(&self) -> f64 {
        Self::f1(self.tp, self.fp, self.fn_)
    }

    pub fn non_boundary_f1(&self) -> f64 {
        Self::f1(self.tn, self.fn_, self.fp)
    }

    pub fn macro_f1(&self) -> f64 {
        (self.boundary_f1() + self.non_boundary_f1()) / 2.0
    }
}

/// Interval-level confusion matrix pooled over the corpus.
pub fn confusion(refs: &[AnnotatedDialogue], hyps: &[Segmentation]) -> Result<Confusion, MetricError> {
    check_alignment(refs, hyps)?;
    let mut c = Confusion::default();
    for (r, h) in refs.iter().zip(hyps) {
        for i in 0..r.dialogue.len().saturating_sub(1) {
            match (r.boundaries.contains(&i), h.boundaries.contains(&i)) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

/// Unweighted mean of the boundary-class and non-boundary-class F1.
pub fn boundary_f1(refs: &[AnnotatedDialogue], hyps: &[Segmentation]) -> Result<f64, MetricError> {
    Ok(confusion(refs, hyps)?.macro_f1())
}

/// Mean over dialogues of each depth vector's population variance.
pub fn depth_variance(profiles: &[DepthProfile]) -> Result<f64, MetricError> {
    if profiles.is_empty() {
        return Err(MetricError::Empty);
    }
    let per_dialogue: Vec<f64> = profiles.iter().map(DepthProfile::variance).collect();
    Ok(mean_and_variance(&per_dialogue).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Probe-pooled Pk over the corpus.
    pub pk: f64,
    /// Probe-pooled WindowDiff over the corpus.
    pub window_diff: f64,
    pub f1_macro: f64,
    pub n_dialogues: usize,
    pub window_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_variance: Option<f64>,
    /// Unweighted per-dialogue means, for comparison with other aggregations.
    pub pk_dialogue_mean: f64,
    pub window_diff_dialogue_mean: f64,
    pub probes: usize,
    /// Dialogues too short for any probe; they still count toward F1.
    pub skipped_short: usize,
    pub confusion: Confusion,
}

/// Corpus-wide default window: half the mean reference segment length.
pub fn corpus_window(refs: &[AnnotatedDialogue]) -> usize {
    let utterances: usize = refs.iter().map(|r| r.dialogue.len()).sum();
    let segments: usize = refs.iter().map(|r| r.boundaries.len() + 1).sum();
    if segments == 0 {
        return 1;
    }
    ((utterances as f64 / (2.0 * segments as f64)).round() as usize).max(1)
}

/// Evaluates aligned hypotheses against references.
pub fn evaluate(
    refs: &[AnnotatedDialogue],
    hyps: &[Segmentation],
    window_size: Option<usize>,
    depths: Option<&[DepthProfile]>,
) -> Result<EvalReport, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::Empty);
    }
    check_alignment(refs, hyps)?;
    let k_win = window_size.unwrap_or_else(|| corpus_window(refs));
    if k_win == 0 {
        return Err(MetricError::ZeroWindow);
    }

    let mut pooled = ProbeCounts::default();
    let mut pk_rates = Vec::new();
    let mut wd_rates = Vec::new();
    let mut skipped_short = 0;
    for (r, h) in refs.iter().zip(hyps) {
        match probe_counts(r.dialogue.len(), &r.boundaries, &h.boundaries, k_win) {
            Ok(c) => {
                pooled += c;
                pk_rates.push(c.pk_errors as f64 / c.probes as f64);
                wd_rates.push(c.wd_errors as f64 / c.probes as f64);
            }
            Err(MetricError::NoProbes { .. }) => skipped_short += 1,
            Err(e) => return Err(e),
        }
    }
    if pooled.probes == 0 {
        let n = refs.iter().map(|r| r.dialogue.len()).max().unwrap_or(0);
        return Err(MetricError::NoProbes { n, k_win });
    }
    let confusion = confusion(refs, hyps)?;
    Ok(EvalReport {
        pk: pooled.pk_errors as f64 / pooled.probes as f64,
        window_diff: pooled.wd_errors as f64 / pooled.probes as f64,
        f1_macro: confusion.macro_f1(),
        n_dialogues: refs.len(),
        window_size: k_win,
        depth_variance: depths.map(depth_variance).transpose()?,
        pk_dialogue_mean: mean_and_variance(&pk_rates).0,
        window_diff_dialogue_mean: mean_and_variance(&wd_rates).0,
        probes: pooled.probes,
        skipped_short,
        confusion,
    })
}

/// Plain-text results table: Pk and WD scaled by 100, F1 as a fraction.
pub fn format_table(rows: &[(String, EvalReport)]) -> String {
    let width = rows
        .iter()
        .map(|(name, _)| name.len())
        .max()
        .unwrap_or(0)
        .max("Method".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>7}  {:>6}  {:>5}",
        "Method", "Pk", "WD", "F1", "k_win"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 36));
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7.2}  {:>7.2}  {:>6.3}  {:>5}",
            name,
            r.pk * 100.0,
            r.window_diff * 100.0,
            r.f1_macro,
            r.window_size
        );
    }
    out
}
