//! Per-dialogue segmentation reports and the corpus segmentation pipeline.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dialogue;
use crate::metrics::{depth_variance, MetricError};
use crate::scorer::{CoherenceProfile, ScorerError, ScorerKind};
use crate::segmenter::{DepthProfile, Segmentation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub id: String,
    pub coherence: Vec<f64>,
    pub depth: Vec<f64>,
    pub tau: f64,
    pub boundaries: BTreeSet<usize>,
    /// Intervals scored with the embedding OOV fallback.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fallbacks: Vec<usize>,
}

impl SegmentReport {
    pub fn from_profile(profile: &CoherenceProfile) -> Self {
        let depth = DepthProfile::from_scores(profile.scores());
        Self {
            id: profile.dialogue_id.clone(),
            coherence: profile.scores().to_vec(),
            boundaries: depth.boundaries(),
            tau: depth.tau,
            depth: depth.depths,
            fallbacks: profile.fallbacks.clone(),
        }
    }

    /// Record for a dialogue with fewer than two utterances.
    pub fn unscored(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            coherence: Vec::new(),
            depth: Vec::new(),
            tau: 0.0,
            boundaries: BTreeSet::new(),
            fallbacks: Vec::new(),
        }
    }

    pub fn segmentation(&self) -> Segmentation {
        Segmentation {
            dialogue_id: self.id.clone(),
            boundaries: self.boundaries.clone(),
        }
    }

    /// Recomputed from the stored coherence; `None` for unscored dialogues.
    pub fn depth_profile(&self) -> Option<DepthProfile> {
        (!self.coherence.is_empty()).then(|| DepthProfile::from_scores(&self.coherence))
    }
}

/// Scores and segments every dialogue on the current rayon pool. Reports are
/// ordered by dialogue id.
pub fn segment_dialogues(scorer: &ScorerKind, dialogues: &[Dialogue]) -> Result<Vec<SegmentReport>, ScorerError> {
    let mut reports = dialogues
        .par_iter()
        .map(|d| {
            if d.len() < 2 {
                log::warn!("dialogue {} has {} utterance(s); nothing to segment", d.id, d.len());
                return Ok(SegmentReport::unscored(&d.id));
            }
            scorer.score_dialogue(d).map(|p| SegmentReport::from_profile(&p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    reports.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub scorer: String,
    pub dialogues: usize,
    pub unscored: usize,
    pub intervals: usize,
    pub boundaries: usize,
    pub fallback_intervals: usize,
    pub depth_variance: Option<f64>,
}

impl SegmentSummary {
    pub fn new(scorer: &str, reports: &[SegmentReport]) -> Self {
        let profiles = depth_profiles(reports);
        Self {
            scorer: scorer.to_string(),
            dialogues: reports.len(),
            unscored: reports.len() - profiles.len(),
            intervals: reports.iter().map(|r| r.coherence.len()).sum(),
            boundaries: reports.iter().map(|r| r.boundaries.len()).sum(),
            fallback_intervals: reports.iter().map(|r| r.fallbacks.len()).sum(),
            depth_variance: depth_variance(&profiles).ok(),
        }
    }
}

pub fn depth_profiles(reports: &[SegmentReport]) -> Vec<DepthProfile> {
    reports.iter().filter_map(SegmentReport::depth_profile).collect()
}

/// Depth variance of a report set, as used by `stats`.
pub fn report_depth_variance(reports: &[SegmentReport]) -> Result<f64, MetricError> {
    depth_variance(&depth_profiles(reports))
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed segment report: {message}")]
    Json { line: usize, message: String },
}

pub fn write_reports_jsonl<W: Write>(reports: &[SegmentReport], mut writer: W) -> io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_reports_jsonl<R: BufRead>(reader: R) -> Result<Vec<SegmentReport>, ReportError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ReportError::Json {
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::LexicalScorer;

    fn dialogues() -> Vec<Dialogue> {
        vec![
            Dialogue::from_texts("b", &["red apple", "apple pie", "blue sky", "sky high"]).unwrap(),
            Dialogue::from_texts("a", &["one", "one two"]).unwrap(),
            Dialogue::from_texts("c", &["alone"]).unwrap(),
        ]
    }

    #[test]
    fn pipeline_orders_by_id_and_handles_singletons() {
        let reports = segment_dialogues(&ScorerKind::Lexical(LexicalScorer), &dialogues()).unwrap();
        let ids: Vec<&str> = reports.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(reports[1].coherence.len(), 3);
        assert_eq!(reports[1].coherence[1], 0.0);
        assert_eq!(reports[1].boundaries, BTreeSet::from([1]));
        assert_eq!(reports[2], SegmentReport::unscored("c"));

        let summary = SegmentSummary::new("lexical", &reports);
        assert_eq!((summary.dialogues, summary.unscored, summary.intervals), (3, 1, 4));
    }

    #[test]
    fn report_schema_and_round_trip() {
        let reports = segment_dialogues(&ScorerKind::Lexical(LexicalScorer), &dialogues()).unwrap();
        let mut buf = Vec::new();
        write_reports_jsonl(&reports, &mut buf).unwrap();
        let first: serde_json::Value = serde_json::from_slice(buf.split(|&b| b == b'\n').next().unwrap()).unwrap();
        let keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["boundaries", "coherence", "depth", "id", "tau"]);
        assert_eq!(read_reports_jsonl(buf.as_slice()).unwrap(), reports);
        assert!(matches!(
            read_reports_jsonl("{}\n".as_bytes()),
            Err(ReportError::Json { line: 1, .. })
        ));
    }

    #[test]
    fn stats_variance_matches_metrics() {
        let p = CoherenceProfile::new("x", vec![0.9, 0.2, 0.8, 0.3, 0.7]).unwrap();
        let reports = [SegmentReport::from_profile(&p), SegmentReport::unscored("y")];
        let direct = depth_variance(&[DepthProfile::from_scores(p.scores())]).unwrap();
        assert_eq!(report_depth_variance(&reports).unwrap(), direct);
        assert!((direct - 0.0766).abs() < 1e-12);
    }
}
