//! TextTiling boundary inference over coherence profiles.
//!
//! For each interval `i` the depth score measures how deep the coherence
//! valley at `i` is:
//!
//! ```text
//! dp_i = (hl(i) + hr(i) - 2 c_i) / 2
//! ```
//!
//! where `hl(i)` / `hr(i)` are the peaks reached by climbing left / right from
//! `c_i` while scores strictly increase. Intervals with `dp_i > tau`, where
//! `tau = mean - stddev / 2` over the dialogue's depths, become boundaries.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scorer::CoherenceProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthProfile {
    pub depths: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `depths`.
    pub stddev: f64,
    pub tau: f64,
}

impl DepthProfile {
    /// # Panics
    ///
    /// Panics on an empty score slice.
    pub fn from_scores(scores: &[f64]) -> Self {
        assert!(!scores.is_empty(), "depth profile needs at least one interval");
        let depths: Vec<f64> = (0..scores.len()).map(|i| depth_at(scores, i)).collect();
        let (mean, variance) = mean_and_variance(&depths);
        let stddev = variance.sqrt();
        Self {
            tau: mean - stddev / 2.0,
            depths,
            mean,
            stddev,
        }
    }

    pub fn variance(&self) -> f64 {
        mean_and_variance(&self.depths).1
    }

    /// Intervals whose depth strictly exceeds `tau`.
    pub fn boundaries(&self) -> BTreeSet<usize> {
        self.depths
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > self.tau)
            .map(|(i, _)| i)
            .collect()
    }
}

fn depth_at(scores: &[f64], i: usize) -> f64 {
    let c = scores[i];
    let mut left = c;
    for &s in scores[..i].iter().rev() {
        if s > left {
            left = s;
        } else {
            break;
        }
    }
    let mut right = c;
    for &s in &scores[i + 1..] {
        if s > right {
            right = s;
        } else {
            break;
        }
    }
    (left + right - 2.0 * c) / 2.0
}

/// Population mean and variance. Values are summed in sorted order so the
/// result does not depend on interval order.
pub(crate) fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    sq.sort_by(f64::total_cmp);
    (mean, sq.iter().sum::<f64>() / n)
}

pub fn depth_profile(profile: &CoherenceProfile) -> DepthProfile {
    DepthProfile::from_scores(profile.scores())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    #[serde(rename = "id")]
    pub dialogue_id: String,
    pub boundaries: BTreeSet<usize>,
}

pub fn segment(profile: &CoherenceProfile) -> Segmentation {
    Segmentation {
        dialogue_id: profile.dialogue_id.clone(),
        boundaries: depth_profile(profile).boundaries(),
    }
}

/// Boundaries of a raw score sequence.
pub fn segment_scores(scores: &[f64]) -> BTreeSet<usize> {
    if scores.is_empty() {
        return BTreeSet::new();
    }
    DepthProfile::from_scores(scores).boundaries()
}

/// Random baseline: draw `b` uniformly from `0..k`, then mark each of the
/// `k - 1` intervals independently with probability `b / k`.
pub fn random_segment<R: Rng + ?Sized>(dialogue_id: impl Into<String>, k: usize, rng: &mut R) -> Segmentation {
    let mut boundaries = BTreeSet::new();
    if k >= 2 {
        let b = rng.random_range(0..k);
        let p = b as f64 / k as f64;
        for i in 0..k - 1 {
            if rng.random::<f64>() < p {
                boundaries.insert(i);
            }
        }
    }
    Segmentation {
        dialogue_id: dialogue_id.into(),
        boundaries,
    }
}
