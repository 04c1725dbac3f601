use serde::Serialize;

use super::{Manifest, Source};
use crate::error::{Error, Result};

/// Aggregate counts over a manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub episodes: usize,
    /// `eg_histogram[k]` counts episodes graded `k + 1`.
    pub eg_histogram: [usize; 10],
    /// Episodes without an expert grade; together with the histogram this sums to `episodes`.
    pub eg_unlabeled: usize,
    pub successes: usize,
    pub failures: usize,
    pub success_rate: f64,
    pub collisions: usize,
    pub policy: usize,
    pub teleoperation: usize,
    pub total_duration_s: f64,
    pub mean_duration_s: f64,
}

pub fn dataset_stats(m: &Manifest) -> Result<StatsReport> {
    if m.episodes.is_empty() {
        return Err(Error::InvalidArgument("manifest has no episodes".into()));
    }
    let mut eg_histogram = [0usize; 10];
    let mut eg_unlabeled = 0;
    let mut successes = 0;
    let mut collisions = 0;
    let mut policy = 0;
    let mut total_duration_s = 0.0;
    for ep in &m.episodes {
        match ep.labels.eg_score {
            Some(s) if (1..=10).contains(&s) => eg_histogram[s as usize - 1] += 1,
            Some(s) => return Err(Error::episode(&ep.id, format!("eg_score {s} out of range"))),
            None => eg_unlabeled += 1,
        }
        successes += usize::from(ep.success);
        collisions += usize::from(ep.collision);
        policy += usize::from(ep.source == Source::Policy);
        total_duration_s += ep.duration_s;
    }
    let n = m.episodes.len();
    Ok(StatsReport {
        episodes: n,
        eg_histogram,
        eg_unlabeled,
        successes,
        failures: n - successes,
        success_rate: successes as f64 / n as f64,
        collisions,
        policy,
        teleoperation: n - policy,
        total_duration_s,
        mean_duration_s: total_duration_s / n as f64,
    })
}
