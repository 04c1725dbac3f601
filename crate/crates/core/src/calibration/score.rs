use serde::{Deserialize, Serialize};

use super::channels::{MetricChannels, CHANNEL_COUNT};
use crate::error::{Error, Result};
use crate::rank::{average_ranks, RankOrder};

/// Channel weights plus the collision and failure penalty divisors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    /// Indexed by [`super::Channel::index`].
    pub weights: [f64; CHANNEL_COUNT],
    pub lambda_coll: f64,
    pub lambda_fail: f64,
}

impl ParamVector {
    pub const LEN: usize = CHANNEL_COUNT + 2;

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        if self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("weights must not all be zero".into()));
        }
        for (name, l) in [("lambda_coll", self.lambda_coll), ("lambda_fail", self.lambda_fail)] {
            if !(l.is_finite() && l >= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1, got {l}")));
            }
        }
        Ok(())
    }

    /// Flat genome layout: weights, then `lambda_coll`, then `lambda_fail`.
    pub fn to_genes(&self) -> [f64; Self::LEN] {
        let mut g = [0.0; Self::LEN];
        g[..CHANNEL_COUNT].copy_from_slice(&self.weights);
        g[CHANNEL_COUNT] = self.lambda_coll;
        g[CHANNEL_COUNT + 1] = self.lambda_fail;
        g
    }

    pub fn from_genes(g: &[f64; Self::LEN]) -> Self {
        let mut weights = [0.0; CHANNEL_COUNT];
        weights.copy_from_slice(&g[..CHANNEL_COUNT]);
        Self {
            weights,
            lambda_coll: g[CHANNEL_COUNT],
            lambda_fail: g[CHANNEL_COUNT + 1],
        }
    }
}

/// Composite raw score. When both flags are set both divisors apply.
pub fn raw_score(c: &MetricChannels, theta: &ParamVector) -> Result<f64> {
    theta.validate()?;
    Ok(raw_score_unchecked(c, theta))
}

pub(crate) fn raw_score_unchecked(c: &MetricChannels, theta: &ParamVector) -> f64 {
    let mut divisor = 1.0;
    if c.flags.collision {
        divisor *= theta.lambda_coll;
    }
    if c.flags.failure {
        divisor *= theta.lambda_fail;
    }
    let total: f64 = theta.weights.iter().sum();
    let weighted: f64 = theta
        .weights
        .iter()
        .zip(&c.values)
        .map(|(w, s)| w * (s / divisor))
        .sum();
    weighted / total
}

pub(crate) fn check_rank_permutation(ranks: &[usize]) -> Result<()> {
    let mut seen = vec![false; ranks.len()];
    for &r in ranks {
        if r == 0 || r > ranks.len() || std::mem::replace(&mut seen[r - 1], true) {
            return Err(Error::InvalidArgument(format!(
                "human ranks must be a permutation of 1..{}",
                ranks.len()
            )));
        }
    }
    Ok(())
}

/// Mean absolute difference between human ranks and the descending
/// average-tie ranks of `raw_scores`.
pub fn rank_loss(human_ranks: &[usize], raw_scores: &[f64]) -> Result<f64> {
    if human_ranks.len() != raw_scores.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} ranks vs {} scores",
            human_ranks.len(),
            raw_scores.len()
        )));
    }
    if human_ranks.is_empty() {
        return Err(Error::InvalidArgument("rank loss needs at least one item".into()));
    }
    check_rank_permutation(human_ranks)?;
    if raw_scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("raw score is NaN".into()));
    }
    Ok(rank_loss_unchecked(human_ranks, raw_scores))
}

pub(crate) fn rank_loss_unchecked(human_ranks: &[usize], raw_scores: &[f64]) -> f64 {
    let raw_ranks = average_ranks(raw_scores, RankOrder::Descending);
    human_ranks
        .iter()
        .zip(&raw_ranks)
        .map(|(&h, r)| (h as f64 - r).abs())
        .sum::<f64>()
        / human_ranks.len() as f64
}

/// Mean and population standard deviation of a score distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
}

impl ScoreStats {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !(std.is_finite() && std >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid score stats ({mean}, {std})")));
        }
        Ok(Self { mean, std })
    }

    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("no values".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self::new(mean, var.sqrt())
    }
}

/// Affine map of a single raw score from `raw` statistics onto `human` statistics.
pub fn align_value(raw_score: f64, raw: &ScoreStats, human: &ScoreStats) -> Result<f64> {
    if raw.std <= 0.0 {
        return Err(Error::Degenerate("raw scores have zero standard deviation".into()));
    }
    Ok(human.mean + human.std * (raw_score - raw.mean) / raw.std)
}

/// Z-score alignment of a raw score vector onto the human score distribution.
pub fn align_distribution(raw: &[f64], human: &ScoreStats) -> Result<Vec<f64>> {
    if raw.len() < 2 {
        return Err(Error::InvalidArgument("alignment needs at least two scores".into()));
    }
    let stats = ScoreStats::of(raw)?;
    raw.iter().map(|&s| align_value(s, &stats, human)).collect()
}

#[cfg(test)]
mod tests {
    use super::super::channels::ViolationFlags;
    use super::*;

    fn chans(values: [f64; 4], collision: bool, failure: bool) -> MetricChannels {
        MetricChannels::new(values, ViolationFlags { collision, failure }).unwrap()
    }

    fn theta(weights: [f64; 4], lc: f64, lf: f64) -> ParamVector {
        ParamVector {
            weights,
            lambda_coll: lc,
            lambda_fail: lf,
        }
    }

    #[test]
    fn plain_mean() {
        let s = raw_score(&chans([2.0, 4.0, 2.0, 4.0], false, false), &theta([1.0; 4], 1.0, 1.0));
        assert_eq!(s.unwrap(), 3.0);
    }

    #[test]
    fn collision_divides() {
        let s = raw_score(&chans([4.0, 0.0, 0.0, 0.0], true, false), &theta([1.0, 0.0, 0.0, 0.0], 2.0, 1.0));
        assert_eq!(s.unwrap(), 2.0);
    }

    #[test]
    fn weighted_mean() {
        let s = raw_score(&chans([3.0, 6.0, 9.0, 1.0], false, false), &theta([2.0, 1.0, 0.0, 0.0], 1.0, 1.0));
        assert_eq!(s.unwrap(), 4.0);
    }

    #[test]
    fn divisors_compound() {
        let s = raw_score(&chans([8.0; 4], true, true), &theta([1.0; 4], 2.0, 2.0));
        assert_eq!(s.unwrap(), 2.0);
    }

    #[test]
    fn invalid_theta() {
        let c = chans([1.0; 4], false, false);
        assert!(raw_score(&c, &theta([0.0; 4], 1.0, 1.0)).is_err());
        assert!(raw_score(&c, &theta([1.0; 4], 0.5, 1.0)).is_err());
        assert!(raw_score(&c, &theta([-1.0, 2.0, 0.0, 0.0], 1.0, 1.0)).is_err());
    }

    #[test]
    fn rank_loss_cases() {
        assert_eq!(rank_loss(&[1, 2, 3], &[9.0, 5.0, 1.0]).unwrap(), 0.0);
        assert!((rank_loss(&[1, 2, 3], &[1.0, 5.0, 9.0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(rank_loss(&[1], &[0.3]).unwrap(), 0.0);
        // tie between the last two: raw ranks [1, 2.5, 2.5]
        assert_eq!(rank_loss(&[1, 2, 3], &[2.0, 1.0, 1.0]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn rank_loss_errors() {
        assert!(rank_loss(&[1, 2], &[1.0]).is_err());
        assert!(rank_loss(&[1, 1], &[1.0, 2.0]).is_err());
        assert!(rank_loss(&[], &[]).is_err());
    }

    #[test]
    fn alignment_cases() {
        let out = align_distribution(&[0.0, 2.0], &ScoreStats::new(5.0, 1.0).unwrap()).unwrap();
        assert_eq!(out, vec![4.0, 6.0]);
        let raw = [1.0, 2.0, 4.0];
        let same = ScoreStats::of(&raw).unwrap();
        let out = align_distribution(&raw, &same).unwrap();
        for (a, b) in out.iter().zip(&raw) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            align_distribution(&[1.0, 1.0, 1.0], &same),
            Err(Error::Degenerate(_))
        ));
        assert!(align_distribution(&[1.0], &same).is_err());
    }
}
