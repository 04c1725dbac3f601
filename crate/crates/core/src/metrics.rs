//! Rank correlation, range-normalized error and binary classification metrics.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rank::{average_ranks, RankOrder};

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pairs(ground: &[f64], predicted: &[f64]) -> Result<()> {
    if ground.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} ground vs {} predicted",
            ground.len(),
            predicted.len()
        )));
    }
    if ground.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 score pairs".into()));
    }
    if ground.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    Ok(())
}

/// Spearman correlation: Pearson correlation of average-tied ranks.
pub fn srcc(ground: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pairs(ground, predicted)?;
    let rg = average_ranks(ground, RankOrder::Ascending);
    let rp = average_ranks(predicted, RankOrder::Ascending);
    pearson(&rg, &rp).ok_or_else(|| Error::Degenerate("SRCC is undefined for a constant score vector".into()))
}

/// `(100/N) Σ ((g − p) / (g_max − g_min))²` over the ground-truth range.
pub fn relative_l2(ground: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pairs(ground, predicted)?;
    let max = ground.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ground.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if range <= 0.0 {
        return Err(Error::Degenerate("ground-truth scores have zero range".into()));
    }
    let sum: f64 = ground
        .iter()
        .zip(predicted)
        .map(|(g, p)| ((g - p) / range).powi(2))
        .sum();
    Ok(100.0 * sum / ground.len() as f64)
}

/// Percentages. `auc` is `None` when only one class is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryMetrics {
    pub acc: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Mann-Whitney AUC in percent; ties between classes count one half.
pub fn auc(labels: &[bool], probs: &[f64]) -> Result<f64> {
    check_binary(labels, probs)?;
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&l, &p) in labels.iter().zip(probs) {
        if l { pos.push(p) } else { neg.push(p) }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Degenerate("AUC needs both classes".into()));
    }
    // rank-sum form of the pairwise count
    let ranks = average_ranks(probs, RankOrder::Ascending);
    let rank_sum: f64 = labels.iter().zip(&ranks).filter(|(l, _)| **l).map(|(_, r)| r).sum();
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    let u = rank_sum - np * (np + 1.0) / 2.0;
    Ok(100.0 * u / (np * nn))
}

fn check_binary(labels: &[bool], probs: &[f64]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("binary metrics need at least one pair".into()));
    }
    if labels.len() != probs.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} labels vs {} probabilities",
            labels.len(),
            probs.len()
        )));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("probabilities must lie in [0,1]".into()));
    }
    Ok(())
}

/// Accuracy and F1 at `threshold` (predicted positive when `p >= threshold`)
/// plus threshold-free AUC.
pub fn binary_metrics(labels: &[bool], probs: &[f64], threshold: f64) -> Result<BinaryMetrics> {
    check_binary(labels, probs)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&l, &p) in labels.iter().zip(probs) {
        match (l, p >= threshold) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let acc = 100.0 * (tp + tn) as f64 / labels.len() as f64;
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        100.0 * 2.0 * precision * recall / (precision + recall)
    };
    let auc = match auc(labels, probs) {
        Ok(a) => Some(a),
        Err(Error::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(BinaryMetrics { acc, f1, auc })
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub protocol: String,
    pub episodes: usize,
    /// `None` when either score vector is constant.
    pub srcc: Option<f64>,
    /// `None` when the ground-truth scores have zero range.
    pub r_l2: Option<f64>,
    pub success: BinaryMetrics,
    /// Positive class is `policy`.
    pub source: BinaryMetrics,
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "| protocol | N | SRCC | R_l2 | success Acc (%) | success F1 (%) | success AUC (%) | source Acc (%) | source F1 (%) | source AUC (%) |"
        )?;
        writeln!(f, "|---|---|---|---|---|---|---|---|---|---|")?;
        writeln!(
            f,
            "| {} | {} | {} | {} | {:.1} | {:.1} | {} | {:.1} | {:.1} | {} |",
            self.protocol,
            self.episodes,
            opt(self.srcc, 4),
            opt(self.r_l2, 4),
            self.success.acc,
            self.success.f1,
            opt(self.success.auc, 1),
            self.source.acc,
            self.source.f1,
            opt(self.source.auc, 1),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn srcc_cases() {
        assert_eq!(srcc(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(srcc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((srcc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(srcc(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Degenerate(_))));
        assert!(srcc(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn relative_l2_cases() {
        assert_eq!(relative_l2(&[1.0, 10.0], &[1.0, 10.0]).unwrap(), 0.0);
        let v = relative_l2(&[1.0, 10.0], &[1.0, 5.0]).unwrap();
        assert!((v - 100.0 * (5.0f64 / 9.0).powi(2) / 2.0).abs() < 1e-12);
        assert!((v - 15.432).abs() < 1e-3);
        assert!(relative_l2(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn binary_cases() {
        // TP=2, FP=1, FN=1, TN=1
        let labels = [true, true, false, true, false];
        let probs = [0.9, 0.8, 0.7, 0.2, 0.1];
        let m = binary_metrics(&labels, &probs, 0.5).unwrap();
        assert!((m.f1 - 200.0 / 3.0).abs() < 1e-9);
        assert!((m.acc - 60.0).abs() < 1e-12);

        let m = binary_metrics(&[true, false], &[0.9, 0.1], 0.5).unwrap();
        assert_eq!(m.auc, Some(100.0));
        let m = binary_metrics(&[true, false, true], &[0.5; 3], 0.5).unwrap();
        assert_eq!(m.auc, Some(50.0));
        assert_eq!(binary_metrics(&[true, true], &[0.9, 0.2], 0.5).unwrap().auc, None);
        assert!(auc(&[true, true], &[0.9, 0.2]).is_err());
        assert!(binary_metrics(&[], &[], 0.5).is_err());
    }

    #[test]
    fn report_renders() {
        let m = BinaryMetrics {
            acc: 100.0,
            f1: 100.0,
            auc: None,
        };
        let r = MetricsReport {
            protocol: "eg".into(),
            episodes: 3,
            srcc: Some(1.0),
            r_l2: Some(0.0),
            success: m,
            source: m,
        };
        let s = r.to_string();
        assert!(s.contains("| eg | 3 | 1.0000 | 0.0000 | 100.0 | 100.0 | n/a |"));
        let undefined = MetricsReport { srcc: None, r_l2: None, ..r };
        assert!(undefined.to_string().contains("| eg | 3 | n/a | n/a |"));
    }
}
