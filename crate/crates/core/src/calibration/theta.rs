//! The `theta/1` calibration file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::channels::{EpisodeFeatures, NormalizationBasis, CHANNELS, CHANNEL_COUNT};
use super::ga::GaConfig;
use super::score::{align_value, raw_score, ParamVector, ScoreStats};
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const THETA_VERSION: &str = "theta/1";

/// Everything needed to turn one episode's features into a calibrated score.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub theta: ParamVector,
    pub basis: NormalizationBasis,
    /// Raw-score statistics over the calibration set under `theta`.
    pub raw_stats: ScoreStats,
    pub human_stats: ScoreStats,
    /// U_v above this value is attributed to a policy rather than teleoperation.
    pub source_threshold: f64,
    /// Rank loss achieved by `theta` on the calibration batches.
    pub loss: f64,
    pub ga: Option<GaConfig>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThetaDoc {
    version: String,
    weights: BTreeMap<String, f64>,
    lambda_coll: f64,
    lambda_fail: f64,
    loss: f64,
    normalization: NormalizationBasis,
    raw_stats: ScoreStats,
    human_stats: ScoreStats,
    source_threshold: f64,
    #[serde(default)]
    ga: Option<GaConfig>,
}

impl Calibration {
    pub fn raw(&self, f: &EpisodeFeatures) -> Result<f64> {
        raw_score(&self.basis.normalize(f)?, &self.theta)
    }

    /// Aligned score on the human scale, not clamped.
    pub fn aligned(&self, f: &EpisodeFeatures) -> Result<f64> {
        align_value(self.raw(f)?, &self.raw_stats, &self.human_stats)
    }

    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        ScoreStats::new(self.raw_stats.mean, self.raw_stats.std)?;
        ScoreStats::new(self.human_stats.mean, self.human_stats.std)?;
        if self.raw_stats.std <= 0.0 {
            return Err(Error::Degenerate("raw score std is zero".into()));
        }
        if !(self.source_threshold.is_finite() && self.source_threshold >= 0.0) {
            return Err(Error::InvalidArgument("source_threshold must be finite and >= 0".into()));
        }
        if let Some(ga) = &self.ga {
            ga.validate()?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> Result<String> {
        let doc = ThetaDoc {
            version: THETA_VERSION.into(),
            weights: CHANNELS
                .iter()
                .map(|c| (c.name().to_string(), self.theta.weights[c.index()]))
                .collect(),
            lambda_coll: self.theta.lambda_coll,
            lambda_fail: self.theta.lambda_fail,
            loss: self.loss,
            normalization: self.basis,
            raw_stats: self.raw_stats,
            human_stats: self.human_stats,
            source_threshold: self.source_threshold,
            ga: self.ga.clone(),
        };
        let value = serde_json::to_value(&doc).map_err(|e| Error::parse("theta", e))?;
        let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::parse("theta", e))?;
        s.push('\n');
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: ThetaDoc = serde_json::from_str(text).map_err(|e| Error::parse("theta file", e))?;
        if doc.version != THETA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported theta version {:?}, expected {THETA_VERSION:?}",
                doc.version
            )));
        }
        if doc.weights.len() != CHANNEL_COUNT {
            return Err(Error::Validation(format!("theta must carry {CHANNEL_COUNT} weights")));
        }
        let mut weights = [0.0; CHANNEL_COUNT];
        for c in CHANNELS {
            weights[c.index()] = *doc
                .weights
                .get(c.name())
                .ok_or_else(|| Error::Validation(format!("missing weight {}", c.name())))?;
        }
        let cal = Calibration {
            theta: ParamVector {
                weights,
                lambda_coll: doc.lambda_coll,
                lambda_fail: doc.lambda_fail,
            },
            basis: doc.normalization,
            raw_stats: doc.raw_stats,
            human_stats: doc.human_stats,
            source_threshold: doc.source_threshold,
            loss: doc.loss,
            ga: doc.ga,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_canonical_string()?.as_bytes())
    }
}
