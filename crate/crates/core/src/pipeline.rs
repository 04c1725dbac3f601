//! Manifest-level drivers: per-episode kinematics, calibration and scoring.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate, load_frame_dir, GridSpec};
use crate::calibration::{
    ga_optimize, EpisodeFeatures, GaConfig, GaResult, NormalizationBasis, RankBatch, ScoreStats, ViolationFlags,
};
use crate::dataset::{read_trajectory, Episode, Manifest, Source};
use crate::error::{Error, Result};
use crate::kinematics::{render_physics_prompt, summarize, JointTrajectory, KinematicSummary, PhysicsPrompt};
use crate::metrics::{binary_metrics, relative_l2, srcc, MetricsReport};
use crate::protocol::{serialize_output, EpisodeContext, EvalOutput, Evaluator, EvaluatorRequest};

/// An episode with its trajectory and derived statistics.
#[derive(Debug, Clone)]
pub struct LoadedEpisode {
    pub episode: Episode,
    pub trajectory: JointTrajectory,
    pub summary: KinematicSummary,
    pub physics: PhysicsPrompt,
}

impl LoadedEpisode {
    pub fn flags(&self) -> ViolationFlags {
        ViolationFlags {
            collision: self.episode.collision,
            failure: !self.episode.success,
        }
    }

    pub fn features(&self) -> EpisodeFeatures {
        EpisodeFeatures::new(&self.summary, self.episode.duration_s, self.flags())
    }
}

fn tag(id: &str, e: Error) -> Error {
    match e {
        Error::Episode { .. } => e,
        e if e.is_io() => e,
        e => Error::episode(id, e.to_string()),
    }
}

/// Reads every trajectory (relative to `root`) and computes its summary.
pub fn load_episodes(manifest: &Manifest, root: &Path) -> Result<Vec<LoadedEpisode>> {
    manifest
        .episodes
        .par_iter()
        .map(|ep| {
            let trajectory = read_trajectory(&root.join(&ep.trajectory_path), Some(ep.dof as usize))
                .map_err(|e| tag(&ep.id, e))?;
            let summary = summarize(&trajectory).map_err(|e| tag(&ep.id, e))?;
            let physics = render_physics_prompt(&summary).map_err(|e| tag(&ep.id, e))?;
            Ok(LoadedEpisode {
                episode: ep.clone(),
                trajectory,
                summary,
                physics,
            })
        })
        .collect()
}

/// Rank batches keyed by batch name, in name order.
pub fn rank_batches(episodes: &[LoadedEpisode], basis: &NormalizationBasis) -> Result<Vec<RankBatch>> {
    let mut groups: BTreeMap<&str, Vec<&LoadedEpisode>> = BTreeMap::new();
    for e in episodes {
        if let (Some(_), Some(batch)) = (e.episode.labels.expert_rank, &e.episode.labels.rank_batch) {
            groups.entry(batch).or_default().push(e);
        }
    }
    if groups.is_empty() {
        return Err(Error::Validation(
            "calibration requires rank-guided annotations: no episode has expert_rank and rank_batch".into(),
        ));
    }
    groups
        .into_iter()
        .map(|(name, members)| {
            let channels = members
                .iter()
                .map(|e| basis.normalize(&e.features()).map_err(|err| tag(&e.episode.id, err)))
                .collect::<Result<Vec<_>>>()?;
            let ranks = members
                .iter()
                .map(|e| e.episode.labels.expert_rank.unwrap_or(0) as usize)
                .collect();
            RankBatch::new(channels, ranks).map_err(|e| Error::Validation(format!("rank batch {name}: {e}")))
        })
        .collect()
}

/// Midpoint of the class means of U_v. With one class present the
/// threshold sits on the side that predicts that class for every episode.
pub fn source_threshold(episodes: &[LoadedEpisode]) -> f64 {
    let mean_of = |s: Source| {
        let v: Vec<f64> = episodes
            .iter()
            .filter(|e| e.episode.source == s)
            .map(|e| e.summary.u_v)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    match (mean_of(Source::Teleoperation), mean_of(Source::Policy)) {
        (Some(t), Some(p)) => (t + p) / 2.0,
        (Some(_), None) => episodes.iter().map(|e| e.summary.u_v).fold(0.0, f64::max),
        _ => 0.0,
    }
}

/// Human score statistics from the EG labels.
pub fn eg_stats(episodes: &[LoadedEpisode]) -> Result<ScoreStats> {
    let grades: Vec<f64> = episodes
        .iter()
        .filter_map(|e| e.episode.labels.eg_score.map(f64::from))
        .collect();
    if grades.len() < 2 {
        return Err(Error::Validation(
            "human score statistics need at least 2 eg_score labels; pass them explicitly instead".into(),
        ));
    }
    ScoreStats::of(&grades)
}

/// Fits θ on the rank batches and derives everything the scorer needs.
/// `human_stats` defaults to the statistics of the EG labels.
pub fn calibrate_episodes(
    episodes: &[LoadedEpisode],
    ga: &GaConfig,
    human_stats: Option<ScoreStats>,
) -> Result<(crate::calibration::Calibration, GaResult)> {
    let features: Vec<EpisodeFeatures> = episodes.iter().map(LoadedEpisode::features).collect();
    let basis = NormalizationBasis::fit(&features)?;
    let batches = rank_batches(episodes, &basis)?;
    let human_stats = match human_stats {
        Some(h) => h,
        None => eg_stats(episodes)?,
    };
    let result = ga_optimize(&batches, ga)?;
    let raw = features
        .iter()
        .map(|f| crate::calibration::raw_score(&basis.normalize(f)?, &result.theta))
        .collect::<Result<Vec<f64>>>()?;
    let raw_stats = ScoreStats::of(&raw)?;
    if raw_stats.std <= 0.0 {
        return Err(Error::Degenerate("calibrated raw scores are constant across the manifest".into()));
    }
    let calibration = crate::calibration::Calibration {
        theta: result.theta,
        basis,
        raw_stats,
        human_stats,
        source_threshold: source_threshold(episodes),
        loss: result.loss,
        ga: Some(ga.clone()),
    };
    calibration.validate()?;
    Ok((calibration, result))
}

/// Which label a score is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreProtocol {
    Eg,
    Rg,
}

impl ScoreProtocol {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreProtocol::Eg => "eg",
            ScoreProtocol::Rg => "rg",
        }
    }

    pub fn label(self, ep: &Episode) -> Option<f64> {
        match self {
            ScoreProtocol::Eg => ep.labels.eg_score.map(f64::from),
            ScoreProtocol::Rg => ep.labels.rg_score,
        }
    }
}

impl fmt::Display for ScoreProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eg" => Ok(ScoreProtocol::Eg),
            "rg" => Ok(ScoreProtocol::Rg),
            other => Err(Error::InvalidArgument(format!("unknown protocol {other:?}, expected eg or rg"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub protocol: ScoreProtocol,
    pub grid: GridSpec,
    pub keyframes: usize,
    pub require_cot: bool,
    /// View to read frames from; the episode's first view when unset.
    pub view: Option<String>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            protocol: ScoreProtocol::Rg,
            grid: GridSpec::default(),
            keyframes: 8,
            require_cot: false,
            view: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub score: f64,
    pub success: bool,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub think: Option<String>,
    /// Canonical serialized answer.
    pub text: String,
}

impl Prediction {
    pub fn from_output(id: &str, o: &EvalOutput) -> Self {
        Self {
            id: id.to_string(),
            score: o.score,
            success: o.success,
            source: o.source,
            think: o.think.clone(),
            text: serialize_output(o),
        }
    }
}

/// Builds the request for one episode: composites from its frame directory
/// plus the physics prompt.
pub fn build_request(ep: &LoadedEpisode, root: &Path, opts: &ScoreOptions) -> Result<EvaluatorRequest> {
    let e = &ep.episode;
    let view = match &opts.view {
        Some(v) => v.clone(),
        None => e
            .views
            .first()
            .cloned()
            .ok_or_else(|| Error::episode(&e.id, "no views listed"))?,
    };
    let frames = load_frame_dir(&root.join(&e.frame_dir).join(&view)).map_err(|err| tag(&e.id, err))?;
    let composites = aggregate(&frames, opts.keyframes, &opts.grid).map_err(|err| tag(&e.id, err))?;
    EvaluatorRequest::new(&e.id, composites, ep.physics.clone(), &e.task_description, opts.require_cot)
}

/// Runs the evaluator over every episode, concurrently, in manifest order.
pub fn predict<E: Evaluator + ?Sized>(
    episodes: &[LoadedEpisode],
    root: &Path,
    evaluator: &E,
    opts: &ScoreOptions,
) -> Result<Vec<Prediction>> {
    episodes
        .par_iter()
        .map(|ep| {
            let req = build_request(ep, root, opts)?;
            let ctx = EpisodeContext {
                trajectory: &ep.trajectory,
                duration_s: ep.episode.duration_s,
                flags: ep.flags(),
            };
            let out = evaluator.evaluate(&req, &ctx).map_err(|e| tag(&ep.episode.id, e))?;
            Ok(Prediction::from_output(&ep.episode.id, &out))
        })
        .collect()
}

/// Compares predictions with the manifest labels of `protocol`.
pub fn evaluate_predictions(
    episodes: &[Episode],
    predictions: &[Prediction],
    protocol: ScoreProtocol,
) -> Result<MetricsReport> {
    if episodes.len() != predictions.len() {
        return Err(Error::InvalidArgument(format!(
            "{} episodes but {} predictions",
            episodes.len(),
            predictions.len()
        )));
    }
    let mut ground = Vec::with_capacity(episodes.len());
    for (ep, p) in episodes.iter().zip(predictions) {
        if ep.id != p.id {
            return Err(Error::InvalidArgument(format!("prediction {} does not match episode {}", p.id, ep.id)));
        }
        ground.push(protocol.label(ep).ok_or_else(|| {
            Error::Validation(format!(
                "episode {} has no {} label required by protocol {protocol}",
                ep.id,
                match protocol {
                    ScoreProtocol::Eg => "eg_score",
                    ScoreProtocol::Rg => "rg_score",
                }
            ))
        })?);
    }
    let predicted: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let prob = |b: bool| if b { 1.0 } else { 0.0 };
    let success_labels: Vec<bool> = episodes.iter().map(|e| e.success).collect();
    let success_probs: Vec<f64> = predictions.iter().map(|p| prob(p.success)).collect();
    let source_labels: Vec<bool> = episodes.iter().map(|e| e.source == Source::Policy).collect();
    let source_probs: Vec<f64> = predictions.iter().map(|p| prob(p.source == Source::Policy)).collect();
    Ok(MetricsReport {
        protocol: protocol.to_string(),
        episodes: episodes.len(),
        srcc: defined(srcc(&ground, &predicted))?,
        r_l2: defined(relative_l2(&ground, &predicted))?,
        success: binary_metrics(&success_labels, &success_probs, 0.5)?,
        source: binary_metrics(&source_labels, &source_probs, 0.5)?,
    })
}

fn defined(v: Result<f64>) -> Result<Option<f64>> {
    match v {
        Ok(x) => Ok(Some(x)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Copy of `manifest` whose score labels are the predicted scores.
pub fn relabel(manifest: &Manifest, predictions: &[Prediction]) -> Result<Manifest> {
    let by_id: BTreeMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut out = manifest.clone();
    for ep in &mut out.episodes {
        let p = by_id
            .get(ep.id.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("no prediction for episode {}", ep.id)))?;
        ep.labels.rg_score = Some(p.score.clamp(0.0, 10.0));
        ep.labels.eg_score = Some(p.score.round().clamp(1.0, 10.0) as u8);
        if let Some(t) = &p.think {
            ep.labels.cot_text = Some(t.clone());
        }
    }
    Ok(out)
}
