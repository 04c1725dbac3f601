//! Episode and label schema, manifest I/O, statistics and synthetic fixtures.

mod fixture;
mod manifest;
mod stats;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use fixture::{
    generate_fixture, planted_theta, FixtureFamily, FIXTURE_BATCH_SIZE, FIXTURE_FPS,
    FIXTURE_HUMAN_STATS, FIXTURE_VIEW,
};
pub use manifest::{load_manifest, save_manifest, to_canonical_string, validate_manifest};
pub use stats::{dataset_stats, StatsReport};
pub use trajectory::{format_sig9, read_trajectory, write_trajectory};

/// Version tag written into every manifest.
pub const MANIFEST_VERSION: &str = "eval-actions/1";

/// Who produced a demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Policy,
    Teleoperation,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Policy => "policy",
            Source::Teleoperation => "teleoperation",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "policy" => Ok(Source::Policy),
            "teleoperation" => Ok(Source::Teleoperation),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// Annotations attached to an episode. Every protocol is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSet {
    /// Expert grade, integer 1..=10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eg_score: Option<u8>,
    /// Rank-guided calibrated score in [0, 10].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rg_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot_text: Option<String>,
    /// 1-based expert rank within `rank_batch`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expert_rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_batch: Option<String>,
}

/// One manipulation demonstration.
///
/// Paths are relative to the directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Episode {
    pub id: String,
    pub task_description: String,
    pub dof: u32,
    pub trajectory_path: String,
    pub frame_dir: String,
    pub views: Vec<String>,
    pub success: bool,
    /// Set when the annotators flagged a collision during execution.
    #[serde(default)]
    pub collision: bool,
    pub source: Source,
    pub duration_s: f64,
    #[serde(default)]
    pub labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub episodes: Vec<Episode>,
}

impl Manifest {
    pub fn new(episodes: Vec<Episode>) -> Self {
        Self {
            version: MANIFEST_VERSION.to_string(),
            episodes,
        }
    }

    pub fn get(&self, id: &str) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.id == id)
    }
}
