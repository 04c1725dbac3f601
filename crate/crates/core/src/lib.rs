//! Trustworthy evaluation of robot manipulation trajectories.
//!
//! Kinematic quality statistics, a rank-calibrated composite score,
//! spatio-temporal frame aggregation, a structured evaluator protocol,
//! GRPO reward machinery on a toy policy and the evaluation metrics.

pub mod aggregation;
pub mod calibration;
pub mod dataset;
pub mod error;
pub mod grpo;
pub mod io;
pub mod kinematics;
pub mod metrics;
pub mod pipeline;
pub mod protocol;
pub mod rank;

pub use calibration::{Calibration, GaConfig, ParamVector, ScoreStats};
pub use dataset::{Episode, LabelSet, Manifest, Source};
pub use error::{Error, Result};
pub use kinematics::{JointTrajectory, KinematicSummary, PhysicsPrompt};
pub use protocol::{EvalOutput, Evaluator, GroundTruth};
