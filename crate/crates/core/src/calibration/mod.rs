//! Rank-guided weight optimization.
//!
//! A composite raw score is a weighted mean of normalized metric channels,
//! with channels divided by penalty factors when an episode collided or
//! failed. A genetic algorithm tunes the weights and divisors so the raw
//! scores reproduce expert rankings, and a final z-score alignment maps raw
//! scores onto the human grading scale.

mod channels;
mod ga;
mod score;
mod theta;

pub use channels::{
    normalize_channels, Channel, EpisodeFeatures, MetricChannels, NormalizationBasis,
    ViolationFlags, CHANNELS, CHANNEL_COUNT,
};
pub use ga::{batch_loss, ga_optimize, GaConfig, GaResult, ParamBounds, RankBatch};
pub use score::{align_distribution, align_value, rank_loss, raw_score, ParamVector, ScoreStats};
pub use theta::{Calibration, THETA_VERSION};
