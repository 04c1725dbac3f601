//! Reward stack, group-normalized advantages, the KL-penalized surrogate and
//! a training loop over a toy categorical policy.

mod objective;
mod policy;
mod reward;
mod train;

pub use objective::{advantages, grpo_objective, kl_estimate, sequence_nll, Nll, RolloutGroup, NLL_CAP};
pub use policy::{ToyOutput, ToyPolicy, HEADS, PLACEHOLDER_THINK, SCORE_TOKENS};
pub use reward::{
    combine_reward, content_reward, score_reward, total_reward, ContentReward, RewardBreakdown, RewardConfig,
};
pub use train::{
    decile_means, default_toy_truth, grpo_train, grpo_train_with, rollout_seed, trace_to_csv, write_trace_csv,
    TraceRow, TrainOptions, TrainOutcome,
};
