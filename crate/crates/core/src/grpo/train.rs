use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{advantages, grpo_objective, RolloutGroup};
use super::policy::{ToyOutput, ToyPolicy, HEADS};
use super::reward::{total_reward, RewardBreakdown, RewardConfig};
use crate::dataset::Source;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::protocol::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub require_cot: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 0.1,
            seed: 17,
            require_cot: true,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Group means for one iteration, measured on the rollouts sampled before
/// the update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub r_score_mean: f64,
    pub r_succ_mean: f64,
    pub r_src_mean: f64,
    pub r_fmt_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: ToyPolicy,
    pub trace: Vec<TraceRow>,
    /// Surrogate objective at the pre-update parameters, per iteration.
    pub objectives: Vec<f64>,
}

/// The default toy query: a successful policy rollout worth 8.
pub fn default_toy_truth() -> GroundTruth {
    GroundTruth {
        score: 8.0,
        success: true,
        source: Source::Policy,
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one rollout, independent of scheduling order.
pub fn rollout_seed(run_seed: u64, iteration: usize, index: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(run_seed) ^ iteration as u64) ^ index as u64)
}

pub fn grpo_train(
    policy: ToyPolicy,
    gt: &GroundTruth,
    cfg: &RewardConfig,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    grpo_train_with(policy, cfg, opts, |_, text| total_reward(text, gt, cfg, opts.require_cot))
}

/// Training loop with a caller-supplied reward.
pub fn grpo_train_with<F>(mut policy: ToyPolicy, cfg: &RewardConfig, opts: &TrainOptions, reward: F) -> Result<TrainOutcome>
where
    F: Fn(&ToyOutput, &str) -> Result<RewardBreakdown> + Sync,
{
    cfg.validate()?;
    opts.validate()?;
    policy.validate()?;
    let reference = policy.clone();
    let g = cfg.group_size;
    let mut trace = Vec::with_capacity(opts.iterations);
    let mut objectives = Vec::with_capacity(opts.iterations);

    for it in 0..opts.iterations {
        let old = policy.clone();
        let rollouts: Vec<(ToyOutput, String, RewardBreakdown)> = (0..g)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(opts.seed, it, i));
                let out = old.sample(&mut rng);
                let text = out.render(opts.require_cot);
                let r = reward(&out, &text)?;
                Ok((out, text, r))
            })
            .collect::<Result<_>>()?;

        let rewards: Vec<f64> = rollouts.iter().map(|r| r.2.r_total).collect();
        let adv = advantages(&rewards, cfg.epsilon)?;
        let logp_old: Vec<f64> = rollouts.iter().map(|r| old.logp(&r.0)).collect();
        let group = RolloutGroup {
            outputs: rollouts.iter().map(|r| r.1.clone()).collect(),
            rewards,
            advantages: adv,
            logp_current: logp_old.clone(),
            logp_ref: rollouts.iter().map(|r| reference.logp(&r.0)).collect(),
            logp_old,
        };
        objectives.push(grpo_objective(&group, cfg.beta)?);

        // gradient of the surrogate at θ = θ_old
        let mut grad: [Vec<f64>; HEADS] = policy.heads().map(|h| vec![0.0; h.len()]);
        for (i, (out, _, _)) in rollouts.iter().enumerate() {
            let ratio = (group.logp_current[i] - group.logp_old[i]).exp();
            let r = group.logp_ref[i] - group.logp_current[i];
            let coef = (ratio * group.advantages[i] - cfg.beta * (1.0 - r.exp())) / g as f64;
            if coef == 0.0 {
                continue;
            }
            for (acc, d) in grad.iter_mut().zip(policy.grad_logp(out)) {
                for (a, x) in acc.iter_mut().zip(d) {
                    *a += coef * x;
                }
            }
        }
        policy.apply(&grad, opts.learning_rate);

        let mean = |f: fn(&RewardBreakdown) -> f64| rollouts.iter().map(|r| f(&r.2)).sum::<f64>() / g as f64;
        trace.push(TraceRow {
            iteration: it,
            mean_reward: mean(|r| r.r_total),
            r_score_mean: mean(|r| r.r_score),
            r_succ_mean: mean(|r| r.r_succ),
            r_src_mean: mean(|r| r.r_src),
            r_fmt_mean: mean(|r| r.r_fmt),
        });
    }
    policy.validate()?;
    Ok(TrainOutcome {
        policy,
        trace,
        objectives,
    })
}

pub fn trace_to_csv(trace: &[TraceRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in trace {
        w.serialize(row).map_err(|e| Error::parse("trace", e))?;
    }
    w.into_inner().map_err(|e| Error::parse("trace", e.error()))
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    write_atomic(path, &trace_to_csv(trace)?)
}

/// Mean of `mean_reward` over the first and last tenth of the trace.
pub fn decile_means(trace: &[TraceRow]) -> Option<(f64, f64)> {
    let k = trace.len() / 10;
    if k == 0 {
        return None;
    }
    let avg = |rows: &[TraceRow]| rows.iter().map(|r| r.mean_reward).sum::<f64>() / rows.len() as f64;
    Some((avg(&trace[..k]), avg(&trace[trace.len() - k..])))
}
