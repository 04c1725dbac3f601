use serde::Serialize;

use crate::error::{Error, Result};

/// Group-normalized advantages `(R − mean) / (std + ε)` with the population std.
/// A constant group maps to all zeros.
pub fn advantages(rewards: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "advantages need a group of at least 2, got {}",
            rewards.len()
        )));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidArgument("non-finite reward".into()));
    }
    // the rounded mean of identical values can differ from them
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(rewards.iter().map(|r| (r - mean) / (std + epsilon)).collect())
}

/// Nonnegative KL estimate `exp(r) − r − 1` with `r = logp_ref − logp_current`.
pub fn kl_estimate(logp_current: f64, logp_ref: f64) -> Result<f64> {
    if !logp_current.is_finite() || !logp_ref.is_finite() {
        return Err(Error::InvalidArgument("log-probabilities must be finite".into()));
    }
    let r = logp_ref - logp_current;
    // exp_m1 keeps precision near r = 0
    Ok((r.exp_m1() - r).max(0.0))
}

/// One query's sampled outputs with rewards, advantages and sequence
/// log-probabilities under the current, behaviour (old) and reference policies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutGroup {
    pub outputs: Vec<String>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub logp_current: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl RolloutGroup {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.rewards.len();
        let lens = [
            self.outputs.len(),
            self.advantages.len(),
            self.logp_current.len(),
            self.logp_old.len(),
            self.logp_ref.len(),
        ];
        if g == 0 || lens.iter().any(|&l| l != g) {
            return Err(Error::InvalidArgument(format!(
                "incomplete rollout group: {g} rewards, other lengths {lens:?}"
            )));
        }
        Ok(())
    }
}

/// `(1/G) Σ [exp(logp_cur − logp_old)·A − β·KL̂(cur, ref)]`, unclipped.
pub fn grpo_objective(group: &RolloutGroup, beta: f64) -> Result<f64> {
    group.validate()?;
    let mut total = 0.0;
    for i in 0..group.len() {
        let ratio = (group.logp_current[i] - group.logp_old[i]).exp();
        let kl = kl_estimate(group.logp_current[i], group.logp_ref[i])?;
        total += ratio * group.advantages[i] - beta * kl;
    }
    Ok(total / group.len() as f64)
}

/// Upper bound reported when a target token has zero probability.
pub const NLL_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nll {
    pub value: f64,
    /// True when the sum was replaced by [`NLL_CAP`].
    pub capped: bool,
}

/// Negative log-likelihood `−Σ logp_t` of a target token sequence.
pub fn sequence_nll(target_tokens: &[usize], token_logps: &[f64]) -> Result<Nll> {
    if target_tokens.len() != token_logps.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} tokens vs {} log-probabilities",
            target_tokens.len(),
            token_logps.len()
        )));
    }
    if token_logps.iter().any(|l| l.is_nan() || *l > 0.0) {
        return Err(Error::InvalidArgument("log-probabilities must be <= 0".into()));
    }
    let value = -token_logps.iter().sum::<f64>();
    Ok(if value.is_finite() && value <= NLL_CAP {
        Nll { value, capped: false }
    } else {
        Nll {
            value: NLL_CAP,
            capped: true,
        }
    })
}
