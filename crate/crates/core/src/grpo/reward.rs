use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{format_reward, parse_output, EvalOutput, GroundTruth};

/// Reward weights and optimizer constants for one GRPO run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Width of the Gaussian score kernel.
    pub sigma: f64,
    pub w_score: f64,
    pub w_succ: f64,
    pub w_src: f64,
    /// Share of the total reward given to the format check.
    pub gamma: f64,
    /// Added to the group standard deviation when normalizing advantages.
    pub epsilon: f64,
    /// KL penalty coefficient.
    pub beta: f64,
    pub group_size: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            w_score: 0.4,
            w_succ: 0.3,
            w_src: 0.3,
            gamma: 0.2,
            epsilon: 1e-8,
            beta: 0.01,
            group_size: 8,
        }
    }
}

impl RewardConfig {
    /// Normalizes a weight ratio such as 4:3:3 so the weights sum to one.
    pub fn with_weight_ratio(mut self, score: f64, succ: f64, src: f64) -> Result<Self> {
        let total = score + succ + src;
        if total.is_nan() || total <= 0.0 || [score, succ, src].iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument("weight ratio must be nonnegative with a positive sum".into()));
        }
        self.w_score = score / total;
        self.w_succ = succ / total;
        self.w_src = src / total;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        let w = [self.w_score, self.w_succ, self.w_src];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad("reward weights must be nonnegative".into());
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad(format!("reward weights must sum to 1, got {}", w.iter().sum::<f64>()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0,1], got {}", self.gamma));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad("beta must be nonnegative".into());
        }
        if self.group_size < 2 {
            return bad(format!("group_size must be >= 2, got {}", self.group_size));
        }
        Ok(())
    }
}

/// Gaussian kernel on the score error, in (0, 1].
pub fn score_reward(s: f64, s_hat: f64, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let err = s - s_hat;
    Ok((-(err * err) / (2.0 * sigma * sigma)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContentReward {
    pub r_score: f64,
    pub r_succ: f64,
    pub r_src: f64,
    pub r_acc: f64,
}

pub fn content_reward(gt: &GroundTruth, pred: &EvalOutput, cfg: &RewardConfig) -> Result<ContentReward> {
    let r_score = score_reward(gt.score, pred.score, cfg.sigma)?;
    let r_succ = f64::from(u8::from(pred.success == gt.success));
    let r_src = f64::from(u8::from(pred.source == gt.source));
    Ok(ContentReward {
        r_score,
        r_succ,
        r_src,
        r_acc: cfg.w_score * r_score + cfg.w_succ * r_succ + cfg.w_src * r_src,
    })
}

/// Every component of the total reward for one generated text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r_score: f64,
    pub r_succ: f64,
    pub r_src: f64,
    pub r_acc: f64,
    pub r_fmt: f64,
    pub r_total: f64,
}

/// `(1 − γ)·r_acc + γ·r_fmt`
pub fn combine_reward(r_acc: f64, r_fmt: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * r_acc + gamma * r_fmt
}

/// Unparseable text earns nothing: no content reward and no format reward.
pub fn total_reward(text: &str, gt: &GroundTruth, cfg: &RewardConfig, require_cot: bool) -> Result<RewardBreakdown> {
    let Ok(pred) = parse_output(text, require_cot) else {
        return Ok(RewardBreakdown::default());
    };
    let c = content_reward(gt, &pred, cfg)?;
    let r_fmt = format_reward(text, require_cot);
    Ok(RewardBreakdown {
        r_score: c.r_score,
        r_succ: c.r_succ,
        r_src: c.r_src,
        r_acc: c.r_acc,
        r_fmt,
        r_total: combine_reward(c.r_acc, r_fmt, cfg.gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Source;
    use crate::protocol::serialize_output;

    fn gt() -> GroundTruth {
        GroundTruth {
            score: 8.0,
            success: true,
            source: Source::Policy,
        }
    }

    #[test]
    fn gaussian_kernel() {
        assert_eq!(score_reward(3.0, 3.0, 0.5).unwrap(), 1.0);
        assert!((score_reward(5.0, 3.0, 2.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!(score_reward(1.0, 10.0, 0.5).unwrap() < 1e-30);
        assert!(score_reward(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn content_weighting() {
        let cfg = RewardConfig::default();
        let exact = EvalOutput {
            score: 8.0,
            success: true,
            source: Source::Policy,
            think: None,
        };
        assert!((content_reward(&gt(), &exact, &cfg).unwrap().r_acc - 1.0).abs() < 1e-15);
        let wrong = EvalOutput {
            success: false,
            source: Source::Teleoperation,
            ..exact.clone()
        };
        assert!((content_reward(&gt(), &wrong, &cfg).unwrap().r_acc - 0.4).abs() < 1e-15);
    }

    #[test]
    fn total_reward_cases() {
        let cfg = RewardConfig::default();
        let perfect = serialize_output(&EvalOutput {
            score: 8.0,
            success: true,
            source: Source::Policy,
            think: Some("ok".into()),
        });
        assert!((total_reward(&perfect, &gt(), &cfg, true).unwrap().r_total - 1.0).abs() < 1e-15);
        assert!((combine_reward(1.0, 0.0, 0.2) - 0.8).abs() < 1e-15);
        let bad = serialize_output(&EvalOutput {
            score: 1.0,
            success: false,
            source: Source::Teleoperation,
            think: Some("ok".into()),
        });
        let r = total_reward(&bad, &gt(), &cfg, true).unwrap();
        assert_eq!(r.r_fmt, 1.0);
        assert!((r.r_total - 0.2).abs() < 1e-9);
        assert_eq!(total_reward("garbage", &gt(), &cfg, false).unwrap(), RewardBreakdown::default());
    }

    #[test]
    fn config_validation() {
        RewardConfig::default().validate().unwrap();
        let c = RewardConfig::default().with_weight_ratio(4.0, 3.0, 3.0).unwrap();
        assert_eq!((c.w_score, c.w_succ, c.w_src), (0.4, 0.3, 0.3));
        assert!(RewardConfig { gamma: 1.5, ..Default::default() }.validate().is_err());
        assert!(RewardConfig { w_score: 0.5, ..Default::default() }.validate().is_err());
        assert!(RewardConfig { group_size: 1, ..Default::default() }.validate().is_err());
        assert!(RewardConfig { sigma: -1.0, ..Default::default() }.validate().is_err());
    }
}
