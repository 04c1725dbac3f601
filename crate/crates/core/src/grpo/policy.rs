//! Factorized categorical policy standing in for a language model.
//!
//! One head per answer field plus a format head. The malformed format token
//! drops the `source:` line from the rendered text.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::objective::{sequence_nll, Nll};
use crate::dataset::Source;
use crate::error::{Error, Result};
use crate::protocol::{serialize_output, EvalOutput};

pub const HEADS: usize = 4;
pub const SCORE_TOKENS: usize = 10;
/// Placeholder reasoning emitted when a think block is required.
pub const PLACEHOLDER_THINK: &str = "assessing smoothness, task outcome and motion source";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    /// Scores 1..=10.
    pub score: [f64; SCORE_TOKENS],
    /// `[success, failure]`
    pub success: [f64; 2],
    /// `[policy, teleoperation]`
    pub source: [f64; 2],
    /// `[well-formed, malformed]`
    pub format: [f64; 2],
}

impl Default for ToyPolicy {
    fn default() -> Self {
        Self::uniform()
    }
}

/// One sampled answer as token indices, in head order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ToyOutput {
    pub tokens: [usize; HEADS],
}

impl ToyOutput {
    pub fn score(&self) -> f64 {
        (self.tokens[0] + 1) as f64
    }

    pub fn success(&self) -> bool {
        self.tokens[1] == 0
    }

    pub fn source(&self) -> Source {
        if self.tokens[2] == 0 {
            Source::Policy
        } else {
            Source::Teleoperation
        }
    }

    pub fn well_formed(&self) -> bool {
        self.tokens[3] == 0
    }

    pub fn render(&self, require_cot: bool) -> String {
        let text = serialize_output(&EvalOutput {
            score: self.score(),
            success: self.success(),
            source: self.source(),
            think: require_cot.then(|| PLACEHOLDER_THINK.to_string()),
        });
        if self.well_formed() {
            return text;
        }
        match text.rfind("\nsource: ") {
            Some(cut) => text[..cut].to_string(),
            None => text,
        }
    }
}

pub(crate) fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

impl ToyPolicy {
    pub fn uniform() -> Self {
        Self {
            score: [0.0; SCORE_TOKENS],
            success: [0.0; 2],
            source: [0.0; 2],
            format: [0.0; 2],
        }
    }

    pub fn heads(&self) -> [&[f64]; HEADS] {
        [&self.score, &self.success, &self.source, &self.format]
    }

    pub fn heads_mut(&mut self) -> [&mut [f64]; HEADS] {
        [&mut self.score, &mut self.success, &mut self.source, &mut self.format]
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads().iter().any(|h| h.iter().any(|l| !l.is_finite())) {
            return Err(Error::Validation("policy logits must be finite".into()));
        }
        Ok(())
    }

    pub fn probabilities(&self) -> [Vec<f64>; HEADS] {
        self.heads().map(softmax)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ToyOutput {
        let mut tokens = [0; HEADS];
        for (slot, probs) in tokens.iter_mut().zip(self.probabilities()) {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            *slot = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    *slot = k;
                    break;
                }
            }
        }
        ToyOutput { tokens }
    }

    pub fn token_logps(&self, out: &ToyOutput) -> [f64; HEADS] {
        let heads = self.heads();
        std::array::from_fn(|h| log_softmax(heads[h])[out.tokens[h]])
    }

    /// Sequence log-probability: the sum over heads.
    pub fn logp(&self, out: &ToyOutput) -> f64 {
        self.token_logps(out).iter().sum()
    }

    /// `∇ log π(out)` per head: one-hot minus softmax.
    pub fn grad_logp(&self, out: &ToyOutput) -> [Vec<f64>; HEADS] {
        let mut g = self.probabilities().map(|p| p.into_iter().map(|x| -x).collect::<Vec<f64>>());
        for (h, &t) in out.tokens.iter().enumerate() {
            g[h][t] += 1.0;
        }
        g
    }

    pub fn nll(&self, target: &ToyOutput) -> Result<Nll> {
        sequence_nll(&target.tokens, &self.token_logps(target))
    }

    /// Add `scale * grad` to the logits.
    pub fn apply(&mut self, grad: &[Vec<f64>; HEADS], scale: f64) {
        for (head, g) in self.heads_mut().into_iter().zip(grad) {
            for (l, d) in head.iter_mut().zip(g) {
                *l += scale * d;
            }
        }
    }

    /// One supervised step descending the NLL of `target`. Returns the NLL
    /// before the update.
    pub fn sft_step(&mut self, target: &ToyOutput, learning_rate: f64) -> Result<Nll> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        let nll = self.nll(target)?;
        let grad = self.grad_logp(target);
        self.apply(&grad, learning_rate);
        Ok(nll)
    }
}
