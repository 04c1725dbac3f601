//! Reference evaluator built from the calibrated kinematic score.
//!
//! It reads no pixels: the score is the aligned composite score clamped to
//! [1,10], success mirrors the failure flag, and the source verdict is a
//! threshold on U_v standing in for a learned source head.

use super::evaluator::{EpisodeContext, Evaluator, EvaluatorRequest};
use super::output::EvalOutput;
use crate::calibration::{Calibration, EpisodeFeatures, ViolationFlags};
use crate::dataset::Source;
use crate::error::Result;
use crate::kinematics::{summarize, JointTrajectory};

pub fn heuristic_evaluate(
    req: &EvaluatorRequest,
    calibration: &Calibration,
    trajectory: &JointTrajectory,
    duration_s: f64,
    flags: ViolationFlags,
) -> Result<EvalOutput> {
    let summary = summarize(trajectory)?;
    let features = EpisodeFeatures::new(&summary, duration_s, flags);
    let score = calibration.aligned(&features)?.clamp(1.0, 10.0);
    let jittery = summary.u_v > calibration.source_threshold;
    let source = if jittery { Source::Policy } else { Source::Teleoperation };
    let success = !flags.failure;

    let think = req.require_cot.then(|| {
        let motion = if jittery {
            format!(
                "velocity variance {:.6} exceeds the jitter threshold {:.6}, consistent with autonomous execution",
                summary.u_v, calibration.source_threshold
            )
        } else {
            format!(
                "velocity variance {:.6} is within the jitter threshold {:.6}, consistent with teleoperation",
                summary.u_v, calibration.source_threshold
            )
        };
        let outcome = match (flags.failure, flags.collision) {
            (true, true) => "the task failed after a collision",
            (true, false) => "the task was not completed",
            (false, true) => "the task succeeded but a collision occurred",
            (false, false) => "the task succeeded without collision",
        };
        format!("{motion}; {outcome}.")
    });

    Ok(EvalOutput {
        score,
        success,
        source,
        think,
    })
}

/// [`Evaluator`] adapter around [`heuristic_evaluate`].
#[derive(Debug, Clone)]
pub struct HeuristicEvaluator {
    pub calibration: Calibration,
}

impl Evaluator for HeuristicEvaluator {
    fn evaluate(&self, req: &EvaluatorRequest, ctx: &EpisodeContext<'_>) -> Result<EvalOutput> {
        heuristic_evaluate(req, &self.calibration, ctx.trajectory, ctx.duration_s, ctx.flags)
    }
}
