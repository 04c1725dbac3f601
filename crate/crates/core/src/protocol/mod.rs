//! Evaluation output language, the evaluator contract and its reference
//! implementations.

mod evaluator;
mod heuristic;
mod output;

pub use evaluator::{
    EpisodeContext, Evaluator, EvaluatorRequest, RequestDocument, SubprocessEvaluator,
    REQUEST_VERSION,
};
pub use heuristic::{heuristic_evaluate, HeuristicEvaluator};
pub use output::{
    format_reward, parse_output, serialize_output, EvalOutput, GroundTruth, ProtocolError,
};
