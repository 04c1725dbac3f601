use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::output::{parse_output, EvalOutput};
use crate::aggregation::{save_composites, CompositeSequence};
use crate::calibration::ViolationFlags;
use crate::error::{Error, Result};
use crate::kinematics::{JointTrajectory, PhysicsPrompt};

pub const REQUEST_VERSION: &str = "eval-request/1";

/// Visual and kinematic input for one evaluation.
#[derive(Debug, Clone)]
pub struct EvaluatorRequest {
    /// Identifies the episode; used to name scratch files.
    pub id: String,
    pub composites: CompositeSequence,
    pub physics: PhysicsPrompt,
    pub task_description: String,
    pub require_cot: bool,
}

impl EvaluatorRequest {
    pub fn new(
        id: impl Into<String>,
        composites: CompositeSequence,
        physics: PhysicsPrompt,
        task_description: impl Into<String>,
        require_cot: bool,
    ) -> Result<Self> {
        if composites.composites.is_empty() {
            return Err(Error::InvalidArgument("evaluator request has no composites".into()));
        }
        Ok(Self {
            id: id.into(),
            composites,
            physics,
            task_description: task_description.into(),
            require_cot,
        })
    }
}

/// Side information available to in-process evaluators but never sent to an
/// external one.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeContext<'a> {
    pub trajectory: &'a JointTrajectory,
    pub duration_s: f64,
    pub flags: ViolationFlags,
}

/// Maps a request to a structured output. Implementations must be pure with
/// respect to shared state so requests can be evaluated concurrently.
pub trait Evaluator: Sync {
    fn evaluate(&self, req: &EvaluatorRequest, ctx: &EpisodeContext<'_>) -> Result<EvalOutput>;
}

/// JSON document written to an external evaluator's stdin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestDocument {
    pub version: String,
    pub id: String,
    /// Composite image paths, in temporal order.
    pub composites: Vec<PathBuf>,
    pub physics: String,
    pub task_description: String,
    pub require_cot: bool,
}

impl RequestDocument {
    pub fn to_canonical_string(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::parse("request", e))?;
        serde_json::to_string(&value).map_err(|e| Error::parse("request", e))
    }
}

/// Runs an external program per request: the request document goes to
/// stdin, the answer text is read from stdout. Composites are written under
/// `scratch_dir/<request id>/`.
#[derive(Debug, Clone)]
pub struct SubprocessEvaluator {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub scratch_dir: PathBuf,
}

impl SubprocessEvaluator {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>, scratch_dir: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args,
            scratch_dir: scratch_dir.into(),
        }
    }

    fn document(&self, req: &EvaluatorRequest) -> Result<RequestDocument> {
        let dir = self.scratch_dir.join(&req.id);
        let names = save_composites(&dir, &req.composites)?;
        Ok(RequestDocument {
            version: REQUEST_VERSION.into(),
            id: req.id.clone(),
            composites: names.into_iter().map(|n| dir.join(n)).collect(),
            physics: req.physics.text.clone(),
            task_description: req.task_description.clone(),
            require_cot: req.require_cot,
        })
    }
}

fn io_err(program: &Path, e: std::io::Error) -> Error {
    Error::io(program, e)
}

impl Evaluator for SubprocessEvaluator {
    fn evaluate(&self, req: &EvaluatorRequest, _ctx: &EpisodeContext<'_>) -> Result<EvalOutput> {
        let doc = self.document(req)?.to_canonical_string()?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| io_err(&self.program, e))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin.write_all(doc.as_bytes()).map_err(|e| io_err(&self.program, e))?;
        }
        let out = child.wait_with_output().map_err(|e| io_err(&self.program, e))?;
        if !out.status.success() {
            return Err(Error::Validation(format!(
                "evaluator {} exited with {} on {}",
                self.program.display(),
                out.status,
                req.id
            )));
        }
        let text = String::from_utf8(out.stdout)
            .map_err(|e| Error::parse(format!("evaluator output for {}", req.id), e))?;
        // one trailing line terminator is tolerated
        let text = text
            .strip_suffix("\r\n")
            .or_else(|| text.strip_suffix('\n'))
            .unwrap_or(&text);
        parse_output(text, req.require_cot)
            .map_err(|e| Error::parse(format!("evaluator output for {}", req.id), e))
    }
}
