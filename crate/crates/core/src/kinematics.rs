//! Discrete joint-space derivatives and the smoothness statistics fed to the
//! evaluator as a textual calibration signal.
//!
//! Time steps are unit-spaced: velocity is in rad/step, acceleration in
//! rad/step².

use std::fmt;

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `T × J` matrix of joint angles in radians, one row per time step.
///
/// Any joint count is accepted here; the 7/14-DoF restriction belongs to the
/// dataset schema.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    data: Array2<f64>,
}

impl JointTrajectory {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "trajectory must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(((t, j), v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite joint angle {v} at step {t}, joint {j}"
            )));
        }
        Ok(Self { data })
    }

    /// Builds a trajectory from row vectors; every row must have the same width.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let joints = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != joints) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} has {} columns, expected {joints}",
                rows[bad].len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), joints), flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(data)
    }

    pub fn steps(&self) -> usize {
        self.data.nrows()
    }

    pub fn joints(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Velocity has `T−1` rows and acceleration `T−2` (zero rows when `T = 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeSeries {
    pub velocity: Array2<f64>,
    pub acceleration: Array2<f64>,
}

/// Per-joint variances plus the worst-case (max over joints) uniformity
/// metrics and the mean absolute velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicSummary {
    pub var_v: Vec<f64>,
    pub var_a: Vec<f64>,
    pub u_v: f64,
    pub u_a: f64,
    pub mu_v: f64,
}

fn first_difference(m: ArrayView2<'_, f64>) -> Array2<f64> {
    if m.nrows() < 2 {
        return Array2::zeros((0, m.ncols()));
    }
    &m.slice(s![1.., ..]) - &m.slice(s![..-1, ..])
}

pub fn compute_derivatives(q: &JointTrajectory) -> Result<DerivativeSeries> {
    if q.steps() < 2 {
        return Err(Error::InvalidArgument(format!(
            "trajectory too short: {} steps, need at least 2",
            q.steps()
        )));
    }
    let velocity = first_difference(q.view());
    let acceleration = first_difference(velocity.view());
    Ok(DerivativeSeries {
        velocity,
        acceleration,
    })
}

fn column_population_variance(m: &Array2<f64>) -> Vec<f64> {
    m.var_axis(Axis(0), 0.0).to_vec()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

pub fn summarize(q: &JointTrajectory) -> Result<KinematicSummary> {
    if q.steps() < 3 {
        return Err(Error::InvalidArgument(format!(
            "trajectory too short for acceleration statistics: {} steps, need at least 3",
            q.steps()
        )));
    }
    let d = compute_derivatives(q)?;
    let var_v = column_population_variance(&d.velocity);
    let var_a = column_population_variance(&d.acceleration);
    let mu_v = d.velocity.iter().map(|v| v.abs()).sum::<f64>() / d.velocity.len() as f64;
    Ok(KinematicSummary {
        u_v: max_of(&var_v),
        u_a: max_of(&var_a),
        var_v,
        var_a,
        mu_v,
    })
}

/// The serialized kinematic descriptor handed to an evaluator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhysicsPrompt {
    pub text: String,
}

impl fmt::Display for PhysicsPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// The three scalars carried by a [`PhysicsPrompt`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptValues {
    pub u_v: f64,
    pub u_a: f64,
    pub mu_v: f64,
}

const PROMPT_PREFIX: &str = "KINEMATICS";

pub fn render_physics_prompt(k: &KinematicSummary) -> Result<PhysicsPrompt> {
    for (name, v) in [("u_v", k.u_v), ("u_a", k.u_a), ("mu_v", k.mu_v)] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} is not finite: {v}")));
        }
    }
    // +0.0 turns a stray -0.0 into 0.0
    Ok(PhysicsPrompt {
        text: format!(
            "{PROMPT_PREFIX} u_v=<{:.6}> u_a=<{:.6}> mu_v=<{:.6}>",
            k.u_v + 0.0,
            k.u_a + 0.0,
            k.mu_v + 0.0
        ),
    })
}

pub fn parse_physics_prompt(text: &str) -> Result<PromptValues> {
    let err = |m: &str| Error::parse("physics prompt", m);
    let rest = text
        .strip_prefix(PROMPT_PREFIX)
        .ok_or_else(|| err("missing KINEMATICS prefix"))?;
    let mut values = [0.0; 3];
    let mut rest = rest;
    for (slot, key) in values.iter_mut().zip(["u_v", "u_a", "mu_v"]) {
        rest = rest
            .strip_prefix(' ')
            .and_then(|r| r.strip_prefix(key))
            .and_then(|r| r.strip_prefix("=<"))
            .ok_or_else(|| err(&format!("expected field {key}")))?;
        let end = rest.find('>').ok_or_else(|| err("unterminated value"))?;
        let raw = &rest[..end];
        *slot = raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(&format!("invalid number {raw:?} for {key}")))?;
        rest = &rest[end + 1..];
    }
    if !rest.is_empty() {
        return Err(err("trailing text after mu_v"));
    }
    Ok(PromptValues {
        u_v: values[0],
        u_a: values[1],
        mu_v: values[2],
    })
}
