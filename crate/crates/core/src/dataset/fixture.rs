//! Deterministic synthetic dataset with planted quality.
//!
//! Episodes come in groups of three sharing one waypoint path:
//! a smooth teleoperated success (tiny per-step noise), a jerky policy
//! success (large per-step noise) and a policy failure (large noise, truncated,
//! sometimes colliding). Expert labels are derived from a planted parameter
//! vector, so the calibration target is known exactly.

use std::f64::consts::PI;
use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{format_sig9, save_manifest, write_trajectory, Episode, LabelSet, Manifest, Source};
use crate::aggregation::{frame_file_name, save_png};
use crate::calibration::{
    align_value, raw_score, EpisodeFeatures, NormalizationBasis, ParamVector, ScoreStats,
    ViolationFlags,
};
use crate::error::{Error, Result};
use crate::io::create_dir_all;
use crate::kinematics::{summarize, JointTrajectory};

pub const FIXTURE_FPS: f64 = 10.0;
pub const FIXTURE_BATCH_SIZE: usize = 10;
pub const FIXTURE_VIEW: &str = "third_person";
/// Human score distribution the planted labels are aligned to.
pub const FIXTURE_HUMAN_STATS: ScoreStats = ScoreStats {
    mean: 5.5,
    std: 2.0,
};

const FRAME_SIZE: u32 = 16;
const TASKS: [&str; 4] = [
    "stack the bowls",
    "fold the towel",
    "place the cup on the plate",
    "hand over the towel",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureFamily {
    Smooth,
    Jerky,
    Failure,
}

impl FixtureFamily {
    pub fn of_index(i: usize) -> Self {
        match i % 3 {
            0 => FixtureFamily::Smooth,
            1 => FixtureFamily::Jerky,
            _ => FixtureFamily::Failure,
        }
    }
}

/// The parameter vector that induced the fixture's expert ranks.
pub fn planted_theta() -> ParamVector {
    ParamVector {
        weights: [4.0, 2.0, 1.0, 3.0],
        lambda_coll: 3.0,
        lambda_fail: 2.0,
    }
}

fn waypoint_path(rng: &mut ChaCha8Rng, steps: usize, joints: usize) -> Array2<f64> {
    const SEGMENTS: usize = 3;
    let waypoints: Vec<Vec<f64>> = (0..=SEGMENTS)
        .map(|_| (0..joints).map(|_| rng.random_range(-0.5..=0.5)).collect())
        .collect();
    Array2::from_shape_fn((steps, joints), |(t, j)| {
        let pos = t as f64 / (steps - 1) as f64 * SEGMENTS as f64;
        let seg = (pos.floor() as usize).min(SEGMENTS - 1);
        let u = pos - seg as f64;
        let blend = (1.0 - (PI * u).cos()) / 2.0;
        waypoints[seg][j] * (1.0 - blend) + waypoints[seg + 1][j] * blend
    })
}

fn render_frame(row: ndarray::ArrayView1<'_, f64>) -> RgbImage {
    let joints = row.len();
    RgbImage::from_fn(FRAME_SIZE, FRAME_SIZE, |x, y| {
        let j = x as usize % joints;
        let level = ((row[j] + 1.5) / 3.0).clamp(0.0, 1.0);
        let height = (level * f64::from(FRAME_SIZE)).round() as u32;
        if y >= FRAME_SIZE - height {
            let hue = (j * 255 / joints) as u8;
            Rgb([hue, 255 - hue, 128])
        } else {
            Rgb([16, 16, 16])
        }
    })
}

struct Draft {
    family: FixtureFamily,
    trajectory: JointTrajectory,
    collision: bool,
    task: &'static str,
}

/// Writes `manifest.json`, `trajectories/*.csv` and `frames/<id>/third_person/`
/// under `out_dir`. Identical arguments produce identical files.
pub fn generate_fixture(seed: u64, n: usize, dof: u32, out_dir: &Path) -> Result<Manifest> {
    if n == 0 {
        return Err(Error::InvalidArgument("fixture needs at least one episode".into()));
    }
    if dof != 7 && dof != 14 {
        return Err(Error::InvalidArgument(format!("dof must be 7 or 14, got {dof}")));
    }
    let joints = dof as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut drafts = Vec::with_capacity(n);
    for group in 0..n.div_ceil(3) {
        let steps = rng.random_range(60..=120usize);
        let base = waypoint_path(&mut rng, steps, joints);
        let task = TASKS[group % TASKS.len()];
        for i in group * 3..(group * 3 + 3).min(n) {
            let family = FixtureFamily::of_index(i);
            let sigma = match family {
                FixtureFamily::Smooth => rng.random_range(0.0005..0.003),
                FixtureFamily::Jerky | FixtureFamily::Failure => rng.random_range(0.07..0.10),
            };
            let len = match family {
                FixtureFamily::Failure => ((steps as f64) * rng.random_range(0.4..0.7)).round() as usize,
                _ => steps,
            };
            let collision = family == FixtureFamily::Failure && rng.random_bool(0.5);
            let noise = Normal::new(0.0, sigma).expect("positive sigma");
            let mut q = base.slice(ndarray::s![..len, ..]).to_owned();
            q.mapv_inplace(|v| v + noise.sample(&mut rng));
            // labels are computed from exactly what lands in the CSV
            q.mapv_inplace(|v| format_sig9(v).parse().expect("sig9 output parses"));
            drafts.push(Draft {
                family,
                trajectory: JointTrajectory::new(q)?,
                collision,
                task,
            });
        }
    }

    let features: Vec<EpisodeFeatures> = drafts
        .iter()
        .map(|d| {
            let s = summarize(&d.trajectory)?;
            Ok(EpisodeFeatures::new(
                &s,
                d.trajectory.steps() as f64 / FIXTURE_FPS,
                ViolationFlags {
                    collision: d.collision,
                    failure: d.family == FixtureFamily::Failure,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let basis = NormalizationBasis::fit(&features)?;
    let theta = planted_theta();
    let raw: Vec<f64> = features
        .iter()
        .map(|f| raw_score(&basis.normalize(f)?, &theta))
        .collect::<Result<_>>()?;
    let raw_stats = ScoreStats::of(&raw)?;
    let aligned: Vec<f64> = raw
        .iter()
        .map(|&r| {
            if raw_stats.std > 0.0 {
                align_value(r, &raw_stats, &FIXTURE_HUMAN_STATS)
            } else {
                Ok(FIXTURE_HUMAN_STATS.mean)
            }
        })
        .collect::<Result<_>>()?;

    let mut ranks = vec![0u32; n];
    for (b, chunk) in raw.chunks(FIXTURE_BATCH_SIZE).enumerate() {
        // best raw score gets rank 1; exact ties are broken by index
        let mut order: Vec<usize> = (0..chunk.len()).collect();
        order.sort_by(|&x, &y| chunk[y].total_cmp(&chunk[x]).then(x.cmp(&y)));
        for (rank, &i) in order.iter().enumerate() {
            ranks[b * FIXTURE_BATCH_SIZE + i] = rank as u32 + 1;
        }
    }

    create_dir_all(&out_dir.join("trajectories"))?;
    let mut episodes = Vec::with_capacity(n);
    for (i, d) in drafts.iter().enumerate() {
        let id = format!("ep{i:04}");
        let trajectory_path = format!("trajectories/{id}.csv");
        let frame_dir = format!("frames/{id}");
        write_trajectory(&out_dir.join(&trajectory_path), &d.trajectory)?;
        let view_dir = out_dir.join(&frame_dir).join(FIXTURE_VIEW);
        create_dir_all(&view_dir)?;
        for (t, row) in d.trajectory.view().rows().into_iter().enumerate() {
            save_png(&view_dir.join(frame_file_name(t)), &render_frame(row))?;
        }

        let (source, cot) = match d.family {
            FixtureFamily::Smooth => (Source::Teleoperation, "motion is smooth and steady; the task is completed"),
            FixtureFamily::Jerky => (Source::Policy, "the arm jitters noticeably but the task is completed"),
            FixtureFamily::Failure if d.collision => (Source::Policy, "the arm collides and the task fails"),
            FixtureFamily::Failure => (Source::Policy, "the motion stops early and the task fails"),
        };
        episodes.push(Episode {
            id,
            task_description: d.task.to_string(),
            dof,
            trajectory_path,
            frame_dir,
            views: vec![FIXTURE_VIEW.to_string()],
            success: d.family != FixtureFamily::Failure,
            collision: d.collision,
            source,
            duration_s: features[i].duration_s,
            labels: LabelSet {
                eg_score: Some(aligned[i].round().clamp(1.0, 10.0) as u8),
                rg_score: Some(aligned[i].clamp(0.0, 10.0)),
                cot_text: Some(cot.to_string()),
                expert_rank: Some(ranks[i]),
                rank_batch: Some(format!("batch{:03}", i / FIXTURE_BATCH_SIZE)),
            },
        });
    }
    let manifest = Manifest::new(episodes);
    super::validate_manifest(&manifest)?;
    save_manifest(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
