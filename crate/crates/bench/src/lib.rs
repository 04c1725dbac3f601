//! Seeded input generators shared by the benchmarks.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajeval_core::aggregation::FrameSequence;
use trajeval_core::calibration::{raw_score, MetricChannels, RankBatch, ViolationFlags};
use trajeval_core::dataset::planted_theta;
use trajeval_core::JointTrajectory;

/// Random-walk joint trajectory.
pub fn random_trajectory(seed: u64, steps: usize, joints: usize) -> JointTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = vec![0.0; joints];
    let rows: Vec<Vec<f64>> = (0..steps)
        .map(|_| {
            for x in &mut q {
                *x += rng.random_range(-0.05..0.05);
            }
            q.clone()
        })
        .collect();
    JointTrajectory::from_rows(&rows).expect("steps and joints are positive")
}

/// `n` frames of random noise.
pub fn random_frames(seed: u64, n: usize, width: u32, height: u32) -> FrameSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = (0..n)
        .map(|_| RgbImage::from_fn(width, height, |_, _| Rgb(rng.random())))
        .collect();
    FrameSequence::new(frames, None).expect("frames share one size")
}

/// Rank batches whose human ranks are induced by the fixture's planted θ.
pub fn planted_batches(seed: u64, batches: usize, size: usize) -> Vec<RankBatch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = planted_theta();
    (0..batches)
        .map(|_| {
            let channels: Vec<MetricChannels> = (0..size)
                .map(|_| {
                    let values = [(); 4].map(|_| rng.random_range(0.0..=10.0));
                    let flags = ViolationFlags {
                        collision: rng.random_bool(0.2),
                        failure: rng.random_bool(0.3),
                    };
                    MetricChannels::new(values, flags).expect("values lie in [0,10]")
                })
                .collect();
            let scores: Vec<f64> = channels.iter().map(|c| raw_score(c, &theta).unwrap()).collect();
            let mut order: Vec<usize> = (0..size).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            let mut ranks = vec![0; size];
            for (r, &i) in order.iter().enumerate() {
                ranks[i] = r + 1;
            }
            RankBatch::new(channels, ranks).expect("one rank per episode")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use trajeval_core::calibration::batch_loss;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(random_trajectory(1, 20, 7), random_trajectory(1, 20, 7));
        assert_eq!(random_frames(2, 3, 8, 8).frames(), random_frames(2, 3, 8, 8).frames());
    }

    #[test]
    fn planted_theta_has_zero_loss() {
        let b = planted_batches(3, 4, 10);
        assert_eq!(batch_loss(&b, &planted_theta()), 0.0);
    }
}
