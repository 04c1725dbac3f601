//! Real-valued genetic algorithm with tournament selection, blend crossover,
//! Gaussian mutation and elitism.
//!
//! Fitness evaluations for a generation run in parallel and are collected in
//! population order before any random draw, so results depend only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::channels::MetricChannels;
use super::score::{check_rank_permutation, rank_loss_unchecked, raw_score_unchecked, ParamVector};
use crate::error::{Error, Result};

/// One annotated batch: channels per episode and the expert ranking of those episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RankBatch {
    pub channels: Vec<MetricChannels>,
    pub human_ranks: Vec<usize>,
}

impl RankBatch {
    pub fn new(channels: Vec<MetricChannels>, human_ranks: Vec<usize>) -> Result<Self> {
        if channels.is_empty() || channels.len() != human_ranks.len() {
            return Err(Error::InvalidArgument(format!(
                "rank batch needs matching nonempty lists, got {} channels and {} ranks",
                channels.len(),
                human_ranks.len()
            )));
        }
        check_rank_permutation(&human_ranks)?;
        Ok(Self {
            channels,
            human_ranks,
        })
    }
}

/// Inclusive search interval for weights and for the penalty divisors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub weight: (f64, f64),
    pub lambda: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            weight: (0.0, 10.0),
            lambda: (1.0, 10.0),
        }
    }
}

impl ParamBounds {
    fn per_gene(&self) -> [(f64, f64); ParamVector::LEN] {
        let mut b = [self.weight; ParamVector::LEN];
        b[ParamVector::LEN - 2] = self.lambda;
        b[ParamVector::LEN - 1] = self.lambda;
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    /// BLX-α extension factor.
    pub blend_alpha: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Gaussian mutation standard deviation as a fraction of each gene's range.
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub seed: u64,
    pub bounds: ParamBounds,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 200,
            tournament_k: 3,
            crossover_rate: 0.9,
            blend_alpha: 0.5,
            mutation_rate: 0.2,
            mutation_sigma: 0.05,
            elitism: 1,
            seed: 0,
            bounds: ParamBounds::default(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.population < 2 {
            return bad(format!("population must be >= 2, got {}", self.population));
        }
        if self.tournament_k == 0 || self.tournament_k > self.population {
            return bad(format!(
                "tournament_k must be in 1..={}, got {}",
                self.population, self.tournament_k
            ));
        }
        if self.elitism >= self.population {
            return bad("elitism must be smaller than the population".into());
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma > 0.0) {
            return bad("mutation_sigma must be positive".into());
        }
        if !(self.blend_alpha.is_finite() && self.blend_alpha >= 0.0) {
            return bad("blend_alpha must be nonnegative".into());
        }
        let b = self.bounds;
        if !(b.weight.0 >= 0.0 && b.weight.0 < b.weight.1 && b.weight.1.is_finite()) {
            return bad(format!("weight bounds must satisfy 0 <= lo < hi, got {:?}", b.weight));
        }
        if !(b.lambda.0 >= 1.0 && b.lambda.0 <= b.lambda.1 && b.lambda.1.is_finite()) {
            return bad(format!("lambda bounds must satisfy 1 <= lo <= hi, got {:?}", b.lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub theta: ParamVector,
    pub loss: f64,
    /// Best-so-far loss after initialization and after each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Mean of per-batch rank losses. All-zero weights score `+inf`.
pub fn batch_loss(batches: &[RankBatch], theta: &ParamVector) -> f64 {
    if theta.weights.iter().sum::<f64>() <= 0.0 {
        return f64::INFINITY;
    }
    let total: f64 = batches
        .iter()
        .map(|b| {
            let scores: Vec<f64> = b.channels.iter().map(|c| raw_score_unchecked(c, theta)).collect();
            rank_loss_unchecked(&b.human_ranks, &scores)
        })
        .sum();
    total / batches.len() as f64
}

type Genome = [f64; ParamVector::LEN];

fn evaluate(batches: &[RankBatch], pop: &[Genome]) -> Vec<f64> {
    pop.par_iter()
        .map(|g| batch_loss(batches, &ParamVector::from_genes(g)))
        .collect()
}

fn tournament<'a>(rng: &mut ChaCha8Rng, pop: &'a [Genome], loss: &[f64], k: usize) -> &'a Genome {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..k {
        let c = rng.random_range(0..pop.len());
        if loss[c] < loss[best] {
            best = c;
        }
    }
    &pop[best]
}

pub fn ga_optimize(batches: &[RankBatch], cfg: &GaConfig) -> Result<GaResult> {
    cfg.validate()?;
    if batches.is_empty() {
        return Err(Error::InvalidArgument("no rank batches to calibrate against".into()));
    }
    let bounds = cfg.bounds.per_gene();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut pop: Vec<Genome> = (0..cfg.population)
        .map(|_| std::array::from_fn(|i| rng.random_range(bounds[i].0..=bounds[i].1)))
        .collect();
    let mut loss = evaluate(batches, &pop);
    let mut evaluations = pop.len();

    let mut best_idx = 0;
    for i in 1..loss.len() {
        if loss[i] < loss[best_idx] {
            best_idx = i;
        }
    }
    let mut best = (pop[best_idx], loss[best_idx]);
    let mut history = vec![best.1];

    for _ in 0..cfg.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| loss[a].total_cmp(&loss[b]).then(a.cmp(&b)));
        let mut next: Vec<Genome> = order[..cfg.elitism].iter().map(|&i| pop[i]).collect();

        while next.len() < cfg.population {
            let a = tournament(&mut rng, &pop, &loss, cfg.tournament_k);
            let b = tournament(&mut rng, &pop, &loss, cfg.tournament_k);
            let mut child = *a;
            if rng.random::<f64>() < cfg.crossover_rate {
                for i in 0..child.len() {
                    let (lo, hi) = (a[i].min(b[i]), a[i].max(b[i]));
                    let ext = cfg.blend_alpha * (hi - lo);
                    child[i] = rng.random_range((lo - ext)..=(hi + ext));
                }
            }
            for (i, gene) in child.iter_mut().enumerate() {
                let (lo, hi) = bounds[i];
                if rng.random::<f64>() < cfg.mutation_rate {
                    *gene += cfg.mutation_sigma * (hi - lo) * unit.sample(&mut rng);
                }
                *gene = gene.clamp(lo, hi);
            }
            next.push(child);
        }

        pop = next;
        loss = evaluate(batches, &pop);
        evaluations += pop.len();
        for (g, &l) in pop.iter().zip(&loss) {
            if l < best.1 {
                best = (*g, l);
            }
        }
        history.push(best.1);
    }

    Ok(GaResult {
        theta: ParamVector::from_genes(&best.0),
        loss: best.1,
        history,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::super::channels::ViolationFlags;
    use super::*;

    /// Ranks follow channel 0 alone; the other channels run against it.
    fn channel0_batch() -> RankBatch {
        let channels = (0..8)
            .map(|i| {
                let x = i as f64;
                MetricChannels::new([x, 7.0 - x, (x * 3.0) % 8.0, 10.0 - x], ViolationFlags::default()).unwrap()
            })
            .collect();
        let ranks = (1..=8).rev().collect();
        RankBatch::new(channels, ranks).unwrap()
    }

    fn small_cfg(seed: u64) -> GaConfig {
        GaConfig {
            population: 24,
            generations: 40,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn recovers_channel_zero_ordering() {
        let batches = [channel0_batch()];
        // exhaustive {0,1} weight grid: the one-hot on channel 0 reaches zero loss
        let mut grid_best = f64::INFINITY;
        for mask in 1u32..16 {
            let w = std::array::from_fn(|i| f64::from((mask >> i) & 1));
            let t = ParamVector { weights: w, lambda_coll: 1.0, lambda_fail: 1.0 };
            grid_best = grid_best.min(batch_loss(&batches, &t));
        }
        assert_eq!(grid_best, 0.0);

        let r = ga_optimize(&batches, &small_cfg(5)).unwrap();
        assert_eq!(r.loss, 0.0);
        let w = r.theta.weights;
        assert!(w[0] > w[1] && w[0] > w[3], "{w:?}");
    }

    #[test]
    fn deterministic_and_elitist() {
        let batches = [channel0_batch()];
        let a = ga_optimize(&batches, &small_cfg(9)).unwrap();
        let b = ga_optimize(&batches, &small_cfg(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 41);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.loss, *a.history.last().unwrap());
        assert_eq!(a.evaluations, 24 * 41);
    }

    #[test]
    fn result_is_within_bounds() {
        let r = ga_optimize(&[channel0_batch()], &small_cfg(1)).unwrap();
        r.theta.validate().unwrap();
        assert!(r.theta.weights.iter().all(|w| (0.0..=10.0).contains(w)));
        assert!((1.0..=10.0).contains(&r.theta.lambda_coll));
    }

    #[test]
    fn invalid_configs() {
        let batches = [channel0_batch()];
        for cfg in [
            GaConfig { population: 1, ..small_cfg(0) },
            GaConfig { tournament_k: 30, ..small_cfg(0) },
            GaConfig { crossover_rate: 1.5, ..small_cfg(0) },
            GaConfig { mutation_sigma: 0.0, ..small_cfg(0) },
            GaConfig { bounds: ParamBounds { weight: (0.0, 1.0), lambda: (0.5, 2.0) }, ..small_cfg(0) },
        ] {
            assert!(ga_optimize(&batches, &cfg).is_err(), "{cfg:?}");
        }
        assert!(ga_optimize(&[], &small_cfg(0)).is_err());
    }

    #[test]
    fn zero_weights_score_infinite() {
        let t = ParamVector { weights: [0.0; 4], lambda_coll: 1.0, lambda_fail: 1.0 };
        assert_eq!(batch_loss(&[channel0_batch()], &t), f64::INFINITY);
    }
}
