use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::KinematicSummary;

pub const CHANNEL_COUNT: usize = 4;

/// Normalized metric channels, each on a 0..10 scale where higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// From the velocity uniformity metric U_v (lower variance scores higher).
    VelSmoothness,
    /// From the acceleration uniformity metric U_α.
    AccSmoothness,
    /// From mean absolute velocity μ_v.
    SpeedModeration,
    /// From inverse episode duration.
    PathEfficiency,
}

pub const CHANNELS: [Channel; CHANNEL_COUNT] = [
    Channel::VelSmoothness,
    Channel::AccSmoothness,
    Channel::SpeedModeration,
    Channel::PathEfficiency,
];

impl Channel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::VelSmoothness => "vel_smoothness",
            Channel::AccSmoothness => "acc_smoothness",
            Channel::SpeedModeration => "speed_moderation",
            Channel::PathEfficiency => "path_efficiency",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationFlags {
    pub collision: bool,
    pub failure: bool,
}

/// Raw per-episode inputs to normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeFeatures {
    pub u_v: f64,
    pub u_a: f64,
    pub mu_v: f64,
    pub duration_s: f64,
    pub flags: ViolationFlags,
}

impl EpisodeFeatures {
    pub fn new(summary: &KinematicSummary, duration_s: f64, flags: ViolationFlags) -> Self {
        Self {
            u_v: summary.u_v,
            u_a: summary.u_a,
            mu_v: summary.mu_v,
            duration_s,
            flags,
        }
    }

    fn raw(&self) -> Result<[f64; CHANNEL_COUNT]> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "duration must be positive to score path efficiency, got {}",
                self.duration_s
            )));
        }
        let raw = [self.u_v, self.u_a, self.mu_v, 1.0 / self.duration_s];
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite kinematic feature".into()));
        }
        Ok(raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricChannels {
    pub values: [f64; CHANNEL_COUNT],
    pub flags: ViolationFlags,
}

impl MetricChannels {
    pub fn new(values: [f64; CHANNEL_COUNT], flags: ViolationFlags) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=10.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("channel value {v} outside [0,10]")));
        }
        Ok(Self { values, flags })
    }

    pub fn get(&self, c: Channel) -> f64 {
        self.values[c.index()]
    }
}

/// Min/max of each raw feature over a reference set of episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationBasis {
    pub min: [f64; CHANNEL_COUNT],
    pub max: [f64; CHANNEL_COUNT],
}

impl NormalizationBasis {
    pub fn fit(basis: &[EpisodeFeatures]) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidArgument("normalization basis is empty".into()));
        }
        let mut min = [f64::INFINITY; CHANNEL_COUNT];
        let mut max = [f64::NEG_INFINITY; CHANNEL_COUNT];
        for f in basis {
            for (i, v) in f.raw()?.into_iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Ok(Self { min, max })
    }

    /// Maps features onto [0,10]. Lower-is-better quantities are inverted;
    /// values outside the basis range are clamped; a degenerate channel
    /// (max = min) scores 10.
    pub fn normalize(&self, f: &EpisodeFeatures) -> Result<MetricChannels> {
        let raw = f.raw()?;
        let mut values = [0.0; CHANNEL_COUNT];
        for c in CHANNELS {
            let i = c.index();
            let span = self.max[i] - self.min[i];
            values[i] = if span <= 0.0 {
                10.0
            } else {
                let unit = ((raw[i] - self.min[i]) / span).clamp(0.0, 1.0);
                match c {
                    Channel::PathEfficiency => 10.0 * unit,
                    _ => 10.0 * (1.0 - unit),
                }
            };
        }
        MetricChannels::new(values, f.flags)
    }
}

/// Normalizes `episodes` against min/max statistics taken over `stats_basis`.
pub fn normalize_channels(
    episodes: &[EpisodeFeatures],
    stats_basis: &[EpisodeFeatures],
) -> Result<Vec<MetricChannels>> {
    if episodes.is_empty() {
        return Err(Error::InvalidArgument("no episodes to normalize".into()));
    }
    let basis = NormalizationBasis::fit(stats_basis)?;
    episodes.iter().map(|f| basis.normalize(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(u_v: f64) -> EpisodeFeatures {
        EpisodeFeatures {
            u_v,
            u_a: 1.0,
            mu_v: 0.5,
            duration_s: 4.0,
            flags: ViolationFlags::default(),
        }
    }

    #[test]
    fn single_episode_is_degenerate() {
        let c = normalize_channels(&[feat(0.3)], &[feat(0.3)]).unwrap();
        assert_eq!(c[0].values, [10.0; 4]);
    }

    #[test]
    fn two_episodes_span_full_range() {
        let eps = [feat(0.0), feat(8.0 / 9.0)];
        let c = normalize_channels(&eps, &eps).unwrap();
        assert_eq!(c[0].get(Channel::VelSmoothness), 10.0);
        assert_eq!(c[1].get(Channel::VelSmoothness), 0.0);
    }

    #[test]
    fn shorter_episode_is_more_efficient() {
        let mut a = feat(0.1);
        a.duration_s = 2.0;
        let b = feat(0.1);
        let c = normalize_channels(&[a, b], &[a, b]).unwrap();
        assert_eq!(c[0].get(Channel::PathEfficiency), 10.0);
        assert_eq!(c[1].get(Channel::PathEfficiency), 0.0);
    }

    #[test]
    fn out_of_basis_values_clamp() {
        let basis = [feat(1.0), feat(2.0)];
        let c = normalize_channels(&[feat(5.0), feat(0.0)], &basis).unwrap();
        assert_eq!(c[0].get(Channel::VelSmoothness), 0.0);
        assert_eq!(c[1].get(Channel::VelSmoothness), 10.0);
    }

    #[test]
    fn errors() {
        assert!(normalize_channels(&[], &[feat(1.0)]).is_err());
        let mut z = feat(1.0);
        z.duration_s = 0.0;
        assert!(normalize_channels(&[z], &[z]).is_err());
        assert!(MetricChannels::new([11.0, 0.0, 0.0, 0.0], ViolationFlags::default()).is_err());
    }
}
