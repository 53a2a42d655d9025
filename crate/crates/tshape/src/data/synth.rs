//! Synthetic double-peak series with controlled anomaly injection.
//!
//! Each period carries two Gaussian bumps, the second one smaller — the
//! kind of repeating shapelet where anomalies show up as a changed bump
//! shape or a changed amplitude ratio rather than as outlying points.

use super::{DataError, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    /// Replace the second bump with an amplitude-matched flat-top pulse,
    /// inverting its curvature profile.
    ShapeConvexity,
    /// Raise the second bump to 0.95 of the first peak's amplitude.
    AmpRatio,
    /// Add a 4σ impulse lasting one to three points.
    Spike,
    /// Add half the first peak's amplitude for half a period.
    LevelShift,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 4] = [
        AnomalyKind::ShapeConvexity,
        AnomalyKind::AmpRatio,
        AnomalyKind::Spike,
        AnomalyKind::LevelShift,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AnomalyKind::ShapeConvexity => "shape_convexity",
            AnomalyKind::AmpRatio => "amp_ratio",
            AnomalyKind::Spike => "spike",
            AnomalyKind::LevelShift => "level_shift",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AnomalyKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| {
                format!("unknown anomaly kind `{s}` (expected one of shape_convexity, amp_ratio, spike, level_shift)")
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub period_len: usize,
    pub n_periods: usize,
    pub peak1_amp: f64,
    pub peak2_amp: f64,
    pub noise_sigma: f64,
    pub anomaly_kinds: Vec<AnomalyKind>,
    pub anomaly_count: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            period_len: 64,
            n_periods: 100,
            peak1_amp: 1.0,
            peak2_amp: 0.6,
            noise_sigma: 0.02,
            anomaly_kinds: vec![AnomalyKind::ShapeConvexity, AnomalyKind::AmpRatio],
            anomaly_count: 8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), DataError> {
        if self.period_len < 4 || self.n_periods < 2 {
            return Err(DataError::Generation(
                "need a period of at least 4 points and at least 2 periods".into(),
            ));
        }
        if self.peak2_amp >= self.peak1_amp {
            return Err(DataError::Generation(format!(
                "second peak amplitude {} must be below the first {}",
                self.peak2_amp, self.peak1_amp
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(DataError::Generation("noise sigma must be non-negative".into()));
        }
        if self.anomaly_count > 0 && self.anomaly_kinds.is_empty() {
            return Err(DataError::Generation(
                "anomaly kinds must be given when anomaly_count > 0".into(),
            ));
        }
        if self.anomaly_kinds.contains(&AnomalyKind::Spike) && self.noise_sigma == 0.0 {
            return Err(DataError::Generation(
                "spike anomalies scale with noise sigma; sigma must be positive".into(),
            ));
        }
        Ok(())
    }

    fn bump_width(&self) -> f64 {
        self.period_len as f64 / 16.0
    }

    /// Center of the second bump in period `j`, in absolute samples.
    fn second_bump_center(&self, period: usize) -> f64 {
        period as f64 * self.period_len as f64 + 0.65 * self.period_len as f64
    }
}

fn gaussian(d: f64, width: f64) -> f64 {
    (-d * d / (2.0 * width * width)).exp()
}

/// Flat-top pulse matching the bump's peak amplitude: a plateau across
/// the bump's core with steep shoulders, inverting the curvature profile
/// of the Gaussian it replaces.
fn flat_top(d: f64, width: f64) -> f64 {
    let r = d / (2.0 * width);
    (-r.powi(8)).exp()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Generate a series per `config`: an exactly periodic two-bump base plus
/// Gaussian noise, with anomalies injected only after the split point.
pub fn synth_generate(config: &SynthConfig) -> Result<TimeSeries, DataError> {
    config.validate()?;
    let period = config.period_len;
    let n = period * config.n_periods;
    let split = n / 2;
    let width = config.bump_width();
    let c1 = 0.25 * period as f64;
    let c2 = 0.65 * period as f64;

    // one-period template with neighbor-period tails folded in, so the
    // noiseless base is bit-exactly periodic
    let template: Vec<f64> = (0..period)
        .map(|tau| {
            let mut v = 0.0;
            for delta in -2i64..=2 {
                let shift = (delta * period as i64) as f64;
                v += config.peak1_amp * gaussian(tau as f64 - c1 - shift, width);
                v += config.peak2_amp * gaussian(tau as f64 - c2 - shift, width);
            }
            v
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut values: Vec<f64> = (0..n)
        .map(|t| template[t % period] + config.noise_sigma * normal(&mut rng))
        .collect();
    let mut labels = vec![0u8; n];

    // half-open occupied intervals, to keep anomalies disjoint
    let mut occupied: Vec<(usize, usize)> = Vec::new();
    let overlaps = |occupied: &[(usize, usize)], lo: usize, hi: usize| {
        occupied.iter().any(|&(a, b)| lo < b && a < hi)
    };

    let support = (3.0 * width).floor();
    let first_test_period = (0..config.n_periods)
        .find(|&j| config.second_bump_center(j) - support >= split as f64)
        .ok_or_else(|| DataError::Generation("no bump fully inside the test region".into()))?;

    for i in 0..config.anomaly_count {
        let kind = config.anomaly_kinds[i % config.anomaly_kinds.len()];
        let mut placed = false;
        for _attempt in 0..1000 {
            let (lo, hi) = match kind {
                AnomalyKind::ShapeConvexity | AnomalyKind::AmpRatio => {
                    let j = rng.gen_range(first_test_period..config.n_periods);
                    let center = config.second_bump_center(j);
                    let lo = (center - support).ceil() as usize;
                    let hi = (center + support).floor() as usize + 1;
                    (lo, hi.min(n))
                }
                AnomalyKind::Spike => {
                    let len = rng.gen_range(1..=3usize);
                    if split + len > n {
                        continue;
                    }
                    let t0 = rng.gen_range(split..=n - len);
                    (t0, t0 + len)
                }
                AnomalyKind::LevelShift => {
                    let len = period / 2;
                    if split + len > n {
                        continue;
                    }
                    let t0 = rng.gen_range(split..=n - len);
                    (t0, t0 + len)
                }
            };
            if overlaps(&occupied, lo, hi) {
                continue;
            }
            match kind {
                AnomalyKind::ShapeConvexity => {
                    let j = (lo + (hi - lo) / 2) / period;
                    let center = config.second_bump_center(j);
                    for t in lo..hi {
                        let d = t as f64 - center;
                        values[t] +=
                            config.peak2_amp * (flat_top(d, width) - gaussian(d, width));
                    }
                }
                AnomalyKind::AmpRatio => {
                    let j = (lo + (hi - lo) / 2) / period;
                    let center = config.second_bump_center(j);
                    let target = 0.95 * config.peak1_amp;
                    for t in lo..hi {
                        let d = t as f64 - center;
                        values[t] += (target - config.peak2_amp) * gaussian(d, width);
                    }
                }
                AnomalyKind::Spike => {
                    for t in lo..hi {
                        values[t] += 4.0 * config.noise_sigma;
                    }
                }
                AnomalyKind::LevelShift => {
                    for t in lo..hi {
                        values[t] += 0.5 * config.peak1_amp;
                    }
                }
            }
            for label in &mut labels[lo..hi] {
                *label = 1;
            }
            occupied.push((lo, hi));
            placed = true;
            break;
        }
        if !placed {
            return Err(DataError::Generation(format!(
                "could not place anomaly {} ({kind}) without overlap",
                i + 1
            )));
        }
    }

    TimeSeries::new(values, labels, split)
}
