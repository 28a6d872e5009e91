use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::datamodel::Window;
use crate::error::{Error, Result};
use crate::num::{mean, std_dev};

/// Which summary statistics follow the bucket means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatFlags {
    pub min: bool,
    pub max: bool,
    pub std: bool,
    pub last: bool,
    pub slope: bool,
}

impl Default for StatFlags {
    fn default() -> Self {
        Self {
            min: true,
            max: true,
            std: true,
            last: true,
            slope: false,
        }
    }
}

impl StatFlags {
    pub fn count(&self) -> usize {
        [self.min, self.max, self.std, self.last, self.slope]
            .iter()
            .filter(|b| **b)
            .count()
    }

    fn bits(&self) -> u64 {
        u64::from(self.min)
            | u64::from(self.max) << 1
            | u64::from(self.std) << 2
            | u64::from(self.last) << 3
            | u64::from(self.slope) << 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub n_buckets: usize,
    /// Number of most recent completed-cycle labels appended.
    pub f_history: usize,
    pub stats: StatFlags,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_buckets: 60,
            f_history: 5,
            stats: StatFlags::default(),
        }
    }
}

impl FeatureConfig {
    pub fn len(&self) -> usize {
        self.n_buckets + self.stats.count() + self.f_history
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stable identifier of the feature layout.
    pub fn schema_id(&self) -> u64 {
        (self.n_buckets as u64) << 24 | (self.f_history as u64) << 8 | self.stats.bits()
    }

    pub fn validate(&self, window_size: usize) -> Result<()> {
        if self.n_buckets == 0 || !window_size.is_multiple_of(self.n_buckets) {
            return Err(Error::InvalidConfig(alloc::format!(
                "{} buckets do not divide window size {window_size}",
                self.n_buckets
            )));
        }
        Ok(())
    }
}

/// Fixed-length inference-model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: u64,
}

/// Bucket means of the window, then the enabled statistics, then the most
/// recent `f_history` labels (newest first, padded with their mean).
///
/// `history` holds completed-cycle labels oldest first.
pub fn featureize(current: &Window, history: &[f64], cfg: &FeatureConfig) -> Result<FeatureVector> {
    let present = current.present_values();
    if present.is_empty() {
        return Err(Error::AllMissingWindow);
    }
    let window_mean = mean(&present);
    let n = current.readings.len();
    let mut out = Vec::with_capacity(cfg.len());

    for b in 0..cfg.n_buckets {
        let lo = b * n / cfg.n_buckets;
        let hi = (b + 1) * n / cfg.n_buckets;
        let (sum, cnt) = current.readings[lo..hi]
            .iter()
            .filter_map(|r| r.value)
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        out.push(if cnt == 0 {
            window_mean
        } else {
            sum / cnt as f64
        });
    }

    let s = cfg.stats;
    if s.min {
        out.push(present.iter().copied().fold(f64::INFINITY, f64::min));
    }
    if s.max {
        out.push(present.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    if s.std {
        out.push(std_dev(&present));
    }
    if s.last {
        out.push(present[present.len() - 1]);
    }
    if s.slope {
        out.push(slope(current));
    }

    if cfg.f_history > 0 {
        let pad = mean(history);
        out.extend(
            history
                .iter()
                .rev()
                .copied()
                .chain(core::iter::repeat(pad))
                .take(cfg.f_history),
        );
    }
    Ok(FeatureVector {
        values: out,
        schema: cfg.schema_id(),
    })
}

/// Least-squares slope of present values against reading position.
fn slope(w: &Window) -> f64 {
    let pts: Vec<(f64, f64)> = w
        .readings
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.value.map(|v| (i as f64, v)))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
