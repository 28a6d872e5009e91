use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::stats::{estimate_pdf, uniform_edges, Histogram};
use super::unifier::UnifierParams;
use crate::datamodel::Window;
use crate::error::{Error, Result};
use crate::num::quantile_sorted;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 32;
/// Divergence history ring capacity.
pub const HISTORY_CAP: usize = 1000;

/// Closed validity interval used by the consistency dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub min_valid: f64,
    pub max_valid: f64,
}

impl Constraints {
    pub fn new(min_valid: f64, max_valid: f64) -> Result<Self> {
        if !(min_valid <= max_valid) {
            return Err(Error::InvalidConfig(alloc::format!(
                "constraint range [{min_valid}, {max_valid}] is empty"
            )));
        }
        Ok(Self {
            min_valid,
            max_valid,
        })
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min_valid && v <= self.max_valid
    }
}

/// Tukey anomaly fences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fences {
    pub low: f64,
    pub high: f64,
}

impl Fences {
    /// `(Q1 - 1.5 IQR, Q3 + 1.5 IQR)` of an ascending sample.
    pub fn tukey(sorted: &[f64]) -> Self {
        let q1 = quantile_sorted(sorted, 0.25);
        let q3 = quantile_sorted(sorted, 0.75);
        let iqr = q3 - q1;
        Self {
            low: q1 - 1.5 * iqr,
            high: q3 + 1.5 * iqr,
        }
    }

    #[inline]
    pub fn is_outside(&self, v: f64) -> bool {
        v < self.low || v > self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Baseline statistics every window is scored and drift-checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile {
    /// Pooled reference values, ascending.
    pub ref_sample: Vec<f64>,
    pub ref_hist: Histogram,
    pub fences: Fences,
    pub constraints: Constraints,
    pub unifier: Option<UnifierParams>,
    pub divergence_history: VecDeque<f64>,
    /// Inclusive window-id range the profile was built from.
    pub built_from: (u64, u64),
}

impl ReferenceProfile {
    /// Pools the present values of `windows` into a fresh profile. The
    /// unifier is left unset; it is fitted on an annotated corpus afterwards.
    pub fn build(windows: &[Window], constraints: Constraints, bins: usize) -> Result<Self> {
        let mut sample: Vec<f64> = windows
            .iter()
            .flat_map(|w| w.readings.iter().filter_map(|r| r.value))
            .collect();
        if sample.is_empty() {
            return Err(Error::InsufficientData("reference windows hold no values"));
        }
        sample.sort_unstable_by(f64::total_cmp);
        let fences = Fences::tukey(&sample);
        // Bins cover the non-anomalous range only, so a few wild values in
        // the baseline cannot flatten the histogram into a handful of bins.
        let lo = sample[0].max(fences.low);
        let hi = sample[sample.len() - 1].min(fences.high);
        let edges = uniform_edges(lo, hi, bins);
        let ref_hist = estimate_pdf(&sample, &edges)?;
        let lo = windows.iter().map(|w| w.id).min().unwrap_or(0);
        let hi = windows.iter().map(|w| w.id).max().unwrap_or(0);
        Ok(Self {
            ref_sample: sample,
            ref_hist,
            fences,
            constraints,
            unifier: None,
            divergence_history: VecDeque::new(),
            built_from: (lo, hi),
        })
    }

    pub fn edges(&self) -> &[f64] {
        self.ref_hist.edges()
    }

    pub fn ref_mean(&self) -> f64 {
        crate::num::mean(&self.ref_sample)
    }

    pub fn ref_std(&self) -> f64 {
        crate::num::std_dev(&self.ref_sample)
    }

    pub fn unifier(&self) -> Result<&UnifierParams> {
        self.unifier
            .as_ref()
            .ok_or(Error::InvalidConfig("profile has no fitted unifier".into()))
    }
}
