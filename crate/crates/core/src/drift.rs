//! Divergence-based drift detection.
//!
//! Active mode compares each window's divergence from the reference against
//! the empirical `(1 - tau)` quantile of the divergences seen so far, so the
//! detector needs no absolute threshold. Passive mode fires on a fixed
//! schedule of every `w` windows.

use alloc::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::datamodel::{DriftVerdict, Window};
use crate::dqscore::{jsd, Constraints, ReferenceProfile, HISTORY_CAP};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    Active,
    Passive,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftConfig {
    pub mode: DriftMode,
    /// Tail sensitivity in `(0, 1)`; larger values flag more windows.
    pub tau: f64,
    pub w_passive: u64,
    /// History length below which no drift is declared.
    pub warmup: usize,
    /// Number of recent windows a rebase pools.
    pub rebase_windows: usize,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            mode: DriftMode::Active,
            tau: 0.06,
            w_passive: 100,
            warmup: 20,
            rebase_windows: 50,
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "tau {} not in (0,1)",
                self.tau
            )));
        }
        if self.warmup < 5 {
            return Err(Error::InvalidConfig("warm-up must be at least 5".into()));
        }
        if self.w_passive == 0 {
            return Err(Error::InvalidConfig(
                "passive window count must be positive".into(),
            ));
        }
        if self.rebase_windows == 0 {
            return Err(Error::InvalidConfig(
                "rebase window count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `D_t`: base-2 JSD between the window's histogram and the reference
/// histogram.
pub fn divergence(w: &Window, profile: &ReferenceProfile) -> Result<f64> {
    let values = w.present_values();
    let hist = crate::dqscore::estimate_pdf(&values, profile.edges())?;
    jsd(&hist, &profile.ref_hist)
}

/// Nearest-rank `(1 - tau)` quantile: the value at 1-based rank
/// `ceil((1 - tau) * n)` of the ascending history.
pub fn nearest_rank_quantile(history: &[f64], tau: f64) -> Option<f64> {
    if history.is_empty() {
        return None;
    }
    let mut sorted = history.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (libm::ceil((1.0 - tau) * n as f64) as usize).clamp(1, n);
    Some(sorted[rank - 1])
}

/// Adaptive drift test against the divergence history.
pub fn detect_active(d_t: f64, history: &[f64], tau: f64, warmup: usize) -> DriftVerdict {
    let history_len = history.len();
    if history_len < warmup {
        return DriftVerdict {
            divergence: d_t,
            threshold: None,
            quantile_rank: None,
            drift: false,
            history_len,
        };
    }
    let threshold = nearest_rank_quantile(history, tau);
    let below = history.iter().filter(|&&h| h < d_t).count();
    DriftVerdict {
        divergence: d_t,
        threshold,
        quantile_rank: Some(below as f64 / history_len.max(1) as f64),
        drift: threshold.is_some_and(|t| d_t > t),
        history_len,
    }
}

/// Appends to the bounded divergence history, evicting the oldest entry
/// beyond [`HISTORY_CAP`].
pub fn update_history(history: &mut VecDeque<f64>, d_t: f64) {
    if history.len() == HISTORY_CAP {
        history.pop_front();
    }
    history.push_back(d_t);
}

/// Passive schedule: true on every `w_passive`-th window (1-based index).
pub fn passive_due(window_index: u64, w_passive: u64) -> bool {
    window_index >= 1 && w_passive > 0 && window_index.is_multiple_of(w_passive)
}

/// Rebuilds the reference from recent windows. Constraints and histogram bin
/// count carry over, the divergence history starts empty, and the unifier is
/// dropped until it is refitted on a fresh annotated corpus.
pub fn rebase_reference(recent: &[Window], old: &ReferenceProfile) -> Result<ReferenceProfile> {
    if recent
        .iter()
        .all(|w| w.readings.iter().all(|r| r.value.is_none()))
    {
        return Err(Error::InsufficientData(
            "no present values in rebase windows",
        ));
    }
    let constraints: Constraints = old.constraints;
    ReferenceProfile::build(recent, constraints, old.ref_hist.bins())
}
