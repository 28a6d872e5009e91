//! Domain types shared by every stage of the pipeline.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of readings per window (two minutes at 100 ms).
pub const DEFAULT_WINDOW_SIZE: usize = 1200;

/// One sensor sample. `value == None` is a missing measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    /// Nanoseconds since stream start.
    pub timestamp_ns: u64,
    pub value: Option<f64>,
}

impl Reading {
    pub fn new(timestamp_ns: u64, value: Option<f64>) -> Self {
        Self {
            timestamp_ns,
            value,
        }
    }
}

/// Fixed-size ordered slice of readings, the unit of scoring, drift checking
/// and prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub id: u64,
    pub cycle_id: u64,
    pub readings: Vec<Reading>,
    /// Set on a terminal window shorter than the configured size.
    pub partial: bool,
}

impl Window {
    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    /// Non-missing values in reading order.
    pub fn present_values(&self) -> Vec<f64> {
        present_values(&self.readings)
    }

    pub fn missing_count(&self) -> usize {
        self.readings.iter().filter(|r| r.value.is_none()).count()
    }

    /// Same window with the readings replaced; id, cycle id and partial flag
    /// are carried over.
    pub fn with_readings(&self, readings: Vec<Reading>) -> Self {
        Self {
            id: self.id,
            cycle_id: self.cycle_id,
            readings,
            partial: self.partial,
        }
    }
}

pub(crate) fn present_values(readings: &[Reading]) -> Vec<f64> {
    readings.iter().filter_map(|r| r.value).collect()
}

/// A complete vacuum pumping event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpCycle {
    pub cycle_id: u64,
    pub readings: Vec<Reading>,
    /// Minimum pressure over the full cycle, known once the cycle completes.
    pub label: Option<f64>,
}

/// Per-dimension quality scores, each in `[0, 1]` with 1 = best.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub accuracy: f64,
    pub completeness: f64,
    pub consistency: f64,
    pub timeliness: f64,
    pub skewness: f64,
}

impl DimensionScores {
    pub const LEN: usize = 5;

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.accuracy,
            self.completeness,
            self.consistency,
            self.timeliness,
            self.skewness,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            accuracy: a[0],
            completeness: a[1],
            consistency: a[2],
            timeliness: a[3],
            skewness: a[4],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// PCA-combined quality score in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnifiedScore(f64);

impl UnifiedScore {
    /// Clamps into `[0, 100]`; NaN maps to 0.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return Self(0.0);
        }
        Self(value.clamp(0.0, 100.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for UnifiedScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// Outcome of one drift check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    /// Divergence of the window from the reference, `D_t`.
    pub divergence: f64,
    /// Threshold the divergence was compared against; `None` during warm-up.
    pub threshold: Option<f64>,
    /// Fraction of the history strictly below `divergence`; `None` during
    /// warm-up.
    pub quantile_rank: Option<f64>,
    pub drift: bool,
    pub history_len: usize,
}

/// The four artifact families tracked by the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    ReferenceProfile,
    Unifier,
    DqScorer,
    InferenceModel,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 4] = [
        ArtifactKind::ReferenceProfile,
        ArtifactKind::Unifier,
        ArtifactKind::DqScorer,
        ArtifactKind::InferenceModel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ReferenceProfile => "reference_profile",
            Self::Unifier => "unifier",
            Self::DqScorer => "dq_scorer",
            Self::InferenceModel => "inference_model",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A stored artifact with its per-kind version and provenance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionedArtifact {
    pub kind: ArtifactKind,
    pub version: u64,
    pub payload: Vec<u8>,
    pub meta: BTreeMap<String, String>,
}

/// Minimum over the cycle's non-missing values.
pub fn extract_label(cycle: &PumpCycle) -> Result<f64> {
    min_present(&cycle.readings).ok_or(Error::EmptyCycle)
}

pub(crate) fn min_present(readings: &[Reading]) -> Option<f64> {
    readings
        .iter()
        .filter_map(|r| r.value)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        })
}

pub(crate) fn check_monotone(readings: &[Reading]) -> Result<()> {
    match readings
        .windows(2)
        .position(|w| w[1].timestamp_ns <= w[0].timestamp_ns)
    {
        Some(i) => Err(Error::NonMonotoneTimestamps { index: i + 1 }),
        None => Ok(()),
    }
}

/// Builds a validated window. A length other than `expected_len` is only
/// accepted as a flagged partial window, and only when shorter.
pub fn make_window(
    readings: Vec<Reading>,
    id: u64,
    cycle_id: u64,
    expected_len: usize,
) -> Result<Window> {
    check_monotone(&readings)?;
    if readings.len() > expected_len {
        return Err(Error::InvalidConfig(alloc::format!(
            "window of {} readings exceeds configured size {expected_len}",
            readings.len()
        )));
    }
    let partial = readings.len() < expected_len;
    Ok(Window {
        id,
        cycle_id,
        readings,
        partial,
    })
}
