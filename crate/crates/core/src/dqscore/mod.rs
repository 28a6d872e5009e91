//! Direct computation of the five quality dimensions and their unification.
//!
//! Every dimension is oriented so that 1 is best:
//!
//! | dimension    | score                                              |
//! |--------------|----------------------------------------------------|
//! | accuracy     | `1 - outside_fences / present`                     |
//! | completeness | `1 - missing / N`                                  |
//! | consistency  | `1 - outside_constraints / present` (1 if none)    |
//! | timeliness   | `1 - KS(window, reference sample)`                 |
//! | skewness     | `1 - JSD(window histogram, reference histogram)`   |

mod profile;
pub mod stats;
mod unifier;

pub use profile::{Constraints, Fences, ReferenceProfile, DEFAULT_BINS, HISTORY_CAP};
pub use stats::{estimate_pdf, jsd, ks_statistic, ks_statistic_sorted, uniform_edges, Histogram};
pub use unifier::{fit_unifier, unify, UnifierParams};

use crate::datamodel::{DimensionScores, UnifiedScore, Window};
use crate::error::{Error, Result};
use crate::num::sorted_copy;

/// Knobs for the direct scorer.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScoreOptions {
    /// Score timeliness as 0 instead of failing when fewer than two values
    /// are present.
    pub lenient_timeliness: bool,
}

pub fn score_accuracy(w: &Window, profile: &ReferenceProfile) -> Result<f64> {
    let values = w.present_values();
    if values.is_empty() {
        return Err(Error::AllMissingWindow);
    }
    Ok(accuracy_of(&values, &profile.fences))
}

fn accuracy_of(values: &[f64], fences: &Fences) -> f64 {
    let bad = values.iter().filter(|&&v| fences.is_outside(v)).count();
    1.0 - bad as f64 / values.len() as f64
}

pub fn score_completeness(w: &Window) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    1.0 - w.missing_count() as f64 / w.len() as f64
}

pub fn score_consistency(w: &Window, constraints: &Constraints) -> f64 {
    consistency_of(&w.present_values(), constraints)
}

fn consistency_of(values: &[f64], constraints: &Constraints) -> f64 {
    if values.is_empty() {
        return 1.0;
    }
    let bad = values.iter().filter(|&&v| !constraints.contains(v)).count();
    1.0 - bad as f64 / values.len() as f64
}

pub fn score_timeliness(w: &Window, profile: &ReferenceProfile, lenient: bool) -> Result<f64> {
    timeliness_of(&sorted_copy(&w.present_values()), profile, lenient)
}

fn timeliness_of(sorted: &[f64], profile: &ReferenceProfile, lenient: bool) -> Result<f64> {
    match sorted.len() {
        0 => Err(Error::AllMissingWindow),
        1 if lenient => Ok(0.0),
        1 => Err(Error::InsufficientSample { needed: 2, got: 1 }),
        _ => Ok(1.0 - ks_statistic_sorted(sorted, &profile.ref_sample)?),
    }
}

pub fn score_skewness(w: &Window, profile: &ReferenceProfile) -> Result<f64> {
    skewness_of(&w.present_values(), profile)
}

fn skewness_of(values: &[f64], profile: &ReferenceProfile) -> Result<f64> {
    let hist = estimate_pdf(values, profile.edges())?;
    Ok(1.0 - jsd(&hist, &profile.ref_hist)?)
}

/// All five dimensions in one pass over the window.
pub fn dimension_scores(
    w: &Window,
    profile: &ReferenceProfile,
    opts: ScoreOptions,
) -> Result<DimensionScores> {
    let mut values = w.present_values();
    if values.is_empty() {
        return Err(Error::AllMissingWindow);
    }
    let skewness = skewness_of(&values, profile)?;
    values.sort_unstable_by(f64::total_cmp);
    let timeliness = timeliness_of(&values, profile, opts.lenient_timeliness)?;
    Ok(DimensionScores {
        accuracy: accuracy_of(&values, &profile.fences),
        completeness: score_completeness(w),
        consistency: consistency_of(&values, &profile.constraints),
        timeliness,
        skewness,
    })
}

/// The ground-truth scorer: all five dimensions, then unification with the
/// profile's unifier.
pub fn direct_score(
    w: &Window,
    profile: &ReferenceProfile,
    opts: ScoreOptions,
) -> Result<(DimensionScores, UnifiedScore)> {
    let unifier = profile.unifier()?;
    let dims = dimension_scores(w, profile, opts)?;
    Ok((dims, unify(&dims, unifier)))
}
