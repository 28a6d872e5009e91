//! Synthetic corruption operators and mutation-annotated corpus construction.
//!
//! All operators corrupt an exact number of values, `round(rate * n)`, at
//! seed-determined positions, so the targeted dimension score after
//! mutation has a closed form. Window and cycle ids are never touched.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{DimensionScores, Reading, UnifiedScore, Window};
use crate::dqscore::{
    dimension_scores, unify, Constraints, Fences, ReferenceProfile, ScoreOptions, UnifierParams,
};
use crate::error::{Error, Result};
use crate::learn::DqFeatures;
use crate::num::exact_count;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Missing,
    Anomaly,
    OutOfRange,
    Shift,
}

/// One corruption step. `rate` is ignored by `shift`; `magnitude` is in
/// fence widths for `anomaly` and reference standard deviations for
/// `shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationOp {
    pub kind: MutationKind,
    #[serde(default)]
    pub rate: f64,
    #[serde(default)]
    pub magnitude: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MutationOp {
    pub fn missing(rate: f64, seed: u64) -> Self {
        Self {
            kind: MutationKind::Missing,
            rate,
            magnitude: 0.0,
            seed,
        }
    }

    pub fn anomaly(rate: f64, magnitude: f64, seed: u64) -> Self {
        Self {
            kind: MutationKind::Anomaly,
            rate,
            magnitude,
            seed,
        }
    }

    pub fn out_of_range(rate: f64, seed: u64) -> Self {
        Self {
            kind: MutationKind::OutOfRange,
            rate,
            magnitude: 0.0,
            seed,
        }
    }

    pub fn shift(std_units: f64) -> Self {
        Self {
            kind: MutationKind::Shift,
            rate: 0.0,
            magnitude: std_units,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MutationPlan {
    pub ops: Vec<MutationOp>,
}

impl MutationPlan {
    pub fn new(ops: Vec<MutationOp>) -> Self {
        Self { ops }
    }

    pub fn validate(&self) -> Result<()> {
        for op in &self.ops {
            if !(0.0..=1.0).contains(&op.rate) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "mutation rate {} not in [0,1]",
                    op.rate
                )));
            }
            if !(op.magnitude >= 0.0) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "mutation magnitude {} is negative",
                    op.magnitude
                )));
            }
        }
        Ok(())
    }

    /// The default catalogue: every dimension is targeted by at least one
    /// plan, plus three composites.
    pub fn default_set() -> Vec<MutationPlan> {
        use MutationOp as M;
        alloc::vec![
            MutationPlan::new(alloc::vec![M::missing(0.1, 1)]),
            MutationPlan::new(alloc::vec![M::missing(0.3, 2)]),
            MutationPlan::new(alloc::vec![M::anomaly(0.1, 2.0, 3)]),
            MutationPlan::new(alloc::vec![M::out_of_range(0.2, 4)]),
            MutationPlan::new(alloc::vec![M::shift(0.5)]),
            MutationPlan::new(alloc::vec![M::shift(2.0)]),
            MutationPlan::new(alloc::vec![M::missing(0.2, 5), M::anomaly(0.05, 2.0, 6)]),
            MutationPlan::new(alloc::vec![M::out_of_range(0.1, 7), M::shift(1.0)]),
            MutationPlan::new(alloc::vec![
                M::missing(0.15, 8),
                M::anomaly(0.05, 1.0, 9),
                M::shift(0.75),
            ]),
        ]
    }
}

/// Reference quantities the operators scale against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationContext {
    pub fences: Fences,
    pub constraints: Constraints,
    pub ref_std: f64,
}

impl MutationContext {
    pub fn from_profile(p: &ReferenceProfile) -> Self {
        Self {
            fences: p.fences,
            constraints: p.constraints,
            ref_std: p.ref_std(),
        }
    }
}

/// Per-(seed, salt) generator so the same plan lands on different positions
/// in different windows.
fn op_rng(seed: u64, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(salt);
    rng
}

fn present_positions(readings: &[Reading]) -> Vec<usize> {
    readings
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.value.map(|_| i))
        .collect()
}

/// Picks `count` of the present positions.
fn pick(readings: &[Reading], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let present = present_positions(readings);
    let count = count.min(present.len());
    let mut chosen: Vec<usize> = index::sample(rng, present.len(), count)
        .into_iter()
        .map(|k| present[k])
        .collect();
    chosen.sort_unstable();
    chosen
}

pub(crate) fn missing_in(readings: &mut [Reading], rate: f64, rng: &mut ChaCha8Rng) {
    let k = exact_count(rate, readings.len());
    for i in pick(readings, k, rng) {
        readings[i].value = None;
    }
}

pub(crate) fn anomalies_in(
    readings: &mut [Reading],
    rate: f64,
    magnitude: f64,
    fences: &Fences,
    rng: &mut ChaCha8Rng,
) {
    let n_present = readings.iter().filter(|r| r.value.is_some()).count();
    let k = exact_count(rate, n_present);
    let width = if fences.width() > 0.0 {
        fences.width()
    } else {
        1.0
    };
    let step = magnitude.max(f64::EPSILON) * width;
    for i in pick(readings, k, rng) {
        let v = readings[i].value.unwrap_or_default();
        let nv = if rng.random_bool(0.5) {
            v.max(fences.high) + step
        } else {
            v.min(fences.low) - step
        };
        readings[i].value = Some(nv);
    }
}

pub(crate) fn out_of_range_in(
    readings: &mut [Reading],
    rate: f64,
    c: &Constraints,
    rng: &mut ChaCha8Rng,
) {
    let n_present = readings.iter().filter(|r| r.value.is_some()).count();
    let k = exact_count(rate, n_present);
    let span = (c.max_valid - c.min_valid).max(1.0);
    for i in pick(readings, k, rng) {
        let off = span * (0.05 + 0.45 * rng.random::<f64>());
        readings[i].value = Some(if rng.random_bool(0.5) {
            c.max_valid + off
        } else {
            c.min_valid - off
        });
    }
}

pub(crate) fn shift_in(readings: &mut [Reading], delta: f64) {
    for r in readings.iter_mut() {
        if let Some(v) = r.value.as_mut() {
            *v += delta;
        }
    }
}

/// Replaces `round(rate * N)` present values with missing markers.
pub fn inject_missing(w: &Window, rate: f64, seed: u64) -> Window {
    let mut readings = w.readings.clone();
    missing_in(&mut readings, rate, &mut op_rng(seed, w.id));
    w.with_readings(readings)
}

/// Pushes `round(rate * present)` values beyond the anomaly fences by
/// `magnitude` fence widths, on a seed-chosen side.
pub fn inject_anomalies(
    w: &Window,
    rate: f64,
    magnitude: f64,
    fences: &Fences,
    seed: u64,
) -> Window {
    let mut readings = w.readings.clone();
    anomalies_in(
        &mut readings,
        rate,
        magnitude,
        fences,
        &mut op_rng(seed, w.id),
    );
    w.with_readings(readings)
}

/// Moves `round(rate * present)` values outside the integrity constraints.
pub fn inject_out_of_range(w: &Window, rate: f64, constraints: &Constraints, seed: u64) -> Window {
    let mut readings = w.readings.clone();
    out_of_range_in(&mut readings, rate, constraints, &mut op_rng(seed, w.id));
    w.with_readings(readings)
}

/// Adds `delta` to every present value.
pub fn inject_shift(w: &Window, delta: f64) -> Window {
    let mut readings = w.readings.clone();
    shift_in(&mut readings, delta);
    w.with_readings(readings)
}

/// Applies every op of `plan` in order to a reading buffer. `salt`
/// decorrelates positions between buffers sharing a plan.
pub fn apply_plan_to(
    readings: &mut [Reading],
    plan: &MutationPlan,
    ctx: &MutationContext,
    salt: u64,
) {
    for op in &plan.ops {
        let mut rng = op_rng(op.seed, salt);
        match op.kind {
            MutationKind::Missing => missing_in(readings, op.rate, &mut rng),
            MutationKind::Anomaly => {
                anomalies_in(readings, op.rate, op.magnitude, &ctx.fences, &mut rng)
            }
            MutationKind::OutOfRange => {
                out_of_range_in(readings, op.rate, &ctx.constraints, &mut rng)
            }
            MutationKind::Shift => shift_in(readings, op.magnitude * ctx.ref_std),
        }
    }
}

pub fn apply_plan(w: &Window, plan: &MutationPlan, ctx: &MutationContext) -> Window {
    let mut readings = w.readings.clone();
    apply_plan_to(&mut readings, plan, ctx, w.id);
    w.with_readings(readings)
}

/// One corpus row before unification.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRow {
    pub window_id: u64,
    /// 0 for the unmutated window, `k + 1` for plan `k`.
    pub plan_index: usize,
    pub features: DqFeatures,
    pub dims: DimensionScores,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusRows {
    pub rows: Vec<CorpusRow>,
    /// Mutated windows dropped because no value survived.
    pub skipped: usize,
}

impl CorpusRows {
    pub fn dims(&self) -> Vec<DimensionScores> {
        self.rows.iter().map(|r| r.dims).collect()
    }

    /// Attaches unified-score labels.
    pub fn annotate(&self, unifier: &UnifierParams) -> Vec<(DqFeatures, UnifiedScore)> {
        self.rows
            .iter()
            .map(|r| (r.features, unify(&r.dims, unifier)))
            .collect()
    }
}

/// Scores every window under the identity plan and each of `plans`.
pub fn corpus_rows(
    clean: &[Window],
    plans: &[MutationPlan],
    profile: &ReferenceProfile,
    opts: ScoreOptions,
) -> Result<CorpusRows> {
    let ctx = MutationContext::from_profile(profile);
    let mut out = CorpusRows::default();
    for w in clean {
        for plan_index in 0..=plans.len() {
            let mutated = match plan_index {
                0 => w.clone(),
                k => apply_plan(w, &plans[k - 1], &ctx),
            };
            let dims = match dimension_scores(&mutated, profile, opts) {
                Ok(d) => d,
                Err(Error::AllMissingWindow) => {
                    out.skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            out.rows.push(CorpusRow {
                window_id: w.id,
                plan_index,
                features: DqFeatures::extract(&mutated, profile)?,
                dims,
            });
        }
    }
    Ok(out)
}

/// Corpus labelled with the profile's current unifier.
pub fn build_annotated_corpus(
    clean: &[Window],
    plans: &[MutationPlan],
    profile: &ReferenceProfile,
    opts: ScoreOptions,
) -> Result<Vec<(DqFeatures, UnifiedScore)>> {
    let unifier = profile.unifier()?;
    Ok(corpus_rows(clean, plans, profile, opts)?.annotate(unifier))
}
