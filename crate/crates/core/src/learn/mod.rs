//! Regression learners, quality-threshold filtering and evaluation metrics.

mod dq_features;
mod gbdt;

pub use dq_features::DqFeatures;
pub use gbdt::{train_gbdt, GbdtModel, GbdtParams, Node};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::datamodel::UnifiedScore;
use crate::error::{Error, Result};

/// Model-agnostic regression interface the pipeline trains and serves
/// through.
pub trait Regressor: Sized {
    type Params;

    fn fit(x: &[Vec<f64>], y: &[f64], params: &Self::Params) -> Result<Self>;

    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn n_features(&self) -> usize;
}

impl Regressor for GbdtModel {
    type Params = GbdtParams;

    fn fit(x: &[Vec<f64>], y: &[f64], params: &GbdtParams) -> Result<Self> {
        train_gbdt(x, y, params)
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        GbdtModel::predict(self, x)
    }

    fn n_features(&self) -> usize {
        self.n_features
    }
}

/// A labelled training example with its quality score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub features: Vec<f64>,
    pub label: f64,
    pub score: UnifiedScore,
}

/// Rows whose score is at least `threshold`, in input order.
pub fn filter_by_quality(rows: &[TrainingRow], threshold: f64) -> Vec<&TrainingRow> {
    rows.iter()
        .filter(|r| r.score.value() >= threshold)
        .collect()
}

/// Minimum corpus size for training the quality scorer.
pub const MIN_DQ_CORPUS: usize = 50;

/// GBDT mapping [`DqFeatures`] to a unified score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqScorer {
    pub model: GbdtModel,
}

impl DqScorer {
    /// Predicted unified score, clamped into `[0, 100]`.
    pub fn score(&self, f: &DqFeatures) -> Result<UnifiedScore> {
        let v = self.model.predict(&f.to_vec())?;
        Ok(UnifiedScore::new(v))
    }
}

pub fn train_dq_scorer(
    corpus: &[(DqFeatures, UnifiedScore)],
    params: &GbdtParams,
) -> Result<DqScorer> {
    if corpus.len() < MIN_DQ_CORPUS {
        return Err(Error::DegenerateCorpus(
            "quality corpus has fewer than 50 rows",
        ));
    }
    let y: Vec<f64> = corpus.iter().map(|(_, s)| s.value()).collect();
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    if !(hi > lo) {
        return Err(Error::DegenerateCorpus("quality labels have no spread"));
    }
    let x: Vec<Vec<f64>> = corpus.iter().map(|(f, _)| f.to_vec()).collect();
    Ok(DqScorer {
        model: train_gbdt(&x, &y, params)?,
    })
}

/// Mean absolute error and coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mae: f64,
    /// `None` when the labels have zero variance.
    pub r2: Option<f64>,
}

pub fn evaluate(preds: &[f64], labels: &[f64]) -> Result<Evaluation> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = labels.len() as f64;
    let mae = preds
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y).abs())
        .sum::<f64>()
        / n;
    let mean = labels.iter().sum::<f64>() / n;
    let ss_tot: f64 = labels.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Ok(Evaluation { mae, r2 })
}
