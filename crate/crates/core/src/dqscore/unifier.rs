//! Leading-principal-component unification of the five dimension scores.

use serde::{Deserialize, Serialize};

use crate::datamodel::{DimensionScores, UnifiedScore};
use crate::error::{Error, Result};

const D: usize = DimensionScores::LEN;

/// Fitted projection onto the leading principal axis plus the min-max range
/// observed on the fit corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifierParams {
    pub mean: [f64; D],
    /// Unit-norm leading eigenvector of the score covariance, oriented so its
    /// components sum to a positive value.
    pub loading: [f64; D],
    pub proj_min: f64,
    pub proj_max: f64,
}

impl UnifierParams {
    pub fn project(&self, d: &DimensionScores) -> f64 {
        let x = d.to_array();
        (0..D)
            .map(|k| self.loading[k] * (x[k] - self.mean[k]))
            .sum()
    }
}

/// Fits the unifier on `n >= 5` score rows.
pub fn fit_unifier(rows: &[DimensionScores]) -> Result<UnifierParams> {
    if rows.len() < 5 {
        return Err(Error::InsufficientData(
            "unifier needs at least 5 score rows",
        ));
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; D];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.to_array()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut cov = [[0.0; D]; D];
    for r in rows {
        let x = r.to_array();
        for i in 0..D {
            for j in 0..D {
                cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        row.iter_mut().for_each(|c| *c /= n - 1.0);
    }
    let trace: f64 = (0..D).map(|i| cov[i][i]).sum();
    if !(trace > 1e-24) {
        return Err(Error::DegenerateCorpus("score covariance is zero"));
    }

    let (values, vectors) = jacobi_eigen(cov);
    let lead = (0..D)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut loading = [0.0; D];
    for (k, l) in loading.iter_mut().enumerate() {
        *l = vectors[k][lead];
    }
    let norm = libm::sqrt(loading.iter().map(|v| v * v).sum());
    loading.iter_mut().for_each(|v| *v /= norm);
    orient(&mut loading);

    let mut params = UnifierParams {
        mean,
        loading,
        proj_min: f64::INFINITY,
        proj_max: f64::NEG_INFINITY,
    };
    for r in rows {
        let p = params.project(r);
        params.proj_min = params.proj_min.min(p);
        params.proj_max = params.proj_max.max(p);
    }
    if !(params.proj_max - params.proj_min > 1e-15) {
        return Err(Error::DegenerateCorpus("projection range is empty"));
    }
    Ok(params)
}

/// Sign rule: components sum to a positive value; on an exact tie the first
/// non-negligible component is made positive.
pub(crate) fn orient(v: &mut [f64; D]) {
    let s: f64 = v.iter().sum();
    let flip = if s.abs() > 1e-12 {
        s < 0.0
    } else {
        v.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Min-max standardized projection, clamped to `[0, 100]`.
pub fn unify(d: &DimensionScores, u: &UnifierParams) -> UnifiedScore {
    let p = u.project(d);
    UnifiedScore::new(100.0 * (p - u.proj_min) / (u.proj_max - u.proj_min))
}

/// Cyclic Jacobi rotation for a symmetric matrix. Returns eigenvalues and a
/// matrix whose columns are the matching unit eigenvectors.
#[allow(clippy::needless_range_loop)]
fn jacobi_eigen(mut a: [[f64; D]; D]) -> ([f64; D], [[f64; D]; D]) {
    let mut v = [[0.0; D]; D];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..D)
            .flat_map(|i| (0..D).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..D).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= scale * 1e-32 {
            break;
        }
        for p in 0..D {
            for q in (p + 1)..D {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..D {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..D {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in &mut v {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut values = [0.0; D];
    for (i, e) in values.iter_mut().enumerate() {
        *e = a[i][i];
    }
    (values, v)
}
