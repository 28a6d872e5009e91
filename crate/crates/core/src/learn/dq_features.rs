use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::datamodel::Window;
use crate::dqscore::stats::{binned_ks, binned_quantiles, Binner};
use crate::dqscore::ReferenceProfile;
use crate::error::{Error, Result};
use crate::num::quantiles_select;

/// Cheap window summary consumed by the ML quality scorer.
///
/// Everything is a single linear pass or a selection; the timeliness proxy
/// compares binned cumulative mass against the reference histogram instead
/// of running an exact KS test against the full reference sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DqFeatures {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub missing_rate: f64,
    pub out_of_range_rate: f64,
    pub outside_fence_rate: f64,
    pub ks_vs_ref: f64,
    pub last_minus_first: f64,
}

impl DqFeatures {
    pub const LEN: usize = 12;

    pub const NAMES: [&'static str; 12] = [
        "mean",
        "std",
        "min",
        "max",
        "median",
        "q1",
        "q3",
        "missing_rate",
        "out_of_range_rate",
        "outside_fence_rate",
        "ks_vs_ref",
        "last_minus_first",
    ];

    pub fn extract(w: &Window, profile: &ReferenceProfile) -> Result<Self> {
        let binner = Binner::new(profile.edges());
        let mut counts = vec![0u32; binner.len()];
        let mut values = Vec::with_capacity(w.readings.len());
        let mut bins = Vec::with_capacity(w.readings.len());
        let (mut sum, mut sumsq) = (0.0, 0.0);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut oor, mut outside) = (0usize, 0usize);
        for v in w.readings.iter().filter_map(|r| r.value) {
            sum += v;
            sumsq += v * v;
            min = min.min(v);
            max = max.max(v);
            oor += usize::from(!profile.constraints.contains(v));
            outside += usize::from(profile.fences.is_outside(v));
            let b = binner.bin(v);
            counts[b] += 1;
            bins.push(b as u32);
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::AllMissingWindow);
        }
        let np = values.len() as f64;
        let first = values[0];
        let last = values[values.len() - 1];
        let mean = sum / np;
        let var = (sumsq / np - mean * mean).max(0.0);

        let mass: Vec<f64> = counts.iter().map(|&c| f64::from(c) / np).collect();
        let ks_vs_ref = binned_ks(&mass, profile.ref_hist.mass());

        let qs = [0.25, 0.5, 0.75];
        let [q1, median, q3] = if values.iter().any(|v| v.is_nan()) {
            quantiles_select(&mut values, qs)
        } else {
            binned_quantiles(&values, &bins, &counts, qs)
        };

        Ok(Self {
            mean,
            std: libm::sqrt(var),
            min,
            max,
            median,
            q1,
            q3,
            missing_rate: (w.readings.len() - values.len()) as f64 / w.len() as f64,
            out_of_range_rate: oor as f64 / np,
            outside_fence_rate: outside as f64 / np,
            ks_vs_ref,
            last_minus_first: last - first,
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        alloc::vec![
            self.mean,
            self.std,
            self.min,
            self.max,
            self.median,
            self.q1,
            self.q3,
            self.missing_rate,
            self.out_of_range_rate,
            self.outside_fence_rate,
            self.ks_vs_ref,
            self.last_minus_first,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != Self::LEN {
            return Err(Error::DimensionMismatch {
                expected: Self::LEN,
                got: v.len(),
            });
        }
        Ok(Self {
            mean: v[0],
            std: v[1],
            min: v[2],
            max: v[3],
            median: v[4],
            q1: v[5],
            q3: v[6],
            missing_rate: v[7],
            out_of_range_rate: v[8],
            outside_fence_rate: v[9],
            ks_vs_ref: v[10],
            last_minus_first: v[11],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Reading;
    use crate::dqscore::Constraints;

    #[test]
    fn summary_values() {
        let vals = [Some(1.0), None, Some(3.0), Some(2.0), Some(4.0)];
        let w = Window {
            id: 0,
            cycle_id: 0,
            readings: vals
                .iter()
                .enumerate()
                .map(|(i, v)| Reading::new(i as u64, *v))
                .collect(),
            partial: false,
        };
        let p = ReferenceProfile::build(
            core::slice::from_ref(&w),
            Constraints::new(0.0, 3.5).unwrap(),
            4,
        )
        .unwrap();
        let f = DqFeatures::extract(&w, &p).unwrap();
        assert_eq!(f.mean, 2.5);
        assert_eq!((f.min, f.max, f.median), (1.0, 4.0, 2.5));
        assert_eq!(f.missing_rate, 0.2);
        assert_eq!(f.out_of_range_rate, 0.25);
        assert_eq!(f.last_minus_first, 3.0);
        assert!(f.ks_vs_ref < 1e-9);
        assert_eq!(DqFeatures::from_slice(&f.to_vec()).unwrap(), f);
    }

    fn window(vals: &[f64]) -> Window {
        Window {
            id: 0,
            cycle_id: 0,
            readings: vals
                .iter()
                .enumerate()
                .map(|(i, v)| Reading::new(i as u64, Some(*v)))
                .collect(),
            partial: false,
        }
    }

    #[test]
    fn quartiles_match_sorting() {
        let base: Vec<f64> = (0..300).map(|i| f64::from(i * 37 % 101) * 0.7).collect();
        let p = ReferenceProfile::build(&[window(&base)], Constraints::new(0.0, 100.0).unwrap(), 8)
            .unwrap();
        let mut odd = base.clone();
        odd.extend([f64::INFINITY, f64::NEG_INFINITY, -5.0, 500.0, 35.0, 35.0]);
        let mut with_nan = odd.clone();
        with_nan.push(f64::NAN);
        for vals in [base, odd, with_nan] {
            let f = DqFeatures::extract(&window(&vals), &p).unwrap();
            let sorted = crate::num::sorted_copy(&vals);
            let q = |q| crate::num::quantile_sorted(&sorted, q);
            assert_eq!((f.q1, f.median, f.q3), (q(0.25), q(0.5), q(0.75)));
        }
    }
}
