//! Two-sample Kolmogorov-Smirnov statistic, smoothed histograms and the
//! base-2 Jensen-Shannon divergence.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::sorted_copy;

/// Per-bin additive smoothing applied before renormalizing.
pub const SMOOTHING_EPS: f64 = 1e-10;

/// Maximum absolute ECDF difference over the combined sample.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(ks_sorted(&sorted_copy(a), &sorted_copy(b)))
}

/// [`ks_statistic`] for inputs already sorted ascending. Runs in
/// `O(n + m)`.
pub fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(ks_sorted(a, b))
}

fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    // Walk the smaller sample and locate each of its distinct values in the
    // larger one by galloping binary search. Between consecutive values of
    // the walked sample its ECDF is flat, so the gap peaks either at a value
    // itself or just before the next one.
    let swapped = a.len() > b.len();
    let (s, l) = if swapped { (b, a) } else { (a, b) };
    let (sn, ln) = (s.len() as f64, l.len() as f64);
    let gap = |i: usize, j: usize| {
        let (fa, fb) = (i as f64 / sn, j as f64 / ln);
        if swapped {
            (fb - fa).abs()
        } else {
            (fa - fb).abs()
        }
    };
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < s.len() && j < l.len() {
        let z = s[i];
        let j_lt = j + gallop(&l[j..], |x| x < z);
        if j_lt > j {
            d = d.max(gap(i, j_lt));
        }
        while i < s.len() && s[i] <= z {
            i += 1;
        }
        j = j_lt + gallop(&l[j_lt..], |x| x <= z);
        d = d.max(gap(i, j));
    }
    // Whichever sample is left over only moves its ECDF towards 1 while
    // the other already sits there, so the gap cannot grow.
    d
}

/// Length of the prefix of sorted `v` satisfying `pred`.
#[inline]
fn gallop(v: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    let mut hi = 1;
    while hi <= v.len() && pred(v[hi - 1]) {
        hi *= 2;
    }
    let lo = hi / 2;
    let hi = hi.min(v.len());
    lo + v[lo..hi].partition_point(|x| pred(*x))
}

/// Probability mass over fixed bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    edges: Vec<f64>,
    mass: Vec<f64>,
}

impl Histogram {
    /// Wraps explicit masses. Edges must be strictly increasing with one more
    /// entry than `mass`; masses must be non-negative and sum to 1.
    pub fn from_mass(edges: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.len() != mass.len() + 1 {
            return Err(Error::InvalidHistogram("edge/mass length mismatch"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidHistogram("edges not strictly increasing"));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::InvalidHistogram("negative mass"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHistogram("mass does not sum to 1"));
        }
        Ok(Self { edges, mass })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }
}

/// `bins + 1` equally spaced edges spanning `[lo, hi]`. A degenerate range is
/// widened by half a unit on each side.
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let bins = bins.max(1);
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + step * i as f64).collect();
    edges.push(hi);
    edges
}

/// Maps values to left-closed bins. Values beyond the outer edges land in
/// the end bins, and NaN in the first.
///
/// Each bin is first guessed as if the edges were uniform, then walked to
/// the right one, so uniform edges cost O(1) per value.
pub(crate) struct Binner<'a> {
    edges: &'a [f64],
    lo: f64,
    scale: f64,
}

impl<'a> Binner<'a> {
    pub(crate) fn new(edges: &'a [f64]) -> Self {
        let bins = edges.len() - 1;
        Self {
            edges,
            lo: edges[0],
            scale: bins as f64 / (edges[bins] - edges[0]),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.edges.len() - 1
    }

    #[inline]
    pub(crate) fn bin(&self, v: f64) -> usize {
        let edges = self.edges;
        let bins = edges.len() - 1;
        // The cast saturates, and maps NaN to 0.
        let mut i = (((v - self.lo) * self.scale) as usize).min(bins - 1);
        while i > 0 && v < edges[i] {
            i -= 1;
        }
        while i + 1 < bins && v >= edges[i + 1] {
            i += 1;
        }
        i
    }
}

/// Raw per-bin counts of `values` over `edges`.
pub(crate) fn bin_counts(values: &[f64], edges: &[f64]) -> Vec<u32> {
    let binner = Binner::new(edges);
    let mut counts = vec![0u32; edges.len() - 1];
    for &v in values {
        counts[binner.bin(v)] += 1;
    }
    counts
}

/// Type-7 quantiles at ascending levels `qs`, equal to sorting `values`.
///
/// Bins never decrease with the value (NaN aside, which the caller must
/// exclude), so the order statistics needed are found by sorting only the
/// bins that contain them.
pub(crate) fn binned_quantiles<const K: usize>(
    values: &[f64],
    bins: &[u32],
    counts: &[u32],
    qs: [f64; K],
) -> [f64; K] {
    debug_assert!(!values.is_empty() && values.len() == bins.len());
    let n = values.len();
    let mut starts = Vec::with_capacity(counts.len());
    let mut acc = 0usize;
    for &c in counts {
        starts.push(acc);
        acc += c as usize;
    }
    let bin_of_rank = |r: usize| starts.partition_point(|&s| s <= r) - 1;

    let mut ranks = [(0usize, 0usize, 0.0f64); K];
    for (slot, q) in ranks.iter_mut().zip(qs) {
        let pos = q * (n - 1) as f64;
        let lo = libm::floor(pos) as usize;
        let frac = pos - lo as f64;
        let hi = if frac == 0.0 || lo + 1 == n {
            lo
        } else {
            lo + 1
        };
        *slot = (lo, hi, frac);
    }

    // Gather the needed bins in one pass, then select within them.
    let mut slot_of = vec![u8::MAX; counts.len()];
    let mut buckets: Vec<Vec<f64>> = Vec::new();
    for &(lo, hi, _) in &ranks {
        for r in [lo, hi] {
            let b = bin_of_rank(r);
            if slot_of[b] == u8::MAX {
                slot_of[b] = buckets.len() as u8;
                buckets.push(Vec::with_capacity(counts[b] as usize));
            }
        }
    }
    for (&v, &b) in values.iter().zip(bins) {
        let slot = slot_of[b as usize];
        if slot != u8::MAX {
            buckets[slot as usize].push(v);
        }
    }
    let mut at = |r: usize| {
        let b = bin_of_rank(r);
        let bucket = &mut buckets[slot_of[b] as usize];
        *bucket
            .select_nth_unstable_by(r - starts[b], f64::total_cmp)
            .1
    };

    let mut out = [0.0; K];
    for (o, (lo, hi, frac)) in out.iter_mut().zip(ranks) {
        let lo_val = at(lo);
        *o = if hi == lo {
            lo_val
        } else {
            lo_val + (at(hi) - lo_val) * frac
        };
    }
    out
}

/// Smoothed empirical histogram of `values` over `edges`.
pub fn estimate_pdf(values: &[f64], edges: &[f64]) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::AllMissingWindow);
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidHistogram("edges not strictly increasing"));
    }
    let counts = bin_counts(values, edges);
    Ok(smoothed(edges.to_vec(), &counts, values.len()))
}

pub(crate) fn smoothed(edges: Vec<f64>, counts: &[u32], n: usize) -> Histogram {
    let bins = counts.len() as f64;
    let norm = 1.0 + bins * SMOOTHING_EPS;
    let mass = counts
        .iter()
        .map(|&c| (f64::from(c) / n as f64 + SMOOTHING_EPS) / norm)
        .collect();
    Histogram { edges, mass }
}

/// Shannon entropy in bits; zero-mass bins contribute nothing.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * libm::log2(x))
        .sum::<f64>()
}

/// Base-2 Jensen-Shannon divergence, `H((P+Q)/2) - (H(P)+H(Q))/2`.
pub fn jsd(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.edges != q.edges {
        return Err(Error::BinMismatch);
    }
    Ok(jsd_mass(&p.mass, &q.mass))
}

pub(crate) fn jsd_mass(p: &[f64], q: &[f64]) -> f64 {
    let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let v = entropy_bits(&mid) - 0.5 * (entropy_bits(p) + entropy_bits(q));
    // Rounding can leave a tiny negative residue for identical inputs.
    v.clamp(0.0, 1.0)
}

/// Largest gap between the cumulative masses of two histograms on shared
/// edges; a binned analogue of the KS statistic.
pub(crate) fn binned_ks(p: &[f64], q: &[f64]) -> f64 {
    let (mut cp, mut cq, mut d) = (0.0, 0.0, 0.0f64);
    for (a, b) in p.iter().zip(q) {
        cp += a;
        cq += b;
        d = d.max((cp - cq).abs());
    }
    d
}
