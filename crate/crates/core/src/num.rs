//! Small numeric helpers shared across modules.

use alloc::vec::Vec;

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    libm::sqrt(var)
}

/// Linear-interpolated quantile of an ascending slice (type 7).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// [`quantile_sorted`] at several ascending levels of an unsorted buffer,
/// which is reordered. Each selection works only on the part of the buffer
/// above the previous one.
pub(crate) fn quantiles_select<const K: usize>(buf: &mut [f64], qs: [f64; K]) -> [f64; K] {
    debug_assert!(!buf.is_empty());
    debug_assert!(qs.windows(2).all(|w| w[0] <= w[1]));
    let last = (buf.len() - 1) as f64;
    let mut out = [0.0; K];
    // buf[..start] holds the `start` smallest values.
    let mut start = 0;
    let mut prev: Option<(usize, f64)> = None;
    for (slot, q) in out.iter_mut().zip(qs) {
        let pos = q * last;
        let lo = libm::floor(pos) as usize;
        let frac = pos - lo as f64;
        let lo_val = match prev {
            Some((l, v)) if l == lo => v,
            _ => {
                let (_, v, _) = buf[start..].select_nth_unstable_by(lo - start, f64::total_cmp);
                let v = *v;
                start = lo + 1;
                v
            }
        };
        prev = Some((lo, lo_val));
        *slot = if frac == 0.0 || lo + 1 == buf.len() {
            lo_val
        } else {
            let hi_val = buf[lo + 1..].iter().copied().fold(f64::INFINITY, f64::min);
            lo_val + (hi_val - lo_val) * frac
        };
    }
    out
}

pub(crate) fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Round-half-away-from-zero of `rate * n`, the exact-count rule used by the
/// mutation operators.
pub(crate) fn exact_count(rate: f64, n: usize) -> usize {
    let k = libm::round(rate * n as f64) as usize;
    k.min(n)
}
