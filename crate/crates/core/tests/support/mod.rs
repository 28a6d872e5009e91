//! Independent oracles and fixtures shared by the integration tests and the
//! acceptance harness. Checks panic with a description on mismatch.

#![allow(dead_code)]

use std::collections::BTreeMap;

use dqpipe_core::dqscore::{
    dimension_scores, estimate_pdf, fit_unifier, jsd, ks_statistic, score_accuracy,
    score_completeness, score_consistency, uniform_edges, unify, Constraints, ReferenceProfile,
    ScoreOptions,
};
use dqpipe_core::ingest::{cycle_window, synth_generate, SynthConfig};
use dqpipe_core::learn::{train_gbdt, GbdtModel, GbdtParams, Node};
use dqpipe_core::mutate::{inject_anomalies, inject_missing, inject_out_of_range};
use dqpipe_core::{DimensionScores, Reading, Window};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WINDOW: usize = 1200;

pub fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    a.iter()
        .chain(b)
        .map(|&z| {
            let ca = a.iter().filter(|&&v| v <= z).count() as f64;
            let cb = b.iter().filter(|&&v| v <= z).count() as f64;
            (ca / n - cb / m).abs()
        })
        .fold(0.0, f64::max)
}

fn random_sample(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(1..=50);
    if rng.random_bool(0.5) {
        // Coarse grid, so ties within and across samples are common.
        (0..n)
            .map(|_| f64::from(rng.random_range(0..8u8)))
            .collect()
    } else {
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
    }
}

pub fn check_ks(pairs: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let a = random_sample(&mut rng);
        let b = random_sample(&mut rng);
        assert_eq!(
            ks_statistic(&a, &b).unwrap(),
            ks_brute(&a, &b),
            "{a:?} vs {b:?}"
        );
    }
}

/// JSD in bits written as the mean KL divergence to the midpoint.
pub fn jsd_by_kl(p: &[f64], q: &[f64]) -> f64 {
    let kl = |x: &[f64]| -> f64 {
        x.iter()
            .zip(p.iter().zip(q))
            .filter(|(xi, _)| **xi > 0.0)
            .map(|(xi, (pi, qi))| xi * (xi / (0.5 * (pi + qi))).ln())
            .sum()
    };
    (0.5 * kl(p) + 0.5 * kl(q)) / std::f64::consts::LN_2
}

pub fn check_jsd(pairs: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..pairs {
        let bins = rng.random_range(1..=40);
        let edges = uniform_edges(0.0, 1.0, bins);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let n = rng.random_range(1..200);
            let skew = rng.random_range(0.2..5.0);
            (0..n).map(|_| rng.random::<f64>().powf(skew)).collect()
        };
        let p = estimate_pdf(&draw(&mut rng), &edges).unwrap();
        let q = estimate_pdf(&draw(&mut rng), &edges).unwrap();
        let got = jsd(&p, &q).unwrap();
        let want = jsd_by_kl(p.mass(), q.mass());
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        assert!((0.0..=1.0).contains(&got));
    }
}

/// Rows driven by one latent quality factor, so the leading component is
/// well separated from the rest.
pub fn factor_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<DimensionScores> {
    let weights: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.2..1.0));
    (0..n)
        .map(|_| {
            let f = rng.random_range(0.0..1.0);
            DimensionScores::from_array(std::array::from_fn(|k| {
                (weights[k] * f + 0.02 * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0)
            }))
        })
        .collect()
}

/// Leading eigenvector of the sample covariance, oriented so its
/// components sum to a positive number.
pub fn leading_component(rows: &[DimensionScores]) -> Vec<f64> {
    let n = rows.len();
    let x = DMatrix::from_fn(n, 5, |i, j| rows[i].to_array()[j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, 5, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let lead = eig.eigenvalues.imax();
    let mut v: Vec<f64> = eig.eigenvectors.column(lead).iter().copied().collect();
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
    v
}

pub fn check_unifier(datasets: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..datasets {
        let n = rng.random_range(10..300);
        let rows = factor_rows(&mut rng, n);
        let u = fit_unifier(&rows).unwrap();
        let v = leading_component(&rows);
        for (a, b) in u.loading.iter().zip(&v) {
            assert!((a - b).abs() < 1e-9, "{:?} vs {v:?}", u.loading);
        }
        assert!(rows
            .iter()
            .all(|r| (0.0..=100.0).contains(&unify(r, &u).value())));
    }
}

fn mse(pred: impl Fn(usize) -> f64, y: &[f64]) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, v)| (v - pred(i)).powi(2))
        .sum::<f64>()
        / y.len() as f64
}

/// Leaf a sample lands in, found by walking the tree independently of
/// `Node::eval`, addressed by its path of left/right turns.
fn leaf_path(node: &Node, x: &[f64]) -> (Vec<bool>, f64) {
    let mut path = Vec::new();
    let mut cur = node;
    loop {
        match cur {
            Node::Leaf { value } => return (path, *value),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let go_left = x[*feature] < *threshold;
                path.push(go_left);
                cur = if go_left { left } else { right };
            }
        }
    }
}

/// Replays boosting round by round from the raw data: each tree's leaves
/// must hold the mean residual of the samples routed to them, and the
/// training MSE must never rise.
pub fn check_stagewise(x: &[Vec<f64>], y: &[f64], model: &GbdtModel) {
    let n = y.len();
    let mut f = vec![y.iter().sum::<f64>() / n as f64; n];
    assert!((model.base_prediction - f[0]).abs() < 1e-12);
    let mut prev = mse(|i| f[i], y);
    for tree in &model.trees {
        let residual: Vec<f64> = (0..n).map(|i| y[i] - f[i]).collect();
        let mut groups: BTreeMap<Vec<bool>, (f64, usize, f64)> = BTreeMap::new();
        for i in 0..n {
            let (path, value) = leaf_path(tree, &x[i]);
            let g = groups.entry(path).or_insert((0.0, 0, value));
            g.0 += residual[i];
            g.1 += 1;
        }
        for (sum, count, value) in groups.values() {
            let mean = sum / *count as f64;
            assert!(
                (mean - value).abs() < 1e-9 * (1.0 + mean.abs()),
                "leaf {value} vs mean residual {mean}"
            );
            assert!(*count >= model.params.min_leaf);
        }
        for i in 0..n {
            f[i] += model.params.learning_rate * leaf_path(tree, &x[i]).1;
        }
        let cur = mse(|i| f[i], y);
        assert!(
            cur <= prev * (1.0 + 1e-12) + 1e-300,
            "MSE rose from {prev} to {cur}"
        );
        prev = cur;
    }
    for i in 0..n {
        let p = model.predict(&x[i]).unwrap();
        assert!((p - f[i]).abs() < 1e-9 * (1.0 + p.abs()));
    }
}

pub fn check_gbdt_random(datasets: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..datasets {
        let n = rng.random_range(5..60);
        let d = rng.random_range(1..5);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| f64::from(rng.random_range(0..10u8)) / 2.0)
                    .collect()
            })
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| r[0].sin() + 0.5 * rng.random::<f64>())
            .collect();
        let params = GbdtParams {
            rounds: rng.random_range(0..40),
            max_depth: rng.random_range(1..5),
            learning_rate: rng.random_range(0.05..1.0),
            min_leaf: rng.random_range(1..5),
            ..GbdtParams::default()
        };
        let model = train_gbdt(&x, &y, &params).unwrap();
        assert_eq!(model.trees.len(), params.rounds);
        check_stagewise(&x, &y, &model);
    }
}

pub fn check_zero_rounds() {
    let x: Vec<Vec<f64>> = (0..7).map(|i| vec![f64::from(i)]).collect();
    let y = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0];
    let params = GbdtParams {
        rounds: 0,
        ..GbdtParams::default()
    };
    let model = train_gbdt(&x, &y, &params).unwrap();
    let mean = y.iter().sum::<f64>() / 7.0;
    for probe in [-100.0, 0.0, 3.5, 1e9] {
        assert_eq!(model.predict(&[probe]).unwrap(), mean);
    }
}

pub fn check_interpolation() {
    let x: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![f64::from(i) * 0.37 % 5.0, f64::from(i % 7)])
        .collect();
    let y: Vec<f64> = x.iter().map(|r| r[0] * r[0] - 2.0 * r[1]).collect();
    let params = GbdtParams {
        rounds: 200,
        max_depth: 6,
        learning_rate: 0.5,
        min_leaf: 1,
        ..GbdtParams::default()
    };
    let model = train_gbdt(&x, &y, &params).unwrap();
    for (r, v) in x.iter().zip(&y) {
        let p = model.predict(r).unwrap();
        assert!((p - v).abs() < 1e-6, "{p} vs {v}");
    }
}

pub fn clean_windows(n: usize, seed: u64) -> Vec<Window> {
    synth_generate(SynthConfig {
        n_cycles: n,
        p0_jitter: 0.03,
        lambda_jitter: 0.03,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
    .enumerate()
    .map(|(i, c)| cycle_window(&c, WINDOW, i as u64))
    .collect()
}

pub fn profile(windows: &[Window]) -> ReferenceProfile {
    ReferenceProfile::build(windows, Constraints::new(0.0, 200.0).unwrap(), 32).unwrap()
}

pub fn closed_form(rate: f64, denominator: usize) -> f64 {
    1.0 - (rate * denominator as f64).round() / denominator as f64
}

/// Each rate operator moves exactly its own dimension to the closed form.
/// Returns the number of comparisons made.
pub fn check_closed_forms(windows: &[Window], p: &ReferenceProfile) -> usize {
    let mut checked = 0;
    for w in windows {
        assert_eq!(
            score_accuracy(w, p).unwrap(),
            1.0,
            "clean window has fence outliers"
        );
        assert_eq!(score_consistency(w, &p.constraints), 1.0);
        assert_eq!(score_completeness(w), 1.0);
        for rate in [0.1, 0.3, 0.5] {
            let m = inject_missing(w, rate, 7);
            assert_eq!(score_completeness(&m), closed_form(rate, w.len()));

            let a = inject_anomalies(w, rate, 1.0, &p.fences, 8);
            assert_eq!(score_accuracy(&a, p).unwrap(), closed_form(rate, w.len()));

            let o = inject_out_of_range(w, rate, &p.constraints, 9);
            assert_eq!(
                score_consistency(&o, &p.constraints),
                closed_form(rate, w.len())
            );
            checked += 3;
        }
    }
    checked
}

fn fuzz_window(rng: &mut ChaCha8Rng) -> Window {
    let n = rng.random_range(1..400);
    let scale = [1.0, 100.0, 1e6][rng.random_range(0..3)];
    let missing = rng.random::<f64>();
    let readings = (0..n)
        .map(|i| {
            let v = (!rng.random_bool(missing)).then(|| rng.random_range(-1.0..1.0) * scale + 60.0);
            Reading::new(i as u64, v)
        })
        .collect();
    Window {
        id: 0,
        cycle_id: 0,
        readings,
        partial: false,
    }
}

/// Scores `count` random windows and checks every dimension stays in the
/// unit interval. Returns how many windows were scoreable.
pub fn check_fuzz(p: &ReferenceProfile, count: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scored = 0;
    for _ in 0..count {
        let w = fuzz_window(&mut rng);
        let lenient = rng.random_bool(0.5);
        if let Ok(d) = dimension_scores(
            &w,
            p,
            ScoreOptions {
                lenient_timeliness: lenient,
            },
        ) {
            assert!(d.is_valid(), "{d:?}");
            scored += 1;
        }
    }
    scored
}
