mod support;

use dqpipe_core::dqscore::{
    fit_unifier, score_accuracy, score_completeness, score_skewness, score_timeliness,
    ReferenceProfile, ScoreOptions,
};
use dqpipe_core::ingest::windowize;
use dqpipe_core::mutate::{
    apply_plan, corpus_rows, inject_anomalies, inject_missing, inject_shift, MutationContext,
    MutationPlan,
};
use dqpipe_core::{Reading, Window};
use proptest::prelude::*;
use support::{clean_windows, closed_form, profile};

const N: usize = support::WINDOW;

#[test]
fn targeted_scores_have_closed_form() {
    let windows = clean_windows(100, 1);
    assert_eq!(
        support::check_closed_forms(&windows, &profile(&windows)),
        900
    );
}

#[test]
fn rates_compose_over_present_values() {
    let windows = clean_windows(10, 2);
    let p = profile(&windows);
    let w = inject_missing(&windows[0], 0.25, 3);
    let present = w.present_values().len();
    assert_eq!(present, N - 300);
    let a = inject_anomalies(&w, 0.1, 2.0, &p.fences, 4);
    assert_eq!(score_accuracy(&a, &p).unwrap(), closed_form(0.1, present));
    assert_eq!(score_completeness(&a), closed_form(0.25, N));
}

#[test]
fn shift_targets_distributional_scores() {
    let windows = clean_windows(50, 3);
    let p = profile(&windows);
    let w = &windows[10];
    let range = p.ref_sample[p.ref_sample.len() - 1] - p.ref_sample[0];
    let far = inject_shift(w, range + 1.0);
    assert_eq!(score_timeliness(&far, &p, false).unwrap(), 0.0);
    let near = inject_shift(w, 0.5 * p.ref_std());
    assert!(score_skewness(&near, &p).unwrap() < score_skewness(w, &p).unwrap());
    assert!(score_timeliness(&near, &p, false).unwrap() < score_timeliness(w, &p, false).unwrap());
}

#[test]
fn operators_keep_ids_and_are_deterministic() {
    let windows = clean_windows(5, 4);
    let p = profile(&windows);
    let ctx = MutationContext::from_profile(&p);
    for plan in MutationPlan::default_set() {
        for w in &windows {
            let a = apply_plan(w, &plan, &ctx);
            assert_eq!((a.id, a.cycle_id, a.len()), (w.id, w.cycle_id, w.len()));
            assert_eq!(a, apply_plan(w, &plan, &ctx));
        }
    }
    assert_eq!(inject_missing(&windows[0], 0.0, 1), windows[0]);
    assert_eq!(inject_shift(&windows[0], 0.0), windows[0]);
}

#[test]
fn corpus_label_spread() {
    let windows = clean_windows(100, 5);
    let p = profile(&windows);
    let plans = MutationPlan::default_set();
    let rows = corpus_rows(&windows, &plans, &p, ScoreOptions::default()).unwrap();
    assert_eq!(
        rows.rows.len() + rows.skipped,
        windows.len() * (plans.len() + 1)
    );
    let u = fit_unifier(&rows.dims()).unwrap();
    let scores: Vec<f64> = rows.annotate(&u).iter().map(|(_, s)| s.value()).collect();
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo >= 60.0, "corpus spans only {lo}..{hi}");
}

#[test]
fn fuzzed_windows_stay_in_unit_range() {
    let p = profile(&clean_windows(20, 6));
    assert!(support::check_fuzz(&p, 10_000, 6) > 9_000);
}

proptest! {
    #[test]
    fn windowize_is_lossless(len in 0usize..500, n in 2usize..100) {
        let readings: Vec<Reading> = (0..len).map(|i| Reading::new(i as u64, (i % 3 != 0).then_some(i as f64))).collect();
        let ws: Vec<Window> = windowize(readings.clone(), n, 9).collect();
        prop_assert_eq!(ws.len(), len.div_ceil(n));
        prop_assert!(ws.iter().rev().skip(1).all(|w| !w.partial && w.len() == n));
        let back: Vec<Reading> = ws.into_iter().flat_map(|w| w.readings).collect();
        prop_assert_eq!(back, readings);
    }

    #[test]
    fn window_serde_round_trip(vals in prop::collection::vec(prop::option::of(-1e6f64..1e6), 0..50)) {
        let w = Window {
            id: 3,
            cycle_id: 4,
            readings: vals.iter().enumerate().map(|(i, v)| Reading::new(i as u64 * 10, *v)).collect(),
            partial: true,
        };
        let back: Window = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn missing_rate_is_exact(rate in 0.0f64..=1.0, seed in 0u64..1000) {
        let w = &clean_windows(1, seed)[0];
        let m = inject_missing(w, rate, seed);
        prop_assert_eq!(m.missing_count(), (rate * N as f64).round() as usize);
    }
}

#[test]
fn profile_serde_round_trip() {
    let windows = clean_windows(30, 7);
    let mut p = profile(&windows);
    let rows = corpus_rows(
        &windows,
        &MutationPlan::default_set(),
        &p,
        ScoreOptions::default(),
    )
    .unwrap();
    p.unifier = Some(fit_unifier(&rows.dims()).unwrap());
    p.divergence_history.extend([0.1, 0.2]);
    let back: ReferenceProfile = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    assert_eq!(back, p);
}
