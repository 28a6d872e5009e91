use dqpipe::config::{PipelineConfig, ScoringMode};
use dqpipe::registry::{Event, Registry};
use dqpipe::runtime::{AdaptationEvent, Pipeline, PredictionRecord, Trigger};
use dqpipe::Error;
use dqpipe_core::drift::DriftMode;
use dqpipe_core::ingest::{cycle_window, featureize, synth_generate, RegimeChange, SynthConfig};
use dqpipe_core::learn::evaluate;
use dqpipe_core::mutate::inject_shift;
use dqpipe_core::{extract_label, ArtifactKind, PumpCycle};

const KINDS: [ArtifactKind; 4] = [
    ArtifactKind::ReferenceProfile,
    ArtifactKind::Unifier,
    ArtifactKind::DqScorer,
    ArtifactKind::InferenceModel,
];

fn cycles(n: usize, seed: u64, drift: Vec<RegimeChange>) -> Vec<PumpCycle> {
    synth_generate(SynthConfig {
        n_cycles: n,
        p0_jitter: 0.05,
        lambda_jitter: 0.05,
        drift_schedule: drift,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
    .collect()
}

fn config(mode: DriftMode, tau: f64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.drift.mode = mode;
    cfg.drift.tau = tau;
    cfg
}

fn init(cs: &[PumpCycle], cfg: PipelineConfig) -> (tempfile::TempDir, Pipeline) {
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::init(cs, cfg, Registry::open(dir.path()).unwrap()).unwrap();
    (dir, p)
}

fn versions(p: &Pipeline) -> Vec<Vec<u64>> {
    KINDS
        .iter()
        .map(|&k| p.registry().list_versions(k).unwrap())
        .collect()
}

#[test]
fn init_registers_version_one_of_everything() {
    let cs = cycles(200, 1, vec![]);
    let (_dir, p) = init(&cs, PipelineConfig::default());
    assert_eq!(versions(&p), vec![vec![1]; 4]);
    let d = p.registry().deployment().unwrap().unwrap();
    assert_eq!(d, p.live().deployment);
    assert!(KINDS.iter().all(|&k| d.version(k) == 1));
    assert!(p.registry().root().join("corpus.csv").exists());
}

#[test]
fn init_is_deterministic() {
    let cs = cycles(200, 2, vec![]);
    let (_a, pa) = init(&cs, PipelineConfig::default());
    let (_b, pb) = init(&cs, PipelineConfig::default());
    for k in KINDS {
        let a = pa.registry().get(k, 1).unwrap();
        let b = pb.registry().get(k, 1).unwrap();
        assert_eq!(a.payload, b.payload, "{k}");
    }
}

#[test]
fn short_baseline_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let err = Pipeline::init(
        &[],
        PipelineConfig::default(),
        Registry::open(dir.path()).unwrap(),
    )
    .err()
    .unwrap();
    assert!(matches!(err, Error::InsufficientBaseline(_)));
    let cs = cycles(30, 3, vec![]);
    let err = Pipeline::init(
        &cs,
        PipelineConfig::default(),
        Registry::open(dir.path()).unwrap(),
    )
    .err()
    .unwrap();
    assert!(matches!(err, Error::InsufficientBaseline(_)));
}

#[test]
fn records_are_coherent() {
    let cs = cycles(260, 4, vec![]);
    let (_dir, mut p) = init(&cs[..200], config(DriftMode::Active, 0.08));
    for c in &cs[200..] {
        let r = p.process_cycle(c).unwrap();
        assert!(r.latency_ns > 0);
        assert_eq!(r.latency_ns, r.t_ready - r.t_ingest);
        assert_eq!(r.deployment, p.live().deployment);
        assert!((0.0..=100.0).contains(&r.dq_score.value()));
        assert!(r.divergence.is_some());
    }
}

#[test]
fn stationary_stream_rarely_adapts() {
    let tau = 0.04;
    let cs = cycles(500, 5, vec![]);
    let (_dir, mut p) = init(&cs[..200], config(DriftMode::Active, tau));
    let records: Vec<PredictionRecord> = cs[200..]
        .iter()
        .map(|c| p.process_cycle(c).unwrap())
        .collect();
    let warmup = p.config().drift.warmup;
    assert!(records[..warmup].iter().all(|r| !r.drift));
    let drifts = records.iter().filter(|r| r.drift).count();
    assert!(
        drifts as f64 <= tau * (records.len() - warmup) as f64 + 3.0,
        "{drifts} drift flags on a stationary stream"
    );
}

/// A false alarm shortly before the shift restarts the warm-up, so the
/// claim is checked on every seed where the detector is warmed up.
#[test]
fn injected_shift_triggers_adaptation() {
    let mut warmed_seeds = 0;
    for seed in 0..8 {
        let cs = cycles(305, 600 + seed, vec![]);
        let (_dir, mut p) = init(&cs[..200], config(DriftMode::Active, 0.04));
        let delta = 2.0 * p.live().profile.ref_std();
        let warmup = p.config().drift.warmup;
        let mut records = Vec::new();
        for (i, c) in cs[200..].iter().enumerate() {
            let mut c = c.clone();
            if i >= 100 {
                c.readings = inject_shift(&cycle_window(&c, c.readings.len(), 0), delta).readings;
            }
            records.push(p.process_cycle(&c).unwrap());
        }
        let warmed = records[..100]
            .iter()
            .rposition(|r| r.adapted)
            .is_none_or(|i| i + warmup < 100);
        if warmed {
            warmed_seeds += 1;
            assert!(
                records[100..=103].iter().any(|r| r.adapted),
                "seed {seed}: shift missed"
            );
        }
    }
    assert!(warmed_seeds > 0);
}

#[test]
fn adaptation_bumps_every_kind_once() {
    let cs = cycles(500, 7, vec![]);
    let mut cfg = config(DriftMode::None, 0.06);
    // More recent windows than the baseline provides.
    cfg.drift.rebase_windows = 250;
    let (_dir, mut p) = init(&cs[..200], cfg);
    let before = p.live().deployment;
    match p.adapt(Trigger::Manual, None).unwrap() {
        AdaptationEvent::Skipped(_) => {}
        other => panic!("adapted without recent windows: {other:?}"),
    }
    assert_eq!(p.live().deployment, before);
    assert_eq!(versions(&p), vec![vec![1]; 4]);

    for c in &cs[200..] {
        p.process_cycle(c).unwrap();
    }
    let AdaptationEvent::Deployed(d) = p.adapt(Trigger::Manual, None).unwrap() else {
        panic!("adaptation skipped");
    };
    assert_eq!(d.deployment_id, before.deployment_id + 1);
    for k in KINDS {
        assert_eq!(d.version(k), before.version(k) + 1);
    }
    assert_eq!(versions(&p), vec![vec![1, 2]; 4]);
}

#[test]
fn adaptation_helps_after_regime_change() {
    let cs = cycles(
        420,
        8,
        vec![RegimeChange {
            cycle: 200,
            lambda: 1.2,
            noise_std: 0.5,
        }],
    );
    let (_dir, mut p) = init(&cs[..200], config(DriftMode::None, 0.06));
    for c in &cs[200..320] {
        p.process_cycle(c).unwrap();
    }
    let old = p.live().model.clone();
    assert!(matches!(
        p.adapt(Trigger::Manual, None).unwrap(),
        AdaptationEvent::Deployed(_)
    ));
    let new = p.live().model.clone();

    let cfg = p.config().features;
    let labels: Vec<f64> = cs.iter().map(|c| extract_label(c).unwrap()).collect();
    let (mut old_preds, mut new_preds, mut truth) = (vec![], vec![], vec![]);
    for i in 320..420 {
        let w = cycle_window(&cs[i], p.config().window_size, i as u64);
        let x = featureize(&w, &labels[i - cfg.f_history..i], &cfg)
            .unwrap()
            .values;
        old_preds.push(old.predict(&x).unwrap());
        new_preds.push(new.predict(&x).unwrap());
        truth.push(labels[i]);
    }
    let before = evaluate(&old_preds, &truth).unwrap().mae;
    let after = evaluate(&new_preds, &truth).unwrap().mae;
    assert!(
        after <= before,
        "post-adapt MAE {after} > pre-adapt {before}"
    );
}

#[test]
fn passive_schedule_adapts_every_w_windows() {
    let cs = cycles(600, 9, vec![]);
    for w in [50, 100, 200] {
        let mut cfg = config(DriftMode::Passive, 0.06);
        cfg.drift.w_passive = w;
        let (_dir, mut p) = init(&cs[..200], cfg);
        for c in &cs[200..] {
            p.process_cycle(c).unwrap();
        }
        let s = p.stats();
        assert_eq!(s.adaptations + s.skipped_adaptations, 400 / w);
        assert_eq!(s.adaptations, 400 / w);
    }
}

#[test]
fn direct_and_ml_scores_agree_roughly() {
    let cs = cycles(260, 10, vec![]);
    let mut direct = config(DriftMode::None, 0.06);
    direct.scoring = ScoringMode::Direct;
    let (_a, mut pd) = init(&cs[..200], direct);
    let (_b, mut pm) = init(&cs[..200], config(DriftMode::None, 0.06));
    let mut gap = 0.0;
    for c in &cs[200..] {
        let a = pd.process_cycle(c).unwrap().dq_score.value();
        let b = pm.process_cycle(c).unwrap().dq_score.value();
        gap += (a - b).abs();
    }
    assert!(gap / 60.0 < 10.0, "mean |direct - ml| = {}", gap / 60.0);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let cs = cycles(
        300,
        11,
        vec![RegimeChange {
            cycle: 240,
            lambda: 1.2,
            noise_std: 0.5,
        }],
    );
    let cfg = config(DriftMode::Active, 0.08);
    let strip = |r: PredictionRecord| {
        (
            r.window_id,
            r.dq_score,
            r.drift,
            r.adapted,
            r.predicted_min_pressure,
            r.deployment,
        )
    };

    let (_a, mut whole) = init(&cs[..200], cfg.clone());
    let expected: Vec<_> = cs[200..]
        .iter()
        .map(|c| strip(whole.process_cycle(c).unwrap()))
        .collect();

    let dir = tempfile::tempdir().unwrap();
    let mut first =
        Pipeline::init(&cs[..200], cfg.clone(), Registry::open(dir.path()).unwrap()).unwrap();
    let mut got: Vec<_> = cs[200..250]
        .iter()
        .map(|c| strip(first.process_cycle(c).unwrap()))
        .collect();
    first.save_checkpoint().unwrap();
    drop(first);

    let mut other = cfg.clone();
    other.threshold = 10.0;
    let err = Pipeline::resume(other, Registry::open(dir.path()).unwrap())
        .err()
        .unwrap();
    assert!(matches!(err, Error::Config(_)));

    let mut second = Pipeline::resume(cfg, Registry::open(dir.path()).unwrap()).unwrap();
    assert_eq!(second.last_cycle_id(), Some(249));
    got.extend(
        cs[250..]
            .iter()
            .map(|c| strip(second.process_cycle(c).unwrap())),
    );
    assert_eq!(got, expected);
}

#[test]
fn event_log_tells_the_whole_story() {
    let cs = cycles(
        320,
        12,
        vec![RegimeChange {
            cycle: 250,
            lambda: 1.5,
            noise_std: 0.5,
        }],
    );
    let (_dir, mut p) = init(&cs[..200], config(DriftMode::Passive, 0.06));
    for c in &cs[200..] {
        p.process_cycle(c).unwrap();
    }
    let log = p.registry().read_events().unwrap();
    assert!(log.windows(2).all(|w| w[1].seq == w[0].seq + 1));
    let mut current = None;
    let (mut preds, mut labels, mut deploys) = (0, 0, 0);
    for line in &log {
        match &line.event {
            Event::Deployment { deployment, .. } => {
                current = Some(*deployment);
                deploys += 1;
            }
            Event::Prediction(r) => {
                assert_eq!(Some(r.deployment), current);
                preds += 1;
            }
            Event::Label { .. } => labels += 1,
            _ => {}
        }
    }
    assert_eq!((preds, labels), (120, 120));
    assert_eq!(deploys, 1 + p.stats().adaptations as usize);
}
