//! Initialization and the per-window deployment loop.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use dqpipe_core::dqscore::{direct_score, fit_unifier, ReferenceProfile, UnifierParams};
use dqpipe_core::drift::{self, DriftMode};
use dqpipe_core::ingest::{cycle_window, featureize, FeatureConfig};
use dqpipe_core::learn::{
    filter_by_quality, train_dq_scorer, train_gbdt, DqFeatures, DqScorer, GbdtModel, TrainingRow,
};
use dqpipe_core::mutate::{corpus_rows, MutationPlan};
use dqpipe_core::{extract_label, ArtifactKind, PumpCycle, UnifiedScore, Window};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, ScoringMode};
use crate::error::{Error, Result};
use crate::registry::{Deployment, Event, Registry, SCHEMA_VERSION};

const CHECKPOINT_FILE: &str = "checkpoint.json";
/// The initial deployment's annotated corpus, in the registry root.
pub const CORPUS_FILE: &str = "corpus.csv";

/// What the pipeline emits for every processed window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub window_id: u64,
    pub cycle_id: u64,
    pub dq_score: UnifiedScore,
    /// `D_t` when the active detector ran.
    pub divergence: Option<f64>,
    pub drift: bool,
    /// An adaptation was deployed during this step.
    pub adapted: bool,
    pub predicted_min_pressure: f64,
    /// Artifacts the prediction was made with. On an adapting step the
    /// score and drift check ran on the previous deployment.
    pub deployment: Deployment,
    /// Nanoseconds since the pipeline's monotonic epoch.
    pub t_ingest: u64,
    pub t_ready: u64,
    pub latency_ns: u64,
}

/// Why an adaptation was requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    Init,
    Drift,
    Schedule,
    Manual,
}

impl Trigger {
    pub fn as_str(self) -> &'static str {
        match self {
            Trigger::Init => "init",
            Trigger::Drift => "drift",
            Trigger::Schedule => "schedule",
            Trigger::Manual => "manual",
        }
    }
}

/// Result of [`Pipeline::adapt`].
#[derive(Debug, Clone, PartialEq)]
pub enum AdaptationEvent {
    Deployed(Deployment),
    Skipped(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct ArtifactDoc<T> {
    schema_version: u32,
    /// Hash of the pipeline config the artifact was trained under.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    artifact: T,
}

/// Payload of an `inference_model` artifact: everything a server needs to
/// turn a raw window into a prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDoc {
    pub schema_version: u32,
    pub config_hash: String,
    pub model: GbdtModel,
    pub features: FeatureConfig,
    pub window_size: usize,
    pub threshold: f64,
    pub training_rows: usize,
    /// Completed-cycle labels at training time, oldest first.
    pub recent_labels: Vec<f64>,
}

pub fn encode_doc<T: Serialize>(artifact: &T, config_hash: Option<&str>) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(&ArtifactDoc {
        schema_version: SCHEMA_VERSION,
        config_hash: config_hash.map(str::to_string),
        artifact,
    })?)
}

pub fn decode_doc<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let doc: ArtifactDoc<T> = serde_json::from_slice(bytes)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::StorageFailure(format!(
            "unsupported schema_version {}",
            doc.schema_version
        )));
    }
    Ok(doc.artifact)
}

/// The artifacts a deployment serves with.
#[derive(Debug, Clone)]
pub struct LiveSet {
    pub profile: ReferenceProfile,
    pub scorer: DqScorer,
    pub model: GbdtModel,
    pub deployment: Deployment,
}

impl LiveSet {
    /// Loads the registry's current deployment.
    pub fn load(registry: &Registry) -> Result<(Self, ModelDoc)> {
        let d = registry
            .deployment()?
            .ok_or(Error::NoArtifact(ArtifactKind::InferenceModel))?;
        let get = |k| registry.get(k, d.version(k)).map(|a| a.payload);
        let mut profile: ReferenceProfile = decode_doc(&get(ArtifactKind::ReferenceProfile)?)?;
        let unifier: UnifierParams = decode_doc(&get(ArtifactKind::Unifier)?)?;
        profile.unifier = Some(unifier);
        let scorer: DqScorer = decode_doc(&get(ArtifactKind::DqScorer)?)?;
        let doc: ModelDoc = serde_json::from_slice(&get(ArtifactKind::InferenceModel)?)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::StorageFailure(format!(
                "unsupported schema_version {}",
                doc.schema_version
            )));
        }
        Ok((
            Self {
                profile,
                scorer,
                model: doc.model.clone(),
                deployment: d,
            },
            doc,
        ))
    }
}

/// The default mutation catalogue with its operator seeds offset by `seed`.
pub fn seeded_plans(seed: u64) -> Vec<MutationPlan> {
    let mut plans = MutationPlan::default_set();
    for op in plans.iter_mut().flat_map(|p| p.ops.iter_mut()) {
        op.seed = op
            .seed
            .wrapping_add(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    }
    plans
}

/// Fraction of a window's readings that are missing, out of constraints or
/// outside the fences. Used to pick clean windows for rebasing.
pub fn defect_rate(w: &Window, profile: &ReferenceProfile) -> f64 {
    if w.readings.is_empty() {
        return 1.0;
    }
    let bad = w
        .readings
        .iter()
        .filter(|r| match r.value {
            None => true,
            Some(v) => !profile.constraints.contains(v) || profile.fences.is_outside(v),
        })
        .count();
    bad as f64 / w.readings.len() as f64
}

/// Windows whose defect rate is at most the median, in input order.
pub fn clean_subset(windows: &[Window], defects: &[f64]) -> Vec<Window> {
    if windows.is_empty() {
        return Vec::new();
    }
    let mut sorted = defects.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let median = sorted[(sorted.len() - 1) / 2];
    windows
        .iter()
        .zip(defects)
        .filter(|(_, d)| **d <= median)
        .map(|(w, _)| w.clone())
        .collect()
}

type Scoring = (ReferenceProfile, DqScorer, Vec<(DqFeatures, UnifiedScore)>);

/// Fresh profile, unifier and quality scorer from clean windows.
fn build_scoring(
    clean: &[Window],
    base: ReferenceProfile,
    cfg: &PipelineConfig,
) -> Result<Scoring> {
    let mut profile = base;
    let from = clean.len().saturating_sub(cfg.corpus_windows);
    let rows = corpus_rows(
        &clean[from..],
        &seeded_plans(cfg.seed),
        &profile,
        cfg.score_options(),
    )?;
    let unifier = fit_unifier(&rows.dims())?;
    let corpus = rows.annotate(&unifier);
    let scorer = train_dq_scorer(&corpus, &cfg.dq_scorer)?;
    profile.unifier = Some(unifier);
    Ok((profile, scorer, corpus))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Pending {
    cycle_id: u64,
    features: Vec<f64>,
    score: UnifiedScore,
}

/// Run state that is not part of any artifact, persisted between CLI
/// invocations.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    schema_version: u32,
    config_hash: String,
    next_window_id: u64,
    processed: u64,
    last_cycle_id: Option<u64>,
    next_deployment_id: u64,
    labels: VecDeque<f64>,
    buffer: VecDeque<TrainingRow>,
    pending: VecDeque<Pending>,
    recent: VecDeque<Window>,
    recent_defects: VecDeque<f64>,
    divergence_history: VecDeque<f64>,
}

/// Counters over the pipeline's lifetime in this process.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub windows: u64,
    pub adaptations: u64,
    pub skipped_adaptations: u64,
    pub window_errors: u64,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    cfg_hash: String,
    registry: Registry,
    live: LiveSet,
    state: Checkpoint,
    epoch: Instant,
    stats: RunStats,
}

impl Pipeline {
    /// Builds and registers the first deployment from baseline cycles.
    pub fn init(baseline: &[PumpCycle], cfg: PipelineConfig, registry: Registry) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.window_size;
        let need = 50.max(cfg.drift.warmup);
        let mut windows = Vec::new();
        let mut labels = Vec::new();
        for (i, c) in baseline.iter().enumerate() {
            let w = cycle_window(c, n, i as u64);
            let label = c.label.map_or_else(|| extract_label(c).ok(), Some);
            if let (false, Some(l), true) = (
                w.partial,
                label,
                w.readings.iter().any(|r| r.value.is_some()),
            ) {
                windows.push(w);
                labels.push(l);
            }
        }
        if windows.len() < need {
            return Err(Error::InsufficientBaseline(format!(
                "{} usable windows, need {need}",
                windows.len()
            )));
        }

        let provisional = ReferenceProfile::build(&windows, cfg.constraints(), cfg.bins)?;
        let defects: Vec<f64> = windows
            .iter()
            .map(|w| defect_rate(w, &provisional))
            .collect();
        let clean = clean_subset(&windows, &defects);
        let base = ReferenceProfile::build(&clean, cfg.constraints(), cfg.bins)?;
        let (profile, scorer, corpus) = build_scoring(&clean, base, &cfg)?;
        write_corpus_csv(&registry.root().join(CORPUS_FILE), &corpus)?;

        let mut rows = Vec::with_capacity(windows.len());
        for (i, w) in windows.iter().enumerate() {
            let (_, score) = direct_score(w, &profile, cfg.score_options())?;
            let hist = &labels[i.saturating_sub(cfg.features.f_history)..i];
            rows.push(TrainingRow {
                features: featureize(w, hist, &cfg.features)?.values,
                label: labels[i],
                score,
            });
        }
        let buffer: VecDeque<TrainingRow> = rows[rows.len().saturating_sub(cfg.buffer_size)..]
            .iter()
            .cloned()
            .collect();
        let model = train_inference(&buffer, &cfg).map_err(|e| match e {
            Error::Core(dqpipe_core::Error::InsufficientData(m)) => {
                Error::InsufficientBaseline(m.to_string())
            }
            e => e,
        })?;

        let k = cfg.drift.rebase_windows;
        let from = windows.len().saturating_sub(k);
        let state = Checkpoint {
            schema_version: SCHEMA_VERSION,
            config_hash: cfg.hash(),
            next_window_id: windows
                .last()
                .map_or(0, |w| w.id + 1)
                .max(baseline.len() as u64),
            processed: 0,
            last_cycle_id: baseline.last().map(|c| c.cycle_id),
            next_deployment_id: 1,
            labels: labels[labels.len().saturating_sub(cfg.features.f_history.max(1))..]
                .iter()
                .copied()
                .collect(),
            buffer,
            pending: VecDeque::new(),
            recent: windows[from..].iter().cloned().collect(),
            recent_defects: windows[from..]
                .iter()
                .map(|w| defect_rate(w, &profile))
                .collect(),
            divergence_history: VecDeque::new(),
        };
        let placeholder = Deployment {
            deployment_id: 0,
            reference_profile: 0,
            unifier: 0,
            dq_scorer: 0,
            inference_model: 0,
        };
        let live = LiveSet {
            profile,
            scorer,
            model,
            deployment: placeholder,
        };
        let cfg_hash = cfg.hash();
        let mut p = Self {
            cfg,
            cfg_hash,
            registry,
            live,
            state,
            epoch: Instant::now(),
            stats: RunStats::default(),
        };
        let live = p.live.clone();
        p.deploy(live, Trigger::Init, None)?;
        p.save_checkpoint()?;
        Ok(p)
    }

    /// Reopens a pipeline from its registry's current deployment and the
    /// checkpoint written by the last run.
    pub fn resume(cfg: PipelineConfig, registry: Registry) -> Result<Self> {
        cfg.validate()?;
        let path = registry.root().join(CHECKPOINT_FILE);
        let bytes = fs::read(&path).map_err(Error::io(&path))?;
        let state: Checkpoint = serde_json::from_slice(&bytes)?;
        if state.config_hash != cfg.hash() {
            return Err(Error::Config(
                "pipeline config differs from the one the store was initialized with".into(),
            ));
        }
        let (mut live, _) = LiveSet::load(&registry)?;
        live.profile.divergence_history = state.divergence_history.clone();
        Ok(Self {
            cfg_hash: cfg.hash(),
            cfg,
            registry,
            live,
            state,
            epoch: Instant::now(),
            stats: RunStats::default(),
        })
    }

    pub fn save_checkpoint(&mut self) -> Result<()> {
        self.state.divergence_history = self.live.profile.divergence_history.clone();
        let path = self.registry.root().join(CHECKPOINT_FILE);
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec(&self.state)?).map_err(Error::io(&tmp))?;
        fs::rename(&tmp, &path).map_err(Error::io(&path))
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn live(&self) -> &LiveSet {
        &self.live
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    /// Cycle id of the last cycle consumed, by init or by processing.
    pub fn last_cycle_id(&self) -> Option<u64> {
        self.state.last_cycle_id
    }

    pub fn training_buffer(&self) -> impl Iterator<Item = &TrainingRow> {
        self.state.buffer.iter()
    }

    fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    /// Scores, drift-checks, optionally adapts, and predicts one window.
    pub fn step(&mut self, w: &Window) -> Result<PredictionRecord> {
        match self.try_step(w) {
            Ok(r) => {
                self.stats.windows += 1;
                self.registry.log_event(Event::Prediction(r.clone()))?;
                Ok(r)
            }
            Err(e) => {
                self.stats.window_errors += 1;
                self.registry.log_event(Event::WindowError {
                    window_id: w.id,
                    cycle_id: w.cycle_id,
                    reason: e.to_string(),
                })?;
                Err(e)
            }
        }
    }

    fn try_step(&mut self, w: &Window) -> Result<PredictionRecord> {
        let t_ingest = self.now_ns();
        self.state.processed += 1;
        let index = self.state.processed;

        let score = match self.cfg.scoring {
            ScoringMode::Direct => direct_score(w, &self.live.profile, self.cfg.score_options())?.1,
            ScoringMode::Ml => self
                .live
                .scorer
                .score(&DqFeatures::extract(w, &self.live.profile)?)?,
        };

        let dc = &self.cfg.drift;
        let (divergence, triggered) = match dc.mode {
            DriftMode::Active => {
                let d = drift::divergence(w, &self.live.profile)?;
                let history = self.live.profile.divergence_history.make_contiguous();
                let verdict = drift::detect_active(d, history, dc.tau, dc.warmup);
                drift::update_history(&mut self.live.profile.divergence_history, d);
                (Some(d), verdict.drift.then_some(Trigger::Drift))
            }
            DriftMode::Passive => (
                None,
                drift::passive_due(index, dc.w_passive).then_some(Trigger::Schedule),
            ),
            DriftMode::None => (None, None),
        };

        self.remember(w);
        let adapted = match triggered {
            Some(t) => matches!(self.adapt(t, Some(w.id))?, AdaptationEvent::Deployed(_)),
            None => false,
        };

        let features =
            featureize(w, self.state.labels.make_contiguous(), &self.cfg.features)?.values;
        let predicted = self.live.model.predict(&features)?;
        self.state.pending.push_back(Pending {
            cycle_id: w.cycle_id,
            features,
            score,
        });
        while self.state.pending.len() > 16 {
            self.state.pending.pop_front();
        }

        let t_ready = self.now_ns();
        Ok(PredictionRecord {
            window_id: w.id,
            cycle_id: w.cycle_id,
            dq_score: score,
            divergence,
            drift: triggered == Some(Trigger::Drift),
            adapted,
            predicted_min_pressure: predicted,
            deployment: self.live.deployment,
            t_ingest,
            t_ready,
            latency_ns: t_ready - t_ingest,
        })
    }

    fn remember(&mut self, w: &Window) {
        let k = self.cfg.drift.rebase_windows;
        self.state.recent.push_back(w.clone());
        self.state
            .recent_defects
            .push_back(defect_rate(w, &self.live.profile));
        while self.state.recent.len() > k {
            self.state.recent.pop_front();
            self.state.recent_defects.pop_front();
        }
    }

    /// A completed cycle's label: moves the cycle's pending features into
    /// the training buffer and extends the label history.
    pub fn observe_label(&mut self, cycle_id: u64, label: f64) -> Result<()> {
        if let Some(i) = self
            .state
            .pending
            .iter()
            .position(|p| p.cycle_id == cycle_id)
        {
            let p = self.state.pending.remove(i).expect("index in range");
            self.state.buffer.push_back(TrainingRow {
                features: p.features,
                label,
                score: p.score,
            });
            while self.state.buffer.len() > self.cfg.buffer_size {
                self.state.buffer.pop_front();
            }
        }
        self.state.labels.push_back(label);
        while self.state.labels.len() > self.cfg.features.f_history.max(1) {
            self.state.labels.pop_front();
        }
        self.state.last_cycle_id = Some(cycle_id);
        self.registry.log_event(Event::Label { cycle_id, label })?;
        Ok(())
    }

    /// Windows the cycle's prediction window, steps it, then records the
    /// cycle's label (given, or its minimum).
    pub fn process_cycle(&mut self, cycle: &PumpCycle) -> Result<PredictionRecord> {
        let w = cycle_window(cycle, self.cfg.window_size, self.state.next_window_id);
        self.state.next_window_id += 1;
        let out = self.step(&w);
        let label = cycle.label.map_or_else(|| extract_label(cycle).ok(), Some);
        match label {
            Some(l) => self.observe_label(cycle.cycle_id, l)?,
            None => self.state.last_cycle_id = Some(cycle.cycle_id),
        }
        out
    }

    /// Retrains every artifact on recent data and deploys the result. Lack
    /// of data skips the adaptation and keeps the current deployment.
    pub fn adapt(&mut self, trigger: Trigger, window_id: Option<u64>) -> Result<AdaptationEvent> {
        match self.build_adaptation() {
            Ok(live) => {
                let d = self.deploy(live, trigger, window_id)?;
                self.stats.adaptations += 1;
                Ok(AdaptationEvent::Deployed(d))
            }
            Err(Error::Core(
                e @ (dqpipe_core::Error::InsufficientData(_)
                | dqpipe_core::Error::DegenerateCorpus(_)),
            )) => {
                self.stats.skipped_adaptations += 1;
                let reason = e.to_string();
                self.registry.log_event(Event::AdaptationSkipped {
                    window_id: window_id.unwrap_or(u64::MAX),
                    trigger: trigger.as_str().into(),
                    reason: reason.clone(),
                })?;
                Ok(AdaptationEvent::Skipped(reason))
            }
            Err(e) => Err(e),
        }
    }

    fn build_adaptation(&self) -> Result<LiveSet> {
        let cfg = &self.cfg;
        if self.state.recent.len() < cfg.drift.rebase_windows {
            return Err(dqpipe_core::Error::InsufficientData("fewer than K recent windows").into());
        }
        let recent: Vec<Window> = self.state.recent.iter().cloned().collect();
        let defects: Vec<f64> = self.state.recent_defects.iter().copied().collect();
        let clean = clean_subset(&recent, &defects);
        let model = train_inference(&self.state.buffer, cfg)?;
        let base = drift::rebase_reference(&clean, &self.live.profile)?;
        let (profile, scorer, _) = build_scoring(&clean, base, cfg)?;
        Ok(LiveSet {
            profile,
            scorer,
            model,
            deployment: self.live.deployment,
        })
    }

    /// Registers all four artifacts under one new deployment id and swaps
    /// them in.
    fn deploy(
        &mut self,
        mut live: LiveSet,
        trigger: Trigger,
        window_id: Option<u64>,
    ) -> Result<Deployment> {
        let deployment_id = self.state.next_deployment_id;
        let prev = self.registry.deployment()?;
        let mut meta = BTreeMap::from([
            ("trigger".to_string(), trigger.as_str().to_string()),
            ("deployment_id".to_string(), deployment_id.to_string()),
            ("config_hash".to_string(), self.cfg_hash.clone()),
            ("created_at".to_string(), unix_seconds().to_string()),
        ]);
        if let Some(w) = window_id {
            meta.insert("window_id".into(), w.to_string());
        }

        let unifier = live
            .profile
            .unifier
            .clone()
            .ok_or(Error::NoArtifact(ArtifactKind::Unifier))?;
        let mut stored_profile = live.profile.clone();
        stored_profile.unifier = None;
        let doc = ModelDoc {
            schema_version: SCHEMA_VERSION,
            config_hash: self.cfg_hash.clone(),
            model: live.model.clone(),
            features: self.cfg.features,
            window_size: self.cfg.window_size,
            threshold: self.cfg.threshold,
            training_rows: filter_by_quality(
                self.state.buffer.make_contiguous(),
                self.cfg.threshold,
            )
            .len(),
            recent_labels: self.state.labels.iter().copied().collect(),
        };
        let payloads = [
            (
                ArtifactKind::ReferenceProfile,
                encode_doc(&stored_profile, None)?,
            ),
            (ArtifactKind::Unifier, encode_doc(&unifier, None)?),
            (
                ArtifactKind::DqScorer,
                encode_doc(&live.scorer, Some(&self.cfg_hash))?,
            ),
            (ArtifactKind::InferenceModel, serde_json::to_vec(&doc)?),
        ];
        let mut versions = [0u64; 4];
        for (slot, (kind, bytes)) in versions.iter_mut().zip(payloads) {
            let mut m = meta.clone();
            if let Some(p) = prev {
                m.insert("parent_version".into(), p.version(kind).to_string());
            }
            *slot = self.registry.put_artifact(kind, &bytes, m)?;
        }
        let d = Deployment {
            deployment_id,
            reference_profile: versions[0],
            unifier: versions[1],
            dq_scorer: versions[2],
            inference_model: versions[3],
        };
        self.registry.set_deployment(&d)?;
        self.registry.log_event(Event::Deployment {
            deployment: d,
            trigger: trigger.as_str().into(),
            window_id,
        })?;
        self.state.next_deployment_id += 1;
        live.deployment = d;
        live.profile.divergence_history.clear();
        self.live = live;
        Ok(d)
    }
}

fn train_inference(buffer: &VecDeque<TrainingRow>, cfg: &PipelineConfig) -> Result<GbdtModel> {
    let rows: Vec<&TrainingRow> = buffer
        .iter()
        .filter(|r| r.score.value() >= cfg.threshold)
        .collect();
    if rows.len() < cfg.min_labels {
        return Err(dqpipe_core::Error::InsufficientData(
            "too few labelled cycles pass the quality threshold",
        )
        .into());
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.label).collect();
    Ok(train_gbdt(&x, &y, &cfg.inference)?)
}

fn unix_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// One row per corpus entry: the DQ feature columns then `unified_score`.
pub fn write_corpus_csv(path: &Path, corpus: &[(DqFeatures, UnifiedScore)]) -> Result<()> {
    let mut out = DqFeatures::NAMES.join(",");
    out.push_str(",unified_score\n");
    for (f, s) in corpus {
        for v in f.to_vec() {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", s.value()));
    }
    fs::write(path, out).map_err(Error::io(path))
}

pub const PREDICTIONS_HEADER: &str = "window_id,cycle_id,dq_score,divergence,drift,adapted,predicted_min_pressure,label,deployment_id,inference_model_version,dq_scorer_version,latency_ns";

/// Appends prediction rows to `predictions.csv`.
pub struct PredictionsWriter {
    out: std::io::BufWriter<fs::File>,
}

impl PredictionsWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let path = dir.join("predictions.csv");
        let exists = path.exists();
        let f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(Error::io(&path))?;
        let mut out = std::io::BufWriter::new(f);
        if !exists {
            writeln!(out, "{PREDICTIONS_HEADER}").map_err(Error::io(&path))?;
        }
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &PredictionRecord, label: Option<f64>) -> Result<()> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.window_id,
            r.cycle_id,
            r.dq_score.value(),
            opt(r.divergence),
            r.drift,
            r.adapted,
            r.predicted_min_pressure,
            opt(label),
            r.deployment.deployment_id,
            r.deployment.inference_model,
            r.deployment.dq_scorer,
            r.latency_ns
        )
        .map_err(Error::io("predictions.csv"))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(Error::io("predictions.csv"))
    }
}
