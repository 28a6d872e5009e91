//! Pipeline and run configuration, loaded from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use dqpipe_core::datamodel::DEFAULT_WINDOW_SIZE;
use dqpipe_core::dqscore::{Constraints, ScoreOptions, DEFAULT_BINS};
use dqpipe_core::drift::{DriftConfig, DriftMode};
use dqpipe_core::ingest::{FeatureConfig, SynthConfig};
use dqpipe_core::learn::GbdtParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringMode {
    Direct,
    Ml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_size: usize,
    /// Acceptability threshold on the unified score, in `[0, 100]`.
    pub threshold: f64,
    /// Completed cycles kept for retraining.
    pub buffer_size: usize,
    pub scoring: ScoringMode,
    pub seed: u64,
    pub lenient_timeliness: bool,
    pub bins: usize,
    pub min_valid: f64,
    pub max_valid: f64,
    /// Most clean windows an annotated corpus is built from.
    pub corpus_windows: usize,
    /// Labelled cycles (after quality filtering) required to retrain.
    pub min_labels: usize,
    pub features: FeatureConfig,
    pub drift: DriftConfig,
    pub inference: GbdtParams,
    pub dq_scorer: GbdtParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_size: DEFAULT_WINDOW_SIZE,
            threshold: 50.0,
            buffer_size: 500,
            scoring: ScoringMode::Ml,
            seed: 0,
            lenient_timeliness: false,
            bins: DEFAULT_BINS,
            min_valid: 0.0,
            max_valid: 200.0,
            corpus_windows: 100,
            min_labels: 20,
            features: FeatureConfig::default(),
            drift: DriftConfig::default(),
            inference: GbdtParams::default(),
            dq_scorer: GbdtParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold {} not in [0, 100]",
                self.threshold
            )));
        }
        if self.window_size < 2 {
            return Err(Error::Config("window size must be at least 2".into()));
        }
        if self.buffer_size == 0 || self.corpus_windows == 0 || self.bins == 0 {
            return Err(Error::Config(
                "buffer size, corpus windows and bins must be positive".into(),
            ));
        }
        self.features.validate(self.window_size)?;
        self.drift.validate()?;
        self.inference.validate()?;
        self.dq_scorer.validate()?;
        Constraints::new(self.min_valid, self.max_valid)?;
        Ok(())
    }

    pub fn constraints(&self) -> Constraints {
        Constraints {
            min_valid: self.min_valid,
            max_valid: self.max_valid,
        }
    }

    pub fn score_options(&self) -> ScoreOptions {
        ScoreOptions {
            lenient_timeliness: self.lenient_timeliness,
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Applies a strategy's drift mode and scoring mode.
    pub fn with_strategy(mut self, s: Strategy) -> Self {
        match s {
            Strategy::Standard => {
                self.drift.mode = DriftMode::None;
                self.scoring = ScoringMode::Direct;
            }
            Strategy::Active { tau } => {
                self.drift.mode = DriftMode::Active;
                self.drift.tau = tau;
                self.scoring = ScoringMode::Ml;
            }
            Strategy::Passive { every } => {
                self.drift.mode = DriftMode::Passive;
                self.drift.w_passive = every;
                self.scoring = ScoringMode::Ml;
            }
        }
        self
    }
}

/// An adaptation strategy of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Strategy {
    Standard,
    Active { tau: f64 },
    Passive { every: u64 },
}

impl Strategy {
    pub fn default_grid() -> Vec<Strategy> {
        vec![
            Strategy::Standard,
            Strategy::Active { tau: 0.04 },
            Strategy::Active { tau: 0.06 },
            Strategy::Active { tau: 0.08 },
            Strategy::Passive { every: 50 },
            Strategy::Passive { every: 100 },
            Strategy::Passive { every: 200 },
        ]
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Standard => f.write_str("standard"),
            Strategy::Active { tau } => write!(f, "active_{tau}"),
            Strategy::Passive { every } => write!(f, "passive_{every}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Cycle directory read by `init`, and by `run` without `--source`.
    pub source: PathBuf,
    /// Registry root.
    pub store: PathBuf,
    /// Directory receiving `predictions.csv`.
    pub out: PathBuf,
    /// Leading cycles of the source consumed by `init`.
    pub baseline_cycles: usize,
    /// Replay rate multiplier for directory sources; `inf` never sleeps.
    pub speedup: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: PathBuf::from("data"),
            store: PathBuf::from("store"),
            out: PathBuf::from("out"),
            baseline_cycles: 200,
            speedup: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Stream generator; the built-in benchmark stream when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream: Option<SynthConfig>,
    /// Leading cycles of each stream used for initialization.
    pub baseline: usize,
    pub thresholds: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub repeats: usize,
    /// Timed reruns per cell; the median cumulative latency is reported.
    pub latency_runs: usize,
    pub rolling: usize,
    /// Keep the event log of every repeat under `<out>/logs`, not just the
    /// first.
    pub keep_logs: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            stream: None,
            baseline: 200,
            thresholds: vec![0.0, 25.0, 50.0, 75.0, 90.0],
            strategies: Strategy::default_grid(),
            repeats: 5,
            latency_runs: 3,
            rolling: 25,
            keep_logs: false,
        }
    }
}

/// Everything a config file may hold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub synth: SynthConfig,
    pub run: RunConfig,
    pub bench: BenchConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let cfg: Config = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.pipeline.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
