//! Strategy × threshold experiment grid over a replayed synthetic stream.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dqpipe_core::ingest::{synth_generate, CorruptionSpan, RegimeChange, SynthConfig};
use dqpipe_core::learn::evaluate;
use dqpipe_core::mutate::{MutationOp, MutationPlan};
use dqpipe_core::PumpCycle;
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, PipelineConfig, Strategy};
use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::runtime::Pipeline;

/// Leading cycles consumed by initialization in the default stream.
pub const DEFAULT_BASELINE: usize = 200;
/// Streamed windows after the baseline in the default stream.
pub const DEFAULT_STREAM_WINDOWS: usize = 1500;

/// Generator corruption catalogue of the default stream.
pub fn stream_corruption_plans() -> Vec<MutationPlan> {
    use MutationOp as M;
    vec![
        MutationPlan::new(vec![M::missing(0.3, 11)]),
        MutationPlan::new(vec![M::anomaly(0.05, 1.0, 12)]),
        MutationPlan::new(vec![M::out_of_range(0.1, 13)]),
        MutationPlan::new(vec![M::shift(1.5)]),
        MutationPlan::new(vec![M::missing(0.1, 14), M::shift(1.0)]),
    ]
}

/// The benchmark stream: a baseline followed by three decay regimes, with a
/// share of cycles corrupted throughout.
pub fn default_stream(seed: u64) -> SynthConfig {
    let n = DEFAULT_BASELINE + DEFAULT_STREAM_WINDOWS;
    SynthConfig {
        n_cycles: n,
        p0_jitter: 0.05,
        lambda_jitter: 0.05,
        drift_schedule: vec![
            RegimeChange {
                cycle: 700,
                lambda: 1.2,
                noise_std: 0.5,
            },
            RegimeChange {
                cycle: 1200,
                lambda: 2.0,
                noise_std: 0.5,
            },
        ],
        corruption_schedule: vec![CorruptionSpan {
            start: 0,
            end: n,
            fraction: 0.3,
            plans: stream_corruption_plans(),
        }],
        seed,
        ..SynthConfig::default()
    }
}

/// One streamed window of a cell run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowTrace {
    pub window_id: u64,
    pub dq_score: f64,
    pub prediction: f64,
    pub label: f64,
    pub latency_ns: u64,
    pub adapted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub strategy: Strategy,
    pub threshold: f64,
    pub seed: u64,
    pub n_adaptations: u64,
    pub n_skipped: u64,
    pub n_errors: u64,
    pub mae: f64,
    pub r2: Option<f64>,
    /// Median over the timed runs.
    pub cumulative_latency_ns: u64,
    pub mean_dq: f64,
    /// Baseline windows below the threshold at init, by direct scoring.
    pub baseline_filtered: f64,
    pub trace: Vec<WindowTrace>,
}

/// Initializes on the first `baseline` cycles and streams the rest.
/// `store` receives the cell's registry.
pub fn run_cell(
    cycles: &[PumpCycle],
    baseline: usize,
    cfg: &PipelineConfig,
    strategy: Strategy,
    store: &Path,
) -> Result<CellRun> {
    if cycles.len() <= baseline {
        return Err(Error::InsufficientBaseline(
            "stream has no cycles after the baseline".into(),
        ));
    }
    let cfg = cfg.clone().with_strategy(strategy);
    let threshold = cfg.threshold;
    let seed = cfg.seed;
    let mut p = Pipeline::init(&cycles[..baseline], cfg, Registry::open(store)?)?;
    let filtered = p
        .training_buffer()
        .filter(|r| r.score.value() < threshold)
        .count() as f64
        / p.training_buffer().count().max(1) as f64;
    let mut trace = Vec::with_capacity(cycles.len() - baseline);
    for c in &cycles[baseline..] {
        let Ok(r) = p.process_cycle(c) else { continue };
        let label = c
            .label
            .map_or_else(|| dqpipe_core::extract_label(c).ok(), Some);
        if let Some(label) = label {
            trace.push(WindowTrace {
                window_id: r.window_id,
                dq_score: r.dq_score.value(),
                prediction: r.predicted_min_pressure,
                label,
                latency_ns: r.latency_ns,
                adapted: r.adapted,
            });
        }
    }
    let preds: Vec<f64> = trace.iter().map(|t| t.prediction).collect();
    let labels: Vec<f64> = trace.iter().map(|t| t.label).collect();
    let eval = evaluate(&preds, &labels)?;
    let stats = p.stats();
    Ok(CellRun {
        strategy,
        threshold,
        seed,
        n_adaptations: stats.adaptations,
        n_skipped: stats.skipped_adaptations,
        n_errors: stats.window_errors,
        mae: eval.mae,
        r2: eval.r2,
        cumulative_latency_ns: trace.iter().map(|t| t.latency_ns).sum(),
        mean_dq: trace.iter().map(|t| t.dq_score).sum::<f64>() / trace.len().max(1) as f64,
        baseline_filtered: filtered,
        trace,
    })
}

/// [`run_cell`] repeated `runs` times in fresh stores; non-latency outputs
/// come from the first run, cumulative latency is the median.
pub fn run_cell_timed(
    cycles: &[PumpCycle],
    baseline: usize,
    cfg: &PipelineConfig,
    strategy: Strategy,
    runs: usize,
    keep_log: Option<&Path>,
) -> Result<CellRun> {
    let mut first: Option<CellRun> = None;
    let mut latencies = Vec::new();
    for i in 0..runs.max(1) {
        let dir = tempfile::tempdir().map_err(Error::io(std::env::temp_dir()))?;
        let run = run_cell(cycles, baseline, cfg, strategy, dir.path())?;
        if i == 0 {
            if let Some(dest) = keep_log {
                if let Some(parent) = dest.parent() {
                    fs::create_dir_all(parent).map_err(Error::io(parent))?;
                }
                let src = dir.path().join(crate::registry::EVENTS_FILE);
                fs::copy(&src, dest).map_err(Error::io(&src))?;
            }
        }
        latencies.push(run.cumulative_latency_ns);
        if first.is_none() {
            first = Some(run);
        }
    }
    latencies.sort_unstable();
    let mut out = first.expect("at least one run");
    out.cumulative_latency_ns = latencies[(latencies.len() - 1) / 2];
    Ok(out)
}

/// A failed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub strategy: Strategy,
    pub threshold: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub runs: Vec<CellRun>,
    pub errors: Vec<CellError>,
}

/// Runs every strategy × threshold cell for `repeats` stream seeds. The
/// stream of a seed is generated once and replayed for all its cells.
pub fn run_grid(
    stream: &SynthConfig,
    baseline: usize,
    base: &PipelineConfig,
    grid: &BenchConfig,
    log_dir: Option<&Path>,
) -> Result<GridResult> {
    let mut out = GridResult::default();
    for rep in 0..grid.repeats.max(1) as u64 {
        let seed = stream.seed + rep;
        let cycles: Vec<PumpCycle> = synth_generate(SynthConfig {
            seed,
            ..stream.clone()
        })?
        .collect();
        for &strategy in &grid.strategies {
            for &threshold in &grid.thresholds {
                let cfg = PipelineConfig {
                    threshold,
                    seed,
                    ..base.clone()
                };
                let log = log_dir
                    .filter(|_| grid.keep_logs || rep == 0)
                    .map(|d| d.join(format!("{strategy}_t{threshold}_s{seed}.jsonl")));
                match run_cell_timed(
                    &cycles,
                    baseline,
                    &cfg,
                    strategy,
                    grid.latency_runs,
                    log.as_deref(),
                ) {
                    Ok(run) => out.runs.push(run),
                    Err(e) => out.errors.push(CellError {
                        strategy,
                        threshold,
                        seed,
                        error: e.to_string(),
                    }),
                }
            }
        }
    }
    Ok(out)
}

/// Pearson correlation; `None` when either side has zero variance or the
/// series are shorter than 2.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlation of each window's dq score with the MAE and R² over the
/// trailing `rolling` windows ending at it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n_windows: usize,
    pub with_mae: Option<f64>,
    pub with_r2: Option<f64>,
}

pub fn correlate(trace: &[WindowTrace], rolling: usize) -> Result<Correlation> {
    if trace.len() < 30 || rolling < 2 || trace.len() < rolling {
        return Err(
            dqpipe_core::Error::InsufficientData("correlation needs at least 30 windows").into(),
        );
    }
    let mut dq = Vec::new();
    let mut mae = Vec::new();
    let mut dq_r2 = Vec::new();
    let mut r2 = Vec::new();
    for end in rolling..=trace.len() {
        let win = &trace[end - rolling..end];
        let preds: Vec<f64> = win.iter().map(|t| t.prediction).collect();
        let labels: Vec<f64> = win.iter().map(|t| t.label).collect();
        let e = evaluate(&preds, &labels)?;
        let q = trace[end - 1].dq_score;
        dq.push(q);
        mae.push(e.mae);
        if let Some(v) = e.r2 {
            dq_r2.push(q);
            r2.push(v);
        }
    }
    Ok(Correlation {
        n_windows: trace.len(),
        with_mae: pearson(&dq, &mae),
        with_r2: pearson(&dq_r2, &r2),
    })
}

/// Value written for undefined statistics.
pub const UNDEFINED: &str = "undefined";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| format!("{v:.6}"))
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Cells of one strategy and threshold, across seeds.
fn group(runs: &[CellRun], s: Strategy, t: f64) -> impl Iterator<Item = &CellRun> + Clone {
    runs.iter()
        .filter(move |r| r.strategy == s && r.threshold == t)
}

fn cells(runs: &[CellRun]) -> Vec<(Strategy, f64)> {
    let mut out: Vec<(Strategy, f64)> = Vec::new();
    for r in runs {
        if !out.contains(&(r.strategy, r.threshold)) {
            out.push((r.strategy, r.threshold));
        }
    }
    out
}

pub const GRID_HEADER: &str =
    "strategy,threshold,repeats,n_adaptations,mae,r2,cumulative_latency_ns,mean_dq_score,baseline_filtered";
pub const RUNS_HEADER: &str =
    "strategy,threshold,seed,n_adaptations,n_skipped,n_errors,mae,r2,cumulative_latency_ns,mean_dq_score,baseline_filtered";
pub const LATENCY_HEADER: &str =
    "strategy,threshold,seed,window_index,window_id,latency_ns,cumulative_latency_ns";
pub const SWEEP_HEADER: &str =
    "strategy,threshold,repeats,mae_mean,mae_min,mae_max,r2_mean,baseline_filtered";
pub const CORRELATIONS_HEADER: &str = "strategy,threshold,seed,n_windows,corr_dq_mae,corr_dq_r2";

/// Writes `grid.csv`, `grid_runs.csv`, `latency_trend.csv`,
/// `quality_sweep.csv`, `correlations.csv` and `errors.csv` into `dir`.
pub fn report(dir: &Path, grid: &GridResult, rolling: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let runs = &grid.runs;
    let mut files = Vec::new();
    let mut write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body).map_err(Error::io(&path))?;
        files.push(path);
        Ok(())
    };

    let mut g = format!("{GRID_HEADER}\n");
    let mut sweep = format!("{SWEEP_HEADER}\n");
    for (s, t) in cells(runs) {
        let rs = group(runs, s, t);
        let k = rs.clone().count();
        let mut lat: Vec<u64> = rs.clone().map(|r| r.cumulative_latency_ns).collect();
        lat.sort_unstable();
        let mae = mean(rs.clone().map(|r| r.mae)).unwrap_or(f64::NAN);
        let r2 = mean(rs.clone().filter_map(|r| r.r2));
        let filtered = mean(rs.clone().map(|r| r.baseline_filtered)).unwrap_or(f64::NAN);
        let _ = writeln!(
            g,
            "{s},{t},{k},{:.2},{mae:.6},{},{},{:.4},{filtered:.4}",
            mean(rs.clone().map(|r| r.n_adaptations as f64)).unwrap_or(0.0),
            opt(r2),
            lat[(lat.len() - 1) / 2],
            mean(rs.clone().map(|r| r.mean_dq)).unwrap_or(f64::NAN),
        );
        let (lo, hi) = rs
            .clone()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
                (a.min(r.mae), b.max(r.mae))
            });
        let _ = writeln!(
            sweep,
            "{s},{t},{k},{mae:.6},{lo:.6},{hi:.6},{},{filtered:.4}",
            opt(r2)
        );
    }
    write("grid.csv", g)?;
    write("quality_sweep.csv", sweep)?;

    let mut per_run = format!("{RUNS_HEADER}\n");
    let mut corr = format!("{CORRELATIONS_HEADER}\n");
    let mut trend = format!("{LATENCY_HEADER}\n");
    let first_seed = runs.iter().map(|r| r.seed).min();
    for r in runs {
        let _ = writeln!(
            per_run,
            "{},{},{},{},{},{},{:.6},{},{},{:.4},{:.4}",
            r.strategy,
            r.threshold,
            r.seed,
            r.n_adaptations,
            r.n_skipped,
            r.n_errors,
            r.mae,
            opt(r.r2),
            r.cumulative_latency_ns,
            r.mean_dq,
            r.baseline_filtered
        );
        let c = correlate(&r.trace, rolling).ok();
        let _ = writeln!(
            corr,
            "{},{},{},{},{},{}",
            r.strategy,
            r.threshold,
            r.seed,
            r.trace.len(),
            opt(c.and_then(|c| c.with_mae)),
            opt(c.and_then(|c| c.with_r2))
        );
        if Some(r.seed) == first_seed {
            let mut cum = 0u64;
            for (i, t) in r.trace.iter().enumerate() {
                cum += t.latency_ns;
                let _ = writeln!(
                    trend,
                    "{},{},{},{},{},{},{}",
                    r.strategy, r.threshold, r.seed, i, t.window_id, t.latency_ns, cum
                );
            }
        }
    }
    write("grid_runs.csv", per_run)?;
    write("correlations.csv", corr)?;
    write("latency_trend.csv", trend)?;

    let mut errs = String::from("strategy,threshold,seed,error\n");
    for e in &grid.errors {
        let _ = writeln!(
            errs,
            "{},{},{},\"{}\"",
            e.strategy,
            e.threshold,
            e.seed,
            e.error.replace('"', "'")
        );
    }
    write("errors.csv", errs)?;
    Ok(files)
}
