use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dqpipe::bench::{self, default_stream};
use dqpipe::config::Config;
use dqpipe::io::{self, SocketCycles};
use dqpipe::registry::Registry;
use dqpipe::runtime::{Pipeline, PredictionsWriter};
use dqpipe::serve::{self, Server};
use dqpipe::{Error, Result};
use dqpipe_core::ingest::synth_generate;
use dqpipe_core::{extract_label, PumpCycle};

#[derive(Parser)]
#[command(
    name = "dqpipe",
    version,
    about = "Data-quality-aware streaming prediction pipeline"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic pump cycles and their labels.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and register the first deployment from baseline cycles.
    Init {
        #[arg(long)]
        config: PathBuf,
        /// Cycle directory; defaults to `run.source`.
        #[arg(long)]
        source: Option<PathBuf>,
    },
    /// Stream cycles through the pipeline.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// A cycle directory, `tcp:<addr>` to accept one connection, or `-`
        /// for standard input.
        #[arg(long)]
        source: Option<String>,
    },
    /// Answer PREDICT frames from standard input or a TCP listener.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run the strategy × threshold grid and write the report CSVs.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth { config, out } => synth(&Config::load(&config)?, &out),
        Cmd::Init { config, source } => {
            let cfg = Config::load(&config)?;
            let source = source.unwrap_or_else(|| cfg.run.source.clone());
            init(&cfg, &source)
        }
        Cmd::Run { config, source } => run(&Config::load(&config)?, source.as_deref()),
        Cmd::Serve { config, listen } => {
            let cfg = Config::load(&config)?;
            let mut server = Server::open(&cfg.run.store)?;
            match listen {
                Some(addr) => serve::listen(server, addr),
                None => {
                    let stdin = std::io::stdin().lock();
                    server.serve(stdin, std::io::stdout().lock()).map(|_| ())
                }
            }
        }
        Cmd::Bench {
            config,
            out,
            repeats,
        } => {
            let mut cfg = Config::load(&config)?;
            if let Some(r) = repeats {
                cfg.bench.repeats = r;
            }
            bench_cmd(&cfg, &out)
        }
    }
}

fn label_of(c: &PumpCycle) -> Option<f64> {
    c.label.or_else(|| extract_label(c).ok())
}

fn synth(cfg: &Config, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(Error::io(out))?;
    let mut labels = Vec::new();
    for c in synth_generate(cfg.synth.clone())? {
        io::write_cycle_csv(out, &c)?;
        if let Some(l) = label_of(&c) {
            labels.push((c.cycle_id, l));
        }
    }
    io::write_labels(out, &labels)?;
    eprintln!("wrote {} cycles to {}", labels.len(), out.display());
    Ok(())
}

fn init(cfg: &Config, source: &Path) -> Result<()> {
    let registry = Registry::open(&cfg.run.store)?;
    if registry.deployment()?.is_some() {
        return Err(Error::Config(format!(
            "store {} is already initialized",
            cfg.run.store.display()
        )));
    }
    let mut cycles = io::load_cycle_dir(source)?;
    cycles.truncate(cfg.run.baseline_cycles);
    let p = Pipeline::init(&cycles, cfg.pipeline.clone(), registry)?;
    let d = p.live().deployment;
    eprintln!(
        "initialized {} from {} cycles: deployment {}",
        cfg.run.store.display(),
        cycles.len(),
        d.deployment_id
    );
    Ok(())
}

fn run(cfg: &Config, source: Option<&str>) -> Result<()> {
    let mut p = Pipeline::resume(cfg.pipeline.clone(), Registry::open(&cfg.run.store)?)?;
    let mut preds = PredictionsWriter::create(&cfg.run.out)?;
    let result = match source {
        Some("-") => {
            let stdin = std::io::stdin().lock();
            stream(&mut p, &mut preds, SocketCycles::new(stdin))
        }
        Some(s) if s.starts_with("tcp:") => {
            let addr = &s["tcp:".len()..];
            let listener = TcpListener::bind(addr).map_err(Error::io(addr))?;
            let (conn, _) = listener.accept().map_err(Error::io(addr))?;
            stream(&mut p, &mut preds, SocketCycles::new(BufReader::new(conn)))
        }
        dir => {
            let dir = dir.map_or_else(|| cfg.run.source.clone(), PathBuf::from);
            let cycles = directory_cycles(&dir, p.last_cycle_id(), cfg.run.speedup)?;
            stream(&mut p, &mut preds, cycles)
        }
    };
    preds.flush()?;
    p.save_checkpoint()?;
    let stats = p.stats();
    eprintln!(
        "processed {} windows, {} adaptations ({} skipped), {} window errors",
        stats.windows, stats.adaptations, stats.skipped_adaptations, stats.window_errors
    );
    result
}

/// Cycles of `dir` after `after`, read lazily at the configured replay rate.
fn directory_cycles(
    dir: &Path,
    after: Option<u64>,
    speedup: f64,
) -> Result<impl Iterator<Item = Result<PumpCycle>>> {
    let labels_path = dir.join(io::LABELS_FILE);
    let labels = if labels_path.exists() {
        io::read_labels(&labels_path)?
    } else {
        Default::default()
    };
    let files = io::list_cycles(dir)?
        .into_iter()
        .filter(move |(id, _)| after.is_none_or(|a| *id > a));
    Ok(files.map(move |(id, path)| {
        let readings = io::replay_source(&path, speedup)?.collect::<Result<Vec<_>>>()?;
        Ok(PumpCycle {
            cycle_id: id,
            readings,
            label: labels.get(&id).copied(),
        })
    }))
}

const CHECKPOINT_EVERY: u64 = 50;

fn stream(
    p: &mut Pipeline,
    preds: &mut PredictionsWriter,
    cycles: impl Iterator<Item = Result<PumpCycle>>,
) -> Result<()> {
    let mut n = 0u64;
    for c in cycles {
        let c = c?;
        if p.last_cycle_id().is_some_and(|last| c.cycle_id <= last) {
            continue;
        }
        match p.process_cycle(&c) {
            Ok(r) => preds.write(&r, label_of(&c))?,
            // Already logged as a window error; the stream goes on.
            Err(Error::Core(e)) => eprintln!("cycle {}: {e}", c.cycle_id),
            Err(e) => return Err(e),
        }
        n += 1;
        if n.is_multiple_of(CHECKPOINT_EVERY) {
            preds.flush()?;
            p.save_checkpoint()?;
        }
    }
    Ok(())
}

fn bench_cmd(cfg: &Config, out: &Path) -> Result<()> {
    let stream = cfg
        .bench
        .stream
        .clone()
        .unwrap_or_else(|| default_stream(cfg.pipeline.seed));
    let grid = bench::run_grid(
        &stream,
        cfg.bench.baseline,
        &cfg.pipeline,
        &cfg.bench,
        Some(&out.join("logs")),
    )?;
    let files = bench::report(out, &grid, cfg.bench.rolling)?;
    let mut stderr = std::io::stderr().lock();
    for f in files {
        let _ = writeln!(stderr, "wrote {}", f.display());
    }
    for e in &grid.errors {
        let _ = writeln!(
            stderr,
            "cell {} t{} s{} failed: {}",
            e.strategy, e.threshold, e.seed, e.error
        );
    }
    Ok(())
}
