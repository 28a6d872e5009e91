//! Canonical on-disk cycle format and stream sources.
//!
//! A cycle is a CSV file `cycle_<id>.csv` with header `timestamp_ns,value`;
//! an empty value field encodes a missing measurement. Labels live next to
//! the cycles in `labels.csv` with header `cycle_id,label`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use dqpipe_core::{PumpCycle, Reading};

use crate::error::{Error, Result};

pub const CYCLE_HEADER: &str = "timestamp_ns,value";
pub const LABELS_FILE: &str = "labels.csv";

pub fn cycle_file_name(id: u64) -> String {
    format!("cycle_{id}.csv")
}

/// Parses one `timestamp_ns,value` row.
pub fn parse_row(line: &str, line_no: usize) -> Result<Reading> {
    let malformed = |reason: &str| Error::MalformedRecord {
        line: line_no,
        reason: reason.to_string(),
    };
    let (ts, value) = line
        .trim_end_matches('\r')
        .split_once(',')
        .ok_or_else(|| malformed("expected two fields"))?;
    let timestamp_ns = ts
        .trim()
        .parse::<u64>()
        .map_err(|_| malformed("timestamp is not a non-negative integer"))?;
    let value = value.trim();
    let value = if value.is_empty() {
        None
    } else {
        let v = value
            .parse::<f64>()
            .map_err(|_| malformed("value is not a number"))?;
        if !v.is_finite() {
            return Err(malformed("value is not finite"));
        }
        Some(v)
    };
    Ok(Reading::new(timestamp_ns, value))
}

pub fn format_row(r: &Reading) -> String {
    match r.value {
        Some(v) => format!("{},{}", r.timestamp_ns, v),
        None => format!("{},", r.timestamp_ns),
    }
}

/// Streams readings from a cycle file in file order. With a finite
/// `speedup` the iterator sleeps so that readings are emitted at
/// `speedup` times their recorded rate; `f64::INFINITY` never sleeps.
pub fn replay_source(path: &Path, speedup: f64) -> Result<Replay<BufReader<File>>> {
    let f = File::open(path).map_err(Error::io(path))?;
    Ok(Replay::new(BufReader::new(f), speedup))
}

#[derive(Debug)]
pub struct Replay<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    speedup: f64,
    last_ts: Option<u64>,
}

impl<R: BufRead> Replay<R> {
    pub fn new(reader: R, speedup: f64) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            speedup,
            last_ts: None,
        }
    }
}

impl<R: BufRead> Iterator for Replay<R> {
    type Item = Result<Reading>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => {
                    return Some(Err(Error::MalformedRecord {
                        line: self.line_no,
                        reason: e.to_string(),
                    }))
                }
            };
            if line.trim().is_empty() || (self.line_no == 1 && line.trim() == CYCLE_HEADER) {
                continue;
            }
            let r = parse_row(&line, self.line_no);
            if let (Ok(r), true) = (&r, self.speedup.is_finite() && self.speedup > 0.0) {
                if let Some(prev) = self.last_ts {
                    let gap = r.timestamp_ns.saturating_sub(prev) as f64 / self.speedup;
                    std::thread::sleep(Duration::from_nanos(gap as u64));
                }
                self.last_ts = Some(r.timestamp_ns);
            }
            return Some(r);
        }
    }
}

pub fn read_cycle_csv(path: &Path, cycle_id: u64) -> Result<PumpCycle> {
    let readings = replay_source(path, f64::INFINITY)?.collect::<Result<Vec<_>>>()?;
    Ok(PumpCycle {
        cycle_id,
        readings,
        label: None,
    })
}

pub fn write_cycle_csv(dir: &Path, cycle: &PumpCycle) -> Result<PathBuf> {
    let path = dir.join(cycle_file_name(cycle.cycle_id));
    let f = File::create(&path).map_err(Error::io(&path))?;
    let mut w = BufWriter::new(f);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "{CYCLE_HEADER}")?;
        for r in &cycle.readings {
            writeln!(w, "{}", format_row(r))?;
        }
        w.flush()
    };
    write().map_err(Error::io(&path))?;
    Ok(path)
}

pub fn write_labels(dir: &Path, labels: &[(u64, f64)]) -> Result<()> {
    let path = dir.join(LABELS_FILE);
    let mut out = String::from("cycle_id,label\n");
    for (id, l) in labels {
        out.push_str(&format!("{id},{l}\n"));
    }
    fs::write(&path, out).map_err(Error::io(&path))
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<u64, f64>> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || (line_no == 1 && line.starts_with("cycle_id")) {
            continue;
        }
        let bad = |reason: &str| Error::MalformedRecord {
            line: line_no,
            reason: reason.into(),
        };
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| bad("expected two fields"))?;
        let id = id.trim().parse().map_err(|_| bad("bad cycle id"))?;
        let label = label.trim().parse().map_err(|_| bad("bad label"))?;
        out.insert(id, label);
    }
    Ok(out)
}

/// `(cycle_id, path)` for every `cycle_<id>.csv` in `dir`, ascending by id.
pub fn list_cycles(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
        let entry = entry.map_err(Error::io(dir))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name
            .strip_prefix("cycle_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<u64>().ok())
        {
            out.push((id, entry.path()));
        }
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

/// Loads every cycle in `dir`, attaching labels from `labels.csv` when the
/// file exists.
pub fn load_cycle_dir(dir: &Path) -> Result<Vec<PumpCycle>> {
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        read_labels(&labels_path)?
    } else {
        BTreeMap::new()
    };
    list_cycles(dir)?
        .into_iter()
        .map(|(id, path)| {
            let mut c = read_cycle_csv(&path, id)?;
            c.label = labels.get(&id).copied();
            Ok(c)
        })
        .collect()
}

/// Cycles arriving over a line-oriented connection: `timestamp_ns,value`
/// rows, each cycle terminated by `END <cycle_id> [label]`.
pub struct SocketCycles<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> SocketCycles<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for SocketCycles<R> {
    type Item = Result<PumpCycle>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut readings = Vec::new();
        loop {
            let Some(line) = self.lines.next() else {
                return (!readings.is_empty()).then(|| {
                    Err(Error::MalformedRecord {
                        line: self.line_no,
                        reason: "stream ended inside a cycle".into(),
                    })
                });
            };
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io("<socket>")(e))),
            };
            let t = line.trim();
            if t.is_empty() || t == CYCLE_HEADER {
                continue;
            }
            if let Some(rest) = t.strip_prefix("END") {
                let mut parts = rest.split_whitespace();
                let bad = |reason: &str| Error::MalformedRecord {
                    line: self.line_no,
                    reason: reason.into(),
                };
                let id = match parts.next().map(str::parse::<u64>) {
                    Some(Ok(id)) => id,
                    _ => return Some(Err(bad("END needs a cycle id"))),
                };
                let label = match parts.next().map(str::parse::<f64>) {
                    None => None,
                    Some(Ok(l)) => Some(l),
                    Some(Err(_)) => return Some(Err(bad("bad label"))),
                };
                return Some(Ok(PumpCycle {
                    cycle_id: id,
                    readings,
                    label,
                }));
            }
            match parse_row(t, self.line_no) {
                Ok(r) => readings.push(r),
                Err(e) => return Some(Err(e)),
            }
        }
    }
}
