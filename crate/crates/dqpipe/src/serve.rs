//! Line-protocol prediction endpoint.
//!
//! Requests are `PREDICT <cycle_id> <path>` where the file holds the cycle's
//! readings in the cycle CSV format. A response is one line,
//! `cycle_id predicted_value dq_score model_version latency_ns`, or
//! `ERR <reason>`.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, ToSocketAddrs};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use dqpipe_core::ingest::{cycle_window, featureize};
use dqpipe_core::learn::DqFeatures;

use crate::error::{Error, Result};
use crate::io::read_cycle_csv;
use crate::registry::Registry;
use crate::runtime::{LiveSet, ModelDoc};

/// A successful answer to one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub cycle_id: u64,
    pub predicted: f64,
    pub dq_score: f64,
    pub model_version: u64,
    pub latency_ns: u64,
}

impl Response {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.cycle_id, self.predicted, self.dq_score, self.model_version, self.latency_ns
        )
    }
}

/// Read-only predictor over a registry's current deployment. Picks up a
/// new deployment on the first frame after the pointer moves.
pub struct Server {
    registry: Registry,
    live: LiveSet,
    doc: ModelDoc,
}

impl Server {
    pub fn open(store: &Path) -> Result<Self> {
        let registry = Registry::open_read_only(store)?;
        let (live, doc) = LiveSet::load(&registry)?;
        Ok(Self {
            registry,
            live,
            doc,
        })
    }

    pub fn model_version(&self) -> u64 {
        self.live.deployment.inference_model
    }

    fn refresh(&mut self) -> Result<()> {
        if let Some(d) = self.registry.deployment()? {
            if d != self.live.deployment {
                (self.live, self.doc) = LiveSet::load(&self.registry)?;
            }
        }
        Ok(())
    }

    pub fn predict(&mut self, cycle_id: u64, path: &Path) -> Result<Response> {
        let start = Instant::now();
        self.refresh()?;
        let cycle = read_cycle_csv(path, cycle_id)?;
        let w = cycle_window(&cycle, self.doc.window_size, 0);
        let score = self
            .live
            .scorer
            .score(&DqFeatures::extract(&w, &self.live.profile)?)?;
        let x = featureize(&w, &self.doc.recent_labels, &self.doc.features)?;
        let predicted = self.live.model.predict(&x.values)?;
        Ok(Response {
            cycle_id,
            predicted,
            dq_score: score.value(),
            model_version: self.model_version(),
            latency_ns: start.elapsed().as_nanos() as u64,
        })
    }

    /// Answers one request line. Never fails; errors become `ERR` lines.
    pub fn handle(&mut self, frame: &str) -> String {
        match parse_frame(frame).and_then(|(id, path)| self.predict(id, Path::new(path))) {
            Ok(r) => r.to_line(),
            Err(e) => format!("ERR {}", one_line(&e.to_string())),
        }
    }

    /// Serves frames from `input` until end of stream. Returns the number
    /// of responses written.
    pub fn serve<R: BufRead, W: Write>(&mut self, input: R, mut out: W) -> Result<usize> {
        let mut n = 0;
        for line in input.lines() {
            let line = line.map_err(Error::io("<input>"))?;
            if line.trim().is_empty() {
                continue;
            }
            writeln!(out, "{}", self.handle(&line)).map_err(Error::io("<output>"))?;
            out.flush().map_err(Error::io("<output>"))?;
            n += 1;
        }
        Ok(n)
    }
}

/// Accepts TCP connections forever. Connections are read concurrently but
/// frames are answered one at a time.
pub fn listen(server: Server, addr: impl ToSocketAddrs) -> Result<()> {
    let listener = TcpListener::bind(addr).map_err(Error::io("<listen>"))?;
    let server = Mutex::new(server);
    std::thread::scope(|s| {
        for conn in listener.incoming() {
            let Ok(conn) = conn else { continue };
            let server = &server;
            s.spawn(move || {
                let Ok(reader) = conn.try_clone() else { return };
                let mut out = conn;
                for line in BufReader::new(reader).lines() {
                    let Ok(line) = line else { break };
                    if line.trim().is_empty() {
                        continue;
                    }
                    let reply = server
                        .lock()
                        .unwrap_or_else(|p| p.into_inner())
                        .handle(&line);
                    if writeln!(out, "{reply}").is_err() {
                        break;
                    }
                }
            });
        }
    });
    Ok(())
}

fn parse_frame(frame: &str) -> Result<(u64, &str)> {
    let bad = |reason: &str| Error::BadRequest(reason.into());
    let mut parts = frame.trim().splitn(3, char::is_whitespace);
    if parts.next() != Some("PREDICT") {
        return Err(bad("expected PREDICT <cycle_id> <path>"));
    }
    let id = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("cycle id is not a non-negative integer"))?;
    let path = parts.next().map(str::trim).filter(|p| !p.is_empty());
    Ok((id, path.ok_or_else(|| bad("missing path"))?))
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}
