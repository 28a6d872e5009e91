use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::Duration;

use dqpipe::config::PipelineConfig;
use dqpipe::io::write_cycle_csv;
use dqpipe::registry::Registry;
use dqpipe::runtime::{AdaptationEvent, Pipeline, Trigger};
use dqpipe::serve::{listen, Server};
use dqpipe_core::drift::DriftMode;
use dqpipe_core::ingest::{synth_generate, SynthConfig};
use dqpipe_core::PumpCycle;

fn cycles(n: usize) -> Vec<PumpCycle> {
    synth_generate(SynthConfig {
        n_cycles: n,
        p0_jitter: 0.05,
        lambda_jitter: 0.05,
        seed: 31,
        ..SynthConfig::default()
    })
    .unwrap()
    .collect()
}

fn config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.drift.mode = DriftMode::None;
    cfg
}

/// An initialized store plus cycle files for the cycles after the baseline.
struct Fixture {
    dir: tempfile::TempDir,
    cycles: Vec<PumpCycle>,
    files: Vec<PathBuf>,
}

impl Fixture {
    fn new(n: usize) -> Self {
        let cycles = cycles(200 + n);
        let dir = tempfile::tempdir().unwrap();
        Pipeline::init(
            &cycles[..200],
            config(),
            Registry::open(dir.path().join("store")).unwrap(),
        )
        .unwrap();
        let data = dir.path().join("data");
        std::fs::create_dir_all(&data).unwrap();
        let files = cycles[200..]
            .iter()
            .map(|c| write_cycle_csv(&data, c).unwrap())
            .collect();
        Self { dir, cycles, files }
    }

    fn store(&self) -> PathBuf {
        self.dir.path().join("store")
    }

    fn frames(&self) -> String {
        self.cycles[200..]
            .iter()
            .zip(&self.files)
            .map(|(c, f)| format!("PREDICT {} {}\n", c.cycle_id, f.display()))
            .collect()
    }
}

fn fields(line: &str) -> (u64, f64, f64, u64, u64) {
    let f: Vec<&str> = line.split(' ').collect();
    assert_eq!(f.len(), 5, "{line}");
    (
        f[0].parse().unwrap(),
        f[1].parse().unwrap(),
        f[2].parse().unwrap(),
        f[3].parse().unwrap(),
        f[4].parse().unwrap(),
    )
}

#[test]
fn answers_every_frame_in_order() {
    let fx = Fixture::new(100);
    let mut server = Server::open(&fx.store()).unwrap();
    let mut out = Vec::new();
    assert_eq!(server.serve(fx.frames().as_bytes(), &mut out).unwrap(), 100);
    let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
    assert_eq!(lines.len(), 100);
    for (line, c) in lines.iter().zip(&fx.cycles[200..]) {
        let (id, predicted, dq, version, latency) = fields(line);
        assert_eq!(id, c.cycle_id);
        assert!(predicted.is_finite());
        assert!((0.0..=100.0).contains(&dq));
        assert_eq!(version, 1);
        assert!(latency > 0);
    }
}

#[test]
fn serving_is_deterministic_and_read_only() {
    let fx = Fixture::new(10);
    let events = std::fs::read(fx.store().join("events.jsonl")).unwrap();
    let strip = |out: Vec<u8>| -> Vec<String> {
        String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(' ').unwrap().0.to_string())
            .collect()
    };
    let mut a = Vec::new();
    Server::open(&fx.store())
        .unwrap()
        .serve(fx.frames().as_bytes(), &mut a)
        .unwrap();
    let mut b = Vec::new();
    Server::open(&fx.store())
        .unwrap()
        .serve(fx.frames().as_bytes(), &mut b)
        .unwrap();
    assert_eq!(strip(a), strip(b));
    assert_eq!(
        std::fs::read(fx.store().join("events.jsonl")).unwrap(),
        events
    );
    // The server never holds the writer lock.
    Registry::open(fx.store()).unwrap();
}

#[test]
fn malformed_frames_get_err_and_service_continues() {
    let fx = Fixture::new(2);
    let mut server = Server::open(&fx.store()).unwrap();
    let good = format!("PREDICT 200 {}", fx.files[0].display());
    let input = [
        "HELLO",
        "PREDICT",
        "PREDICT -1 /x.csv",
        "PREDICT 7",
        "PREDICT 7 /definitely/not/here.csv",
        good.as_str(),
    ]
    .join("\n");
    let mut out = Vec::new();
    assert_eq!(server.serve(input.as_bytes(), &mut out).unwrap(), 6);
    let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().lines().collect();
    assert!(
        lines[..5].iter().all(|l| l.starts_with("ERR ")),
        "{lines:?}"
    );
    assert_eq!(fields(lines[5]).0, 200);
}

#[test]
fn unreadable_cycle_file_is_an_error_line() {
    let fx = Fixture::new(1);
    let bad = fx.dir.path().join("bad.csv");
    std::fs::write(&bad, "timestamp_ns,value\n1,abc\n").unwrap();
    let mut server = Server::open(&fx.store()).unwrap();
    assert!(server
        .handle(&format!("PREDICT 1 {}", bad.display()))
        .starts_with("ERR "));
}

#[test]
fn picks_up_new_deployment() {
    let fx = Fixture::new(130);
    let mut server = Server::open(&fx.store()).unwrap();
    let frame = format!("PREDICT 200 {}", fx.files[0].display());
    assert_eq!(fields(&server.handle(&frame)).3, 1);

    let mut p = Pipeline::resume(config(), Registry::open(fx.store()).unwrap()).unwrap();
    for c in &fx.cycles[200..] {
        p.process_cycle(c).unwrap();
    }
    assert!(matches!(
        p.adapt(Trigger::Manual, None).unwrap(),
        AdaptationEvent::Deployed(_)
    ));
    drop(p);

    assert_eq!(fields(&server.handle(&frame)).3, 2);
    assert_eq!(server.model_version(), 2);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

fn connect(addr: &str) -> TcpStream {
    for _ in 0..100 {
        if let Ok(s) = TcpStream::connect(addr) {
            return s;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    panic!("server did not come up on {addr}");
}

fn exchange(addr: &str, frames: &str) -> Vec<String> {
    let mut conn = connect(addr);
    conn.write_all(frames.as_bytes()).unwrap();
    conn.shutdown(std::net::Shutdown::Write).unwrap();
    BufReader::new(conn).lines().map(Result::unwrap).collect()
}

#[test]
fn tcp_connections_are_answered() {
    let fx = Fixture::new(20);
    let addr = format!("127.0.0.1:{}", free_port());
    let server = Server::open(&fx.store()).unwrap();
    let bind = addr.clone();
    // The listener runs until the test process exits.
    std::thread::spawn(move || listen(server, bind));

    let frames = fx.frames() + "garbage\n";
    let handles: Vec<_> = (0..3)
        .map(|_| {
            let (addr, frames) = (addr.clone(), frames.clone());
            std::thread::spawn(move || exchange(&addr, &frames))
        })
        .collect();
    for h in handles {
        let lines = h.join().unwrap();
        assert_eq!(lines.len(), 21);
        let ids: Vec<u64> = lines[..20].iter().map(|l| fields(l).0).collect();
        assert_eq!(ids, (200..220).collect::<Vec<_>>());
        assert!(lines[20].starts_with("ERR "));
    }
}
