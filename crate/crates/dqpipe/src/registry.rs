//! File-system artifact registry and append-only event log.
//!
//! Layout under the registry root:
//!
//! ```text
//! LOCK                              present while a writer holds the store
//! DEPLOYMENT                        current deployment pointer (JSON)
//! events.jsonl                      event log, one JSON object per line
//! store/<kind>/<version>/payload    artifact bytes
//! store/<kind>/<version>/meta.json  provenance metadata
//! ```
//!
//! A version directory is staged under a dot-prefixed name and renamed into
//! place once both files are synced, so readers only ever list committed
//! versions.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use dqpipe_core::{ArtifactKind, VersionedArtifact};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::runtime::PredictionRecord;

pub const SCHEMA_VERSION: u32 = 1;
pub const EVENTS_FILE: &str = "events.jsonl";
const LOCK_FILE: &str = "LOCK";
const DEPLOYMENT_FILE: &str = "DEPLOYMENT";

/// Artifact versions making up one deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deployment {
    pub deployment_id: u64,
    pub reference_profile: u64,
    pub unifier: u64,
    pub dq_scorer: u64,
    pub inference_model: u64,
}

impl Deployment {
    pub fn version(&self, kind: ArtifactKind) -> u64 {
        match kind {
            ArtifactKind::ReferenceProfile => self.reference_profile,
            ArtifactKind::Unifier => self.unifier,
            ArtifactKind::DqScorer => self.dq_scorer,
            ArtifactKind::InferenceModel => self.inference_model,
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// A full set of artifacts went live.
    Deployment {
        deployment: Deployment,
        trigger: String,
        /// Window whose step triggered the deployment; `None` for init.
        window_id: Option<u64>,
    },
    Prediction(PredictionRecord),
    AdaptationSkipped {
        window_id: u64,
        trigger: String,
        reason: String,
    },
    WindowError {
        window_id: u64,
        cycle_id: u64,
        reason: String,
    },
    Label {
        cycle_id: u64,
        label: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub schema_version: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetaDoc {
    schema_version: u32,
    kind: ArtifactKind,
    version: u64,
    sha256: String,
    meta: BTreeMap<String, String>,
}

#[derive(Debug)]
struct WriterLock(PathBuf);

impl Drop for WriterLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug)]
pub struct Registry {
    root: PathBuf,
    lock: Option<WriterLock>,
    events: Option<File>,
    next_seq: u64,
}

impl Registry {
    /// Opens (creating if needed) the registry for writing. Fails with
    /// [`Error::Locked`] while another writer holds it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("store")).map_err(Error::io(&root))?;
        let lock_path = root.join(LOCK_FILE);
        let mut f = match OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock_path)
        {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Locked(root));
            }
            Err(e) => return Err(Error::io(&lock_path)(e)),
        };
        let lock = WriterLock(lock_path.clone());
        writeln!(f, "{}", std::process::id()).map_err(Error::io(&lock_path))?;
        let mut reg = Self {
            root,
            lock: Some(lock),
            events: None,
            next_seq: 0,
        };
        reg.next_seq = reg.read_events()?.last().map_or(0, |l| l.seq + 1);
        let path = reg.events_path();
        reg.events = Some(
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(Error::io(&path))?,
        );
        Ok(reg)
    }

    /// Read-only view; never takes the lock and never blocks a writer.
    pub fn open_read_only(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.join("store").is_dir() {
            return Err(Error::StorageFailure(format!(
                "{} is not a registry",
                root.display()
            )));
        }
        Ok(Self {
            root,
            lock: None,
            events: None,
            next_seq: 0,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join(EVENTS_FILE)
    }

    fn kind_dir(&self, kind: ArtifactKind) -> PathBuf {
        self.root.join("store").join(kind.as_str())
    }

    fn require_writer(&self) -> Result<()> {
        if self.lock.is_none() {
            return Err(Error::StorageFailure("registry opened read-only".into()));
        }
        Ok(())
    }

    pub fn put_artifact(
        &mut self,
        kind: ArtifactKind,
        payload: &[u8],
        meta: BTreeMap<String, String>,
    ) -> Result<u64> {
        self.require_writer()?;
        if payload.is_empty() {
            return Err(Error::StorageFailure("empty payload".into()));
        }
        let version = self.list_versions(kind)?.last().map_or(1, |v| v + 1);
        let dir = self.kind_dir(kind);
        let staging = dir.join(format!(".staging-{version}"));
        let fail = |e: std::io::Error| Error::StorageFailure(format!("{kind} v{version}: {e}"));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(fail)?;
        }
        fs::create_dir_all(&staging).map_err(fail)?;
        let doc = MetaDoc {
            schema_version: SCHEMA_VERSION,
            kind,
            version,
            sha256: hex::encode(Sha256::digest(payload)),
            meta,
        };
        write_synced(&staging.join("payload"), payload).map_err(fail)?;
        write_synced(
            &staging.join("meta.json"),
            &serde_json::to_vec_pretty(&doc)?,
        )
        .map_err(fail)?;
        fs::rename(&staging, dir.join(version.to_string())).map_err(fail)?;
        Ok(version)
    }

    pub fn list_versions(&self, kind: ArtifactKind) -> Result<Vec<u64>> {
        let dir = self.kind_dir(kind);
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out: Vec<u64> = fs::read_dir(&dir)
            .map_err(Error::io(&dir))?
            .filter_map(|e| e.ok()?.file_name().to_str()?.parse().ok())
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    pub fn get(&self, kind: ArtifactKind, version: u64) -> Result<VersionedArtifact> {
        let dir = self.kind_dir(kind).join(version.to_string());
        if !dir.is_dir() {
            return Err(Error::NotFound { kind, version });
        }
        let payload_path = dir.join("payload");
        let payload = fs::read(&payload_path).map_err(Error::io(&payload_path))?;
        let meta_path = dir.join("meta.json");
        let doc: MetaDoc =
            serde_json::from_slice(&fs::read(&meta_path).map_err(Error::io(&meta_path))?)?;
        if doc.sha256 != hex::encode(Sha256::digest(&payload)) {
            return Err(Error::StorageFailure(format!(
                "{kind} v{version}: payload hash mismatch"
            )));
        }
        Ok(VersionedArtifact {
            kind,
            version,
            payload,
            meta: doc.meta,
        })
    }

    pub fn get_latest(&self, kind: ArtifactKind) -> Result<VersionedArtifact> {
        match self.list_versions(kind)?.last() {
            Some(&v) => self.get(kind, v),
            None => Err(Error::NoArtifact(kind)),
        }
    }

    /// Records `d` as the live deployment. Artifacts must already be stored.
    pub fn set_deployment(&mut self, d: &Deployment) -> Result<()> {
        self.require_writer()?;
        for kind in ArtifactKind::ALL {
            if !self
                .kind_dir(kind)
                .join(d.version(kind).to_string())
                .is_dir()
            {
                return Err(Error::NotFound {
                    kind,
                    version: d.version(kind),
                });
            }
        }
        let tmp = self.root.join(".DEPLOYMENT.tmp");
        let fail = |e: std::io::Error| Error::StorageFailure(format!("deployment pointer: {e}"));
        write_synced(&tmp, &serde_json::to_vec(d)?).map_err(fail)?;
        fs::rename(&tmp, self.root.join(DEPLOYMENT_FILE)).map_err(fail)
    }

    pub fn deployment(&self) -> Result<Option<Deployment>> {
        let path = self.root.join(DEPLOYMENT_FILE);
        match fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path)(e)),
        }
    }

    /// Appends one event line and returns its sequence number.
    pub fn log_event(&mut self, event: Event) -> Result<u64> {
        let seq = self.next_seq;
        let line = LogLine {
            schema_version: SCHEMA_VERSION,
            seq,
            event,
        };
        let mut bytes = serde_json::to_vec(&line)?;
        bytes.push(b'\n');
        let f = self
            .events
            .as_mut()
            .ok_or_else(|| Error::StorageFailure("registry opened read-only".into()))?;
        f.write_all(&bytes)
            .map_err(|e| Error::StorageFailure(format!("event log: {e}")))?;
        self.next_seq += 1;
        Ok(seq)
    }

    pub fn read_events(&self) -> Result<Vec<LogLine>> {
        read_event_log(&self.events_path())
    }
}

/// Parses an event log; a missing file reads as empty.
pub fn read_event_log(path: &Path) -> Result<Vec<LogLine>> {
    let f = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

fn write_synced(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut f = File::create(path)?;
    f.write_all(bytes)?;
    f.sync_all()
}
