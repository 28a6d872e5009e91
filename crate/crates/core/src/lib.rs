//! Allocation-only core of the `dqpipe` streaming data-quality pipeline.
//!
//! Everything in here is pure computation over in-memory values: the domain
//! types, the synthetic pump-cycle generator, windowing and feature
//! extraction, the five data-quality dimensions and their PCA unification,
//! mutation operators, adaptive drift detection, and a small gradient-boosted
//! regression tree learner. File formats, the artifact registry, the
//! orchestration loop and the CLI live in the `dqpipe` crate.
//!
//! The crate is `no_std` + `alloc`; enable the `std` feature to get
//! `std::error::Error` integration for free through `core::error::Error`.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x >= lo)` style checks are how NaN gets rejected along with range errors.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::cast_precision_loss)]
#![allow(clippy::cast_possible_truncation)]
#![allow(clippy::cast_sign_loss)]

extern crate alloc;

pub mod datamodel;
pub mod dqscore;
pub mod drift;
pub mod error;
pub mod ingest;
pub mod learn;
pub mod mutate;
mod num;

pub use datamodel::{
    extract_label, make_window, ArtifactKind, DimensionScores, DriftVerdict, PumpCycle, Reading,
    UnifiedScore, VersionedArtifact, Window,
};
pub use error::{Error, Result};
