//! Windowing, feature extraction and the synthetic cycle generator.

mod features;
mod synth;

pub use features::{featureize, FeatureConfig, FeatureVector, StatFlags};
pub use synth::{synth_generate, CorruptionSpan, RegimeChange, SynthConfig, SynthStream};

use alloc::vec::Vec;

use crate::datamodel::{PumpCycle, Reading, Window};

/// Splits a reading stream into consecutive non-overlapping windows of
/// `n` readings. A shorter tail comes out as a flagged partial window.
pub fn windowize<I>(readings: I, n: usize, cycle_id: u64) -> Windowize<I::IntoIter>
where
    I: IntoIterator<Item = Reading>,
{
    assert!(n >= 2, "window size must be at least 2");
    Windowize {
        inner: readings.into_iter(),
        n,
        cycle_id,
        next_id: 0,
    }
}

#[derive(Debug, Clone)]
pub struct Windowize<I> {
    inner: I,
    n: usize,
    cycle_id: u64,
    next_id: u64,
}

impl<I: Iterator<Item = Reading>> Iterator for Windowize<I> {
    type Item = Window;

    fn next(&mut self) -> Option<Window> {
        let readings: Vec<Reading> = self.inner.by_ref().take(self.n).collect();
        if readings.is_empty() {
            return None;
        }
        let w = Window {
            id: self.next_id,
            cycle_id: self.cycle_id,
            partial: readings.len() < self.n,
            readings,
        };
        self.next_id += 1;
        Some(w)
    }
}

/// The prediction window of a cycle: its first `n` readings.
pub fn cycle_window(cycle: &PumpCycle, n: usize, id: u64) -> Window {
    let take = n.min(cycle.readings.len());
    Window {
        id,
        cycle_id: cycle.cycle_id,
        readings: cycle.readings[..take].to_vec(),
        partial: take < n,
    }
}
