//! Deterministic generator of ESR-like vacuum pump cycles.
//!
//! Within a cycle the pressure decays as `p0 * exp(-lambda * t / len)` for
//! `t = 1..=len`, plus Gaussian noise. Each cycle draws its own `p0` and
//! `lambda` around the active regime's values. Regimes switch at the cycle
//! indices listed in the drift schedule; corruption spans mutate a seeded
//! fraction of their cycles after the label has been taken.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{PumpCycle, Reading};
use crate::dqscore::{Constraints, Fences};
use crate::error::{Error, Result};
use crate::mutate::{apply_plan_to, MutationContext, MutationPlan};

/// Switch to new decay/noise parameters from `cycle` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeChange {
    pub cycle: usize,
    pub lambda: f64,
    pub noise_std: f64,
}

/// Corrupt a seeded `fraction` of the cycles in `[start, end)`, each with one
/// plan drawn uniformly from `plans`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpan {
    pub start: usize,
    pub end: usize,
    pub fraction: f64,
    pub plans: Vec<MutationPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_cycles: usize,
    pub cycle_len: usize,
    /// Prediction window length; cycles must be at least this long.
    pub window_size: usize,
    pub p0: f64,
    pub lambda: f64,
    pub noise_std: f64,
    /// Relative standard deviation of the per-cycle start pressure.
    pub p0_jitter: f64,
    /// Relative standard deviation of the per-cycle decay rate.
    pub lambda_jitter: f64,
    pub sample_period_ns: u64,
    pub drift_schedule: Vec<RegimeChange>,
    pub corruption_schedule: Vec<CorruptionSpan>,
    /// Physical validity range of the sensor.
    pub min_valid: f64,
    pub max_valid: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_cycles: 100,
            cycle_len: 1800,
            window_size: 1200,
            p0: 100.0,
            lambda: 0.5,
            noise_std: 0.5,
            p0_jitter: 0.0,
            lambda_jitter: 0.0,
            sample_period_ns: 100_000_000,
            drift_schedule: Vec::new(),
            corruption_schedule: Vec::new(),
            min_valid: 0.0,
            max_valid: 200.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_cycles == 0 {
            return bad("n_cycles must be at least 1");
        }
        if self.window_size < 2 || self.cycle_len < self.window_size {
            return bad("cycle_len must be at least the window size (>= 2)");
        }
        if !(self.noise_std >= 0.0 && self.p0_jitter >= 0.0 && self.lambda_jitter >= 0.0) {
            return bad("noise and jitter must be non-negative");
        }
        if self.sample_period_ns == 0 {
            return bad("sample period must be positive");
        }
        Constraints::new(self.min_valid, self.max_valid)?;
        for d in &self.drift_schedule {
            if d.cycle >= self.n_cycles || d.noise_std < 0.0 {
                return bad("drift schedule references an invalid cycle");
            }
        }
        for c in &self.corruption_schedule {
            if c.start > c.end || c.end > self.n_cycles || !(0.0..=1.0).contains(&c.fraction) {
                return bad("corruption span is invalid");
            }
            if c.plans.is_empty() {
                return bad("corruption span has no plans");
            }
            for p in &c.plans {
                p.validate()?;
            }
        }
        Ok(())
    }

    /// `(lambda, noise_std)` in force for `cycle`.
    pub fn regime(&self, cycle: usize) -> (f64, f64) {
        self.drift_schedule
            .iter()
            .filter(|d| d.cycle <= cycle)
            .max_by_key(|d| d.cycle)
            .map_or((self.lambda, self.noise_std), |d| (d.lambda, d.noise_std))
    }

    /// Scale references for the generator's own corruption: fences spanning
    /// the physical range and the spread of the noiseless first window.
    pub fn nominal_context(&self) -> MutationContext {
        let len = self.cycle_len as f64;
        let curve: Vec<f64> = (1..=self.window_size)
            .map(|t| self.p0 * libm::exp(-self.lambda * t as f64 / len))
            .collect();
        MutationContext {
            fences: Fences {
                low: self.min_valid,
                high: self.p0 * (1.0 + 3.0 * self.p0_jitter),
            },
            constraints: Constraints {
                min_valid: self.min_valid,
                max_valid: self.max_valid,
            },
            ref_std: crate::num::std_dev(&curve).max(self.noise_std),
        }
    }

    /// Generates cycle `index` on its own. Cycles are independent given the
    /// seed, so this equals the `index`-th item of [`synth_generate`].
    pub fn cycle(&self, index: usize) -> PumpCycle {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let (lambda, noise) = self.regime(index);
        let z_p: f64 = rng.sample(StandardNormal);
        let z_l: f64 = rng.sample(StandardNormal);
        let p0 = self.p0 * (1.0 + self.p0_jitter * z_p);
        let lambda = (lambda * (1.0 + self.lambda_jitter * z_l)).max(0.0);
        let len = self.cycle_len as f64;
        let t0 = index as u64 * self.cycle_len as u64;
        let mut readings: Vec<Reading> = (0..self.cycle_len)
            .map(|i| {
                let t = (i + 1) as f64;
                let eps: f64 = StandardNormal.sample(&mut rng);
                Reading::new(
                    (t0 + i as u64) * self.sample_period_ns,
                    Some(p0 * libm::exp(-lambda * t / len) + noise * eps),
                )
            })
            .collect();
        let label = crate::datamodel::min_present(&readings);

        for span in &self.corruption_schedule {
            if !(span.start..span.end).contains(&index) {
                continue;
            }
            if rng.random::<f64>() < span.fraction {
                let plan = &span.plans[rng.random_range(0..span.plans.len())];
                apply_plan_to(&mut readings, plan, &self.nominal_context(), index as u64);
            }
        }
        PumpCycle {
            cycle_id: index as u64,
            readings,
            label,
        }
    }
}

/// Iterator over the configured cycles.
#[derive(Debug, Clone)]
pub struct SynthStream {
    cfg: SynthConfig,
    next: usize,
}

impl Iterator for SynthStream {
    type Item = PumpCycle;

    fn next(&mut self) -> Option<PumpCycle> {
        if self.next >= self.cfg.n_cycles {
            return None;
        }
        let c = self.cfg.cycle(self.next);
        self.next += 1;
        Some(c)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.cfg.n_cycles - self.next;
        (left, Some(left))
    }
}

pub fn synth_generate(cfg: SynthConfig) -> Result<SynthStream> {
    cfg.validate()?;
    Ok(SynthStream { cfg, next: 0 })
}
