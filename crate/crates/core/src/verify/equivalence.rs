//! The direct simulator against the time-change representation.

use crate::error::Result;
use crate::genealogy::Extent;
use crate::rng::{derive_seed, try_replicate};
use crate::sim::{simulate_direct, simulate_timechange, Model};
use crate::verify::stats::{ks_critical, ks_two_sample};

pub const KS_LEVEL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub t: f64,
    pub samples: usize,
    pub ks: f64,
    pub critical: f64,
    pub direct_mean: f64,
    pub timechange_mean: f64,
}

impl EquivalenceReport {
    pub fn pass(&self) -> bool {
        self.ks < self.critical
    }
}

/// Both arms on one environment; compares first coordinates.
pub fn equivalence_ks(model: &Model, t: f64, samples: usize, env_seed: u64, mc_seed: u64) -> Result<EquivalenceReport> {
    let env = model.environment(Extent::Horizon(t), env_seed)?;
    let direct = try_replicate(samples, derive_seed(mc_seed, 1), |rng, _| {
        simulate_direct(&env, t, rng, false).map(|(x, _)| x[0])
    })?;
    let timechange = try_replicate(samples, derive_seed(mc_seed, 2), |rng, _| {
        simulate_timechange(&env, t, rng).map(|x| x[0])
    })?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(EquivalenceReport {
        t,
        samples,
        ks: ks_two_sample(&direct, &timechange),
        critical: ks_critical(samples, samples, KS_LEVEL),
        direct_mean: mean(&direct),
        timechange_mean: mean(&timechange),
    })
}
