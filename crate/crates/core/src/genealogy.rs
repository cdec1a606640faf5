//! The quenched environment and the ancestry of runs.
//!
//! Run `j` relocates into run `i < j` with probability `W_i / S_{j-1}`; this
//! parent relation is a weighted random recursive tree on the runs. For a
//! fixed target `n` the ancestor indicators `1_{i≺n}` are independent
//! Bernoulli variables of parameter `W_i / S_i`, which is what makes the
//! time-change sampler cheap.

use std::sync::Arc;

use rand::Rng;
use rand::distr::Open01;

use crate::error::{domain, Error, Result};
use crate::kernel::MemoryKernel;
use crate::numeric::log_add_exp;
use crate::rng::{stream, SimRng};
use crate::runlength::RunLength;

/// How far to build an environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extent {
    /// Stop once `T_n > t`.
    Horizon(f64),
    /// Exactly `n` runs.
    Count(usize),
}

/// One run of the environment, as produced by [`EnvironmentStream`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    /// 1-based run index.
    pub index: usize,
    pub length: f64,
    /// `T_{i-1}`.
    pub start: f64,
    /// `T_i`.
    pub end: f64,
    /// `ln S_i = ln M(T_i)`.
    pub log_prefix: f64,
    /// `W_i / S_i`.
    pub ratio: f64,
}

/// The run lengths of an environment alone, in the order
/// [`EnvironmentStream`] draws them.
#[derive(Debug)]
pub struct LengthStream {
    law: Arc<dyn RunLength>,
    rng: SimRng,
}

impl LengthStream {
    pub fn new(law: Arc<dyn RunLength>, seed: u64) -> Self {
        Self {
            law,
            rng: stream(seed, 0),
        }
    }
}

impl Iterator for LengthStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.law.sample(&mut self.rng))
    }
}

/// Lazily generated environment, for horizons too long to store.
#[derive(Debug)]
pub struct EnvironmentStream {
    kernel: Arc<dyn MemoryKernel>,
    lengths: LengthStream,
    index: usize,
    time: f64,
}

impl EnvironmentStream {
    pub fn new(law: Arc<dyn RunLength>, kernel: Arc<dyn MemoryKernel>, seed: u64) -> Self {
        Self {
            kernel,
            lengths: LengthStream::new(law, seed),
            index: 0,
            time: 0.0,
        }
    }
}

impl Iterator for EnvironmentStream {
    type Item = Result<RunRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let length = self.lengths.next()?;
        let start = self.time;
        let end = start + length;
        if end <= start {
            return Some(Err(Error::Numeric(format!(
                "run {} of length {length} does not advance time past {start}",
                self.index + 1
            ))));
        }
        self.index += 1;
        self.time = end;
        let log_prefix = match self.kernel.log_cumulative(end) {
            Ok(v) => v,
            Err(e) => return Some(Err(e)),
        };
        Some(Ok(RunRecord {
            index: self.index,
            length,
            start,
            end,
            log_prefix,
            ratio: self.kernel.segment_ratio(start, end),
        }))
    }
}

/// One quenched environment: run lengths, relocation times and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSequence {
    lengths: Vec<f64>,
    /// `T_0 = 0, T_1, …, T_n`.
    times: Vec<f64>,
    log_prefix: Vec<f64>,
    log_weights: Vec<f64>,
    ratios: Vec<f64>,
    /// `H_k = Σ_{2≤i≤k} -ln(1 - ratio_i)`, indexed by `k - 1`.
    hazard: Vec<f64>,
}

// Caps -ln(1 - r) so a ratio that rounds to 1 still gives finite hazards.
const HAZARD_CAP: f64 = 700.0;

impl RunSequence {
    pub fn build(
        law: Arc<dyn RunLength>,
        kernel: Arc<dyn MemoryKernel>,
        extent: Extent,
        seed: u64,
    ) -> Result<Self> {
        match extent {
            Extent::Horizon(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(domain(format!("horizon must be finite and > 0, got {t}")))
            }
            Extent::Count(0) => return Err(domain("run count must be >= 1".to_owned())),
            _ => {}
        }
        let mut records = Vec::new();
        for rec in EnvironmentStream::new(law, kernel, seed) {
            let rec = rec?;
            let done = match extent {
                Extent::Horizon(t) => rec.end > t,
                Extent::Count(n) => rec.index == n,
            };
            records.push(rec);
            if done {
                break;
            }
        }
        Ok(Self::from_records(&records))
    }

    pub fn from_records(records: &[RunRecord]) -> Self {
        let mut times = Vec::with_capacity(records.len() + 1);
        times.push(0.0);
        times.extend(records.iter().map(|r| r.end));
        let log_weights = records
            .iter()
            .map(|r| r.log_prefix + r.ratio.ln())
            .collect();
        Self::assemble(
            records.iter().map(|r| r.length).collect(),
            times,
            records.iter().map(|r| r.log_prefix).collect(),
            log_weights,
            records.iter().map(|r| r.ratio).collect(),
        )
    }

    /// Environment with unit run lengths and the given positive weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(domain(format!("weights must be positive and finite, got {weights:?}")));
        }
        let mut log_prefix = Vec::with_capacity(weights.len());
        let mut acc = f64::NEG_INFINITY;
        for w in weights {
            acc = log_add_exp(acc, w.ln());
            log_prefix.push(acc);
        }
        let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        let ratios = log_weights
            .iter()
            .zip(&log_prefix)
            .enumerate()
            .map(|(k, (lw, ls))| if k == 0 { 1.0 } else { (lw - ls).exp().min(1.0) })
            .collect();
        Ok(Self::assemble(
            vec![1.0; weights.len()],
            (0..=weights.len()).map(|k| k as f64).collect(),
            log_prefix,
            log_weights,
            ratios,
        ))
    }

    fn assemble(
        lengths: Vec<f64>,
        times: Vec<f64>,
        log_prefix: Vec<f64>,
        log_weights: Vec<f64>,
        ratios: Vec<f64>,
    ) -> Self {
        let mut hazard = Vec::with_capacity(ratios.len());
        let mut acc = 0.0;
        for (k, r) in ratios.iter().enumerate() {
            if k > 0 {
                acc += (-(-r).ln_1p()).min(HAZARD_CAP);
            }
            hazard.push(acc);
        }
        Self {
            lengths,
            times,
            log_prefix,
            log_weights,
            ratios,
            hazard,
        }
    }

    pub fn count(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// `T_0, …, T_n`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.count()]
    }

    pub fn length(&self, i: usize) -> f64 {
        self.lengths[i - 1]
    }

    /// `T_{i-1}`.
    pub fn start(&self, i: usize) -> f64 {
        self.times[i - 1]
    }

    /// `T_i`.
    pub fn end(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// `ln S_i`.
    pub fn log_prefix(&self, i: usize) -> f64 {
        self.log_prefix[i - 1]
    }

    /// `ln W_i`.
    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_weights[i - 1]
    }

    /// `W_i / S_i`.
    pub fn ratio(&self, i: usize) -> f64 {
        self.ratios[i - 1]
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// The run containing `t`: `T_{i-1} ≤ t < T_i`.
    pub fn run_containing(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(domain(format!("time must be >= 0, got {t}")));
        }
        if t >= self.horizon() {
            return Err(Error::Capacity(format!(
                "time {t} is beyond the built horizon {}",
                self.horizon()
            )));
        }
        Ok(self.times.partition_point(|&x| x <= t))
    }

    fn check_target(&self, n: usize) -> Result<()> {
        if n < 1 || n > self.count() {
            return Err(domain(format!("target run {n} outside 1..={}", self.count())));
        }
        Ok(())
    }

    /// Strict ancestors of run `n`, in decreasing order, by skipping through
    /// the independent indicators with their cumulative hazard.
    pub fn sample_ancestors(&self, n: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
        self.check_target(n)?;
        let mut chain = Vec::new();
        // candidates are runs 1..k; run 1 is always an ancestor of n ≥ 2
        let mut k = n - 1;
        while k >= 2 {
            let e: f64 = -rng.sample::<f64, _>(Open01).ln();
            let level = self.hazard[k - 1] - e;
            // largest i ≤ k with H_i - H_{i-1} reached: first i where H_i > level
            let i = self.hazard[..k].partition_point(|&h| h <= level) + 1;
            if i < 2 {
                break;
            }
            chain.push(i);
            k = i - 1;
        }
        if n >= 2 {
            chain.push(1);
        }
        Ok(chain)
    }
}

/// The ancestor indicators `1_{i≺n}` for `1 ≤ i < n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AncestryVector {
    pub target: usize,
    pub bits: Vec<bool>,
    /// Ancestors in decreasing order.
    pub chain: Vec<usize>,
}

impl AncestryVector {
    pub fn from_chain(target: usize, chain: Vec<usize>) -> Self {
        let mut bits = vec![false; target.saturating_sub(1)];
        for &i in &chain {
            bits[i - 1] = true;
        }
        Self { target, bits, chain }
    }

    pub fn from_bits(target: usize, bits: Vec<bool>) -> Self {
        let chain = (1..target).rev().filter(|&i| bits[i - 1]).collect();
        Self { target, bits, chain }
    }

    pub fn depth(&self) -> usize {
        self.chain.len()
    }

    /// Bit pattern packed with run `i` at bit `i - 1`.
    pub fn mask(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .fold(0, |m, (k, _)| m | (1 << k))
    }
}

fn check_range(runs: &RunSequence, n: usize) -> Result<()> {
    if n < 2 || n > runs.count() {
        return Err(domain(format!("ancestry target {n} outside 2..={}", runs.count())));
    }
    Ok(())
}

/// Independent Bernoulli(`W_i/S_i`) draw for each `i < n`.
pub fn ancestry_dobrow(runs: &RunSequence, n: usize, rng: &mut SimRng) -> Result<AncestryVector> {
    check_range(runs, n)?;
    let bits = (1..n)
        .map(|i| i == 1 || rng.random::<f64>() < runs.ratio(i))
        .collect();
    Ok(AncestryVector::from_bits(n, bits))
}

/// Follows parents from `n` down to the root, `parent(j) = i` with
/// probability `W_i / S_{j-1}`.
pub fn ancestry_direct(runs: &RunSequence, n: usize, rng: &mut SimRng) -> Result<AncestryVector> {
    check_range(runs, n)?;
    let mut chain = Vec::new();
    let mut j = n;
    while j > 1 {
        let u: f64 = rng.sample(Open01);
        let level = u.ln() + runs.log_prefix(j - 1);
        // S_{i-1} ≤ v < S_i
        let i = (runs.log_prefix[..j - 1].partition_point(|&ls| ls <= level) + 1).min(j - 1);
        chain.push(i);
        j = i;
    }
    Ok(AncestryVector::from_chain(n, chain))
}

/// Exact joint law of the indicators, indexed by [`AncestryVector::mask`].
#[derive(Debug, Clone, PartialEq)]
pub struct AncestryLaw {
    pub target: usize,
    pub probabilities: Vec<f64>,
}

pub const EXACT_LAW_MAX: usize = 12;

/// Sums over every parent chain from `n` down to run 1.
pub fn exact_ancestry_law(runs: &RunSequence, n: usize) -> Result<AncestryLaw> {
    if n > EXACT_LAW_MAX {
        return Err(Error::Capacity(format!(
            "exact ancestry law supports targets up to {EXACT_LAW_MAX}, got {n}"
        )));
    }
    check_range(runs, n)?;
    // mass[j][mask]: probability that the chain visits j with ancestors `mask` so far
    let size = 1usize << (n - 1);
    let mut mass = vec![vec![0.0; size]; n + 1];
    mass[n][0] = 1.0;
    for j in (2..=n).rev() {
        let log_total = runs.log_prefix(j - 1);
        for mask in 0..size {
            let p = mass[j][mask];
            if p == 0.0 {
                continue;
            }
            for i in 1..j {
                let q = (runs.log_weight(i) - log_total).exp();
                mass[i][mask | 1 << (i - 1)] += p * q;
            }
        }
    }
    Ok(AncestryLaw {
        target: n,
        probabilities: std::mem::take(&mut mass[1]),
    })
}

/// The product law of independent Bernoulli(`W_i/S_i`) indicators.
pub fn product_law(runs: &RunSequence, n: usize) -> Result<AncestryLaw> {
    check_range(runs, n)?;
    let size = 1usize << (n - 1);
    let probabilities = (0..size)
        .map(|mask| {
            (1..n)
                .map(|i| {
                    let r = runs.ratio(i);
                    if mask >> (i - 1) & 1 == 1 {
                        r
                    } else {
                        1.0 - r
                    }
                })
                .product()
        })
        .collect();
    Ok(AncestryLaw { target: n, probabilities })
}

impl AncestryLaw {
    pub fn total_variation(&self, other: &AncestryLaw) -> f64 {
        0.5 * self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// `P(1_{i≺n} = 1)`.
    pub fn marginal(&self, i: usize) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask >> (i - 1) & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{LogPowerKernel, PowerExpKernel};
    use crate::runlength::Deterministic;
    use approx::assert_relative_eq;

    fn unit(n: usize) -> RunSequence {
        RunSequence::from_weights(&vec![1.0; n]).unwrap()
    }

    #[test]
    fn uniform_kernel_ratios_are_harmonic() {
        let runs = RunSequence::build(
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(LogPowerKernel::uniform()),
            Extent::Count(5),
            1,
        )
        .unwrap();
        for i in 1..=5 {
            assert_eq!(runs.ratio(i), 1.0 / i as f64);
            assert_relative_eq!(runs.log_prefix(i), (i as f64).ln(), max_relative = 1e-15);
            assert!(runs.log_weight(i).abs() < 1e-15);
        }
    }

    #[test]
    fn steep_kernel_environment_stays_finite() {
        let kernel: Arc<dyn MemoryKernel> = Arc::new(PowerExpKernel::new(1.0, 0.5).unwrap());
        let runs = RunSequence::build(
            Arc::new(Deterministic::new(1.0).unwrap()),
            kernel.clone(),
            Extent::Count(1_000_000),
            1,
        )
        .unwrap();
        assert!(runs.ratios().iter().all(|r| *r > 0.0 && *r <= 1.0));
        assert_eq!(runs.ratio(1), 1.0);
        assert_eq!(
            runs.log_prefix(runs.count()),
            kernel.log_cumulative(runs.horizon()).unwrap()
        );
    }

    #[test]
    fn horizon_extent_covers_time() {
        let runs = RunSequence::build(
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(LogPowerKernel::uniform()),
            Extent::Horizon(10.0),
            1,
        )
        .unwrap();
        assert_eq!(runs.count(), 11);
        assert!(runs.horizon() > 10.0);
    }

    #[test]
    fn run_containing_is_left_closed() {
        let runs = unit(10);
        assert_eq!(runs.run_containing(3.25).unwrap(), 4);
        assert_eq!(runs.run_containing(0.0).unwrap(), 1);
        assert_eq!(runs.run_containing(3.0).unwrap(), 4);
        assert!(matches!(runs.run_containing(10.0), Err(Error::Capacity(_))));
    }

    #[test]
    fn exact_law_examples() {
        let runs = unit(4);
        let law = exact_ancestry_law(&runs, 2).unwrap();
        assert_eq!(law.probabilities, vec![0.0, 1.0]);
        let law = exact_ancestry_law(&runs, 3).unwrap();
        assert_relative_eq!(law.probabilities[0b01], 0.5, max_relative = 1e-15);
        assert_relative_eq!(law.probabilities[0b11], 0.5, max_relative = 1e-15);
        let law = exact_ancestry_law(&runs, 4).unwrap();
        assert_relative_eq!(law.marginal(2), 0.5, max_relative = 1e-15);
        let runs = RunSequence::from_weights(&[1.0, 2.0, 1.0]).unwrap();
        let law = exact_ancestry_law(&runs, 3).unwrap();
        assert_relative_eq!(law.marginal(2), 2.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(
            exact_ancestry_law(&unit(13), 13),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn ancestry_ranges() {
        let runs = unit(5);
        let mut rng = stream(3, 0);
        assert!(ancestry_dobrow(&runs, 1, &mut rng).is_err());
        assert!(ancestry_direct(&runs, 6, &mut rng).is_err());
        assert_eq!(ancestry_dobrow(&runs, 2, &mut rng).unwrap().bits, vec![true]);
        assert_eq!(ancestry_direct(&runs, 2, &mut rng).unwrap().bits, vec![true]);
    }

    #[test]
    fn hazard_skipping_matches_marginals() {
        let runs = unit(8);
        let mut rng = stream(11, 0);
        let draws = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..draws {
            for i in runs.sample_ancestors(8, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        assert_eq!(counts[1], draws);
        for i in 2..8 {
            let p = 1.0 / i as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let phat = counts[i] as f64 / draws as f64;
            assert!((phat - p).abs() < 4.5 * se, "run {i}: {phat} vs {p}");
        }
    }

    #[test]
    fn chains_are_strictly_decreasing() {
        let runs = unit(50);
        let mut rng = stream(5, 0);
        for _ in 0..100 {
            let c = runs.sample_ancestors(50, &mut rng).unwrap();
            assert!(c.windows(2).all(|w| w[0] > w[1]));
            assert_eq!(*c.last().unwrap(), 1);
            let v = ancestry_direct(&runs, 50, &mut rng).unwrap();
            assert!(v.chain.windows(2).all(|w| w[0] > w[1]));
            assert!(v.bits[0]);
            assert_eq!(v.depth(), v.chain.len());
        }
    }
}
