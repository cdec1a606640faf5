//! Underlying Markov processes `Z` run between relocations.
//!
//! Lattice walks live on a clock with integer ticks. A walk segment that
//! starts at clock `c` and lasts `d` makes `⌊c + d⌋ - ⌊c⌋` steps, so a walk
//! observed at non-integer offsets inside a run still takes one step per unit
//! of elapsed time along every lineage.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::numeric::log_add_exp;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    Continuous,
    Discrete,
}

impl TimeMode {
    pub fn label(self) -> &'static str {
        match self {
            TimeMode::Continuous => "continuous",
            TimeMode::Discrete => "discrete",
        }
    }
}

pub trait MarkovProcess: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn time_mode(&self) -> TimeMode;

    fn params(&self) -> Vec<(&'static str, f64)>;

    /// `Λ_Z(ζ) = lim (1/t) ln E[e^{ζ·Z(t)}]`.
    fn lambda_z(&self, zeta: &[f64]) -> f64;

    /// True when `Λ_Z` restricted to the first axis determines every radial
    /// profile (isotropic, or one-dimensional).
    fn radially_reducible(&self) -> bool;

    /// Moves `state` forward by `duration`, the segment starting at `clock`.
    fn advance(&self, state: &mut [f64], clock: f64, duration: f64, rng: &mut SimRng);

    /// Draws `Z(t_mid)` given `Z(t_left) = left` and `Z(t_right) = right`.
    fn bridge(
        &self,
        _left: &[f64],
        _right: &[f64],
        _times: (f64, f64, f64),
        _rng: &mut SimRng,
        _out: &mut [f64],
    ) -> Result<()> {
        Err(Error::Unsupported(format!("{} has no bridge sampler", self.name())))
    }

    /// A sample of `Z(duration)` started at `start`.
    fn evolve(&self, start: &[f64], duration: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
        if start.len() != self.dim() {
            return Err(domain(format!(
                "start has dimension {}, model has {}",
                start.len(),
                self.dim()
            )));
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(domain(format!("duration must be finite and >= 0, got {duration}")));
        }
        if self.time_mode() == TimeMode::Discrete && duration.fract() != 0.0 {
            return Err(domain(format!(
                "{} runs in discrete time; duration {duration} is not an integer",
                self.name()
            )));
        }
        let mut state = start.to_vec();
        self.advance(&mut state, 0.0, duration, rng);
        Ok(state)
    }
}

/// Standard Brownian motion in `ℝ^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BrownianMotion {
    dim: usize,
}

impl BrownianMotion {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be >= 1".to_owned()));
        }
        Ok(Self { dim })
    }
}

impl MarkovProcess for BrownianMotion {
    fn name(&self) -> &'static str {
        "brownian"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn time_mode(&self) -> TimeMode {
        TimeMode::Continuous
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("dim", self.dim as f64)]
    }

    fn lambda_z(&self, zeta: &[f64]) -> f64 {
        0.5 * zeta.iter().map(|z| z * z).sum::<f64>()
    }

    fn radially_reducible(&self) -> bool {
        true
    }

    fn advance(&self, state: &mut [f64], _clock: f64, duration: f64, rng: &mut SimRng) {
        if duration <= 0.0 {
            return;
        }
        let sd = duration.sqrt();
        for x in state.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *x += sd * n;
        }
    }

    fn bridge(
        &self,
        left: &[f64],
        right: &[f64],
        (t0, t, t1): (f64, f64, f64),
        rng: &mut SimRng,
        out: &mut [f64],
    ) -> Result<()> {
        if !(t0 <= t && t <= t1) {
            return Err(domain(format!("bridge time {t} outside [{t0}, {t1}]")));
        }
        let span = t1 - t0;
        let (w, sd) = if span > 0.0 {
            ((t - t0) / span, ((t - t0) * (t1 - t) / span).sqrt())
        } else {
            (0.0, 0.0)
        };
        for k in 0..out.len() {
            let n: f64 = rng.sample(StandardNormal);
            out[k] = left[k] + w * (right[k] - left[k]) + sd * n;
        }
        Ok(())
    }
}

/// Random walk on `ℤ^d` with a finite step law.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWalk {
    dim: usize,
    steps: Vec<Vec<i64>>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    nearest_neighbour: bool,
}

impl LatticeWalk {
    /// Symmetric nearest-neighbour walk.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be >= 1".to_owned()));
        }
        let mut steps = Vec::with_capacity(2 * dim);
        for j in 0..dim {
            for sign in [1, -1] {
                let mut s = vec![0; dim];
                s[j] = sign;
                steps.push(s);
            }
        }
        let probs = vec![1.0 / (2 * dim) as f64; 2 * dim];
        let mut walk = Self::build(dim, steps, probs)?;
        walk.nearest_neighbour = true;
        Ok(walk)
    }

    /// Custom step law; each row is `[p, s_1, …, s_d]` with integer `s_j`.
    pub fn with_steps(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut steps = Vec::with_capacity(rows.len());
        let mut probs = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != dim + 1 {
                return Err(domain(format!(
                    "step row {row:?} must have 1 + {dim} entries"
                )));
            }
            let step: Vec<i64> = row[1..]
                .iter()
                .map(|&v| {
                    if v.fract() != 0.0 || v.abs() > 1e6 {
                        Err(domain(format!("step coordinate {v} is not a bounded integer")))
                    } else {
                        Ok(v as i64)
                    }
                })
                .collect::<Result<_>>()?;
            steps.push(step);
            probs.push(row[0]);
        }
        Self::build(dim, steps, probs)
    }

    fn build(dim: usize, steps: Vec<Vec<i64>>, probs: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(domain("step law is empty".to_owned()));
        }
        if probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(domain(format!("step probabilities must lie in (0, 1], got {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("step probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(Self {
            dim,
            steps,
            probs,
            cumulative,
            nearest_neighbour: false,
        })
    }

    pub fn is_symmetric(&self) -> bool {
        self.steps.iter().zip(&self.probs).all(|(s, p)| {
            let neg: Vec<i64> = s.iter().map(|v| -v).collect();
            self.steps
                .iter()
                .zip(&self.probs)
                .any(|(t, q)| *t == neg && (p - q).abs() <= 1e-15)
        })
    }

    /// Takes `n` steps from `state`.
    pub fn take_steps(&self, state: &mut [f64], mut n: u64, rng: &mut SimRng) {
        if self.nearest_neighbour && self.dim == 1 {
            // each random bit is one ±1 step
            let mut delta: i64 = 0;
            while n >= 64 {
                delta += 2 * i64::from(rng.random::<u64>().count_ones()) - 64;
                n -= 64;
            }
            if n > 0 {
                let bits = rng.random::<u64>() & ((1u64 << n) - 1);
                delta += 2 * i64::from(bits.count_ones()) - n as i64;
            }
            state[0] += delta as f64;
            return;
        }
        for _ in 0..n {
            let u: f64 = rng.random();
            let k = self.cumulative.partition_point(|c| *c <= u).min(self.steps.len() - 1);
            for (x, s) in state.iter_mut().zip(&self.steps[k]) {
                *x += *s as f64;
            }
        }
    }

    /// Exact law of the first coordinate after `n` steps, as `(position, probability)`.
    pub fn transition_pmf(&self, n: u64) -> Vec<(i64, f64)> {
        let mut law: std::collections::BTreeMap<i64, f64> = [(0, 1.0)].into();
        for _ in 0..n {
            let mut next = std::collections::BTreeMap::new();
            for (x, p) in &law {
                for (s, q) in self.steps.iter().zip(&self.probs) {
                    *next.entry(x + s[0]).or_insert(0.0) += p * q;
                }
            }
            law = next;
        }
        law.into_iter().collect()
    }
}

/// Number of integer ticks in `(clock, clock + duration]`.
pub fn ticks(clock: f64, duration: f64) -> u64 {
    let n = (clock + duration).floor() - clock.floor();
    if n > 0.0 {
        n as u64
    } else {
        0
    }
}

impl MarkovProcess for LatticeWalk {
    fn name(&self) -> &'static str {
        "lattice_walk"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn time_mode(&self) -> TimeMode {
        TimeMode::Discrete
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("dim", self.dim as f64)]
    }

    fn lambda_z(&self, zeta: &[f64]) -> f64 {
        self.steps
            .iter()
            .zip(&self.probs)
            .map(|(s, p)| p.ln() + s.iter().zip(zeta).map(|(a, z)| *a as f64 * z).sum::<f64>())
            .fold(f64::NEG_INFINITY, log_add_exp)
    }

    fn radially_reducible(&self) -> bool {
        self.dim == 1
    }

    fn advance(&self, state: &mut [f64], clock: f64, duration: f64, rng: &mut SimRng) {
        self.take_steps(state, ticks(clock, duration), rng);
    }
}
