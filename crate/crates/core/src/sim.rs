//! The two routes to `X(t)`.
//!
//! [`simulate_direct`] follows the relocation dynamics step by step.
//! [`simulate_timechange`] uses `X(t) = Z(S(t))` in law, where
//! `S(t) = A(t) + Σ F_i 1_{i≺i(t)}` is assembled from the ancestry of the
//! current run.

use std::sync::Arc;

use rand::Rng;
use rand::distr::Open01;
use rayon::prelude::*;

use crate::error::{assumption, domain, Error, Result};
use crate::genealogy::{Extent, RunSequence};
use crate::kernel::MemoryKernel;
use crate::markov::{ticks, MarkovProcess, TimeMode};
use crate::numeric::{exp_rem2, integrate};
use crate::rng::SimRng;
use crate::runlength::RunLength;

/// A complete model: kernel, run-length law, underlying process, start point.
#[derive(Debug, Clone)]
pub struct Model {
    pub kernel: Arc<dyn MemoryKernel>,
    pub law: Arc<dyn RunLength>,
    pub markov: Arc<dyn MarkovProcess>,
    pub origin: Vec<f64>,
}

impl Model {
    pub fn new(
        kernel: Arc<dyn MemoryKernel>,
        law: Arc<dyn RunLength>,
        markov: Arc<dyn MarkovProcess>,
    ) -> Result<Self> {
        if markov.time_mode() == TimeMode::Discrete && !law.integer_valued() {
            return Err(assumption(
                "time domain",
                format!(
                    "{} runs in discrete time but {} run-lengths {:?} are not integer valued",
                    markov.name(),
                    law.name(),
                    law.params()
                ),
            ));
        }
        let origin = vec![0.0; markov.dim()];
        Ok(Self {
            kernel,
            law,
            markov,
            origin,
        })
    }

    pub fn environment(&self, extent: Extent, seed: u64) -> Result<Environment> {
        let runs = RunSequence::build(self.law.clone(), self.kernel.clone(), extent, seed)?;
        Ok(Environment {
            runs,
            kernel: self.kernel.clone(),
            markov: self.markov.clone(),
            origin: self.origin.clone(),
        })
    }
}

/// A model with its environment drawn.
#[derive(Debug, Clone)]
pub struct Environment {
    pub runs: RunSequence,
    pub kernel: Arc<dyn MemoryKernel>,
    pub markov: Arc<dyn MarkovProcess>,
    pub origin: Vec<f64>,
}

/// `(i(t), A(t))` with `T_{i(t)-1} ≤ t < T_{i(t)}`.
pub fn residual(runs: &RunSequence, t: f64) -> Result<(usize, f64)> {
    let i = runs.run_containing(t)?;
    Ok((i, t - runs.start(i)))
}

/// Distance from `T_{i-1}` to a kernel-weighted point of run `i`.
pub fn sample_f(runs: &RunSequence, kernel: &dyn MemoryKernel, i: usize, rng: &mut SimRng) -> Result<f64> {
    if i < 1 || i > runs.count() {
        return Err(domain(format!("run {i} outside 1..={}", runs.count())));
    }
    let p: f64 = rng.sample(Open01);
    if kernel.is_uniform() {
        return Ok(p * runs.length(i));
    }
    kernel.segment_quantile(runs.start(i), runs.end(i), p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeChangeSample {
    pub run_index: usize,
    /// `A(t)`.
    pub residual: f64,
    /// `B(t)`.
    pub memory: f64,
    /// `S(t) = A(t) + B(t)`.
    pub total: f64,
    /// `(i, F_i)` per ancestor, when requested.
    pub f_draws: Option<Vec<(usize, f64)>>,
}

pub fn sample_time_change(
    runs: &RunSequence,
    kernel: &dyn MemoryKernel,
    t: f64,
    rng: &mut SimRng,
    keep_draws: bool,
) -> Result<TimeChangeSample> {
    let (i, a) = residual(runs, t)?;
    let mut draws = keep_draws.then(Vec::new);
    let mut memory = 0.0;
    for anc in runs.sample_ancestors(i, rng)? {
        let f = sample_f(runs, kernel, anc, rng)?;
        memory += f;
        if let Some(d) = draws.as_mut() {
            d.push((anc, f));
        }
    }
    let total = a + memory;
    if !(total <= t * (1.0 + 4.0 * f64::EPSILON)) {
        return Err(Error::Numeric(format!("time change {total} exceeds t = {t}")));
    }
    Ok(TimeChangeSample {
        run_index: i,
        residual: a,
        memory,
        total: total.min(t),
        f_draws: draws,
    })
}

/// `E[e^{ξF} | L] - 1` for a run `[start, start + length]`.
pub fn mgf_minus_one(
    kernel: &dyn MemoryKernel,
    start: f64,
    length: f64,
    log_weight: f64,
    xi: f64,
) -> Result<f64> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    if kernel.is_uniform() {
        let z = xi * length;
        return Ok(exp_rem2(z) / z);
    }
    let f = |u: f64| {
        let lm = kernel.log_eval(start + u).unwrap_or(f64::NEG_INFINITY);
        (xi * u).exp_m1() * (lm - log_weight).exp()
    };
    integrate(f, 0.0, length, 1e-10).map_err(|e| match e {
        Error::Numeric(msg) => Error::Numeric(format!(
            "E[e^(xi F)] on run [{start}, {}] at xi = {xi}: {msg}",
            start + length
        )),
        other => other,
    })
}

/// `ln(1 + (W_i/S_i)(E[e^{ξF_i}] - 1))`.
pub fn log_mgf_term(
    kernel: &dyn MemoryKernel,
    start: f64,
    length: f64,
    ratio: f64,
    log_weight: f64,
    xi: f64,
) -> Result<f64> {
    Ok((ratio * mgf_minus_one(kernel, start, length, log_weight, xi)?).ln_1p())
}

const TERM_CHUNK: usize = 4096;

/// `ln E[e^{ξB(t)} | L]`, exact given the environment.
pub fn exact_log_mgf_b(runs: &RunSequence, kernel: &dyn MemoryKernel, t: f64, xi: f64) -> Result<f64> {
    let (i, _) = residual(runs, t)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let indices: Vec<usize> = (1..i).collect();
    let terms: Vec<Result<Vec<f64>>> = indices
        .par_chunks(TERM_CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&k| {
                    log_mgf_term(
                        kernel,
                        runs.start(k),
                        runs.length(k),
                        runs.ratio(k),
                        runs.log_weight(k),
                        xi,
                    )
                })
                .collect()
        })
        .collect();
    let mut sum = 0.0;
    for chunk in terms {
        for v in chunk? {
            sum += v;
        }
    }
    Ok(sum)
}

/// `Z(S(t))` started at the origin.
pub fn simulate_timechange(env: &Environment, t: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
    let s = sample_time_change(&env.runs, env.kernel.as_ref(), t, rng, false)?;
    let mut state = env.origin.clone();
    env.markov.advance(&mut state, 0.0, s.total, rng);
    Ok(state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relocation {
    /// Index of the run that starts at this relocation.
    pub run: usize,
    /// `R_n`, the past time jumped to.
    pub target_time: f64,
    /// `V_n = X(R_n)`.
    pub position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RelocationTrace {
    pub relocations: Vec<Relocation>,
    pub endpoint: Vec<f64>,
}

// Values of one run's path at the offsets queried so far.
enum RunPath {
    Sparse {
        clock: f64,
        points: Vec<(f64, Vec<f64>)>,
    },
    Prefix {
        clock: f64,
        dim: usize,
        positions: Vec<f64>,
    },
}

impl RunPath {
    fn new(mode: TimeMode, start: Vec<f64>, clock: f64) -> Self {
        match mode {
            TimeMode::Continuous => RunPath::Sparse {
                clock,
                points: vec![(0.0, start)],
            },
            TimeMode::Discrete => RunPath::Prefix {
                clock,
                dim: start.len(),
                positions: start,
            },
        }
    }

    fn clock(&self) -> f64 {
        match self {
            RunPath::Sparse { clock, .. } | RunPath::Prefix { clock, .. } => *clock,
        }
    }

    fn at(&mut self, markov: &dyn MarkovProcess, offset: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
        match self {
            RunPath::Sparse { points, .. } => {
                let idx = points.partition_point(|(s, _)| *s < offset);
                if idx < points.len() && points[idx].0 == offset {
                    return Ok(points[idx].1.clone());
                }
                let (s0, left) = &points[idx - 1];
                let value = if idx < points.len() {
                    let (s1, right) = &points[idx];
                    let mut out = vec![0.0; left.len()];
                    markov.bridge(left, right, (*s0, offset, *s1), rng, &mut out)?;
                    out
                } else {
                    let mut out = left.clone();
                    markov.advance(&mut out, 0.0, offset - s0, rng);
                    out
                };
                points.insert(idx, (offset, value.clone()));
                Ok(value)
            }
            RunPath::Prefix { clock, dim, positions } => {
                let k = ticks(*clock, offset) as usize;
                while positions.len() / *dim <= k {
                    let last = positions.len() - *dim;
                    let mut next = positions[last..].to_vec();
                    markov.advance(&mut next, 0.0, 1.0, rng);
                    positions.extend_from_slice(&next);
                }
                Ok(positions[k * *dim..(k + 1) * *dim].to_vec())
            }
        }
    }
}

/// Runs the relocation dynamics up to `t`. Each run keeps the path values
/// at the offsets that later relocations land on, refined consistently.
pub fn simulate_direct(
    env: &Environment,
    t: f64,
    rng: &mut SimRng,
    record: bool,
) -> Result<(Vec<f64>, Option<RelocationTrace>)> {
    let runs = &env.runs;
    let kernel = env.kernel.as_ref();
    let markov = env.markov.as_ref();
    let mode = markov.time_mode();
    let (last, a) = residual(runs, t)?;
    let mut paths = Vec::with_capacity(last);
    paths.push(RunPath::new(mode, env.origin.clone(), 0.0));
    let mut trace = record.then(RelocationTrace::default);
    for n in 1..last {
        let u: f64 = rng.sample(Open01);
        let target = kernel.inverse_cumulative(u.ln() + runs.log_prefix(n))?;
        let target = target.clamp(0.0, runs.end(n));
        let j = runs.times()[..=n].partition_point(|&x| x <= target).clamp(1, n);
        let offset = (target - runs.start(j)).clamp(0.0, runs.length(j));
        let path = &mut paths[j - 1];
        let clock = path.clock() + offset;
        let position = path.at(markov, offset, rng)?;
        if let Some(tr) = trace.as_mut() {
            tr.relocations.push(Relocation {
                run: n + 1,
                target_time: target,
                position: position.clone(),
            });
        }
        paths.push(RunPath::new(mode, position, clock));
    }
    let endpoint = paths[last - 1].at(markov, a, rng)?;
    if let Some(tr) = trace.as_mut() {
        tr.endpoint = endpoint.clone();
    }
    Ok((endpoint, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{LogPowerKernel, PowerExpKernel};
    use crate::markov::{BrownianMotion, LatticeWalk};
    use crate::rng::stream;
    use crate::runlength::{Deterministic, UniformInterval};
    use approx::assert_relative_eq;

    fn uniform_unit(n: usize) -> (RunSequence, LogPowerKernel) {
        let runs = RunSequence::build(
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(LogPowerKernel::uniform()),
            Extent::Count(n),
            0,
        )
        .unwrap();
        (runs, LogPowerKernel::uniform())
    }

    #[test]
    fn residual_examples() {
        let (runs, _) = uniform_unit(10);
        assert_eq!(residual(&runs, 3.25).unwrap(), (4, 0.25));
        assert_eq!(residual(&runs, 0.0).unwrap(), (1, 0.0));
        assert_eq!(residual(&runs, 3.0).unwrap(), (4, 0.0));
        assert!(residual(&runs, 11.0).is_err());
    }

    #[test]
    fn first_run_has_no_memory() {
        let (runs, k) = uniform_unit(10);
        let mut rng = stream(1, 0);
        let s = sample_time_change(&runs, &k, 0.7, &mut rng, true).unwrap();
        assert_eq!((s.run_index, s.memory, s.total), (1, 0.0, 0.7));
        assert_eq!(s.f_draws, Some(vec![]));
    }

    #[test]
    fn exact_mgf_uniform_kernel_closed_form() {
        let (runs, k) = uniform_unit(200);
        let xi = 0.8;
        let lam = Deterministic::new(1.0).unwrap();
        let lam = crate::runlength::RunLength::lambda(&lam, xi).unwrap();
        let want: f64 = (1..150).map(|i| (lam / i as f64).ln_1p()).sum();
        let got = exact_log_mgf_b(&runs, &k, 149.5, xi).unwrap();
        assert_relative_eq!(got, want, max_relative = 1e-13);
        assert_eq!(exact_log_mgf_b(&runs, &k, 149.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_mgf_matches_uniform_closed_form() {
        // μ ≡ 1 through the generic quadrature path
        #[derive(Debug)]
        struct Flat;
        impl MemoryKernel for Flat {
            fn family(&self) -> crate::kernel::KernelFamily {
                crate::kernel::KernelFamily::Mu1
            }
            fn name(&self) -> &'static str {
                "flat"
            }
            fn params(&self) -> Vec<(&'static str, f64)> {
                vec![]
            }
            fn regime(&self) -> crate::kernel::Regime {
                crate::kernel::Regime::Steep
            }
            fn log_eval(&self, _x: f64) -> Result<f64> {
                Ok(0.0)
            }
            fn log_cumulative(&self, x: f64) -> Result<f64> {
                Ok(x.ln())
            }
            fn inverse_cumulative(&self, v: f64) -> Result<f64> {
                Ok(v.exp())
            }
            fn log_increment(&self, x0: f64, x1: f64) -> f64 {
                (x1 / x0).ln()
            }
            fn inverse_increment(&self, x0: f64, r: f64) -> f64 {
                x0 * r.exp_m1()
            }
            fn scale(&self, t: f64) -> Result<f64> {
                Ok(t.ln())
            }
            fn scale_floor(&self) -> f64 {
                1.0
            }
        }
        for &(xi, len) in &[(0.5, 1.0), (-2.0, 1.3), (3.0, 0.7)] {
            let q = mgf_minus_one(&Flat, 10.0, len, f64::ln(len), xi).unwrap();
            let z: f64 = xi * len;
            assert_relative_eq!(q, exp_rem2(z) / z, max_relative = 1e-10);
        }
    }

    #[test]
    fn direct_trace_invariants() {
        let model = Model::new(
            Arc::new(PowerExpKernel::new(1.0, 0.5).unwrap()),
            Arc::new(UniformInterval::new(0.5, 1.5).unwrap()),
            Arc::new(BrownianMotion::new(1).unwrap()),
        )
        .unwrap();
        let env = model.environment(Extent::Horizon(60.0), 3).unwrap();
        let mut rng = stream(9, 0);
        for _ in 0..50 {
            let (x, trace) = simulate_direct(&env, 50.0, &mut rng, true).unwrap();
            let trace = trace.unwrap();
            assert_eq!(trace.endpoint, x);
            for r in &trace.relocations {
                assert!(r.target_time < env.runs.start(r.run));
            }
        }
    }

    #[test]
    fn lattice_direct_moves_on_integers() {
        let model = Model::new(
            Arc::new(LogPowerKernel::uniform()),
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(LatticeWalk::new(1).unwrap()),
        )
        .unwrap();
        let env = model.environment(Extent::Horizon(30.0), 3).unwrap();
        let mut rng = stream(2, 0);
        for _ in 0..200 {
            let (x, _) = simulate_direct(&env, 20.0, &mut rng, false).unwrap();
            assert_eq!(x[0].fract(), 0.0);
            assert!(x[0].abs() <= 20.0);
        }
    }

    #[test]
    fn discrete_model_rejects_continuous_lengths() {
        let err = Model::new(
            Arc::new(LogPowerKernel::uniform()),
            Arc::new(UniformInterval::new(0.5, 1.5).unwrap()),
            Arc::new(LatticeWalk::new(1).unwrap()),
        )
        .unwrap_err();
        assert!(err.to_string().contains("discrete"), "{err}");
    }
}
