//! Naive Monte Carlo estimates of `(1/s(t)) ln P(‖X(t)‖ ≥ x s(t) | L)`.

use rayon::prelude::*;

use crate::error::Result;
use crate::genealogy::Extent;
use crate::ratefn::RateFunction;
use crate::rng::{derive_seed, stream};
use crate::sim::{simulate_timechange, Model};
use crate::verify::scgf::check_ladder;
use crate::verify::stats::wilson;

/// Cells with fewer hits are reported but not trusted.
pub const MIN_HITS: u64 = 100;

const WILSON_Z: f64 = 1.96;
const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRow {
    pub x: f64,
    pub horizon: f64,
    pub s_of_t: f64,
    pub threshold: f64,
    pub hits: u64,
    pub samples: u64,
    pub p_hat: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    /// `ln p̂ / s(t)`; NaN without hits.
    pub exponent: f64,
    pub exponent_lo: f64,
    pub exponent_hi: f64,
    /// `-inf_{‖y‖≥x} Λ*_X(y)`.
    pub theory: f64,
    pub abs_gap: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub env_seed: u64,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn rows_for(&self, x: f64) -> Vec<&TailRow> {
        self.rows.iter().filter(|r| r.x == x).collect()
    }
}

pub fn tail_exponent_estimate(
    model: &Model,
    x_grid: &[f64],
    ladder: &[f64],
    samples: usize,
    env_seed: u64,
    mc_seed: u64,
) -> Result<TailReport> {
    check_ladder(ladder, model.kernel.scale_floor(), 1)?;
    let rate = RateFunction::new(model.law.clone(), model.markov.clone());
    let theory: Vec<f64> = x_grid
        .iter()
        .map(|&x| rate.tail_exponent(x).map(|v| -v))
        .collect::<Result<_>>()?;
    let env = model.environment(Extent::Horizon(ladder[ladder.len() - 1]), env_seed)?;
    let mut rows = Vec::with_capacity(x_grid.len() * ladder.len());
    for (j, &h) in ladder.iter().enumerate() {
        let s = model.kernel.scale(h)?;
        let thresholds: Vec<f64> = x_grid.iter().map(|x| x * s).collect();
        let seed = derive_seed(mc_seed, j as u64);
        let chunks = samples.div_ceil(CHUNK);
        let per_chunk: Vec<Result<Vec<u64>>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut hits = vec![0u64; thresholds.len()];
                for idx in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                    let mut rng = stream(seed, idx as u64);
                    let x = simulate_timechange(&env, h, &mut rng)?;
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    for (k, th) in thresholds.iter().enumerate() {
                        if norm >= *th {
                            hits[k] += 1;
                        }
                    }
                }
                Ok(hits)
            })
            .collect();
        let mut hits = vec![0u64; thresholds.len()];
        for chunk in per_chunk {
            for (total, h) in hits.iter_mut().zip(chunk?) {
                *total += h;
            }
        }
        let n = samples as u64;
        for (k, &x) in x_grid.iter().enumerate() {
            let (lo, hi) = wilson(hits[k], n, WILSON_Z);
            let p_hat = hits[k] as f64 / n as f64;
            let exponent = if hits[k] > 0 { p_hat.ln() / s } else { f64::NAN };
            rows.push(TailRow {
                x,
                horizon: h,
                s_of_t: s,
                threshold: thresholds[k],
                hits: hits[k],
                samples: n,
                p_hat,
                p_lo: lo,
                p_hi: hi,
                exponent,
                exponent_lo: lo.ln() / s,
                exponent_hi: hi.ln() / s,
                theory: theory[k],
                abs_gap: (exponent - theory[k]).abs(),
                resolved: hits[k] >= MIN_HITS,
            });
        }
    }
    Ok(TailReport { env_seed, rows })
}
