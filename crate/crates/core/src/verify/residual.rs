//! Decay of the residual `A(t) = t - T_{i(t)-1}` against the scale `s(t)`.

use rayon::prelude::*;

use crate::error::Result;
use crate::genealogy::LengthStream;
use crate::kernel::Regime;
use crate::sim::Model;
use crate::verify::scgf::check_ladder;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub env_seed: u64,
    pub horizon: f64,
    pub s_of_t: f64,
    pub residual: f64,
    /// `A(t) / s(t)` at the horizon.
    pub ratio: f64,
    /// Quantiles of `A(t')/s(t')` over the window `t' ∈ [t, 2t]`.
    pub window_median: f64,
    pub window_q90: f64,
    pub window_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub regime: Regime,
    pub rows: Vec<ResidualRow>,
}

impl ResidualReport {
    /// Largest ladder ratio for one seed.
    pub fn max_ratio(&self, env_seed: u64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.env_seed == env_seed)
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn residual_check(model: &Model, ladder: &[f64], seeds: &[u64], window_points: usize) -> Result<ResidualReport> {
    check_ladder(ladder, model.kernel.scale_floor(), 1)?;
    let per_seed: Vec<Result<Vec<ResidualRow>>> = seeds
        .par_iter()
        .map(|&seed| residual_one(model, ladder, seed, window_points))
        .collect();
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    Ok(ResidualReport {
        regime: model.kernel.regime(),
        rows,
    })
}

fn residual_one(model: &Model, ladder: &[f64], seed: u64, window_points: usize) -> Result<Vec<ResidualRow>> {
    // every query time, tagged with its ladder index; offset 0 is the horizon
    let mut queries: Vec<(f64, usize)> = Vec::new();
    for (j, &h) in ladder.iter().enumerate() {
        queries.push((h, j));
        for k in 1..window_points {
            queries.push((h + h * k as f64 / (window_points - 1) as f64, j));
        }
    }
    queries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut at_horizon = vec![f64::NAN; ladder.len()];
    let mut windows: Vec<Vec<f64>> = vec![Vec::with_capacity(window_points); ladder.len()];
    let mut lengths = LengthStream::new(model.law.clone(), seed);
    let (mut start, mut end) = (0.0, 0.0);
    for (t, j) in queries {
        while end <= t {
            start = end;
            end += lengths.next().expect("length stream is endless");
        }
        let a = t - start;
        let ratio = a / model.kernel.scale(t)?;
        if t == ladder[j] {
            at_horizon[j] = a;
        }
        windows[j].push(ratio);
    }
    ladder
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let s = model.kernel.scale(h)?;
            let w = &mut windows[j];
            w.sort_by(f64::total_cmp);
            let q = |p: f64| w[((p * (w.len() - 1) as f64).round()) as usize];
            Ok(ResidualRow {
                env_seed: seed,
                horizon: h,
                s_of_t: s,
                residual: at_horizon[j],
                ratio: at_horizon[j] / s,
                window_median: q(0.5),
                window_q90: q(0.9),
                window_max: w[w.len() - 1],
            })
        })
        .collect()
}
