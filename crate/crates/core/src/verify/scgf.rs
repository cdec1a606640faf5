//! Convergence of `(1/s(t)) ln E[e^{ξB(t)} | L]` to `Λ(ξ)`.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::genealogy::{EnvironmentStream, RunRecord};
use crate::numeric::linear_fit;
use crate::sim::{log_mgf_term, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgfRow {
    pub xi: f64,
    pub horizon: f64,
    pub s_of_t: f64,
    pub exact_log_mgf: f64,
    /// Regression slope of the exact values against `s(t)` over the ladder.
    pub slope_fit: f64,
    pub lambda_theory: f64,
    /// `|exact / s(t) - Λ(ξ)|`.
    pub abs_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgfReport {
    pub env_seed: u64,
    pub rows: Vec<ScgfRow>,
}

impl ScgfReport {
    pub fn rows_for(&self, xi: f64) -> impl Iterator<Item = &ScgfRow> {
        self.rows.iter().filter(move |r| r.xi == xi)
    }

    pub fn slope(&self, xi: f64) -> Option<f64> {
        self.rows_for(xi).next().map(|r| r.slope_fit)
    }
}

pub const MIN_LADDER: usize = 4;

pub(crate) fn check_ladder(ladder: &[f64], floor: f64, min_len: usize) -> Result<()> {
    if ladder.len() < min_len {
        return Err(domain(format!(
            "horizon ladder needs at least {min_len} points, got {}",
            ladder.len()
        )));
    }
    if ladder.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain(format!("horizon ladder must be strictly increasing: {ladder:?}")));
    }
    if !(ladder[0] > floor) || !ladder[ladder.len() - 1].is_finite() {
        return Err(domain(format!(
            "horizons must be finite and exceed the scale floor {floor}: {ladder:?}"
        )));
    }
    Ok(())
}

const BATCH: usize = 1 << 16;

/// `ln E[e^{ξB(h)} | L]` for every `ξ` and ladder horizon `h`, streaming the
/// environment so that long horizons need no storage. Indexed `[ξ][h]`.
pub fn exact_log_mgf_ladder(model: &Model, xis: &[f64], ladder: &[f64], env_seed: u64) -> Result<Vec<Vec<f64>>> {
    let kernel = model.kernel.as_ref();
    let mut sums = vec![0.0; xis.len()];
    let mut out = vec![vec![f64::NAN; ladder.len()]; xis.len()];
    let mut next = 0;
    let mut stream = EnvironmentStream::new(model.law.clone(), model.kernel.clone(), env_seed);
    while next < ladder.len() {
        let batch: Vec<RunRecord> = stream.by_ref().take(BATCH).collect::<Result<_>>()?;
        let terms: Vec<Result<Vec<f64>>> = batch
            .par_iter()
            .map(|r| {
                let log_weight = r.log_prefix + r.ratio.ln();
                xis.iter()
                    .map(|&xi| log_mgf_term(kernel, r.start, r.length, r.ratio, log_weight, xi))
                    .collect()
            })
            .collect();
        for (r, t) in batch.iter().zip(terms) {
            // run i contributes to B(h) exactly when T_i ≤ h
            while next < ladder.len() && r.end > ladder[next] {
                for (k, s) in sums.iter().enumerate() {
                    out[k][next] = *s;
                }
                next += 1;
            }
            if next == ladder.len() {
                break;
            }
            for (s, v) in sums.iter_mut().zip(t?) {
                *s += v;
            }
        }
    }
    Ok(out)
}

pub fn scgf_slope_check(model: &Model, xi_grid: &[f64], ladder: &[f64], env_seed: u64) -> Result<ScgfReport> {
    check_ladder(ladder, model.kernel.scale_floor(), MIN_LADDER)?;
    let scales: Vec<f64> = ladder
        .iter()
        .map(|&h| model.kernel.scale(h))
        .collect::<Result<_>>()?;
    let exact = exact_log_mgf_ladder(model, xi_grid, ladder, env_seed)?;
    let mut rows = Vec::with_capacity(xi_grid.len() * ladder.len());
    for (k, &xi) in xi_grid.iter().enumerate() {
        let lambda = model.law.lambda(xi)?;
        let (slope, _) = linear_fit(&scales, &exact[k]);
        for (j, &h) in ladder.iter().enumerate() {
            rows.push(ScgfRow {
                xi,
                horizon: h,
                s_of_t: scales[j],
                exact_log_mgf: exact[k][j],
                slope_fit: slope,
                lambda_theory: lambda,
                abs_gap: (exact[k][j] / scales[j] - lambda).abs(),
            });
        }
    }
    Ok(ScgfReport { env_seed, rows })
}

/// `(ξ, Λ(ξ))` on an even grid, for plotting against the fitted slopes.
pub fn theory_curve(model: &Model, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 || !(lo < hi) {
        return Err(domain(format!("theory grid needs lo < hi and >= 2 points, got [{lo}, {hi}] x {points}")));
    }
    (0..points)
        .map(|k| {
            let xi = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            Ok((xi, model.law.lambda(xi)?))
        })
        .collect()
}
