//! Independence of the ancestor indicators, exactly and by sampling.

use crate::error::Result;
use crate::genealogy::{ancestry_direct, ancestry_dobrow, exact_ancestry_law, product_law, RunSequence};
use crate::rng::replicate;
use crate::verify::stats::{chi_square_gof, ChiSquare};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DobrowReport {
    pub target: usize,
    /// Total variation between the chain-enumerated law and the product law.
    pub tv: f64,
    pub samples: usize,
    /// Parent-chain samples against the product law.
    pub chi_square: Option<ChiSquare>,
}

/// Which sampler feeds the goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncestrySampler {
    Direct,
    Bernoulli,
}

pub fn sample_mask_counts(
    runs: &RunSequence,
    n: usize,
    samples: usize,
    seed: u64,
    sampler: AncestrySampler,
) -> Result<Vec<u64>> {
    let masks = replicate(samples, seed, |rng, _| match sampler {
        AncestrySampler::Direct => ancestry_direct(runs, n, rng).map(|v| v.mask()),
        AncestrySampler::Bernoulli => ancestry_dobrow(runs, n, rng).map(|v| v.mask()),
    });
    let mut counts = vec![0u64; 1 << (n - 1)];
    for m in masks {
        counts[m?] += 1;
    }
    Ok(counts)
}

pub fn dobrow_gof(runs: &RunSequence, n: usize, samples: usize, seed: u64) -> Result<DobrowReport> {
    let exact = exact_ancestry_law(runs, n)?;
    let product = product_law(runs, n)?;
    let tv = exact.total_variation(&product);
    let chi_square = if samples > 0 {
        let counts = sample_mask_counts(runs, n, samples, seed, AncestrySampler::Direct)?;
        Some(chi_square_gof(&counts, &product.probabilities)?)
    } else {
        None
    };
    Ok(DobrowReport {
        target: n,
        tv,
        samples,
        chi_square,
    })
}
