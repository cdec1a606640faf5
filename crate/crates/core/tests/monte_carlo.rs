use std::sync::Arc;

use reloc_ldp::genealogy::{ancestry_direct, ancestry_dobrow, Extent, RunSequence};
use reloc_ldp::kernel::{LogPowerKernel, PowerExpKernel};
use reloc_ldp::markov::{BrownianMotion, LatticeWalk, MarkovProcess};
use reloc_ldp::rng::{replicate, stream};
use reloc_ldp::runlength::{Deterministic, RunLength, StretchedExpTail, UniformInterval};
use reloc_ldp::verify::dobrow::{sample_mask_counts, AncestrySampler};
use reloc_ldp::verify::stats::{chi_square_gof, ks_critical, ks_two_sample, mean_se};
use reloc_ldp::verify::{
    dobrow_gof, equivalence_ks, residual_check, scgf_slope_check, tail_exponent_estimate,
};
use reloc_ldp::Model;

fn model(k: impl reloc_ldp::MemoryKernel + 'static, l: impl RunLength + 'static, m: impl MarkovProcess + 'static) -> Model {
    Model::new(Arc::new(k), Arc::new(l), Arc::new(m)).unwrap()
}

#[test]
fn lambda_matches_sample_average() {
    let laws: Vec<Box<dyn RunLength>> = vec![
        Box::new(UniformInterval::new(0.5, 1.5).unwrap()),
        Box::new(StretchedExpTail::new(2.0, 1.0).unwrap()),
        Box::new(StretchedExpTail::new(3.0, 0.7).unwrap()),
    ];
    for (k, law) in laws.iter().enumerate() {
        for xi in [-1.5, 0.7, 2.0] {
            let draws = replicate(1_000_000, 40 + k as u64, |rng, _| {
                let l = law.sample(rng);
                ((xi * l).exp() - 1.0 - xi * l) / (xi * law.mean())
            });
            let (mean, se) = mean_se(&draws);
            let want = law.lambda(xi).unwrap();
            assert!((mean - want).abs() < 4.0 * se, "{law:?} xi={xi}: {mean} ± {se} vs {want}");
        }
    }
}

#[test]
fn dobrow_marginals_by_sampling() {
    let unit = RunSequence::from_weights(&[1.0, 1.0, 1.0]).unwrap();
    let skew = RunSequence::from_weights(&[1.0, 2.0, 1.0]).unwrap();
    for (runs, want) in [(&unit, 0.5), (&skew, 2.0 / 3.0)] {
        for direct in [true, false] {
            let hits = replicate(100_000, 9, |rng, _| {
                let v = if direct {
                    ancestry_direct(runs, 3, rng)
                } else {
                    ancestry_dobrow(runs, 3, rng)
                };
                v.unwrap().bits[1] as u32
            });
            let p = hits.iter().sum::<u32>() as f64 / hits.len() as f64;
            assert!((p - want).abs() < 0.005, "direct={direct}: {p} vs {want}");
        }
    }
}

#[test]
fn two_ancestry_samplers_agree() {
    let m = model(PowerExpKernel::new(1.0, 0.5).unwrap(), Deterministic::new(1.0).unwrap(), BrownianMotion::new(1).unwrap());
    let runs = m.environment(Extent::Count(6), 3).unwrap().runs;
    let direct = sample_mask_counts(&runs, 6, 100_000, 1, AncestrySampler::Direct).unwrap();
    let bernoulli = sample_mask_counts(&runs, 6, 100_000, 2, AncestrySampler::Bernoulli).unwrap();
    let total = bernoulli.iter().sum::<u64>() as f64;
    let probs: Vec<f64> = bernoulli.iter().map(|&c| c as f64 / total).collect();
    let chi = chi_square_gof(&direct, &probs).unwrap();
    assert!(chi.p_value > 1e-3, "{chi:?}");
}

#[test]
fn dobrow_gof_on_mu2_weights() {
    let m = model(PowerExpKernel::new(1.0, 0.5).unwrap(), Deterministic::new(1.0).unwrap(), BrownianMotion::new(1).unwrap());
    let runs = m.environment(Extent::Count(6), 8).unwrap().runs;
    let r = dobrow_gof(&runs, 6, 100_000, 17).unwrap();
    assert!(r.tv < 1e-10);
    assert!(r.chi_square.unwrap().p_value > 1e-3, "{r:?}");
    let r2 = dobrow_gof(&runs, 2, 0, 17).unwrap();
    assert_eq!(r2.tv, 0.0);
    assert!(r2.chi_square.is_none());
}

#[test]
fn brownian_semigroup() {
    let bm = BrownianMotion::new(1).unwrap();
    let two_step = replicate(100_000, 5, |rng, _| {
        let mid = bm.evolve(&[0.3], 0.7, rng).unwrap();
        bm.evolve(&mid, 1.6, rng).unwrap()[0]
    });
    let one_step = replicate(100_000, 6, |rng, _| bm.evolve(&[0.3], 2.3, rng).unwrap()[0]);
    assert!(ks_two_sample(&two_step, &one_step) < 0.01);
}

#[test]
fn lattice_empirical_log_mgf_approaches_lambda_z() {
    let walk = LatticeWalk::new(1).unwrap();
    let zeta = 0.2;
    let target = walk.lambda_z(&[zeta]);
    let mut gaps = Vec::new();
    for (k, t) in [20.0, 50.0, 100.0].into_iter().enumerate() {
        let draws = replicate(400_000, 70 + k as u64, |rng, _| (zeta * walk.evolve(&[0.0], t, rng).unwrap()[0]).exp());
        let est = (draws.iter().sum::<f64>() / draws.len() as f64).ln() / t;
        gaps.push((est - target).abs() / target);
    }
    assert!(gaps.iter().all(|g| *g < 0.03), "{gaps:?}");
}

#[test]
fn equivalence_inside_first_run() {
    let m = model(
        PowerExpKernel::new(1.0, 0.5).unwrap(),
        UniformInterval::new(2.0, 3.0).unwrap(),
        BrownianMotion::new(1).unwrap(),
    );
    let r = equivalence_ks(&m, 1.5, 50_000, 1, 2).unwrap();
    assert!(r.pass(), "{r:?}");
    assert!(r.ks < ks_critical(50_000, 50_000, 1e-3));
}

#[test]
fn steep_power_kernel_scgf_slope() {
    let m = model(PowerExpKernel::new(1.0, 0.5).unwrap(), Deterministic::new(1.0).unwrap(), BrownianMotion::new(1).unwrap());
    let ladder = [1e3, 1e4, 1e5, 1e6];
    let report = scgf_slope_check(&m, &[0.0, 1.0], &ladder, 4).unwrap();
    assert!(report.rows_for(0.0).all(|r| r.exact_log_mgf == 0.0 && r.slope_fit == 0.0));
    let slope = report.slope(1.0).unwrap();
    let lambda = std::f64::consts::E - 2.0;
    assert!((slope / lambda - 1.0).abs() < 0.05, "{slope} vs {lambda}");
}

#[test]
fn scgf_gaps_shrink_for_steep_kernel() {
    let m = model(LogPowerKernel::new(1.0, 1.0).unwrap(), Deterministic::new(1.0).unwrap(), LatticeWalk::new(1).unwrap());
    let report = scgf_slope_check(&m, &[0.5, 1.0], &[1e3, 1e4, 1e5, 1e6], 2).unwrap();
    for xi in [0.5, 1.0] {
        let gaps: Vec<f64> = report.rows_for(xi).map(|r| r.abs_gap).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    }
}

#[test]
fn residual_small_for_steep_power_kernel() {
    let m = model(
        PowerExpKernel::new(1.0, 0.5).unwrap(),
        StretchedExpTail::new(2.0, 1.0).unwrap(),
        BrownianMotion::new(1).unwrap(),
    );
    let report = residual_check(&m, &[1e3, 1e4, 1e5, 1e6], &[0], 11).unwrap();
    assert!(report.max_ratio(0) < 0.1, "{:?}", report.rows);
    let det = model(LogPowerKernel::new(1.0, 1.0).unwrap(), Deterministic::new(1.0).unwrap(), BrownianMotion::new(1).unwrap());
    let report = residual_check(&det, &[10.5, 100.5, 1000.5], &[0], 11).unwrap();
    assert!(report.rows.iter().all(|r| r.residual <= 1.0));
}

#[test]
fn tail_estimates_are_ordered() {
    let m = model(LogPowerKernel::new(1.0, 1.0).unwrap(), Deterministic::new(1.0).unwrap(), BrownianMotion::new(1).unwrap());
    let report = tail_exponent_estimate(&m, &[0.0, 0.3, 0.6], &[6f64.exp()], 200_000, 1, 2).unwrap();
    let at_zero = report.rows_for(0.0)[0];
    assert_eq!(at_zero.p_hat, 1.0);
    assert_eq!(at_zero.exponent, 0.0);
    let resolved: Vec<f64> = report.rows.iter().filter(|r| r.resolved).map(|r| r.exponent).collect();
    assert!(resolved.windows(2).all(|w| w[1] < w[0]), "{resolved:?}");
    assert!(resolved[1..].iter().all(|e| *e < 0.0));
}

#[test]
fn unresolved_cells_are_flagged() {
    let m = model(LogPowerKernel::new(1.0, 1.0).unwrap(), Deterministic::new(1.0).unwrap(), BrownianMotion::new(1).unwrap());
    let report = tail_exponent_estimate(&m, &[5.0], &[6f64.exp()], 1_000, 1, 2).unwrap();
    let row = report.rows[0];
    assert!(!row.resolved);
    if row.hits == 0 {
        assert!(row.exponent.is_nan());
    }
}

#[test]
fn streams_are_reproducible() {
    let mut a = stream(3, 9);
    let mut b = stream(3, 9);
    let law = StretchedExpTail::new(2.0, 1.0).unwrap();
    for _ in 0..100 {
        assert_eq!(law.sample(&mut a).to_bits(), law.sample(&mut b).to_bits());
    }
}
