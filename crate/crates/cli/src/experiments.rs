//! The experiment kinds, selected by the config's `experiment` key.

use std::collections::BTreeMap;

use reloc_ldp::genealogy::{Extent, RunSequence, EXACT_LAW_MAX};
use reloc_ldp::registry::Params;
use reloc_ldp::rng::derive_seed;
use reloc_ldp::verify::scgf::{theory_curve, MIN_LADDER};
use reloc_ldp::verify::{
    dobrow_gof, equivalence_ks, lemma_sum_check, residual_check, scgf_slope_check, tail_exponent_estimate,
    LemmaSum, TestFunction,
};
use reloc_ldp::{Model, RateFunction};

use crate::config::ExperimentConfig;
use crate::output::{Cell, Table};
use crate::CliError;

pub const SCGF: &[&str] = &["xi", "horizon", "s_of_t", "exact_log_mgf", "slope_fit", "lambda_theory", "abs_gap"];
pub const SCGF_THEORY: &[&str] = &["xi", "lambda_theory"];
pub const RESIDUAL: &[&str] = &[
    "env_seed",
    "regime",
    "horizon",
    "s_of_t",
    "residual",
    "ratio",
    "window_median",
    "window_q90",
    "window_max",
];
pub const LEMMAS: &[&str] = &[
    "form",
    "exponent",
    "g",
    "n",
    "empirical",
    "predicted",
    "remainder",
    "remainder_over_log_n",
];
pub const DOBROW: &[&str] = &["target", "tv", "samples", "chi_square", "dof", "p_value"];
pub const EQUIVALENCE: &[&str] = &["t", "samples", "ks", "critical", "pass", "direct_mean", "timechange_mean"];
pub const TAILS: &[&str] = &[
    "x",
    "horizon",
    "s_of_t",
    "threshold",
    "hits",
    "samples",
    "p_hat",
    "p_lo",
    "p_hi",
    "exponent",
    "exponent_lo",
    "exponent_hi",
    "theory",
    "abs_gap",
    "resolved",
];
pub const TAILS_THEORY: &[&str] = &["x", "tail_exponent"];

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;

    /// Every table the experiment writes, as `(kind, header)`.
    fn tables(&self) -> &'static [(&'static str, &'static [&'static str])];

    /// Setting keys the experiment understands.
    fn settings(&self) -> &'static [&'static str];

    /// Checks settings without running anything.
    fn validate(&self, cfg: &ExperimentConfig, model: &Model) -> Result<(), CliError>;

    fn run(&self, cfg: &ExperimentConfig, model: &Model) -> Result<Vec<Table>, CliError>;
}

pub fn registry() -> BTreeMap<&'static str, Box<dyn Experiment>> {
    let all: Vec<Box<dyn Experiment>> = vec![
        Box::new(Scgf),
        Box::new(Residual),
        Box::new(Lemmas),
        Box::new(Dobrow),
        Box::new(Equivalence),
        Box::new(Tails),
    ];
    all.into_iter().map(|e| (e.name(), e)).collect()
}

pub fn lookup(name: &str) -> Result<Box<dyn Experiment>, CliError> {
    let mut all = registry();
    let known = all.keys().copied().collect::<Vec<_>>().join(", ");
    all.remove(name)
        .ok_or_else(|| CliError::Invalid(format!("unknown experiment '{name}' (known: {known})")))
}

/// Header of a CSV kind, across all experiments.
pub fn schema(kind: &str) -> Option<&'static [&'static str]> {
    registry()
        .values()
        .flat_map(|e| e.tables().iter())
        .find(|(k, _)| *k == kind)
        .map(|(_, h)| *h)
}

pub fn check_keys(exp: &dyn Experiment, settings: &Params) -> Result<(), CliError> {
    for key in settings.keys() {
        if !exp.settings().contains(&key) {
            return Err(CliError::Invalid(format!(
                "unknown key '{key}' for experiment {} (accepted: {})",
                exp.name(),
                exp.settings().join(", ")
            )));
        }
    }
    Ok(())
}

/// Typed access to settings with defaults.
struct Settings<'a>(&'a Params);

impl Settings<'_> {
    fn err(key: &str, e: impl std::fmt::Display) -> CliError {
        CliError::Invalid(format!("'{key}': {e}"))
    }

    /// A list, also accepting a single number.
    fn numbers(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        if let Ok(x) = self.0.number(key) {
            return Ok(Some(vec![x]));
        }
        Ok(self.0.list(key).map_err(|e| Self::err(key, e))?.map(<[f64]>::to_vec))
    }

    fn numbers_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        Ok(self.numbers(key)?.unwrap_or_else(|| default.to_vec()))
    }

    fn required(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.numbers(key)?.ok_or_else(|| CliError::Invalid(format!("missing '{key}'")))
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.0.number_or(key, default).map_err(|e| Self::err(key, e))
    }

    fn count_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = self.number_or(key, default as f64)?;
        to_count(key, v)
    }

    fn counts(&self, values: &[f64], key: &str) -> Result<Vec<usize>, CliError> {
        values.iter().map(|&v| to_count(key, v)).collect()
    }

    fn text_or<'b>(&'b self, key: &str, default: &'b str) -> Result<&'b str, CliError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(_) => self
                .0
                .text(key)
                .ok_or_else(|| CliError::Invalid(format!("'{key}' must be a string"))),
        }
    }
}

fn to_count(key: &str, v: f64) -> Result<usize, CliError> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as usize)
    } else {
        Err(CliError::Invalid(format!("'{key}' must hold non-negative integers, got {v}")))
    }
}

fn horizon_ladder(s: &Settings, model: &Model, min_len: usize) -> Result<Vec<f64>, CliError> {
    let ladder = s.required("ladder")?;
    let floor = model.kernel.scale_floor();
    if ladder.len() < min_len
        || ladder.windows(2).any(|w| !(w[0] < w[1]))
        || !(ladder[0] > floor)
        || !ladder[ladder.len() - 1].is_finite()
    {
        return Err(CliError::Invalid(format!(
            "'ladder' needs at least {min_len} strictly increasing finite horizons above {floor}, got {ladder:?}"
        )));
    }
    Ok(ladder)
}

fn finite(key: &str, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Invalid(format!("'{key}' must be a non-empty list of finite numbers")));
    }
    Ok(())
}

fn even_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

fn theory_points(s: &Settings) -> Result<usize, CliError> {
    let n = s.count_or("theory.points", 201)?;
    if n < 2 {
        return Err(CliError::Invalid("'theory.points' must be at least 2".into()));
    }
    Ok(n)
}

struct Scgf;

struct ScgfPlan {
    xi: Vec<f64>,
    ladder: Vec<f64>,
    lo: f64,
    hi: f64,
    points: usize,
}

impl Scgf {
    fn plan(&self, cfg: &ExperimentConfig, model: &Model) -> Result<ScgfPlan, CliError> {
        let s = Settings(&cfg.settings);
        let xi = s.numbers_or("grid.xi", &[0.5, 1.0, 2.0])?;
        finite("grid.xi", &xi)?;
        let ladder = horizon_ladder(&s, model, MIN_LADDER)?;
        let lo = s.number_or("theory.lo", xi.iter().copied().fold(0.0, f64::min))?;
        let hi = s.number_or("theory.hi", xi.iter().copied().fold(f64::NEG_INFINITY, f64::max))?;
        if !(lo < hi) {
            return Err(CliError::Invalid(format!("theory range needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(ScgfPlan {
            xi,
            ladder,
            lo,
            hi,
            points: theory_points(&s)?,
        })
    }
}

impl Experiment for Scgf {
    fn name(&self) -> &'static str {
        "scgf"
    }

    fn tables(&self) -> &'static [(&'static str, &'static [&'static str])] {
        &[("scgf", SCGF), ("scgf_theory", SCGF_THEORY)]
    }

    fn settings(&self) -> &'static [&'static str] {
        &["grid.xi", "ladder", "theory.lo", "theory.hi", "theory.points"]
    }

    fn validate(&self, cfg: &ExperimentConfig, model: &Model) -> Result<(), CliError> {
        self.plan(cfg, model).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, model: &Model) -> Result<Vec<Table>, CliError> {
        let p = self.plan(cfg, model)?;
        let report = scgf_slope_check(model, &p.xi, &p.ladder, cfg.env_seed)?;
        let mut main = Table::new("scgf", SCGF);
        for r in &report.rows {
            main.push(vec![
                r.xi.into(),
                r.horizon.into(),
                r.s_of_t.into(),
                r.exact_log_mgf.into(),
                r.slope_fit.into(),
                r.lambda_theory.into(),
                r.abs_gap.into(),
            ]);
        }
        let mut theory = Table::new("scgf_theory", SCGF_THEORY);
        for (xi, l) in theory_curve(model, p.lo, p.hi, p.points)? {
            theory.push(vec![xi.into(), l.into()]);
        }
        Ok(vec![main, theory])
    }
}

struct Residual;

impl Residual {
    fn plan(&self, cfg: &ExperimentConfig, model: &Model) -> Result<(Vec<f64>, Vec<u64>, usize), CliError> {
        let s = Settings(&cfg.settings);
        let ladder = horizon_ladder(&s, model, 1)?;
        let seeds: Vec<u64> = match s.numbers("residual.seeds")? {
            Some(v) => s.counts(&v, "residual.seeds")?.into_iter().map(|x| x as u64).collect(),
            None => (0..5).map(|k| cfg.env_seed.wrapping_add(k)).collect(),
        };
        if seeds.is_empty() {
            return Err(CliError::Invalid("'residual.seeds' must not be empty".into()));
        }
        let window = s.count_or("residual.window", 1001)?;
        Ok((ladder, seeds, window))
    }
}

impl Experiment for Residual {
    fn name(&self) -> &'static str {
        "residual"
    }

    fn tables(&self) -> &'static [(&'static str, &'static [&'static str])] {
        &[("residual", RESIDUAL)]
    }

    fn settings(&self) -> &'static [&'static str] {
        &["ladder", "residual.seeds", "residual.window"]
    }

    fn validate(&self, cfg: &ExperimentConfig, model: &Model) -> Result<(), CliError> {
        self.plan(cfg, model).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, model: &Model) -> Result<Vec<Table>, CliError> {
        let (ladder, seeds, window) = self.plan(cfg, model)?;
        let report = residual_check(model, &ladder, &seeds, window)?;
        let mut t = Table::new("residual", RESIDUAL);
        for r in &report.rows {
            t.push(vec![
                r.env_seed.into(),
                report.regime.label().into(),
                r.horizon.into(),
                r.s_of_t.into(),
                r.residual.into(),
                r.ratio.into(),
                r.window_median.into(),
                r.window_q90.into(),
                r.window_max.into(),
            ]);
        }
        Ok(vec![t])
    }
}

struct Lemmas;

impl Lemmas {
    fn plan(&self, cfg: &ExperimentConfig) -> Result<(TestFunction, Vec<LemmaSum>, Vec<usize>), CliError> {
        let s = Settings(&cfg.settings);
        let xi = s.numbers("lemma.xi")?.map(|v| v[0]);
        let g = TestFunction::parse(s.text_or("lemma.g", "one")?, xi)
            .map_err(|e| CliError::Invalid(format!("'lemma.g': {e}")))?;
        let mut sums: Vec<LemmaSum> = s
            .numbers_or("lemma.b", &[0.0, -1.0])?
            .into_iter()
            .map(|b| LemmaSum::LogPower { b })
            .collect();
        for delta in s.numbers_or("lemma.delta", &[0.5])? {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(CliError::Invalid(format!("'lemma.delta' values must lie in (0, 1), got {delta}")));
            }
            sums.push(LemmaSum::Power { delta });
        }
        let ladder = s.counts(&s.required("ladder")?, "ladder")?;
        if ladder.is_empty() || ladder[0] < 2 || ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Invalid(format!(
                "'ladder' must be increasing run counts >= 2, got {ladder:?}"
            )));
        }
        Ok((g, sums, ladder))
    }
}

impl Experiment for Lemmas {
    fn name(&self) -> &'static str {
        "lemmas"
    }

    fn tables(&self) -> &'static [(&'static str, &'static [&'static str])] {
        &[("lemmas", LEMMAS)]
    }

    fn settings(&self) -> &'static [&'static str] {
        &["ladder", "lemma.b", "lemma.delta", "lemma.g", "lemma.xi"]
    }

    fn validate(&self, cfg: &ExperimentConfig, _model: &Model) -> Result<(), CliError> {
        self.plan(cfg).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, model: &Model) -> Result<Vec<Table>, CliError> {
        let (g, sums, ladder) = self.plan(cfg)?;
        let mut t = Table::new("lemmas", LEMMAS);
        for sum in sums {
            for r in lemma_sum_check(g, sum, model.law.clone(), &ladder, cfg.env_seed)? {
                t.push(vec![
                    r.form.into(),
                    r.exponent.into(),
                    r.g.into(),
                    r.n.into(),
                    r.empirical.into(),
                    r.predicted.into(),
                    r.remainder.into(),
                    r.remainder_over_log_n.into(),
                ]);
            }
        }
        Ok(vec![t])
    }
}

struct Dobrow;

impl Dobrow {
    fn plan(&self, cfg: &ExperimentConfig) -> Result<(Vec<usize>, usize, Option<Vec<f64>>), CliError> {
        let s = Settings(&cfg.settings);
        let targets = s.counts(
            &s.numbers_or("dobrow.targets", &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0])?,
            "dobrow.targets",
        )?;
        if targets.is_empty() || targets.iter().any(|&n| !(2..=EXACT_LAW_MAX).contains(&n)) {
            return Err(CliError::Invalid(format!(
                "'dobrow.targets' must lie in 2..={EXACT_LAW_MAX}, got {targets:?}"
            )));
        }
        let samples = s.count_or("samples", 100_000)?;
        let weights = s.numbers("dobrow.weights")?;
        if let Some(w) = &weights {
            let need = *targets.iter().max().expect("non-empty");
            if w.len() < need {
                return Err(CliError::Invalid(format!(
                    "'dobrow.weights' has {} entries but target {need} needs that many",
                    w.len()
                )));
            }
        }
        Ok((targets, samples, weights))
    }
}

impl Experiment for Dobrow {
    fn name(&self) -> &'static str {
        "dobrow"
    }

    fn tables(&self) -> &'static [(&'static str, &'static [&'static str])] {
        &[("dobrow", DOBROW)]
    }

    fn settings(&self) -> &'static [&'static str] {
        &["dobrow.targets", "dobrow.weights", "samples"]
    }

    fn validate(&self, cfg: &ExperimentConfig, _model: &Model) -> Result<(), CliError> {
        self.plan(cfg).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, model: &Model) -> Result<Vec<Table>, CliError> {
        let (targets, samples, weights) = self.plan(cfg)?;
        let runs = match weights {
            Some(w) => RunSequence::from_weights(&w)?,
            None => {
                let n = *targets.iter().max().expect("non-empty");
                model.environment(Extent::Count(n), cfg.env_seed)?.runs
            }
        };
        let mut t = Table::new("dobrow", DOBROW);
        for &n in &targets {
            let r = dobrow_gof(&runs, n, samples, derive_seed(cfg.master_seed, n as u64))?;
            let (chi, dof, p) = match r.chi_square {
                Some(c) => (Cell::Float(c.statistic), Cell::from(c.dof), Cell::Float(c.p_value)),
                None => (Cell::Empty, Cell::Empty, Cell::Empty),
            };
            t.push(vec![r.target.into(), r.tv.into(), r.samples.into(), chi, dof, p]);
        }
        Ok(vec![t])
    }
}

struct Equivalence;

impl Equivalence {
    fn plan(&self, cfg: &ExperimentConfig) -> Result<(Vec<f64>, usize), CliError> {
        let s = Settings(&cfg.settings);
        let times = s.required("time")?;
        if times.is_empty() || times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::Invalid(format!("'time' must hold positive finite times, got {times:?}")));
        }
        let samples = s.count_or("samples", 100_000)?;
        if samples < 2 {
            return Err(CliError::Invalid("'samples' must be at least 2".into()));
        }
        Ok((times, samples))
    }
}

impl Experiment for Equivalence {
    fn name(&self) -> &'static str {
        "equivalence"
    }

    fn tables(&self) -> &'static [(&'static str, &'static [&'static str])] {
        &[("equivalence", EQUIVALENCE)]
    }

    fn settings(&self) -> &'static [&'static str] {
        &["time", "samples"]
    }

    fn validate(&self, cfg: &ExperimentConfig, _model: &Model) -> Result<(), CliError> {
        self.plan(cfg).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, model: &Model) -> Result<Vec<Table>, CliError> {
        let (times, samples) = self.plan(cfg)?;
        let mut t = Table::new("equivalence", EQUIVALENCE);
        for (k, &time) in times.iter().enumerate() {
            let r = equivalence_ks(model, time, samples, cfg.env_seed, derive_seed(cfg.master_seed, k as u64))?;
            t.push(vec![
                r.t.into(),
                r.samples.into(),
                r.ks.into(),
                r.critical.into(),
                r.pass().into(),
                r.direct_mean.into(),
                r.timechange_mean.into(),
            ]);
        }
        Ok(vec![t])
    }
}

struct Tails;

struct TailsPlan {
    x: Vec<f64>,
    ladder: Vec<f64>,
    samples: usize,
    hi: f64,
    points: usize,
}

impl Tails {
    fn plan(&self, cfg: &ExperimentConfig, model: &Model) -> Result<TailsPlan, CliError> {
        let s = Settings(&cfg.settings);
        if !model.markov.radially_reducible() {
            return Err(CliError::Invalid(format!(
                "tails need an isotropic or one-dimensional process, {} in dimension {} is neither",
                model.markov.name(),
                model.markov.dim()
            )));
        }
        let rate = RateFunction::new(model.law.clone(), model.markov.clone());
        let x = match (s.numbers("grid.x")?, s.numbers("tails.exponent")?) {
            (Some(x), None) => {
                if x.is_empty() || x.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(CliError::Invalid(format!("'grid.x' must hold finite levels >= 0, got {x:?}")));
                }
                x
            }
            (None, Some(targets)) => targets
                .iter()
                .map(|&e| {
                    if !(e > 0.0 && e.is_finite()) {
                        return Err(CliError::Invalid(format!("'tails.exponent' values must be > 0, got {e}")));
                    }
                    rate.level_for_exponent(e).map_err(CliError::from)
                })
                .collect::<Result<_, _>>()?,
            _ => {
                return Err(CliError::Invalid(
                    "tails need exactly one of 'grid.x' or 'tails.exponent'".into(),
                ))
            }
        };
        let ladder = horizon_ladder(&s, model, 1)?;
        let samples = s.count_or("samples", 1_000_000)?;
        if samples == 0 {
            return Err(CliError::Invalid("'samples' must be positive".into()));
        }
        let xmax = x.iter().copied().fold(0.0, f64::max);
        let hi = s.number_or("theory.hi", 1.5 * xmax.max(1.0))?;
        if !(hi > 0.0 && hi.is_finite()) {
            return Err(CliError::Invalid(format!("'theory.hi' must be positive, got {hi}")));
        }
        Ok(TailsPlan {
            x,
            ladder,
            samples,
            hi,
            points: theory_points(&s)?,
        })
    }
}

impl Experiment for Tails {
    fn name(&self) -> &'static str {
        "tails"
    }

    fn tables(&self) -> &'static [(&'static str, &'static [&'static str])] {
        &[("tails", TAILS), ("tails_theory", TAILS_THEORY)]
    }

    fn settings(&self) -> &'static [&'static str] {
        &["grid.x", "tails.exponent", "ladder", "samples", "theory.hi", "theory.points"]
    }

    fn validate(&self, cfg: &ExperimentConfig, model: &Model) -> Result<(), CliError> {
        self.plan(cfg, model).map(|_| ())
    }

    fn run(&self, cfg: &ExperimentConfig, model: &Model) -> Result<Vec<Table>, CliError> {
        let p = self.plan(cfg, model)?;
        let report = tail_exponent_estimate(model, &p.x, &p.ladder, p.samples, cfg.env_seed, cfg.master_seed)?;
        let mut main = Table::new("tails", TAILS);
        for r in &report.rows {
            main.push(vec![
                r.x.into(),
                r.horizon.into(),
                r.s_of_t.into(),
                r.threshold.into(),
                r.hits.into(),
                r.samples.into(),
                r.p_hat.into(),
                r.p_lo.into(),
                r.p_hi.into(),
                r.exponent.into(),
                r.exponent_lo.into(),
                r.exponent_hi.into(),
                r.theory.into(),
                r.abs_gap.into(),
                r.resolved.into(),
            ]);
        }
        let rate = RateFunction::new(model.law.clone(), model.markov.clone());
        let mut theory = Table::new("tails_theory", TAILS_THEORY);
        for x in even_grid(0.0, p.hi, p.points) {
            theory.push(vec![x.into(), rate.tail_exponent(x)?.into()]);
        }
        Ok(vec![main, theory])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_are_unique_and_named() {
        let reg = registry();
        assert_eq!(reg.len(), 6);
        let mut kinds: Vec<&str> = reg.values().flat_map(|e| e.tables().iter().map(|(k, _)| *k)).collect();
        let n = kinds.len();
        kinds.sort_unstable();
        kinds.dedup();
        assert_eq!(kinds.len(), n);
        assert_eq!(schema("scgf"), Some(SCGF));
        assert!(schema("nope").is_none());
    }
}
