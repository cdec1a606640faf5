//! Asymptotics of weighted sums over relocation times:
//! `Σ g(L_{i+1}) (ln T_i)^b / T_i` and `δ Σ g(L_{i+1}) T_i^{δ-1}`.

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Result};
use crate::genealogy::LengthStream;
use crate::runlength::RunLength;

/// The test functions the sums are evaluated with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    One,
    Identity,
    /// `x ↦ e^{ξx}/ξ - x`
    ExpCentred(f64),
    /// `x ↦ e^{2ξx}/(2ξ)`
    ExpDouble(f64),
}

impl TestFunction {
    pub fn parse(name: &str, xi: Option<f64>) -> Result<Self> {
        let need_xi = || {
            xi.filter(|v| *v != 0.0 && v.is_finite())
                .ok_or_else(|| domain(format!("test function {name} needs a nonzero xi")))
        };
        match name {
            "one" => Ok(Self::One),
            "identity" => Ok(Self::Identity),
            "exp_centred" => Ok(Self::ExpCentred(need_xi()?)),
            "exp_double" => Ok(Self::ExpDouble(need_xi()?)),
            other => Err(domain(format!(
                "unknown test function '{other}' (one, identity, exp_centred, exp_double)"
            ))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::One => 1.0,
            Self::Identity => x,
            Self::ExpCentred(xi) => (xi * x).exp() / xi - x,
            Self::ExpDouble(xi) => (2.0 * xi * x).exp() / (2.0 * xi),
        }
    }

    pub fn expectation(&self, law: &dyn RunLength) -> Result<f64> {
        Ok(match *self {
            Self::One => 1.0,
            Self::Identity => law.mean(),
            Self::ExpCentred(xi) => law.mgf(xi)? / xi - law.mean(),
            Self::ExpDouble(xi) => law.mgf(2.0 * xi)? / (2.0 * xi),
        })
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::One => f.write_str("one"),
            Self::Identity => f.write_str("identity"),
            Self::ExpCentred(xi) => write!(f, "exp_centred({xi})"),
            Self::ExpDouble(xi) => write!(f, "exp_double({xi})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LemmaSum {
    /// `Σ g(L_{i+1}) (ln T_i)^b / T_i`
    LogPower { b: f64 },
    /// `δ Σ g(L_{i+1}) T_i^{δ-1}`
    Power { delta: f64 },
}

impl LemmaSum {
    pub fn form(&self) -> &'static str {
        match self {
            Self::LogPower { .. } => "log_power",
            Self::Power { .. } => "power",
        }
    }

    pub fn exponent(&self) -> f64 {
        match *self {
            Self::LogPower { b } => b,
            Self::Power { delta } => delta,
        }
    }

    fn term(&self, t: f64) -> f64 {
        match *self {
            Self::LogPower { b } => {
                let lt = t.ln();
                if b == 0.0 {
                    1.0 / t
                } else if lt <= 0.0 {
                    0.0
                } else {
                    lt.powf(b) / t
                }
            }
            Self::Power { delta } => delta * t.powf(delta - 1.0),
        }
    }

    fn leading(&self, eg: f64, mean: f64, n: f64) -> f64 {
        match *self {
            Self::LogPower { b } if b == -1.0 => eg / mean * n.ln().ln(),
            Self::LogPower { b } => eg / ((b + 1.0) * mean) * n.ln().powf(b + 1.0),
            Self::Power { delta } => eg / mean.powf(1.0 - delta) * n.powf(delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub form: &'static str,
    pub exponent: f64,
    pub g: String,
    pub n: usize,
    pub empirical: f64,
    pub predicted: f64,
    /// `empirical - predicted`.
    pub remainder: f64,
    pub remainder_over_log_n: f64,
}

/// Evaluates the sum up to every `n` in `ladder` along one environment.
/// Terms with `ln T_i ≤ 0` are skipped when `b ≠ 0`.
pub fn lemma_sum_check(
    g: TestFunction,
    sum: LemmaSum,
    law: Arc<dyn RunLength>,
    ladder: &[usize],
    env_seed: u64,
) -> Result<Vec<LemmaRow>> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] < 2 {
        return Err(domain(format!("run-count ladder must be increasing and >= 2: {ladder:?}")));
    }
    let eg = g.expectation(law.as_ref())?;
    let mean = law.mean();
    let mut lengths = LengthStream::new(law, env_seed);
    let mut t = lengths.next().expect("length stream is endless");
    let mut acc = 0.0;
    let mut rows = Vec::with_capacity(ladder.len());
    let mut i = 0;
    for &n in ladder {
        while i < n {
            let next = lengths.next().expect("length stream is endless");
            acc += g.eval(next) * sum.term(t);
            t += next;
            i += 1;
        }
        let nf = n as f64;
        let predicted = sum.leading(eg, mean, nf);
        rows.push(LemmaRow {
            form: sum.form(),
            exponent: sum.exponent(),
            g: g.to_string(),
            n,
            empirical: acc,
            predicted,
            remainder: acc - predicted,
            remainder_over_log_n: (acc - predicted) / nf.ln(),
        });
    }
    Ok(rows)
}
