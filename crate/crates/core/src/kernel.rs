//! Memory kernels: the density that decides how far back a relocation jumps.
//!
//! Two families are supported. The log-power family
//! `μ(x) = α/(x+1) · log(1+x)^{α-1} · exp(β log(1+x)^α)` (shifted by one so it is
//! integrable at zero for every parameter set) and the power-exponential family
//! `μ(x) = γδ x^{δ-1} exp(γ x^δ)` with `δ ≤ 1/2`.
//!
//! All cumulative quantities are kept as logarithms of `M(x) = ∫_0^x μ`. The
//! increment helpers return `ln(M(x1)/M(x0))` directly from the closed forms,
//! which keeps per-run ratios accurate even when `M` itself is astronomically
//! large.

use std::fmt;

use crate::error::{assumption, domain, Result};
use crate::numeric::{log1p_exp, log_expm1, log_expm1_increment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// log-power family, parameters α > 0, β ≥ 0
    Mu1,
    /// power-exponential family, parameters γ > 0, 0 < δ ≤ 1/2
    Mu2,
}

/// Steep kernels give almost-sure quenched limits, flat ones only limits in
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Steep,
    Flat,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Steep => "A1a",
            Regime::Flat => "A1b",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub trait MemoryKernel: fmt::Debug + Send + Sync {
    fn family(&self) -> KernelFamily;

    /// Registry name of the family.
    fn name(&self) -> &'static str;

    fn params(&self) -> Vec<(&'static str, f64)>;

    fn regime(&self) -> Regime;

    /// `ln μ(x)`.
    fn log_eval(&self, x: f64) -> Result<f64>;

    fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.log_eval(x)?.exp())
    }

    /// `ln M(x)`; `-inf` at `x = 0`.
    fn log_cumulative(&self, x: f64) -> Result<f64>;

    /// The `x ≥ 0` with `ln M(x) = log_v`.
    fn inverse_cumulative(&self, log_v: f64) -> Result<f64>;

    /// `ln(M(x1)/M(x0))` for `0 ≤ x0 ≤ x1`; `+inf` when `x0 = 0`.
    fn log_increment(&self, x0: f64, x1: f64) -> f64;

    /// Offset `u ≥ 0` with `ln(M(x0+u)/M(x0)) = log_ratio`, for `x0 > 0`.
    fn inverse_increment(&self, x0: f64, log_ratio: f64) -> f64;

    /// Speed of the large deviations at time `t`.
    fn scale(&self, t: f64) -> Result<f64>;

    /// Smallest `t` accepted by [`MemoryKernel::scale`] (exclusive).
    fn scale_floor(&self) -> f64;

    /// True when `μ ≡ 1`, which unlocks closed forms downstream.
    fn is_uniform(&self) -> bool {
        false
    }

    /// Share of the mass of `[x0, x1]` carried by that segment relative to
    /// `[0, x1]`, i.e. `(M(x1) - M(x0)) / M(x1)`.
    fn segment_ratio(&self, x0: f64, x1: f64) -> f64 {
        if x0 <= 0.0 {
            return 1.0;
        }
        -(-self.log_increment(x0, x1)).exp_m1()
    }

    /// Inverse conditional CDF of the kernel restricted to `[x0, x1]`: the
    /// offset `u ∈ [0, x1 - x0]` with `(M(x0+u) - M(x0)) / (M(x1) - M(x0)) = p`.
    fn segment_quantile(&self, x0: f64, x1: f64, p: f64) -> Result<f64> {
        let len = x1 - x0;
        if x0 <= 0.0 {
            let x = self.inverse_cumulative(p.ln() + self.log_cumulative(x1)?)?;
            return Ok(x.clamp(0.0, len));
        }
        let total = self.log_increment(x0, x1);
        let target = log1p_exp(p.ln() + log_expm1(total));
        Ok(self.inverse_increment(x0, target).clamp(0.0, len))
    }
}

fn check_point(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(domain(format!("kernel argument must be >= 0, got {x}")));
    }
    Ok(())
}

fn check_level(log_v: f64) -> Result<()> {
    if log_v.is_nan() || log_v == f64::INFINITY {
        return Err(domain(format!(
            "cumulative level must be finite or -inf, got {log_v}"
        )));
    }
    Ok(())
}

/// The log-power kernel, shifted: `α/(x+1) · log(1+x)^{α-1} · e^{β log(1+x)^α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPowerKernel {
    alpha: f64,
    beta: f64,
}

impl LogPowerKernel {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(assumption("A1", format!("mu1 requires alpha > 0, got {alpha}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(assumption("A1", format!("mu1 requires beta >= 0, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    /// The uniform memory kernel, `α = β = 1`.
    pub fn uniform() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn uniform_case(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0
    }

    // z(x) = β log(1+x)^α, so that M = (e^z - 1)/β when β > 0.
    fn exponent(&self, y: f64) -> f64 {
        self.beta * y.powf(self.alpha)
    }
}

impl MemoryKernel for LogPowerKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::Mu1
    }

    fn name(&self) -> &'static str {
        "mu1"
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("alpha", self.alpha), ("beta", self.beta)]
    }

    fn regime(&self) -> Regime {
        if self.beta != 0.0 && self.alpha >= 1.0 {
            Regime::Steep
        } else {
            Regime::Flat
        }
    }

    fn log_eval(&self, x: f64) -> Result<f64> {
        check_point(x)?;
        let y = x.ln_1p();
        let shape = if self.alpha == 1.0 {
            0.0
        } else if y == 0.0 && self.alpha < 1.0 {
            return Err(domain(format!(
                "mu1 with alpha = {} is singular at 0",
                self.alpha
            )));
        } else {
            (self.alpha - 1.0) * y.ln()
        };
        Ok(self.alpha.ln() - y + shape + self.exponent(y))
    }

    fn log_cumulative(&self, x: f64) -> Result<f64> {
        check_point(x)?;
        if x == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if self.uniform_case() {
            return Ok(x.ln());
        }
        let y = x.ln_1p();
        if self.beta == 0.0 {
            Ok(self.alpha * y.ln())
        } else {
            Ok(log_expm1(self.exponent(y)) - self.beta.ln())
        }
    }

    fn inverse_cumulative(&self, log_v: f64) -> Result<f64> {
        check_level(log_v)?;
        if log_v == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if self.uniform_case() {
            return Ok(log_v.exp());
        }
        let y = if self.beta == 0.0 {
            (log_v / self.alpha).exp()
        } else {
            // β y^α = ln(1 + β v)
            (log1p_exp(log_v + self.beta.ln()) / self.beta).powf(1.0 / self.alpha)
        };
        Ok(y.exp_m1())
    }

    fn log_increment(&self, x0: f64, x1: f64) -> f64 {
        if x0 <= 0.0 {
            return f64::INFINITY;
        }
        if self.uniform_case() {
            return ((x1 - x0) / x0).ln_1p();
        }
        let y0 = x0.ln_1p();
        let dy = ((x1 - x0) / (1.0 + x0)).ln_1p();
        let growth = (dy / y0).ln_1p();
        if self.beta == 0.0 {
            self.alpha * growth
        } else {
            let z0 = self.exponent(y0);
            let dz = z0 * (self.alpha * growth).exp_m1();
            log_expm1_increment(z0, dz)
        }
    }

    fn inverse_increment(&self, x0: f64, log_ratio: f64) -> f64 {
        if self.uniform_case() {
            return x0 * log_ratio.exp_m1();
        }
        let y0 = x0.ln_1p();
        let dy = if self.beta == 0.0 {
            y0 * (log_ratio / self.alpha).exp_m1()
        } else {
            let z0 = self.exponent(y0);
            let dz = expm1_increment_inverse(z0, log_ratio);
            y0 * ((dz / z0).ln_1p() / self.alpha).exp_m1()
        };
        (1.0 + x0) * dy.exp_m1()
    }

    fn scale(&self, t: f64) -> Result<f64> {
        if !(t > self.scale_floor()) {
            return Err(domain(format!(
                "scale needs t > {}, got {t}",
                self.scale_floor()
            )));
        }
        if self.beta == 0.0 {
            Ok(self.alpha * t.ln().ln())
        } else {
            Ok(t.ln().powf(self.alpha))
        }
    }

    fn scale_floor(&self) -> f64 {
        if self.beta == 0.0 {
            std::f64::consts::E
        } else {
            1.0
        }
    }

    fn is_uniform(&self) -> bool {
        self.uniform_case()
    }

    fn segment_ratio(&self, x0: f64, x1: f64) -> f64 {
        if x0 <= 0.0 {
            return 1.0;
        }
        if self.uniform_case() {
            return (x1 - x0) / x1;
        }
        -(-self.log_increment(x0, x1)).exp_m1()
    }
}

/// The power-exponential kernel `γδ x^{δ-1} e^{γ x^δ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerExpKernel {
    gamma: f64,
    delta: f64,
}

impl PowerExpKernel {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(assumption("A1", format!("mu2 requires gamma > 0, got {gamma}")));
        }
        if !(delta > 0.0 && delta <= 0.5) {
            return Err(assumption(
                "A1",
                format!("mu2 requires 0 < delta <= 1/2, got {delta}"),
            ));
        }
        Ok(Self { gamma, delta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl MemoryKernel for PowerExpKernel {
    fn family(&self) -> KernelFamily {
        KernelFamily::Mu2
    }

    fn name(&self) -> &'static str {
        "mu2"
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("gamma", self.gamma), ("delta", self.delta)]
    }

    fn regime(&self) -> Regime {
        Regime::Steep
    }

    fn log_eval(&self, x: f64) -> Result<f64> {
        check_point(x)?;
        if x == 0.0 {
            return Err(domain(format!(
                "mu2 with delta = {} is singular at 0",
                self.delta
            )));
        }
        Ok((self.gamma * self.delta).ln()
            + (self.delta - 1.0) * x.ln()
            + self.gamma * x.powf(self.delta))
    }

    fn log_cumulative(&self, x: f64) -> Result<f64> {
        check_point(x)?;
        Ok(log_expm1(self.gamma * x.powf(self.delta)))
    }

    fn inverse_cumulative(&self, log_v: f64) -> Result<f64> {
        check_level(log_v)?;
        if log_v == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        Ok((log1p_exp(log_v) / self.gamma).powf(1.0 / self.delta))
    }

    fn log_increment(&self, x0: f64, x1: f64) -> f64 {
        if x0 <= 0.0 {
            return f64::INFINITY;
        }
        let z0 = self.gamma * x0.powf(self.delta);
        let dz = z0 * (self.delta * ((x1 - x0) / x0).ln_1p()).exp_m1();
        log_expm1_increment(z0, dz)
    }

    fn inverse_increment(&self, x0: f64, log_ratio: f64) -> f64 {
        let z0 = self.gamma * x0.powf(self.delta);
        let dz = expm1_increment_inverse(z0, log_ratio);
        x0 * ((dz / z0).ln_1p() / self.delta).exp_m1()
    }

    fn scale(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(domain(format!("scale needs t > 0, got {t}")));
        }
        Ok(self.gamma * t.powf(self.delta))
    }

    fn scale_floor(&self) -> f64 {
        0.0
    }
}

// Solves ln((e^{z0+dz} - 1)/(e^{z0} - 1)) = r for dz.
fn expm1_increment_inverse(z0: f64, r: f64) -> f64 {
    if r > 1.0 {
        return log1p_exp(log_expm1(z0) + r) - z0;
    }
    (r.exp_m1() * -(-z0).exp_m1()).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn mu2() -> PowerExpKernel {
        PowerExpKernel::new(1.0, 0.5).unwrap()
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(LogPowerKernel::new(0.0, 1.0).is_err());
        assert!(LogPowerKernel::new(1.0, -0.1).is_err());
        assert!(PowerExpKernel::new(1.0, 0.6).is_err());
        assert!(PowerExpKernel::new(0.0, 0.5).is_err());
        assert!(PowerExpKernel::new(1.0, 0.0).is_err());
        let err = PowerExpKernel::new(1.0, 0.75).unwrap_err();
        assert!(err.to_string().starts_with("A1"));
    }

    #[test]
    fn regimes() {
        assert_eq!(LogPowerKernel::new(1.0, 1.0).unwrap().regime(), Regime::Steep);
        assert_eq!(LogPowerKernel::new(2.0, 0.5).unwrap().regime(), Regime::Steep);
        assert_eq!(LogPowerKernel::new(1.0, 0.0).unwrap().regime(), Regime::Flat);
        assert_eq!(LogPowerKernel::new(0.5, 1.0).unwrap().regime(), Regime::Flat);
        assert_eq!(mu2().regime(), Regime::Steep);
    }

    #[test]
    fn eval_examples() {
        let uniform = LogPowerKernel::uniform();
        for &x in &[0.0, 0.3, 7.0, 1e9] {
            assert_relative_eq!(uniform.eval(x).unwrap(), 1.0, max_relative = 1e-15);
        }
        assert_relative_eq!(mu2().eval(4.0).unwrap(), 1.847_264_024_732_662, max_relative = 1e-13);
        let k = LogPowerKernel::new(2.0, 1.0).unwrap();
        assert_relative_eq!(k.eval(E - 1.0).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn eval_errors() {
        assert!(mu2().eval(0.0).is_err());
        assert!(mu2().eval(-1.0).is_err());
        assert!(LogPowerKernel::uniform().eval(-0.5).is_err());
        assert!(LogPowerKernel::new(0.5, 0.0).unwrap().eval(0.0).is_err());
        assert_eq!(LogPowerKernel::new(2.0, 1.0).unwrap().eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn cumulative_examples() {
        assert_eq!(mu2().log_cumulative(0.0).unwrap(), f64::NEG_INFINITY);
        assert_eq!(LogPowerKernel::uniform().log_cumulative(0.0).unwrap(), f64::NEG_INFINITY);
        assert_relative_eq!(
            LogPowerKernel::uniform().log_cumulative(10.0).unwrap(),
            10f64.ln(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            mu2().log_cumulative(4.0).unwrap(),
            (E * E - 1.0).ln(),
            max_relative = 1e-14
        );
        assert!(mu2().log_cumulative(1e12).unwrap().is_finite());
    }

    #[test]
    fn inverse_examples() {
        let u = LogPowerKernel::uniform();
        assert_relative_eq!(u.inverse_cumulative(7f64.ln()).unwrap(), 7.0, max_relative = 1e-15);
        assert_relative_eq!(
            mu2().inverse_cumulative((E * E - 1.0).ln()).unwrap(),
            4.0,
            max_relative = 1e-14
        );
        assert_eq!(mu2().inverse_cumulative(f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(mu2().inverse_cumulative(f64::INFINITY).is_err());
        assert!(mu2().inverse_cumulative(f64::NAN).is_err());
    }

    #[test]
    fn scale_examples() {
        let k = LogPowerKernel::new(2.0, 0.5).unwrap();
        assert_relative_eq!(k.scale(3f64.exp()).unwrap(), 9.0, max_relative = 1e-14);
        let k = LogPowerKernel::new(2.0, 0.0).unwrap();
        assert_relative_eq!(k.scale(E.exp()).unwrap(), 2.0, max_relative = 1e-14);
        let k = PowerExpKernel::new(2.0, 0.5).unwrap();
        assert_relative_eq!(k.scale(25.0).unwrap(), 10.0, max_relative = 1e-15);
        assert!(LogPowerKernel::new(1.0, 0.0).unwrap().scale(2.0).is_err());
        assert!(LogPowerKernel::uniform().scale(1.0).is_err());
        assert!(k.scale(0.0).is_err());
    }

    #[test]
    fn increments_agree_with_cumulative_differences() {
        let kernels: Vec<Box<dyn MemoryKernel>> = vec![
            Box::new(LogPowerKernel::uniform()),
            Box::new(LogPowerKernel::new(2.0, 1.0).unwrap()),
            Box::new(LogPowerKernel::new(0.7, 0.0).unwrap()),
            Box::new(LogPowerKernel::new(1.5, 0.3).unwrap()),
            Box::new(mu2()),
        ];
        for k in &kernels {
            for &(x0, x1) in &[(0.5, 1.5), (3.0, 4.0), (100.0, 101.0), (10.0, 1000.0)] {
                let direct = k.log_cumulative(x1).unwrap() - k.log_cumulative(x0).unwrap();
                let inc = k.log_increment(x0, x1);
                assert_relative_eq!(inc, direct, max_relative = 1e-9);
                let back = k.inverse_increment(x0, inc);
                assert_relative_eq!(back, x1 - x0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn uniform_ratios_are_exact() {
        let u = LogPowerKernel::uniform();
        for i in 2..200u32 {
            let r = u.segment_ratio(f64::from(i - 1), f64::from(i));
            assert_eq!(r, 1.0 / f64::from(i));
        }
        assert_eq!(u.segment_ratio(0.0, 1.0), 1.0);
    }

    #[test]
    fn segment_quantile_endpoints() {
        let k = mu2();
        assert_relative_eq!(k.segment_quantile(100.0, 101.0, 1.0).unwrap(), 1.0, max_relative = 1e-9);
        assert_eq!(k.segment_quantile(100.0, 101.0, 0.0).unwrap(), 0.0);
        let u = LogPowerKernel::uniform();
        assert_relative_eq!(u.segment_quantile(3.0, 5.0, 0.25).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(u.segment_quantile(0.0, 2.0, 0.25).unwrap(), 0.5, max_relative = 1e-12);
    }
}
