//! Run-length laws φ and their cumulant function
//! `Λ(ξ) = E[e^{ξL} - 1 - ξL] / (ξ E[L])`.
//!
//! Only laws with an everywhere finite moment generating function are
//! representable: bounded support, or a tail `exp(-(x/λ)^κ)` with `κ > 1`.

use std::fmt;

use rand::Rng;
use rand::distr::OpenClosed01;
use statrs::function::gamma::gamma;

use crate::error::{assumption, domain, Result};
use crate::numeric::{exp_rem2, exp_rem3, integrate, log_expm1};
use crate::rng::SimRng;

pub trait RunLength: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    fn params(&self) -> Vec<(&'static str, f64)>;

    /// One draw, strictly positive.
    fn sample(&self, rng: &mut SimRng) -> f64;

    fn mean(&self) -> f64;

    fn second_moment(&self) -> f64;

    /// `Λ(ξ)`, with `Λ(0) = 0`.
    fn lambda(&self, xi: f64) -> Result<f64>;

    /// `E[e^{ξL}]`.
    fn mgf(&self, xi: f64) -> Result<f64> {
        let m = self.mean();
        Ok(1.0 + xi * m * (1.0 + self.lambda(xi)?))
    }

    /// True when every draw is a positive integer.
    fn integer_valued(&self) -> bool {
        false
    }
}

/// `L ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deterministic {
    c: f64,
}

impl Deterministic {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(assumption("A2", format!("deterministic run-length needs c > 0, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn value(&self) -> f64 {
        self.c
    }
}

impl RunLength for Deterministic {
    fn name(&self) -> &'static str {
        "deterministic"
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("c", self.c)]
    }

    fn sample(&self, _rng: &mut SimRng) -> f64 {
        self.c
    }

    fn mean(&self) -> f64 {
        self.c
    }

    fn second_moment(&self) -> f64 {
        self.c * self.c
    }

    fn lambda(&self, xi: f64) -> Result<f64> {
        let z = xi * self.c;
        if z == 0.0 {
            return Ok(0.0);
        }
        Ok(exp_rem2(z) / z)
    }

    fn mgf(&self, xi: f64) -> Result<f64> {
        Ok((xi * self.c).exp())
    }

    fn integer_valued(&self) -> bool {
        self.c.fract() == 0.0
    }
}

/// Uniform on `[a, b]` with `0 ≤ a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformInterval {
    a: f64,
    b: f64,
}

impl UniformInterval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b > a && b.is_finite()) {
            return Err(assumption(
                "A2",
                format!("uniform run-length needs 0 <= a < b < inf, got [{a}, {b}]"),
            ));
        }
        Ok(Self { a, b })
    }
}

impl RunLength for UniformInterval {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b)]
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        // (0, 1] keeps a = 0 atomless at zero
        let u: f64 = rng.sample(OpenClosed01);
        self.b - u * (self.b - self.a)
    }

    fn mean(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    fn second_moment(&self) -> f64 {
        (self.a * self.a + self.a * self.b + self.b * self.b) / 3.0
    }

    fn lambda(&self, xi: f64) -> Result<f64> {
        if xi == 0.0 {
            return Ok(0.0);
        }
        // E[e^{ξL} - 1 - ξL] = (H(ξb) - H(ξa)) / (ξ(b-a)), H(z) = e^z - 1 - z - z²/2
        let num = exp_rem3(xi * self.b) - exp_rem3(xi * self.a);
        Ok(num / (xi * xi * (self.b - self.a) * self.mean()))
    }

    fn mgf(&self, xi: f64) -> Result<f64> {
        let w = xi * (self.b - self.a);
        if w == 0.0 {
            return Ok(1.0);
        }
        Ok((xi * self.a).exp() * w.exp_m1() / w)
    }
}

/// Tail `P(L ≥ x) = exp(-(x/λ)^κ)` with `κ > 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StretchedExpTail {
    kappa: f64,
    scale: f64,
    mean: f64,
}

impl StretchedExpTail {
    pub fn new(kappa: f64, scale: f64) -> Result<Self> {
        if !(kappa > 1.0 && kappa.is_finite()) {
            return Err(assumption(
                "A2",
                format!("stretched-exponential tail needs kappa > 1 for an entire MGF, got {kappa}"),
            ));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain(format!("stretched-exponential scale must be > 0, got {scale}")));
        }
        Ok(Self {
            kappa,
            scale,
            mean: scale * gamma(1.0 + 1.0 / kappa),
        })
    }

    fn log_tail(&self, x: f64) -> f64 {
        -(x / self.scale).powf(self.kappa)
    }

    /// `ln(|e^{ξx} - 1| P(L ≥ x))`, the log of the integrand below.
    fn log_integrand(&self, xi: f64, x: f64) -> f64 {
        let z = xi * x;
        let log_abs = if z > 0.0 { log_expm1(z) } else { (-z.exp_m1()).ln() };
        log_abs + self.log_tail(x)
    }

    // Rough maximiser of the log integrand, and an upper end beyond which it
    // sits 37 e-folds (about 1e-16) under its running maximum.
    fn support(&self, xi: f64) -> (f64, f64, f64) {
        let peak_hint = if xi > 0.0 {
            self.scale * (xi * self.scale / self.kappa).powf(1.0 / (self.kappa - 1.0))
        } else {
            0.0
        };
        let mut upper = self.scale.max(peak_hint);
        let mut peak = upper;
        let mut best = self.log_integrand(xi, upper);
        loop {
            upper *= 1.25;
            let v = self.log_integrand(xi, upper);
            if v > best {
                best = v;
                peak = upper;
            }
            if v < best - 37.0 {
                break;
            }
        }
        for k in 1..64 {
            let x = upper * k as f64 / 64.0;
            let v = self.log_integrand(xi, x);
            if v > best {
                best = v;
                peak = x;
            }
        }
        (peak, best, upper)
    }
}

impl RunLength for StretchedExpTail {
    fn name(&self) -> &'static str {
        "stretched_exp"
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("kappa", self.kappa), ("lambda", self.scale)]
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.sample(rand::distr::Open01);
        self.scale * (-u.ln()).powf(1.0 / self.kappa)
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn second_moment(&self) -> f64 {
        self.scale * self.scale * gamma(1.0 + 2.0 / self.kappa)
    }

    fn lambda(&self, xi: f64) -> Result<f64> {
        if xi == 0.0 {
            return Ok(0.0);
        }
        // Integration by parts: E[e^{ξL} - 1 - ξL] = ξ ∫ (e^{ξx} - 1) P(L ≥ x) dx,
        // evaluated as e^{shift} ∫ e^{log integrand - shift} to stay in range.
        let (peak, shift, upper) = self.support(xi);
        let f = |x: f64| (self.log_integrand(xi, x) - shift).exp();
        let scaled = integrate(f, 0.0, peak, 1e-10)? + integrate(f, peak, upper, 1e-10)?;
        // saturates to +inf past the f64 range
        let magnitude = (shift + scaled.ln() - self.mean.ln()).exp();
        Ok(magnitude.copysign(xi))
    }
}
