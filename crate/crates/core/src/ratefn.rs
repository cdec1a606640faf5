//! `Λ_X = Λ ∘ Λ_Z`, its Legendre transform and the tail exponents
//! `inf_{‖y‖≥x} Λ*_X(y)`.

use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::markov::MarkovProcess;
use crate::runlength::RunLength;

/// Controls the bracket search of [`legendre`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketPolicy {
    pub start: f64,
    pub initial_step: f64,
    pub max_expansions: u32,
    /// Absolute tolerance on the maximiser.
    pub tolerance: f64,
}

impl Default for BracketPolicy {
    fn default() -> Self {
        Self {
            start: 0.0,
            initial_step: 0.5,
            max_expansions: 60,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: f64,
    /// False when the sampled slopes of `t ↦ x·t - F(t)` were seen increasing.
    pub concave: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `F*(x) = sup_t {x·t - F(t)}` by bracket expansion and golden-section search.
pub fn legendre<F>(f: F, x: f64, policy: BracketPolicy) -> Result<Conjugate>
where
    F: Fn(f64) -> Result<f64>,
{
    let g = |t: f64| -> Result<f64> {
        let v = x * t - f(t)?;
        Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
    };
    let mut concave = true;
    let h = policy.initial_step;
    let t0 = policy.start;
    let g0 = g(t0)?;
    let gp = g(t0 + h)?;
    let gm = g(t0 - h)?;
    if gp + gm - 2.0 * g0 > 1e-12 * (1.0 + g0.abs()) {
        concave = false;
    }
    // bracket (a, b, c) with g(b) ≥ g(a), g(b) ≥ g(c)
    let (mut a, mut b, mut c, mut gb);
    if gp > g0 || gm > g0 {
        let dir = if gp >= gm { 1.0 } else { -1.0 };
        a = t0;
        b = t0 + dir * h;
        gb = if dir > 0.0 { gp } else { gm };
        let mut ga = g0;
        let mut step = 2.0 * h;
        let mut expansions = 0;
        loop {
            c = b + dir * step;
            let gc = g(c)?;
            if gc < gb {
                break;
            }
            let slope_ab = (gb - ga) / (b - a).abs();
            let slope_bc = (gc - gb) / (c - b).abs();
            if slope_bc > slope_ab + 1e-9 * (1.0 + slope_ab.abs()) {
                concave = false;
            }
            a = b;
            ga = gb;
            b = c;
            gb = gc;
            step *= 2.0;
            expansions += 1;
            if expansions >= policy.max_expansions || !gc.is_finite() {
                return Err(Error::Divergent { x, t: c });
            }
        }
    } else {
        a = t0 - h;
        b = t0;
        c = t0 + h;
        gb = g0;
    }
    if a > c {
        std::mem::swap(&mut a, &mut c);
    }
    // golden-section search on [a, c]
    let mut best = (b, gb);
    let mut x1 = c - GOLDEN * (c - a);
    let mut x2 = a + GOLDEN * (c - a);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    while c - a > policy.tolerance {
        if g1 >= g2 {
            c = x2;
            x2 = x1;
            g2 = g1;
            x1 = c - GOLDEN * (c - a);
            g1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + GOLDEN * (c - a);
            g2 = g(x2)?;
        }
        for (t, v) in [(x1, g1), (x2, g2)] {
            if v > best.1 {
                best = (t, v);
            }
        }
        if (x2 - x1).abs() < f64::EPSILON * (1.0 + x1.abs()) {
            break;
        }
    }
    // Comparisons of g stall about sqrt(eps) from the maximiser; finish on
    // the sign of g' = x - F'.
    let slope = |t: f64| -> Result<f64> {
        let h = 1e-5 * (1.0 + t.abs());
        Ok(x - (f(t + h)? - f(t - h)?) / (2.0 * h))
    };
    let w = 1e-6 * (1.0 + best.0.abs());
    let (mut lo, mut hi) = (best.0 - w, best.0 + w);
    if slope(lo)? > 0.0 && slope(hi)? < 0.0 {
        while hi - lo > policy.tolerance {
            let mid = 0.5 * (lo + hi);
            if slope(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let v = g(t)?;
        if v >= best.1 - 1e-15 * (1.0 + best.1.abs()) {
            best = (t, v.max(best.1));
        }
    }
    Ok(Conjugate {
        value: best.1,
        argmax: best.0,
        concave,
    })
}

/// The composed cumulant `Λ(Λ_Z(ζ))` and its transforms.
#[derive(Debug, Clone)]
pub struct RateFunction {
    law: Arc<dyn RunLength>,
    markov: Arc<dyn MarkovProcess>,
}

impl RateFunction {
    pub fn new(law: Arc<dyn RunLength>, markov: Arc<dyn MarkovProcess>) -> Self {
        Self { law, markov }
    }

    pub fn dim(&self) -> usize {
        self.markov.dim()
    }

    /// `Λ(ξ)` of the run-length law.
    pub fn lambda(&self, xi: f64) -> Result<f64> {
        self.law.lambda(xi)
    }

    pub fn lambda_x(&self, zeta: &[f64]) -> Result<f64> {
        if zeta.len() != self.dim() {
            return Err(domain(format!(
                "zeta has dimension {}, model has {}",
                zeta.len(),
                self.dim()
            )));
        }
        self.law.lambda(self.markov.lambda_z(zeta))
    }

    /// `r ↦ Λ_X(r e_1)`.
    pub fn profile(&self, r: f64) -> Result<f64> {
        let mut zeta = vec![0.0; self.dim()];
        zeta[0] = r;
        self.lambda_x(&zeta)
    }

    /// `Λ*_X` along the first axis.
    pub fn conjugate(&self, y: f64) -> Result<Conjugate> {
        legendre(|r| self.profile(r), y, BracketPolicy::default())
    }

    /// Centre of the profile: `d/dr Λ_X(r e_1)` at 0, where `Λ*_X` vanishes.
    fn centre(&self) -> Result<f64> {
        let h = 1e-5;
        Ok((self.profile(h)? - self.profile(-h)?) / (2.0 * h))
    }

    fn check_reducible(&self) -> Result<()> {
        if !self.markov.radially_reducible() {
            return Err(Error::Unsupported(format!(
                "tail exponents need an isotropic or one-dimensional process; {} in dimension {} is neither",
                self.markov.name(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `inf_{‖y‖≥x} Λ*_X(y)`.
    pub fn tail_exponent(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(domain(format!("tail level must be finite and >= 0, got {x}")));
        }
        self.check_reducible()?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let c = self.centre()?;
        if c.abs() >= x && c.abs() > 1e-9 {
            return Ok(0.0);
        }
        let right = self.conjugate(x)?.value;
        let left = if c.abs() <= 1e-9 && self.dim() > 1 {
            right
        } else {
            self.conjugate(-x)?.value
        };
        Ok(right.min(left).max(0.0))
    }

    /// Grid version of [`RateFunction::tail_exponent`]: minimises `Λ*_X(±y)`
    /// over `y ∈ [x, x + 10·span]`.
    pub fn tail_exponent_grid(&self, x: f64, span: f64, points: usize) -> Result<f64> {
        self.check_reducible()?;
        let mut best = f64::INFINITY;
        for k in 0..=points {
            let y = x + 10.0 * span * k as f64 / points as f64;
            best = best
                .min(self.conjugate(y)?.value)
                .min(self.conjugate(-y)?.value);
        }
        Ok(best.max(0.0))
    }

    /// `x` with `tail_exponent(x) = target`, by bisection.
    pub fn level_for_exponent(&self, target: f64) -> Result<f64> {
        if !(target > 0.0) {
            return Err(domain(format!("target exponent must be > 0, got {target}")));
        }
        let mut hi = 1.0;
        while self.tail_exponent(hi)? < target {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::Numeric(format!("no level reaches tail exponent {target}")));
            }
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.tail_exponent(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{BrownianMotion, LatticeWalk};
    use crate::runlength::Deterministic;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn bm_det() -> RateFunction {
        RateFunction::new(
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(BrownianMotion::new(1).unwrap()),
        )
    }

    #[test]
    fn legendre_examples() {
        let p = BracketPolicy::default();
        for &x in &[-3.0, 0.0, 0.4, 2.0] {
            let c = legendre(|t| Ok(0.5 * t * t), x, p).unwrap();
            assert_relative_eq!(c.value, 0.5 * x * x, epsilon = 1e-12);
            assert!((c.argmax - x).abs() < 1e-8);
            assert!(c.concave);
        }
        let c = legendre(|t: f64| Ok(t.exp_m1()), 1.0, p).unwrap();
        assert!(c.value.abs() < 1e-15 && c.argmax.abs() < 1e-8);
        let c = legendre(|t: f64| Ok(t.exp_m1()), E, p).unwrap();
        assert_relative_eq!(c.value, 1.0, max_relative = 1e-10);
        assert!((c.argmax - 1.0).abs() < 1e-8);
    }

    #[test]
    fn legendre_divergence_and_diagnostic() {
        // F(t) = |t| has conjugate +inf outside [-1, 1]
        let err = legendre(|t: f64| Ok(t.abs()), 2.0, BracketPolicy::default()).unwrap_err();
        assert!(matches!(err, Error::Divergent { .. }));
        let c = legendre(|t: f64| Ok(-(t * t)), 0.0, BracketPolicy { max_expansions: 5, ..Default::default() });
        assert!(c.is_err());
        let c = legendre(|t: f64| Ok((t * t - 1.0).powi(2)), 0.0, BracketPolicy::default()).unwrap();
        assert!(!c.concave);
    }

    #[test]
    fn lambda_x_examples() {
        let rf = bm_det();
        assert_eq!(rf.lambda_x(&[0.0]).unwrap(), 0.0);
        assert_relative_eq!(rf.lambda_x(&[2f64.sqrt()]).unwrap(), E - 2.0, max_relative = 1e-14);
        let rf = RateFunction::new(
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(LatticeWalk::new(1).unwrap()),
        );
        let z = 1f64.cosh().ln();
        assert_relative_eq!(
            rf.lambda_x(&[1.0]).unwrap(),
            (z.exp() - 1.0 - z) / z,
            max_relative = 1e-13
        );
    }

    #[test]
    fn tail_exponent_basics() {
        let rf = bm_det();
        assert_eq!(rf.tail_exponent(0.0).unwrap(), 0.0);
        let mut prev = 0.0;
        for k in 0..50 {
            let v = rf.tail_exponent(k as f64 * 0.1).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        let anis = RateFunction::new(
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(LatticeWalk::new(2).unwrap()),
        );
        assert!(matches!(anis.tail_exponent(1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn asymmetric_walk_has_zero_exponent_below_drift() {
        let rf = RateFunction::new(
            Arc::new(Deterministic::new(1.0).unwrap()),
            Arc::new(LatticeWalk::with_steps(1, &[vec![0.9, 1.0], vec![0.1, -1.0]]).unwrap()),
        );
        // drift Λ'(0)·Λ_Z'(0) = 0.5 · 0.8
        assert_eq!(rf.tail_exponent(0.3).unwrap(), 0.0);
        assert!(rf.tail_exponent(0.6).unwrap() > 0.0);
    }

    #[test]
    fn level_inversion() {
        let rf = bm_det();
        let x = rf.level_for_exponent(0.5).unwrap();
        assert_relative_eq!(rf.tail_exponent(x).unwrap(), 0.5, max_relative = 1e-9);
    }
}
