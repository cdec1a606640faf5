//! Log-space helpers and a relative-tolerance quadrature wrapper.
//!
//! Everything that touches kernel weights goes through these: the cumulative
//! weights grow like `exp(γ x^δ)` and leave the f64 range long before the
//! horizons we care about.

use crate::error::{Error, Result};

/// `ln(e^z - 1)` for `z >= 0`; `-inf` at `z = 0`.
pub fn log_expm1(z: f64) -> f64 {
    if z > 1.0 {
        z + (-(-z).exp()).ln_1p()
    } else {
        z.exp_m1().ln()
    }
}

/// `ln(1 + e^z)`; exact `0` at `z = -inf`.
pub fn log1p_exp(z: f64) -> f64 {
    if z > 35.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln((e^{z0+dz} - 1) / (e^{z0} - 1))`, accurate when `dz << z0`.
pub fn log_expm1_increment(z0: f64, dz: f64) -> f64 {
    if z0 <= 0.0 {
        return f64::INFINITY;
    }
    if dz > 1.0 {
        return log_expm1(z0 + dz) - log_expm1(z0);
    }
    (dz.exp_m1() / -(-z0).exp_m1()).ln_1p()
}

/// `e^z - 1 - z` without cancellation near zero.
pub fn exp_rem2(z: f64) -> f64 {
    if z.abs() < 0.05 {
        // Horner on z^2/2! + z^3/3! + ... + z^9/9!
        let mut acc = 1.0 / 362_880.0;
        for k in (2..9).rev() {
            acc = acc * z + 1.0 / factorial(k);
        }
        acc * z * z
    } else {
        z.exp_m1() - z
    }
}

/// `e^z - 1 - z - z^2/2` without cancellation near zero.
pub fn exp_rem3(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let mut acc = 1.0 / factorial(11);
        for k in (3..11).rev() {
            acc = acc * z + 1.0 / factorial(k);
        }
        acc * z * z * z
    } else {
        z.exp_m1() - z - 0.5 * z * z
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

const MAX_BISECTIONS: u32 = 24;

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// Uses double-exponential quadrature and bisects any piece whose error
/// estimate is above its share of the budget.
pub fn integrate<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numeric(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let first = quadrature::integrate(&f, a, b, 0.0);
    if !first.integral.is_finite() {
        return Err(Error::Numeric(format!(
            "integrand not finite on [{a}, {b}]"
        )));
    }
    let scale = first.integral.abs().max(f64::MIN_POSITIVE);
    let budget = rel_tol * scale;
    if first.error_estimate <= budget {
        return Ok(first.integral);
    }
    let mut worst = 0.0f64;
    let value = bisect(&f, a, b, budget, 0, &mut worst);
    if worst > budget {
        return Err(Error::Numeric(format!(
            "quadrature on [{a}, {b}] did not reach relative tolerance {rel_tol:e}: \
             estimate {value:e}, accumulated error {worst:e}, budget {budget:e}"
        )));
    }
    Ok(value)
}

fn bisect<F>(f: &F, a: f64, b: f64, budget: f64, depth: u32, err: &mut f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let out = quadrature::integrate(f, a, b, budget);
    if out.error_estimate <= budget || depth >= MAX_BISECTIONS {
        if depth >= MAX_BISECTIONS {
            *err += out.error_estimate;
        }
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    bisect(f, a, mid, 0.5 * budget, depth + 1, err) + bisect(f, mid, b, 0.5 * budget, depth + 1, err)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_expm1_matches_naive_in_safe_range() {
        for &z in &[1e-8, 1e-3, 0.5, 1.0, 2.0, 30.0] {
            assert_relative_eq!(log_expm1(z), z.exp_m1().ln(), max_relative = 1e-13);
        }
        assert_eq!(log_expm1(0.0), f64::NEG_INFINITY);
        assert_relative_eq!(log_expm1(1e6), 1e6);
    }

    #[test]
    fn log1p_exp_limits() {
        assert_eq!(log1p_exp(f64::NEG_INFINITY), 0.0);
        assert_relative_eq!(log1p_exp(0.0), 2f64.ln());
        assert_relative_eq!(log1p_exp(800.0), 800.0);
    }

    #[test]
    fn increment_matches_difference() {
        for &(z0, dz) in &[(0.3, 1e-3), (5.0, 0.2), (2.0, 3.0)] {
            let direct = log_expm1(z0 + dz) - log_expm1(z0);
            assert_relative_eq!(log_expm1_increment(z0, dz), direct, max_relative = 1e-9);
        }
        // the difference of logs loses most digits here; the answer is dz up to e^-100
        assert_relative_eq!(log_expm1_increment(100.0, 1e-6), 1e-6, max_relative = 1e-14);
    }

    #[test]
    fn exp_remainders_are_continuous_across_switch() {
        for &z in &[0.049_999, 0.050_001, -0.05, 0.099_99, 0.100_01] {
            assert_relative_eq!(exp_rem2(z), z.exp() - 1.0 - z, max_relative = 1e-9);
            assert_relative_eq!(
                exp_rem3(z),
                z.exp() - 1.0 - z - z * z / 2.0,
                max_relative = 1e-6
            );
        }
        assert_relative_eq!(exp_rem2(1e-6), 5e-13, max_relative = 1e-6);
    }

    #[test]
    fn integrate_smooth_and_singular() {
        let v = integrate(|x: f64| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-12);
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 4.0, 1e-10).unwrap();
        assert_relative_eq!(v, 4.0, max_relative = 1e-9);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert_relative_eq!(s, 2.5, max_relative = 1e-14);
        assert_relative_eq!(c, -1.0, max_relative = 1e-13);
    }
}
