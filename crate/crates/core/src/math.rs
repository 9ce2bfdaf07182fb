//! Small numerical helpers shared by the density kernels and the filter.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// `0.5 * ln(2π)`
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Below this argument `ln Φ(x)` switches to the asymptotic tail series.
const LOG_NDTR_TAIL: f64 = -20.0;

/// `ln(e^a + e^b)` without overflow; `-inf` inputs are absorbed.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[inline]
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[inline]
pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - HALF_LN_2PI
}

/// Natural log of the standard normal CDF, accurate deep into the lower tail.
///
/// For moderate arguments this is `ln(erfc(-x/√2) / 2)`. Past `x = -20` the
/// complementary error function is replaced by its scaled asymptotic expansion
/// `erfcx(u) ~ 1/(u√π) · Σ (-1)^n (2n-1)!! / (2u²)^n`, so the quadratic part of
/// the exponent is kept analytically and never underflows.
pub fn log_ndtr(x: f64) -> f64 {
    if x > 6.0 {
        // Φ(x) = 1 - Q(x), Q tiny
        return (-0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln_1p();
    }
    if x > LOG_NDTR_TAIL {
        return (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln();
    }
    let x2 = x * x;
    // Σ_{n≥0} (-1)^n (2n-1)!! / x^{2n}, truncated once terms stop shrinking
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..12 {
        let next = -term * (2 * n - 1) as f64 / x2;
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
    }
    -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_handles_neg_infinity() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert!((log_add_exp(f64::NEG_INFINITY, 1.5) - 1.5).abs() < 1e-15);
        assert!((log_add_exp(2f64.ln(), 3f64.ln()) - 5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_ndtr_is_continuous_across_branch_points() {
        for &x in &[LOG_NDTR_TAIL, 6.0] {
            let lo = log_ndtr(x - 1e-9);
            let hi = log_ndtr(x + 1e-9);
            assert!((lo - hi).abs() < 1e-7 * lo.abs().max(1e-12), "{x}: {lo} vs {hi}");
        }
    }

    #[test]
    fn log_ndtr_reference_values() {
        // mpmath, 50 digits
        assert!((log_ndtr(0.0) - 0.5f64.ln()).abs() < 1e-15);
        let v = log_ndtr(-30.0);
        assert!((v - (-454.321_243_956_343_2)).abs() < 1e-9, "{v}");
        let v = log_ndtr(-100.0);
        assert!((v - (-5005.524_208_694_205)).abs() < 1e-9, "{v}");
    }
}
