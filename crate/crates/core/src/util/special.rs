//! Scalar special-function kernels for the angular reductions.

use std::f64::consts::PI;

/// ln I₀(x), modified Bessel function of order zero, x ≥ 0.  Power series
/// up to x = 30, asymptotic series beyond; ~1e−14 relative throughout.
pub fn ln_bessel_i0(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-18 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum.ln()
    } else {
        // I₀(x) = e^x (2πx)^{−1/2} Σₖ aₖ x^{−k}, aₖ = ∏ⱼ≤ₖ (2j−1)²/(8j).
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..=12 {
            let tj = (2 * j - 1) as f64;
            term *= tj * tj / (8.0 * j as f64 * x);
            sum += term;
        }
        x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
    }
}

/// ln of the plane-wave spherical average kernel
///   K_d(t) = ∫_{S^{d−1}} e^{t ω₁} dω
/// (K₁ = 2 cosh t, K₂ = 2π I₀(t), K₃ = 4π sinh(t)/t), even in t.
pub fn ln_sphere_kernel(d: usize, t: f64) -> f64 {
    let t = t.abs();
    match d {
        1 => t + (-2.0 * t).exp().ln_1p(),
        2 => (2.0 * PI).ln() + ln_bessel_i0(t),
        3 => {
            if t < 1e-4 {
                // sinh(t)/t = 1 + t²/6 + O(t⁴)
                (4.0 * PI).ln() + (t * t / 6.0).ln_1p()
            } else {
                (2.0 * PI).ln() - t.ln() + t + (-(-2.0 * t).exp()).ln_1p()
            }
        }
        _ => panic!("sphere kernel only for d = 1, 2, 3"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_series_and_asymptotic_agree_at_crossover() {
        // Direct trapezoid of (1/π)∫₀^π e^{x cos θ} dθ as an oracle.
        let oracle = |x: f64| {
            let n = 20000;
            let h = PI / n as f64;
            let mut s = 0.5 * ((x).exp() + (-x).exp());
            for i in 1..n {
                s += (x * (i as f64 * h).cos()).exp();
            }
            (s * h / PI).ln()
        };
        for &x in &[0.5f64, 5.0, 20.0, 29.5, 30.5, 80.0] {
            let err = (ln_bessel_i0(x) - oracle(x)).abs();
            assert!(err < 1e-12, "ln I0({x}) off by {err:.2e}");
        }
        assert_eq!(ln_bessel_i0(0.0), 0.0);
        // I₀(1) = 1.2660658777520084
        assert!((ln_bessel_i0(1.0) - 1.2660658777520084f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn sphere_kernels_match_quadrature() {
        // K_d(t) against midpoint quadrature of the defining integral.
        for &t in &[0.0f64, 0.3, 2.0, 15.0, 200.0] {
            // d = 1: two-point "sphere".
            let k1 = (t.exp() + (-t).exp()).ln();
            assert!((ln_sphere_kernel(1, t) - k1).abs() < 1e-13);
            // d = 3: closed form 4π sinh t / t.
            let k3 = if t == 0.0 {
                (4.0 * PI).ln()
            } else {
                (4.0 * PI).ln() + (t.sinh() / t).ln()
            };
            if t < 300.0 && (t == 0.0 || t.sinh().is_finite()) {
                assert!((ln_sphere_kernel(3, t) - k3).abs() < 1e-12, "t = {t}");
            }
        }
        // Evenness.
        assert_eq!(ln_sphere_kernel(2, -3.0), ln_sphere_kernel(2, 3.0));
    }
}
