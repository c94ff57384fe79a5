//! Special functions on top of `libm`.

use crate::error::{CknError, Result};
use std::f64::consts::PI;

/// `ln|Γ(x)|` together with the sign of `Γ(x)`.
///
/// Fails at the poles `x = 0, -1, -2, ...`.
pub fn ln_gamma_signed(x: f64) -> Result<(f64, f64)> {
    if x <= 0.0 && (x - x.round()).abs() < 1e-12 {
        return Err(CknError::GammaPole(x));
    }
    let (lg, sign) = libm::lgamma_r(x);
    Ok((lg, if sign < 0 { -1.0 } else { 1.0 }))
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    libm::lgamma_r(x).0
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / libm::tgamma(h)
}

/// `∫_R sech(x)^q dx = √π Γ(q/2) / Γ((q+1)/2)` for `q > 0`.
pub fn sech_power_integral(q: f64) -> f64 {
    (0.5 * PI.ln() + ln_gamma(q / 2.0) - ln_gamma((q + 1.0) / 2.0)).exp()
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        let (lg, s) = ln_gamma_signed(0.5).unwrap();
        assert!((lg - 0.5 * PI.ln()).abs() < 1e-15);
        assert_eq!(s, 1.0);
        // Γ(-1/2) = -2√π
        let (lg, s) = ln_gamma_signed(-0.5).unwrap();
        assert!((lg - (2.0 * PI.sqrt()).ln()).abs() < 1e-14);
        assert_eq!(s, -1.0);
        let fact10: f64 = (1..10).map(|k| k as f64).product();
        assert!((ln_gamma(10.0) - fact10.ln()).abs() < 1e-13);
    }

    #[test]
    fn gamma_pole_rejected() {
        assert!(matches!(ln_gamma_signed(-3.0), Err(CknError::GammaPole(_))));
        assert!(ln_gamma_signed(0.0).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn sech_integrals() {
        // ∫sech² = 2, ∫sech = π
        assert!((sech_power_integral(2.0) - 2.0).abs() < 1e-14);
        assert!((sech_power_integral(1.0) - PI).abs() < 1e-14);
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut s = NeumaierSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-15).abs() < 1e-30);
    }
}
