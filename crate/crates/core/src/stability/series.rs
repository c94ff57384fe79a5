//! Closed-form route to `R(p, n)` through a Gamma-function series.

use crate::error::{CknError, Result};
use crate::params::CknParams;
use crate::special::{ln_gamma, ln_gamma_signed, sphere_area, NeumaierSum};
use serde::{Deserialize, Serialize};

/// Tail bound at which summation stops.
pub const SERIES_TOL: f64 = 1e-10;
const MAX_TERMS: usize = 20_000_000;
const CHECK_EVERY: usize = 1000;

/// Result of the series evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RGamma {
    pub value: f64,
    /// `Σ_k (P(k-ξ) - P(k)) / P(-1)`, including the tail correction.
    pub series: f64,
    pub series_terms: usize,
    pub tail_bound: f64,
    /// Power-law decay exponent of the terms measured over the last decade.
    pub decay_exponent: f64,
}

struct Xi {
    xi1: f64,
    xi2: f64,
}

impl Xi {
    fn new(c: &CknParams) -> Self {
        let q = c.p - 2.0;
        Self {
            xi1: (2.0 * c.p - 3.0) / q,
            xi2: (1.0 + 2.0 * c.n as f64 / c.lambda).sqrt() / q,
        }
    }

    fn xi(&self) -> f64 {
        self.xi1 - self.xi2
    }

    /// `(ln|P(x)|, sgn P(x))`.
    fn ln_p(&self, x: f64) -> Result<(f64, f64)> {
        let (a, b) = (self.xi1, self.xi2);
        let num = [x + 1.5, x + 2.0 * a - 1.0, x + 2.0 * a];
        let den = [x + a - b + 1.0, x + a + b + 1.0, x + 2.0 * a + 0.5];
        let (mut lg, mut sign) = (0.0, 1.0);
        for z in num {
            let (l, s) = ln_gamma_signed(z)?;
            lg += l;
            sign *= s;
        }
        for z in den {
            let (l, s) = ln_gamma_signed(z)?;
            lg -= l;
            sign *= s;
        }
        Ok((lg, sign))
    }

    /// `(P(k-ξ) - P(k)) / P(-1)` without cancellation when signs agree.
    fn term(&self, k: f64, ln_p_m1: (f64, f64)) -> Result<f64> {
        let (lk, sk) = self.ln_p(k)?;
        let (lx, sx) = self.ln_p(k - self.xi())?;
        let (l1, s1) = ln_p_m1;
        if sk == sx {
            Ok(sk * s1 * (lk - l1).exp() * (lx - lk).exp_m1())
        } else {
            Ok(s1 * (sx * (lx - l1).exp() - sk * (lk - l1).exp()))
        }
    }
}

/// Prefactor `αβ^{-p}π^{-1/2}|S^{n-1}|^{-1} 2p(p-2)/(5p-6) Γ(q+1/2)/Γ(q)`,
/// `q = (2p-2)/(p-2)`, evaluated in the log domain.
fn prefactor(c: &CknParams) -> f64 {
    let p = c.p;
    let q = (2.0 * p - 2.0) / (p - 2.0);
    (c.alpha.ln() - p * c.beta.ln() - 0.5 * std::f64::consts::PI.ln() - sphere_area(c.n).ln()
        + (2.0 * p * (p - 2.0) / (5.0 * p - 6.0)).ln()
        + ln_gamma(q + 0.5)
        - ln_gamma(q))
    .exp()
}

fn assemble(c: &CknParams, series: f64) -> f64 {
    let (p, n) = (c.p, c.n as f64);
    prefactor(c)
        * ((3.0 * p - 4.0) / (4.0 * p - 4.0)
            - (p * n - 3.0 * n) / (p * n + 2.0 * p)
            - (n - 1.0) / (n + 2.0) * series)
}

/// Power-law tail model `f(k) ≈ f(K)(K/k)^q`: returns
/// `(Σ_{k>K} f(k) estimate, integral bound)`.
fn tail(f_k: f64, k: f64, q: f64) -> (f64, f64) {
    let integral = f_k * k / (q - 1.0);
    (integral - f_k / 2.0 + q * f_k / (12.0 * k), integral.abs())
}

fn decay_exponent(f_k: f64, f_k10: f64) -> f64 {
    (f_k10.abs() / f_k.abs()).ln() / 10f64.ln()
}

/// Sums until the tail bound is below [`SERIES_TOL`].
pub fn compute_r_gamma(c: &CknParams) -> Result<RGamma> {
    let xi = Xi::new(c);
    let lp1 = xi.ln_p(-1.0)?;
    let mut terms: Vec<f64> = Vec::new();
    let mut sum = NeumaierSum::default();
    let mut k = 0usize;
    loop {
        let t = xi.term(k as f64, lp1)?;
        sum.add(t);
        terms.push(t);
        k += 1;
        if k >= 10 * CHECK_EVERY && k % CHECK_EVERY == 0 {
            let last = k - 1;
            let q = decay_exponent(terms[last], terms[last / 10]);
            if q >= 2.5 {
                let (est, bound) = tail(terms[last], last as f64, q);
                if bound < SERIES_TOL {
                    let series = sum.value() + est;
                    return Ok(RGamma {
                        value: assemble(c, series),
                        series,
                        series_terms: k,
                        tail_bound: bound,
                        decay_exponent: q,
                    });
                }
            }
        }
        if k >= MAX_TERMS {
            return Err(CknError::NonConvergence(format!(
                "R series did not reach tail bound {SERIES_TOL:e} in {MAX_TERMS} terms"
            )));
        }
    }
}

/// Series truncated after exactly `terms` terms plus the tail correction.
pub fn r_gamma_with_terms(c: &CknParams, terms: usize) -> Result<RGamma> {
    if terms < 100 {
        return Err(CknError::InvalidArgument("need at least 100 terms".into()));
    }
    let xi = Xi::new(c);
    let lp1 = xi.ln_p(-1.0)?;
    let mut sum = NeumaierSum::default();
    let mut at_tenth = 0.0;
    let mut last = 0.0;
    for k in 0..terms {
        let t = xi.term(k as f64, lp1)?;
        sum.add(t);
        if k == (terms - 1) / 10 {
            at_tenth = t;
        }
        last = t;
    }
    let q = decay_exponent(last, at_tenth);
    let (est, bound) = tail(last, (terms - 1) as f64, q);
    let series = sum.value() + est;
    Ok(RGamma {
        value: assemble(c, series),
        series,
        series_terms: terms,
        tail_bound: bound,
        decay_exponent: q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_with_cubic_terms() {
        let c = CknParams::from_pn(4.0, 3).unwrap();
        let r = compute_r_gamma(&c).unwrap();
        assert!(r.value > 0.0);
        assert!(r.tail_bound < 1e-9);
        assert!((r.decay_exponent - 3.0).abs() < 0.1, "q = {}", r.decay_exponent);
    }

    #[test]
    fn doubling_terms_is_stable() {
        let c = CknParams::from_pn(3.0, 3).unwrap();
        let a = compute_r_gamma(&c).unwrap();
        let b = r_gamma_with_terms(&c, 2 * a.series_terms).unwrap();
        assert!((a.value - b.value).abs() <= 1e-9 * a.value.abs());
    }

    #[test]
    fn term_matches_direct_gamma_ratio() {
        let c = CknParams::from_pn(4.0, 3).unwrap();
        let xi = Xi::new(&c);
        let g = |x: f64| libm::tgamma(x);
        let p = |x: f64| {
            let (a, b) = (xi.xi1, xi.xi2);
            g(x + 1.5) * g(x + 2.0 * a - 1.0) * g(x + 2.0 * a)
                / (g(x + a - b + 1.0) * g(x + a + b + 1.0) * g(x + 2.0 * a + 0.5))
        };
        let lp1 = xi.ln_p(-1.0).unwrap();
        for k in [0.0, 1.0, 5.0, 20.0] {
            let direct = (p(k - xi.xi()) - p(k)) / p(-1.0);
            let ours = xi.term(k, lp1).unwrap();
            assert!((ours - direct).abs() <= 1e-12 * direct.abs().max(1e-300), "k={k}");
        }
    }
}
