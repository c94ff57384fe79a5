//! The corrected family `w(μ) = (1 - C_0μ²)V_0 + μ(V_0^{p/2}θ_n + μη)` and
//! the slope diagnostics that show the cubic estimate cannot be improved.

use super::fit::{nearest_bubble, project_y};
use crate::cylinder::{Cylinder, ZonalField};
use crate::error::{CknError, Result};
use crate::operators::{apply_h1_with_tail, bvp_solve, hminus1_norm, linearized_apply, Residual};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub const MU_MIN: f64 = 1e-3;
pub const MU_MAX: f64 = 3e-2;
const MU_LIMIT: f64 = 0.05;

/// The second-order corrector `η = η_1(θ_n² - 1/n) + η_2` and the amplitude
/// shift `C_0`.
#[derive(Debug, Clone)]
pub struct Corrector {
    pub c0: f64,
    /// `p∫V_0^{2p-2} / (4n∫V_0^p)`.
    pub kappa: f64,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub eta: ZonalField,
}

/// How well the corrector solves its defining equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorChecks {
    /// `H^{-1}` norm of the corrector equation residual.
    pub cc1_residual: f64,
    /// `|⟨η, e⟩_{H¹}| / ‖e‖_{H¹}` for `e = V_0`, `∂_sV_0`, `V_0^{p/2}θ_n`.
    pub orth_bubble: f64,
    pub orth_translation: f64,
    pub orth_kernel: f64,
}

impl Corrector {
    pub fn new(cyl: &Arc<Cylinder>) -> Result<Self> {
        let c = cyl.params();
        let (p, n) = (c.p, c.n as f64);
        let rhs: Vec<f64> = cyl
            .bubble_pow(0.0, 2.0 * p - 3.0)
            .iter()
            .map(|x| (p - 1.0) * (p - 2.0) / 2.0 * x)
            .collect();
        let eta1 = bvp_solve(cyl, 2, cyl.lambda_l(2) + c.lambda, &rhs)?;
        let kappa = p * cyl.integrate(&cyl.bubble_pow(0.0, 2.0 * p - 2.0))
            / (4.0 * n * cyl.integrate(&cyl.bubble_pow(0.0, p)));
        let c0 = p * p * c.lambda / (4.0 * n) - kappa;
        let v = cyl.bubble(0.0);
        let eta2: Vec<f64> = cyl
            .bubble_pow(0.0, p - 1.0)
            .iter()
            .zip(&v)
            .map(|(a, b)| p / (4.0 * n) * a - kappa * b)
            .collect();
        let coef2 = cyl.quad().project(|x| x * x - 1.0 / n)[2];
        let mut eta = ZonalField::from_radial(cyl, &eta2);
        eta.profile_mut(2)
            .iter_mut()
            .zip(&eta1)
            .for_each(|(o, e)| *o = coef2 * e);
        Ok(Self {
            c0,
            kappa,
            eta1,
            eta2,
            eta,
        })
    }

    pub fn cylinder(&self) -> &Arc<Cylinder> {
        self.eta.cylinder()
    }

    pub fn checks(&self) -> Result<CorrectorChecks> {
        let cyl = self.cylinder();
        let p = cyl.params().p;
        let mut lhs = linearized_apply(&self.eta, 0.0).into_field();
        let vp1 = ZonalField::from_radial(cyl, &cyl.bubble_pow(0.0, p - 1.0));
        lhs.axpy((p - 2.0) * self.c0, &vp1)?;
        let src = ZonalField::separable(cyl, &cyl.bubble_pow(0.0, 2.0 * p - 3.0), |x| x * x);
        lhs.axpy(-(p - 1.0) * (p - 2.0) / 2.0, &src)?;
        let cc1 = hminus1_norm(&Residual::new(lhs))?;

        let unit = |e: ZonalField| -> Result<f64> {
            Ok(self.eta.h1_inner(&e)?.abs() / e.h1_norm())
        };
        Ok(CorrectorChecks {
            cc1_residual: cc1,
            orth_bubble: unit(ZonalField::bubble(cyl, 0.0))?,
            orth_translation: unit(ZonalField::bubble_ds(cyl, 0.0))?,
            orth_kernel: unit(ZonalField::theta_mode(cyl, &cyl.bubble_pow(0.0, p / 2.0)))?,
        })
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.abs() <= MU_LIMIT) {
        return Err(CknError::InvalidArgument(format!("need |μ| <= {MU_LIMIT}, got {mu}")));
    }
    Ok(())
}

/// `w(μ) = (1 - C_0μ²)V_0 + μV_0^{p/2}θ_n + μ²η`.
pub fn counterexample(corr: &Corrector, mu: f64) -> Result<ZonalField> {
    check_mu(mu)?;
    let cyl = corr.cylinder();
    let kernel = ZonalField::theta_mode(cyl, &cyl.bubble_pow(0.0, cyl.params().p / 2.0));
    ZonalField::linear_combination(&[
        (1.0 - corr.c0 * mu * mu, &ZonalField::bubble(cyl, 0.0)),
        (mu, &kernel),
        (mu * mu, &corr.eta),
    ])
}

/// `ŵ(μ) = V_0 + μV_0^{p/2}θ_n`, without the second-order correction.
pub fn naive_family(cyl: &Arc<Cylinder>, mu: f64) -> Result<ZonalField> {
    check_mu(mu)?;
    let kernel = ZonalField::theta_mode(cyl, &cyl.bubble_pow(0.0, cyl.params().p / 2.0));
    ZonalField::linear_combination(&[(1.0, &ZonalField::bubble(cyl, 0.0)), (mu, &kernel)])
}

/// `count` logarithmically equispaced values from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// Diagnostics at one `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessSample {
    pub mu: f64,
    /// `‖H_1(w(μ))‖_{H^{-1}}`.
    pub residual: f64,
    /// `inf_t ‖w(μ) - V_t‖_{H¹}`.
    pub distance: f64,
    pub t_star: f64,
    pub proj_y_norm: f64,
    /// `‖Π_Y^⊥ w - V_{t*}‖_{H¹}`.
    pub perp_distance: f64,
    pub naive_residual: f64,
    /// `residual / distance³`.
    pub ratio: f64,
    pub tail_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub p: f64,
    pub n: usize,
    pub samples: Vec<SharpnessSample>,
    pub slope_residual: f64,
    pub slope_distance: f64,
    pub slope_proj_y: f64,
    pub slope_perp: f64,
    pub slope_naive: f64,
    /// `r/d³` at the smallest `μ`.
    pub ratio_limit: f64,
    /// Largest relative change of `r/d³` between neighbouring `μ`.
    pub ratio_drift: f64,
    /// `r/μ²` and `r̂/μ²` at the smallest `μ`.
    pub degeneracy: f64,
    pub naive_degeneracy: f64,
    pub corrector: CorrectorChecks,
}

fn check_mus(mus: &[f64]) -> Result<Vec<f64>> {
    let mut m = mus.to_vec();
    m.sort_by(f64::total_cmp);
    let bad = m.len() < 5
        || m.iter().any(|&x| !(x >= MU_MIN * (1.0 - 1e-9) && x <= MU_MAX * (1.0 + 1e-9)))
        || m.windows(2).any(|w| w[1] <= w[0]);
    if bad {
        return Err(CknError::InvalidArgument(format!(
            "need at least 5 distinct μ in [{MU_MIN}, {MU_MAX}], got {mus:?}"
        )));
    }
    let gaps: Vec<f64> = m.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if gaps.iter().any(|g| (g - mean).abs() > 1e-6 * mean) {
        return Err(CknError::InvalidArgument("μ values must be log-spaced".into()));
    }
    Ok(m)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let (sxy, sxx) = lx.iter().zip(&ly).fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    sxy / sxx
}

fn sample(corr: &Corrector, mu: f64) -> Result<SharpnessSample> {
    let cyl = corr.cylinder();
    let w = counterexample(corr, mu)?;
    let eval = apply_h1_with_tail(&w);
    let residual = hminus1_norm(&eval.residual)?;
    let fit = nearest_bubble(&w, false)?;
    let (_, perp) = project_y(&w, fit.t_star)?;
    let perp_distance =
        ZonalField::linear_combination(&[(1.0, &perp), (-1.0, &ZonalField::bubble(cyl, fit.t_star))])?
            .h1_norm();
    let naive = apply_h1_with_tail(&naive_family(cyl, mu)?);
    Ok(SharpnessSample {
        mu,
        residual,
        distance: fit.distance,
        t_star: fit.t_star,
        proj_y_norm: fit.proj_y_norm,
        perp_distance,
        naive_residual: hminus1_norm(&naive.residual)?,
        ratio: residual / fit.distance.powi(3),
        tail_fraction: eval.tail_fraction.max(naive.tail_fraction),
    })
}

/// Evaluates the family on log-spaced `mus` and fits the scaling exponents.
pub fn sharpness_study(cyl: &Arc<Cylinder>, mus: &[f64]) -> Result<SharpnessReport> {
    let mus = check_mus(mus)?;
    let corr = Corrector::new(cyl)?;
    let samples = mus
        .par_iter()
        .map(|&mu| sample(&corr, mu))
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&SharpnessSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    let slope = |f: fn(&SharpnessSample) -> f64| log_log_slope(&mus, &col(f));
    let ratios = col(|s| s.ratio);
    let drift = ratios
        .windows(2)
        .map(|w| (w[1] / w[0] - 1.0).abs())
        .fold(0.0, f64::max);
    let first = samples[0];
    Ok(SharpnessReport {
        p: cyl.params().p,
        n: cyl.params().n,
        slope_residual: slope(|s| s.residual),
        slope_distance: slope(|s| s.distance),
        slope_proj_y: slope(|s| s.proj_y_norm),
        slope_perp: slope(|s| s.perp_distance),
        slope_naive: slope(|s| s.naive_residual),
        ratio_limit: first.ratio,
        ratio_drift: drift,
        degeneracy: first.residual / (first.mu * first.mu),
        naive_degeneracy: first.naive_residual / (first.mu * first.mu),
        corrector: corr.checks()?,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CknParams;

    fn cyl(p: f64, n: usize) -> Arc<Cylinder> {
        Cylinder::default_for(CknParams::from_pn(p, n).unwrap()).unwrap()
    }

    #[test]
    fn zero_mu_is_the_bubble() {
        let c = cyl(4.0, 3);
        let corr = Corrector::new(&c).unwrap();
        let w = counterexample(&corr, 0.0).unwrap();
        assert_eq!(w.profiles(), ZonalField::bubble(&c, 0.0).profiles());
        assert!(counterexample(&corr, 0.06).is_err());
    }

    #[test]
    fn corrector_equation_and_orthogonality() {
        let c = cyl(4.0, 3);
        let chk = Corrector::new(&c).unwrap().checks().unwrap();
        assert!(chk.cc1_residual <= 1e-7, "{chk:?}");
        assert!(chk.orth_bubble <= 1e-8, "{chk:?}");
        assert!(chk.orth_translation <= 1e-8, "{chk:?}");
        assert!(chk.orth_kernel <= 1e-8, "{chk:?}");
    }

    #[test]
    fn mu_grid_validation() {
        assert!(check_mus(&log_spaced(1e-3, 3e-2, 6)).is_ok());
        assert!(check_mus(&log_spaced(1e-3, 3e-2, 4)).is_err());
        assert!(check_mus(&[1e-3, 2e-3, 3e-3, 4e-3, 5e-3]).is_err());
        assert!(check_mus(&log_spaced(1e-4, 3e-2, 6)).is_err());
    }

    #[test]
    fn slope_of_exact_power() {
        let x = log_spaced(1e-3, 1e-1, 7);
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v.powi(3)).collect();
        assert!((log_log_slope(&x, &y) - 3.0).abs() < 1e-12);
    }
}
