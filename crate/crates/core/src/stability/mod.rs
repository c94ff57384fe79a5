//! The constants `F`, `E_0` and `R` of the quartic expansion, the nearest-bubble
//! fit, and the explicit family that realises the quartic rate.

mod family;
mod fit;
mod series;

pub use family::{
    counterexample, log_spaced, naive_family, sharpness_study, Corrector, CorrectorChecks,
    SharpnessReport, SharpnessSample,
};
pub use fit::{nearest_bubble, project_y, BubbleFit};
pub use series::{compute_r_gamma, r_gamma_with_terms, RGamma, SERIES_TOL};

use crate::banded::{even_extend, even_restrict, SymBand};
use crate::cylinder::{sphere_moment, Cylinder, GridSignature, ZonalField};
use crate::error::{CknError, Result};
use serde::{Deserialize, Serialize};

/// The minimizer of the quadratic problem defining `E_ε`, by sector.
#[derive(Debug, Clone)]
pub struct EnergyMinimizer {
    pub eps: f64,
    pub value: f64,
    pub sector0: f64,
    pub sector2: f64,
    /// Minimizing profiles in sectors 0 and 2.
    pub g0: Vec<f64>,
    pub g2: Vec<f64>,
}

/// Everything reported for one `(p, n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub p: f64,
    pub n: usize,
    pub f: f64,
    pub e0: f64,
    pub e0_sector0: f64,
    pub e0_sector2: f64,
    pub r_energy: f64,
    pub r_gamma: f64,
    pub series_terms: usize,
    pub tail_bound: f64,
    pub grid: GridSignature,
}

/// `θ_n² = c_0 Y_0 + c_2 Y_2`.
fn theta_squared_coefficients(cyl: &Cylinder) -> (f64, f64) {
    let n = cyl.params().n;
    let m1 = sphere_moment(n, 1);
    let c0 = m1 / cyl.sphere_area().sqrt();
    let c2 = cyl.quad().project(|x| x * x)[2];
    (c0, c2)
}

/// `F = (p-1)(p-2)/4 [(p-1)(∫V^{2p-2}θ_n²)²/‖V_0‖_p^p - (p-3)/3 ∫V^{3p-4}θ_n⁴]`.
pub fn compute_f(cyl: &Cylinder) -> f64 {
    let c = cyl.params();
    let p = c.p;
    let n = c.n;
    let (m1, m2) = (sphere_moment(n, 1), sphere_moment(n, 2));
    let i2 = cyl.integrate(&cyl.bubble_pow(0.0, 2.0 * p - 2.0));
    let ip = cyl.integrate(&cyl.bubble_pow(0.0, p));
    let i3 = cyl.integrate(&cyl.bubble_pow(0.0, 3.0 * p - 4.0));
    (p - 1.0) * (p - 2.0) / 4.0
        * ((p - 1.0) * (m1 * i2).powi(2) / (cyl.sphere_area() * ip) - (p - 3.0) / 3.0 * m2 * i3)
}

/// `(1-ε)A_l - (p-1)V_0^{p-2}`.
fn hessian(cyl: &Cylinder, l: usize, eps: f64) -> SymBand {
    let p = cyl.params().p;
    let w: Vec<f64> = cyl
        .bubble_pow(0.0, p - 2.0)
        .iter()
        .map(|x| -(p - 1.0) * x)
        .collect();
    cyl.stiffness(l).scaled(1.0 - eps).plus_diagonal(&w)
}

/// `E_ε`, the infimum of
/// `(1-ε)‖g‖²_{H¹} - (p-1)∫V_0^{p-2}g² - (p-1)(p-2)∫V_0^{2p-3}θ_n²g`
/// over `g ⊥ V_0, ∂_sV_0, V_0^{p/2}θ_i` in `H¹`.
///
/// Only sectors 0 and 2 carry a linear term. Sector 2 is unconstrained and
/// needs a positive definite Hessian. Sector 0 is restricted to even profiles
/// (the constraint against `∂_sV_0` then holds by parity), and the constraint
/// against `V_0` is imposed by a Lagrange multiplier; the restricted problem
/// is bounded below exactly when the even Hessian has one negative eigenvalue
/// and `cᵀM^{-1}c < 0`.
pub fn compute_e_eps(cyl: &Cylinder, eps: f64) -> Result<EnergyMinimizer> {
    if !(eps.abs() <= 0.1) {
        return Err(CknError::InvalidArgument(format!("need |ε| <= 0.1, got {eps}")));
    }
    let c = cyl.params();
    let p = c.p;
    let h = cyl.grid().spacing();
    let (c0, c2) = theta_squared_coefficients(cyl);
    let src = cyl.bubble_pow(0.0, 2.0 * p - 3.0);
    let lin = |coef: f64| -> Vec<f64> {
        src.iter().map(|x| (p - 1.0) * (p - 2.0) * coef * x).collect()
    };

    // sector 2
    let m2 = hessian(cyl, 2, eps);
    let chol = m2.cholesky().map_err(|_| CknError::IndefiniteHessian {
        sector: 2,
        detail: format!("(1-ε)A_2 - (p-1)V^{{p-2}} not positive definite at ε = {eps}"),
    })?;
    let b2 = lin(c2);
    let x2 = chol.solve(&b2);
    let g2: Vec<f64> = x2.iter().map(|x| 0.5 * x).collect();
    let sector2 = -h / 4.0 * dot(&b2, &x2);

    // sector 0, even and H¹-orthogonal to V_0
    let m0 = hessian(cyl, 0, eps);
    let mr = m0.even_reduction();
    let (neg, _, min_pivot) = mr.inertia();
    if neg != 1 || min_pivot < 1e-12 {
        return Err(CknError::IndefiniteHessian {
            sector: 0,
            detail: format!(
                "even Hessian has {neg} negative eigenvalues (min |pivot| {min_pivot:.2e}), expected 1"
            ),
        });
    }
    let b0 = lin(c0);
    let v = cyl.bubble(0.0);
    let constraint = cyl.stiffness(0).matvec(&v);
    let (br, cr) = (even_restrict(&b0), even_restrict(&constraint));
    let lu = mr.lu()?;
    let x1 = lu.solve(&br);
    let xc = lu.solve(&cr);
    let ctmc = dot(&cr, &xc);
    if ctmc >= 0.0 {
        return Err(CknError::IndefiniteHessian {
            sector: 0,
            detail: format!("constraint curvature cᵀM⁻¹c = {ctmc:.3e} is not negative"),
        });
    }
    let lambda = dot(&cr, &x1) / ctmc;
    let ur: Vec<f64> = x1.iter().zip(&xc).map(|(a, b)| 0.5 * (a - lambda * b)).collect();
    let g0 = even_extend(&ur);
    let sector0 = h * (dot(&g0, &m0.matvec(&g0)) - dot(&b0, &g0));

    Ok(EnergyMinimizer {
        eps,
        value: sector0 + sector2,
        sector0,
        sector2,
        g0,
        g2,
    })
}

/// `E_0`, the `ε = 0` case.
pub fn compute_e0(cyl: &Cylinder) -> Result<EnergyMinimizer> {
    compute_e_eps(cyl, 0.0)
}

/// `R = 2(E_0 + F) / ‖V_0^{p/2}θ_n‖⁴_{H¹}`.
pub fn compute_r_energy(cyl: &std::sync::Arc<Cylinder>, e0: f64, f: f64) -> f64 {
    let w = cyl.bubble_pow(0.0, cyl.params().p / 2.0);
    let norm2 = ZonalField::theta_mode(cyl, &w).h1_norm().powi(2);
    2.0 * (e0 + f) / (norm2 * norm2)
}

/// All constants for the cylinder's `(p, n)`.
pub fn compute_constants(cyl: &std::sync::Arc<Cylinder>) -> Result<StabilityConstants> {
    let c = cyl.params();
    let f = compute_f(cyl);
    let e = compute_e0(cyl)?;
    let rg = compute_r_gamma(c)?;
    Ok(StabilityConstants {
        p: c.p,
        n: c.n,
        f,
        e0: e.value,
        e0_sector0: e.sector0,
        e0_sector2: e.sector2,
        r_energy: compute_r_energy(cyl, e.value, f),
        r_gamma: rg.value,
        series_terms: rg.series_terms,
        tail_bound: rg.tail_bound,
        grid: cyl.signature(),
    })
}

/// `(λ+2)²/(4λ)·E_0 + 2F`, the coefficient produced by the test function
/// with scaling `λ`; at `λ = 2` it equals `2(E_0 + F)`.
pub fn test_function_bound(e0: f64, f: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(CknError::InvalidArgument(format!("need λ > 0, got {lambda}")));
    }
    Ok((lambda + 2.0).powi(2) / (4.0 * lambda) * e0 + 2.0 * f)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
