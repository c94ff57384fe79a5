//! Parameter algebra on the Felli–Schneider curve and the Emden–Fowler map.

use crate::cylinder::{Cylinder, ZonalField};
use crate::error::{CknError, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Parameters `(n, p, a, b, Λ, α, β)` tied together by the curve relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CknParams {
    pub n: usize,
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Critical exponent `2n/(n-2)`, infinite for `n = 2`.
pub fn critical_exponent(n: usize) -> f64 {
    if n <= 2 {
        f64::INFINITY
    } else {
        2.0 * n as f64 / (n as f64 - 2.0)
    }
}

/// The curve `b_FS(a)`, defined for `a < 0`.
pub fn felli_schneider_b(a: f64, n: usize) -> Result<f64> {
    if !(a < 0.0) {
        return Err(CknError::InadmissibleParams(format!(
            "b_FS requires a < 0, got a = {a}"
        )));
    }
    if n < 2 {
        return Err(CknError::InadmissibleParams(format!("n must be >= 2, got {n}")));
    }
    let nf = n as f64;
    let m = nf - 2.0 - 2.0 * a;
    Ok(nf * m / (2.0 * (m * m + 4.0 * nf - 4.0).sqrt()) - m / 2.0)
}

fn ln_cosh(y: f64) -> f64 {
    let y = y.abs();
    y + (-2.0 * y).exp().ln_1p() - std::f64::consts::LN_2
}

impl CknParams {
    pub fn from_pn(p: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(CknError::InadmissibleParams(format!("n must be >= 2, got {n}")));
        }
        let pc = critical_exponent(n);
        if !(p > 2.0 && p < pc) || !p.is_finite() {
            return Err(CknError::InadmissibleParams(format!(
                "p = {p} outside (2, {pc}) for n = {n}"
            )));
        }
        let nf = n as f64;
        let lambda = 4.0 * (nf - 1.0) / (p * p - 4.0);
        let sl = lambda.sqrt();
        let a = (nf - 2.0) / 2.0 - sl;
        let b = a + nf / p - (nf - 2.0) / 2.0;
        Ok(Self {
            n,
            p,
            a,
            b,
            lambda,
            alpha: (p - 2.0) * sl / 2.0,
            beta: (p * lambda / 2.0).powf(1.0 / (p - 2.0)),
        })
    }

    pub fn sqrt_lambda(&self) -> f64 {
        self.lambda.sqrt()
    }

    /// `ln V_0(x)`.
    pub fn ln_bubble(&self, x: f64) -> f64 {
        self.beta.ln() - 2.0 / (self.p - 2.0) * ln_cosh(self.alpha * x)
    }

    /// `V_0(x) = β cosh(αx)^{-2/(p-2)}`.
    pub fn bubble(&self, x: f64) -> f64 {
        self.ln_bubble(x).exp()
    }

    /// `V_0(x)^q`, evaluated in the log domain.
    pub fn bubble_pow(&self, x: f64, q: f64) -> f64 {
        (q * self.ln_bubble(x)).exp()
    }

    /// `∂_s V_0(x) = -√Λ tanh(αx) V_0(x)`.
    pub fn bubble_ds(&self, x: f64) -> f64 {
        -self.sqrt_lambda() * (self.alpha * x).tanh() * self.bubble(x)
    }

    /// The radial solution `U_λ(r)` on `R^n`.
    pub fn u_lambda(&self, r: f64, scale: f64) -> f64 {
        let sl = self.sqrt_lambda();
        let q = self.p - 2.0;
        let ln_num = sl * scale.ln() + (2.0 * self.p * self.lambda).ln() / q;
        let w = (scale * r).ln() * sl * q;
        // ln(1 + e^w) computed without overflow
        let ln_den = if w > 0.0 { w + (-w).exp().ln_1p() } else { w.exp().ln_1p() };
        (ln_num - 2.0 / q * ln_den).exp()
    }
}

/// Local cubic Lagrange interpolation on sorted, strictly increasing abscissae.
fn interp_cubic(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let m = xs.len();
    if m == 1 {
        return ys[0];
    }
    let j = xs.partition_point(|&v| v <= x).clamp(1, m - 1);
    let width = 4.min(m);
    let lo = (j as isize - 2).clamp(0, (m - width) as isize) as usize;
    let mut acc = 0.0;
    for a in lo..lo + width {
        let mut w = 1.0;
        for b in lo..lo + width {
            if a != b {
                w *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        acc += w * ys[a];
    }
    acc
}

/// Emden–Fowler map: `v(s) = r^{√Λ} u(r)` with `s = -ln r`, resampled onto the
/// axial grid. Grid points outside the sampled range of `s` are set to zero.
pub fn emden_fowler(radii: &[f64], u: &[f64], cyl: &Arc<Cylinder>) -> Result<ZonalField> {
    if radii.len() != u.len() || radii.is_empty() {
        return Err(CknError::InvalidArgument(
            "radii and samples must be non-empty and of equal length".into(),
        ));
    }
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0)) {
        return Err(CknError::InvalidArgument(format!("non-positive radius {r}")));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(CknError::InvalidArgument("non-finite sample".into()));
    }
    let sl = cyl.params().sqrt_lambda();
    let mut pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(u)
        .map(|(&r, &v)| (-r.ln(), r.powf(sl) * v))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let profile: Vec<f64> = cyl
        .grid()
        .nodes()
        .map(|s| {
            if s < lo - 1e-12 || s > hi + 1e-12 {
                0.0
            } else {
                interp_cubic(&xs, &ys, s)
            }
        })
        .collect();
    Ok(ZonalField::from_radial(cyl, &profile))
}

/// Inverse Emden–Fowler map: `u(r) = r^{-√Λ} v(-ln r)` from the angle-constant
/// part of `field`, for radii whose `-ln r` lies inside the grid.
pub fn emden_fowler_inverse(field: &ZonalField, radii: &[f64]) -> Result<Vec<f64>> {
    let cyl = field.cylinder();
    let grid = cyl.grid();
    let sl = cyl.params().sqrt_lambda();
    let xs: Vec<f64> = grid.nodes().collect();
    let ys = field.radial_profile();
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(CknError::InvalidArgument(format!("non-positive radius {r}")));
            }
            let s = -r.ln();
            if s.abs() > grid.half_width() + 1e-12 {
                return Err(CknError::InvalidArgument(format!(
                    "radius {r} maps outside the axial grid"
                )));
            }
            Ok(r.powf(-sl) * interp_cubic(&xs, &ys, s))
        })
        .collect()
}
