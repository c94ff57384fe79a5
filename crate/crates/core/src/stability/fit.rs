//! Distance to the bubble manifold `{αV_t}` and the kernel projection.

use crate::cylinder::{Cylinder, ZonalField};
use crate::error::{CknError, Result};
use serde::{Deserialize, Serialize};

const SCAN_STEP: f64 = 0.05;
const GOLDEN_TOL: f64 = 1e-7;

/// Nearest point on the bubble manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub t_star: f64,
    /// Fitted amplitude, present when requested.
    pub amplitude: Option<f64>,
    /// `‖v - αV_{t*}‖_{H¹}`.
    pub distance: f64,
    /// Coefficient of `v` on `V_{t*}^{p/2}Y_1`.
    pub proj_y: f64,
    /// `‖Π_Y v‖_{H¹}`.
    pub proj_y_norm: f64,
    /// `|⟨v - αV_{t*}, ∂_sV_{t*}⟩_{H¹}| / (‖v‖ ‖∂_sV_{t*}‖)`.
    pub stationarity: f64,
}

/// Evaluates the `t`-dependent pieces using `A_0 v_0`, since only the
/// radial profile of `v` meets `V_t`.
struct Objective<'a> {
    cyl: &'a Cylinder,
    av: Vec<f64>,
    norm2: f64,
    root: f64,
    fit_amplitude: bool,
}

impl Objective<'_> {
    fn h(&self) -> f64 {
        self.cyl.grid().spacing()
    }

    /// `(⟨v,V_t⟩, ‖V_t‖²)`.
    fn pieces(&self, t: f64) -> (f64, f64) {
        let vt = self.cyl.bubble(t);
        let cross = self.h() * self.root * dot(&self.av, &vt);
        let self2 = self.h() * self.root * self.root * dot(&vt, &self.cyl.stiffness(0).matvec(&vt));
        (cross, self2)
    }

    fn amplitude(&self, cross: f64, self2: f64) -> f64 {
        if self.fit_amplitude {
            cross / self2
        } else {
            1.0
        }
    }

    /// Squared distance, up to cancellation that is irrelevant for ranking.
    fn value(&self, t: f64) -> f64 {
        let (cross, self2) = self.pieces(t);
        let a = self.amplitude(cross, self2);
        self.norm2 - 2.0 * a * cross + a * a * self2
    }

    /// `⟨v - αV_t, ∂_sV_t⟩_{H¹}`.
    fn slope(&self, t: f64) -> f64 {
        let (cross, self2) = self.pieces(t);
        let a = self.amplitude(cross, self2);
        let vt = self.cyl.bubble(t);
        let dt = self.cyl.bubble_ds(t);
        let adt = self.cyl.stiffness(0).matvec(&dt);
        let h = self.h();
        h * self.root * dot(&self.av, &dt) - a * h * self.root * self.root * dot(&vt, &adt)
    }
}

/// Minimizes `‖v - αV_t‖_{H¹}` over `t` (and `α` when `fit_amplitude`).
///
/// A coarse scan over `|t| <= S/2` locates the basin, golden-section search
/// narrows it, and bisection on the stationarity condition finishes.
pub fn nearest_bubble(v: &ZonalField, fit_amplitude: bool) -> Result<BubbleFit> {
    let cyl = v.cylinder();
    let v0_norm = ZonalField::bubble(cyl, 0.0).h1_norm();
    let vn = v.h1_norm();
    if !(vn >= 0.1 * v0_norm && vn <= 10.0 * v0_norm) {
        return Err(CknError::InvalidArgument(format!(
            "‖v‖ = {vn:.3e} outside [0.1, 10]·‖V_0‖ = {v0_norm:.3e}"
        )));
    }
    let obj = Objective {
        cyl,
        av: cyl.stiffness(0).matvec(v.profile(0)),
        norm2: vn * vn,
        root: cyl.sphere_area().sqrt(),
        fit_amplitude,
    };

    let half = cyl.grid().half_width() / 2.0;
    let steps = (2.0 * half / SCAN_STEP).ceil() as usize;
    let step = 2.0 * half / steps as f64;
    let ts: Vec<f64> = (0..=steps).map(|i| -half + i as f64 * step).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| obj.value(t)).collect();
    let best = (0..vals.len())
        .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .expect("non-empty scan");
    if best == 0 || best == steps {
        return Err(CknError::NoLocalMinimum(format!(
            "distance is minimized at the scan edge t = {:.3}",
            ts[best]
        )));
    }

    // golden section on the bracketing cells
    let (mut a, mut b) = (ts[best - 1], ts[best + 1]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (obj.value(c), obj.value(d));
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = obj.value(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = obj.value(d);
        }
    }
    let mut t = 0.5 * (a + b);

    // bisection on the stationarity condition
    let (mut lo, mut hi) = (t - step, t + step);
    let (mut slo, shi) = (obj.slope(lo), obj.slope(hi));
    if slo.signum() != shi.signum() {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let sm = obj.slope(mid);
            if sm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if sm.signum() == slo.signum() {
                lo = mid;
                slo = sm;
            } else {
                hi = mid;
            }
        }
        t = 0.5 * (lo + hi);
    }

    let (cross, self2) = obj.pieces(t);
    let alpha = obj.amplitude(cross, self2);
    let residual = ZonalField::linear_combination(&[(1.0, v), (-alpha, &ZonalField::bubble(cyl, t))])?;
    let ds_norm = ZonalField::bubble_ds(cyl, t).h1_norm();
    let (coef, _) = project_y(v, t)?;
    let kn = ZonalField::kernel_mode(cyl, t).h1_norm();
    Ok(BubbleFit {
        t_star: t,
        amplitude: fit_amplitude.then_some(alpha),
        distance: residual.h1_norm(),
        proj_y: coef,
        proj_y_norm: coef.abs() * kn,
        stationarity: obj.slope(t).abs() / (vn * ds_norm),
    })
}

/// Splits `v` along `V_t^{p/2}Y_1`: returns the `H¹` coefficient and the
/// remainder.
pub fn project_y(v: &ZonalField, t: f64) -> Result<(f64, ZonalField)> {
    let k = ZonalField::kernel_mode(v.cylinder(), t);
    let coef = v.h1_inner(&k)? / k.h1_inner(&k)?;
    let rem = ZonalField::linear_combination(&[(1.0, v), (-coef, &k)])?;
    Ok((coef, rem))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CknParams;
    use std::sync::Arc;

    fn cyl() -> Arc<Cylinder> {
        Cylinder::default_for(CknParams::from_pn(4.0, 3).unwrap()).unwrap()
    }

    #[test]
    fn recovers_translated_bubble() {
        let c = cyl();
        let fit = nearest_bubble(&ZonalField::bubble(&c, 1.3), false).unwrap();
        assert!((fit.t_star - 1.3).abs() < 1e-6, "{}", fit.t_star);
        assert!(fit.distance < 1e-8, "{}", fit.distance);
    }

    #[test]
    fn kernel_perturbation_keeps_centre() {
        let c = cyl();
        let v = ZonalField::linear_combination(&[
            (1.0, &ZonalField::bubble(&c, 0.0)),
            (0.01, &ZonalField::kernel_mode(&c, 0.0)),
        ])
        .unwrap();
        let fit = nearest_bubble(&v, false).unwrap();
        assert!(fit.t_star.abs() < 1e-6);
        assert!((fit.proj_y - 0.01).abs() < 1e-10);
        assert!(fit.stationarity < 1e-8);
    }

    #[test]
    fn amplitude_fit() {
        let c = cyl();
        let fit = nearest_bubble(&ZonalField::bubble(&c, 0.0).scaled(1.1), true).unwrap();
        assert!((fit.amplitude.unwrap() - 1.1).abs() < 1e-10);
        assert!(fit.distance < 1e-8);
    }

    #[test]
    fn distance_is_local_minimum() {
        let c = cyl();
        let v = ZonalField::linear_combination(&[
            (1.0, &ZonalField::bubble(&c, 0.4)),
            (0.05, &ZonalField::from_radial(&c, &c.bubble_pow(0.0, 1.5))),
        ])
        .unwrap();
        let fit = nearest_bubble(&v, false).unwrap();
        let h = c.grid().spacing();
        let dist = |t: f64| {
            ZonalField::linear_combination(&[(1.0, &v), (-1.0, &ZonalField::bubble(&c, t))])
                .unwrap()
                .h1_norm()
        };
        assert!(dist(fit.t_star - h) > fit.distance);
        assert!(dist(fit.t_star + h) > fit.distance);
        assert!(fit.stationarity < 1e-8);
    }

    #[test]
    fn translation_equivariance() {
        let c = cyl();
        let v = ZonalField::linear_combination(&[
            (1.0, &ZonalField::bubble(&c, 0.2)),
            (0.03, &ZonalField::from_radial(&c, &c.bubble_pow(0.5, 2.0))),
        ])
        .unwrap();
        let base = nearest_bubble(&v, false).unwrap();
        let k = 17;
        let moved = nearest_bubble(&v.translated_cells(k), false).unwrap();
        let tau = k as f64 * c.grid().spacing();
        assert!((moved.t_star - base.t_star - tau).abs() < 1e-8);
    }

    #[test]
    fn far_fields_are_rejected() {
        let c = cyl();
        let tiny = ZonalField::bubble(&c, 0.0).scaled(0.01);
        assert!(matches!(nearest_bubble(&tiny, false), Err(CknError::InvalidArgument(_))));
        let edge = ZonalField::bubble(&c, c.grid().half_width() * 0.9);
        assert!(nearest_bubble(&edge, false).is_err());
    }

    #[test]
    fn projection_identities() {
        let c = cyl();
        let k = ZonalField::kernel_mode(&c, 0.7);
        let (a, rem) = project_y(&k, 0.7).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && rem.h1_norm() < 1e-12);
        let (b, _) = project_y(&ZonalField::bubble(&c, 0.7), 0.7).unwrap();
        assert_eq!(b, 0.0);
        let v0 = ZonalField::bubble(&c, 0.0);
        let sum = ZonalField::linear_combination(&[(1.0, &ZonalField::kernel_mode(&c, 0.0)), (1.0, &v0)]).unwrap();
        let (a, rem) = project_y(&sum, 0.0).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        let diff = ZonalField::linear_combination(&[(1.0, &rem), (-1.0, &v0)]).unwrap();
        assert!(diff.h1_norm() < 1e-12);
        let k0 = ZonalField::kernel_mode(&c, 0.0);
        assert!(rem.h1_inner(&k0).unwrap().abs() < 1e-10);
    }
}
