//! The nonlinear operator `H_1`, its linearization at a bubble, the `H^{-1}`
//! dual norm, and 1-D Schrödinger boundary-value solves.

use crate::banded::SymBand;
use crate::cylinder::{Cylinder, ZonalField};
use crate::error::{CknError, Result};
use std::sync::Arc;

/// Conditioning above which Riesz solves are reported as unreliable.
pub const MAX_CONDITION: f64 = 1e12;
/// Smallest admissible `|eigenvalue|` in [`bvp_solve`].
pub const BVP_SINGULAR_THRESHOLD: f64 = 1e-8;

/// An element of `H^{-1}(C)` sampled on the grid, paired with fields by
/// `⟨f, w⟩ = Σ_l ∫ f_l w_l ds`.
#[derive(Debug, Clone)]
pub struct Residual(ZonalField);

impl Residual {
    pub fn new(field: ZonalField) -> Self {
        Self(field)
    }

    pub fn field(&self) -> &ZonalField {
        &self.0
    }

    pub fn into_field(self) -> ZonalField {
        self.0
    }

    pub fn pairing(&self, w: &ZonalField) -> Result<f64> {
        self.0.l2_inner(w)
    }
}

/// `H_1(v)` together with the fraction of nonlinearity mass lost to the
/// degree-`L` projection.
#[derive(Debug, Clone)]
pub struct H1Evaluation {
    pub residual: Residual,
    pub tail_fraction: f64,
}

/// `H_1(v) = ∂²v + Δ_θ v - Λv + |v|^{p-2}v`.
pub fn apply_h1(v: &ZonalField) -> Residual {
    apply_h1_with_tail(v).residual
}

pub fn apply_h1_with_tail(v: &ZonalField) -> H1Evaluation {
    let cyl = v.cylinder();
    let p = cyl.params().p;
    let (mut out, tail) = v.pointwise_map_with_tail(|x| x.abs().powf(p - 2.0) * x);
    for l in 0..=cyl.l_max() {
        if v.profile(l).iter().all(|&x| x == 0.0) {
            continue;
        }
        let av = cyl.stiffness(l).matvec(v.profile(l));
        for (o, a) in out.profile_mut(l).iter_mut().zip(av) {
            *o -= a;
        }
    }
    H1Evaluation {
        residual: Residual(out),
        tail_fraction: tail,
    }
}

/// `-∂²ρ - Δ_θρ + Λρ - (p-1)V_t^{p-2}ρ`. The weight is angle-independent, so
/// the map acts sector by sector without projection error.
pub fn linearized_apply(rho: &ZonalField, t: f64) -> Residual {
    let cyl = rho.cylinder();
    let p = cyl.params().p;
    let weight = cyl.bubble_pow(t, p - 2.0);
    let mut out = ZonalField::zeros(cyl);
    for l in 0..=cyl.l_max() {
        if rho.profile(l).iter().all(|&x| x == 0.0) {
            continue;
        }
        let a = cyl.stiffness(l).matvec(rho.profile(l));
        for (i, o) in out.profile_mut(l).iter_mut().enumerate() {
            *o = a[i] - (p - 1.0) * weight[i] * rho.profile(l)[i];
        }
    }
    Residual(out)
}

fn check_conditioning(cyl: &Cylinder) -> Result<()> {
    let worst = (0..=cyl.l_max())
        .map(|l| cyl.condition_bound(l))
        .fold(0.0, f64::max);
    if worst > MAX_CONDITION {
        return Err(CknError::NonConvergence(format!(
            "Riesz operator condition bound {worst:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    Ok(())
}

/// Solves `(-∂² - Δ_θ + Λ)φ = f` sector by sector.
pub fn riesz_solve(f: &Residual) -> Result<ZonalField> {
    let cyl = f.0.cylinder();
    check_conditioning(cyl)?;
    let mut phi = ZonalField::zeros(cyl);
    for l in 0..=cyl.l_max() {
        let src = f.0.profile(l);
        if src.iter().all(|&x| x == 0.0) {
            continue;
        }
        phi.profile_mut(l).copy_from_slice(src);
        cyl.stiffness_factor(l).solve_in_place(phi.profile_mut(l));
    }
    Ok(phi)
}

/// `‖f‖_{H^{-1}} = √⟨f, φ⟩` with `φ` the Riesz representative, so that the
/// value equals `‖φ‖_{H^1}`.
pub fn hminus1_norm(f: &Residual) -> Result<f64> {
    let phi = riesz_solve(f)?;
    Ok(f.pairing(&phi)?.max(0.0).sqrt())
}

/// Solves `(-∂² + c - (p-1)V_0^{p-2}) g = rhs` on the axial grid.
///
/// `sector` only labels errors. Fails when the smallest eigenvalue magnitude
/// of the discrete operator is below [`BVP_SINGULAR_THRESHOLD`].
pub fn bvp_solve(cyl: &Arc<Cylinder>, sector: usize, c: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let params = cyl.params();
    if rhs.len() != cyl.grid().len() {
        return Err(CknError::DiscretizationMismatch(format!(
            "rhs of length {} on a grid of {} points",
            rhs.len(),
            cyl.grid().len()
        )));
    }
    let op = schrodinger_operator(cyl, c);
    let lu = op.lu()?;
    let min_eig = smallest_abs_eigenvalue(&op, &lu);
    if min_eig < BVP_SINGULAR_THRESHOLD {
        return Err(CknError::SingularOperator {
            sector,
            p: params.p,
            n: params.n,
            min_eig,
        });
    }
    let g = lu.solve(rhs);
    let r = op.matvec(&g);
    let h = cyl.grid().spacing();
    let res = (h * r.iter().zip(rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt();
    let scale = (h * rhs.iter().map(|x| x * x).sum::<f64>()).sqrt().max(1.0);
    if res > 1e-9 * scale {
        return Err(CknError::NonConvergence(format!(
            "boundary-value residual {res:.3e} in sector {sector}"
        )));
    }
    Ok(g)
}

/// The banded matrix `-∂² + c - (p-1)V_0^{p-2}`.
pub fn schrodinger_operator(cyl: &Cylinder, c: f64) -> SymBand {
    let p = cyl.params().p;
    let diag: Vec<f64> = cyl
        .bubble_pow(0.0, p - 2.0)
        .iter()
        .map(|w| c - (p - 1.0) * w)
        .collect();
    cyl.neg_d2().plus_diagonal(&diag)
}

/// Smallest `|λ|` of a symmetric band matrix by inverse iteration.
fn smallest_abs_eigenvalue(op: &SymBand, lu: &crate::banded::BandLu) -> f64 {
    let n = op.dim();
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin() + (i as f64 / n as f64))
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut estimate = f64::INFINITY;
    for _ in 0..200 {
        let nx = norm(&x);
        x.iter_mut().for_each(|a| *a /= nx);
        let y = lu.solve(&x);
        let ny = norm(&y);
        let next = 1.0 / ny;
        let done = (next - estimate).abs() <= 1e-10 * next;
        estimate = next;
        x = y;
        if done {
            break;
        }
    }
    // Rayleigh quotient of the converged vector sharpens the estimate.
    let nx = norm(&x);
    x.iter_mut().for_each(|a| *a /= nx);
    let ax = op.matvec(&x);
    let rq: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
    rq.abs().min(estimate)
}

/// Exponential decay fit `|g(s)| ≈ C e^{-κ s}` on `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub points: usize,
}

/// Fits the decay rate over the part of `s > 0` where `|g| / max|g|` lies in
/// `[lo, hi]`.
pub fn fit_decay_rate(cyl: &Cylinder, g: &[f64], lo: f64, hi: f64) -> Result<DecayFit> {
    let top = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let grid = cyl.grid();
    let pts: Vec<(f64, f64)> = (grid.centre()..grid.len())
        .filter_map(|i| {
            let r = g[i].abs() / top;
            (r >= lo && r <= hi).then(|| (grid.node(i), g[i].abs().ln()))
        })
        .collect();
    if pts.len() < 10 {
        return Err(CknError::InvalidArgument(
            "too few points in the decay window".into(),
        ));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    Ok(DecayFit {
        rate: -sxy / sxx,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CknParams;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn cyl43() -> &'static Arc<Cylinder> {
        static C: OnceLock<Arc<Cylinder>> = OnceLock::new();
        C.get_or_init(|| Cylinder::default_for(CknParams::from_pn(4.0, 3).unwrap()).unwrap())
    }

    fn diff(a: &ZonalField, b: &ZonalField) -> ZonalField {
        ZonalField::linear_combination(&[(1.0, a), (-1.0, b)]).unwrap()
    }

    #[test]
    fn bubbles_are_near_zeros_of_h1() {
        let cyl = cyl43();
        for t in [0.0, 1.7] {
            let r = hminus1_norm(&apply_h1(&ZonalField::bubble(cyl, t))).unwrap();
            assert!(r < 1e-6, "t={t}: {r:e}");
        }
        assert_eq!(hminus1_norm(&apply_h1(&ZonalField::zeros(cyl))).unwrap(), 0.0);
    }

    #[test]
    fn doubled_bubble() {
        let cyl = cyl43();
        let p = cyl.params().p;
        let v = ZonalField::bubble(cyl, 0.0);
        let r = apply_h1(&v.scaled(2.0));
        let expect = ZonalField::from_radial(cyl, &cyl.bubble_pow(0.0, p - 1.0))
            .scaled(2f64.powf(p - 1.0) - 2.0);
        let err = hminus1_norm(&Residual::new(diff(r.field(), &expect))).unwrap();
        assert!(err < 1e-6 * hminus1_norm(&Residual::new(expect)).unwrap().max(1.0));
    }

    #[test]
    fn kernel_directions_of_linearization() {
        let cyl = cyl43();
        for t in [0.0, 0.8] {
            let ds = ZonalField::bubble_ds(cyl, t);
            let km = ZonalField::kernel_mode(cyl, t);
            assert!(hminus1_norm(&linearized_apply(&ds, t)).unwrap() < 1e-6);
            assert!(hminus1_norm(&linearized_apply(&km, t)).unwrap() < 1e-6);
        }
    }

    #[test]
    fn linearization_on_bubble() {
        let cyl = cyl43();
        let p = cyl.params().p;
        let v = ZonalField::bubble(cyl, 0.0);
        let lv = linearized_apply(&v, 0.0);
        let expect = ZonalField::from_radial(cyl, &cyl.bubble_pow(0.0, p - 1.0)).scaled(2.0 - p);
        let err = hminus1_norm(&Residual::new(diff(lv.field(), &expect))).unwrap();
        assert!(err < 1e-6);
    }

    #[test]
    fn riesz_inverts_forward_operator() {
        let cyl = cyl43();
        let g = ZonalField::separable(cyl, &cyl.bubble_pow(0.4, 1.5), |x| 1.0 - x + 2.0 * x * x);
        let mut f = ZonalField::zeros(cyl);
        for l in 0..=cyl.l_max() {
            let a = cyl.stiffness(l).matvec(g.profile(l));
            f.profile_mut(l).copy_from_slice(&a);
        }
        let phi = riesz_solve(&Residual::new(f)).unwrap();
        let d = diff(&phi, &g);
        assert!(d.profiles().iter().flatten().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn riesz_of_nonlinearity_recovers_bubble_energy() {
        let cyl = cyl43();
        let p = cyl.params().p;
        let f = Residual::new(ZonalField::from_radial(cyl, &cyl.bubble_pow(0.0, p - 1.0)));
        let n2 = hminus1_norm(&f).unwrap().powi(2);
        let lp = ZonalField::bubble(cyl, 0.0).lp_norm(p).unwrap().powf(p);
        assert!((n2 - lp).abs() < 1e-8 * lp);
        let phi = riesz_solve(&f).unwrap();
        assert!((phi.h1_norm().powi(2) - n2).abs() < 1e-10 * n2);
    }

    #[test]
    fn bvp_decay_rate_and_linearity() {
        let cyl = cyl43();
        let c = cyl.params();
        let (n, p, lam) = (c.n as f64, c.p, c.lambda);
        let rhs = cyl.bubble_pow(0.0, 2.0 * p - 3.0);
        let g = bvp_solve(cyl, 2, 2.0 * n + lam, &rhs).unwrap();
        let fit = fit_decay_rate(cyl, &g, 1e-12, 1e-6).unwrap();
        let expect = (2.0 * n + lam).sqrt().min((2.0 * p - 3.0) * lam.sqrt());
        assert!((fit.rate - expect).abs() < 0.02 * expect, "{} vs {expect}", fit.rate);

        let zero = bvp_solve(cyl, 2, 2.0 * n + lam, &vec![0.0; rhs.len()]).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));

        let rhs2 = cyl.bubble_ds(0.5);
        let g2 = bvp_solve(cyl, 2, 2.0 * n + lam, &rhs2).unwrap();
        let sum: Vec<f64> = rhs.iter().zip(&rhs2).map(|(a, b)| a + b).collect();
        let g12 = bvp_solve(cyl, 2, 2.0 * n + lam, &sum).unwrap();
        for i in 0..g.len() {
            assert!((g12[i] - g[i] - g2[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn bvp_detects_translation_kernel() {
        let cyl = cyl43();
        let rhs = cyl.bubble_ds(0.0);
        let err = bvp_solve(cyl, 0, cyl.params().lambda, &rhs).unwrap_err();
        assert!(matches!(err, CknError::SingularOperator { sector: 0, .. }), "{err}");
    }

    #[test]
    fn directional_derivative_is_first_order() {
        let cyl = cyl43();
        let v = ZonalField::bubble(cyl, 0.0);
        let rho = ZonalField::separable(cyl, &cyl.bubble_pow(0.0, 1.2), |x| 1.0 + x);
        let base = apply_h1(&v);
        let lin = linearized_apply(&rho, 0.0).into_field().scaled(-1.0);
        let err = |eps: f64| {
            let mut w = v.clone();
            w.axpy(eps, &rho).unwrap();
            let fd = diff(apply_h1(&w).field(), base.field()).scaled(1.0 / eps);
            hminus1_norm(&Residual::new(diff(&fd, &lin))).unwrap()
        };
        let ratio = err(1e-3) / err(1e-4);
        assert!((ratio - 10.0).abs() <= 1.0, "ratio {ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn duality_sharpness(a in -1.0f64..1.0, b in -1.0f64..1.0, t in -2.0f64..2.0) {
            let cyl = cyl43();
            let f = Residual::new(ZonalField::separable(cyl, &cyl.bubble_pow(t, 2.0), |x| a + b * x + x * x));
            let w = ZonalField::separable(cyl, &cyl.bubble(-t), |x| 1.0 - a * x * x + b * x.powi(3));
            let lhs = f.pairing(&w).unwrap().abs();
            let rhs = hminus1_norm(&f).unwrap() * w.h1_norm();
            prop_assert!(lhs <= rhs * (1.0 + 1e-8));
            let phi = riesz_solve(&f).unwrap();
            let eq = f.pairing(&phi).unwrap();
            let prod = hminus1_norm(&f).unwrap() * phi.h1_norm();
            prop_assert!((eq - prod).abs() <= 1e-10 * prod.max(1e-300));
        }

        #[test]
        fn linearization_self_adjoint(a in -1.0f64..1.0, t in -1.0f64..1.0) {
            let cyl = cyl43();
            let r1 = ZonalField::separable(cyl, &cyl.bubble_pow(t, 1.3), |x| 1.0 + a * x);
            let r2 = ZonalField::separable(cyl, &cyl.bubble_ds(a), |x| x * x - a);
            let l12 = linearized_apply(&r1, t).pairing(&r2).unwrap();
            let l21 = linearized_apply(&r2, t).pairing(&r1).unwrap();
            prop_assert!((l12 - l21).abs() <= 1e-10 * l12.abs().max(1.0));
        }
    }
}
