//! Bubble sums `σ = Σ V_{t_i}`: pairwise interactions, the scale `Q`, the
//! moduli `F_1, F_2, F_3` and the weighted sup-norms built from `W_1, W_2, W_3`.

use crate::cylinder::{Cylinder, ZonalField};
use crate::error::{CknError, Result};
use crate::operators::{apply_h1, hminus1_norm};
use crate::params::CknParams;
use crate::special::sphere_area;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default weight exponent offset `ζ`.
pub const DEFAULT_ZETA: f64 = 0.01;
/// Margin (in units of `1/√Λ`) added on each side of the centres when
/// integrating interactions.
const MARGIN: f64 = 30.0;
const STEP: f64 = 0.005;
const MAX_CENTRE: f64 = 1e4;

/// A configuration of `ν` bubbles with increasing centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleConfig {
    pub params: CknParams,
    pub centers: Vec<f64>,
    /// Smallest consecutive gap; infinite for a single bubble.
    pub r: f64,
    /// `e^{-√Λ R}`; zero for a single bubble.
    pub q: f64,
    pub zeta: f64,
}

impl BubbleConfig {
    pub fn new(params: CknParams, centers: Vec<f64>, zeta: f64) -> Result<Self> {
        if centers.is_empty() || centers.iter().any(|t| !t.is_finite() || t.abs() > MAX_CENTRE) {
            return Err(CknError::InvalidArgument("need at least one finite centre".into()));
        }
        if centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CknError::InvalidArgument("centres must be strictly increasing".into()));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(CknError::InvalidArgument(format!("ζ must lie in (0, 1), got {zeta}")));
        }
        let r = centers
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let q = (-params.sqrt_lambda() * r).exp();
        Ok(Self {
            params,
            centers,
            r,
            q,
            zeta,
        })
    }

    pub fn nu(&self) -> usize {
        self.centers.len()
    }

    /// `Q_{i,j} = e^{-√Λ|t_i - t_j|}`.
    pub fn q_pair(&self, i: usize, j: usize) -> f64 {
        (-self.params.sqrt_lambda() * (self.centers[i] - self.centers[j]).abs()).exp()
    }

    fn ln_phi(&self, i: usize, s: f64) -> f64 {
        -self.params.sqrt_lambda() * (s - self.centers[i]).abs()
    }

    fn mid(&self, i: usize) -> f64 {
        0.5 * (self.centers[i] + self.centers[i + 1])
    }

    /// `W_1` (`width = 1`) or `W_3` (`width = 2`).
    fn w_odd(&self, s: f64, width: f64) -> f64 {
        let nu = self.nu();
        let p = self.params.p;
        let t = &self.centers;
        let z = 1.0 - self.zeta;
        let mut w = 0.0;
        if nu >= 2 {
            for i in 0..nu - 1 {
                let m = self.mid(i);
                if s >= t[i] + width && s <= m {
                    w += self.q_pair(i, i + 1) * ((p - 3.0) * self.ln_phi(i, s)).exp();
                }
                if s >= m && s <= t[i + 1] - width {
                    w += self.q_pair(i, i + 1) * ((p - 3.0) * self.ln_phi(i + 1, s)).exp();
                }
            }
            if s >= t[nu - 1] + width {
                w += self.q_pair(nu - 2, nu - 1) * (z * self.ln_phi(nu - 1, s)).exp();
            }
            if s <= t[0] - width {
                w += self.q_pair(0, 1) * (z * self.ln_phi(0, s)).exp();
            }
        }
        for &ti in t {
            if (s - ti).abs() <= width {
                w += self.q;
            }
        }
        w
    }

    pub fn w1(&self, s: f64) -> f64 {
        self.w_odd(s, 1.0)
    }

    pub fn w3(&self, s: f64) -> f64 {
        self.w_odd(s, 2.0)
    }

    pub fn w2(&self, s: f64) -> f64 {
        let nu = self.nu();
        let z = 1.0 - self.zeta;
        (0..nu)
            .filter(|&i| {
                let lo = if i == 0 { f64::NEG_INFINITY } else { self.mid(i - 1) };
                let hi = if i + 1 == nu { f64::INFINITY } else { self.mid(i) };
                s >= lo && s <= hi
            })
            .map(|i| self.q * (z * self.ln_phi(i, s)).exp())
            .sum()
    }

    /// `σ^{p-1} - Σ V_{t_i}^{p-1}` at `s`, factored through the largest
    /// bubble to avoid cancellation.
    pub fn nonlinear_excess(&self, s: f64) -> f64 {
        let c = &self.params;
        let lv: Vec<f64> = self.centers.iter().map(|t| c.ln_bubble(s - t)).collect();
        let top = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rel: Vec<f64> = lv.iter().map(|l| (l - top).exp()).collect();
        let u: f64 = rel.iter().sum::<f64>() - 1.0;
        let inner = ((c.p - 1.0) * u.ln_1p()).exp_m1()
            - rel.iter().map(|r| r.powf(c.p - 1.0)).sum::<f64>()
            + 1.0;
        ((c.p - 1.0) * top).exp() * inner
    }

    /// Sample points covering the centres plus a decay margin.
    fn samples(&self) -> Vec<f64> {
        let m = MARGIN / self.params.sqrt_lambda();
        let (lo, hi) = (self.centers[0] - m, self.centers[self.nu() - 1] + m);
        let k = ((hi - lo) / STEP).ceil() as usize;
        (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
    }

    /// `‖h‖_i = sup |h| / W_i` over the sample points where `W_i > 0`.
    pub fn weighted_norm(&self, which: usize, h: impl Fn(f64) -> f64) -> Result<f64> {
        let w: fn(&Self, f64) -> f64 = match which {
            1 => Self::w1,
            2 => Self::w2,
            3 => Self::w3,
            _ => return Err(CknError::InvalidArgument(format!("no weight W_{which}"))),
        };
        Ok(self
            .samples()
            .into_iter()
            .filter_map(|s| {
                let ws = w(self, s);
                (ws > 0.0).then(|| h(s).abs() / ws)
            })
            .fold(0.0, f64::max))
    }
}

/// `∫_C V_{t1}^{q1} V_{t2}^{q2}` by trapezoid quadrature on a grid that
/// covers both centres.
pub fn interaction(params: &CknParams, t1: f64, t2: f64, q1: f64, q2: f64) -> Result<f64> {
    if !(q1 >= 0.0 && q2 >= 0.0) || (q1 + q2 - params.p).abs() > 1e-12 {
        return Err(CknError::InvalidArgument(format!(
            "need q1, q2 >= 0 with q1 + q2 = p, got ({q1}, {q2})"
        )));
    }
    integrate_pair(params, t1, t2, |s| {
        (q1 * params.ln_bubble(s - t1) + q2 * params.ln_bubble(s - t2)).exp()
    })
}

/// `∫_C V_{t1}^{p-1} ∂_sV_{t2}`.
pub fn interaction_derivative(params: &CknParams, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 < t2) {
        return Err(CknError::InvalidArgument(format!("need t1 < t2, got ({t1}, {t2})")));
    }
    integrate_pair(params, t1, t2, |s| {
        params.bubble_pow(s - t1, params.p - 1.0) * params.bubble_ds(s - t2)
    })
}

fn integrate_pair(params: &CknParams, t1: f64, t2: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    if !(t1.is_finite() && t2.is_finite()) || t1.abs().max(t2.abs()) > MAX_CENTRE {
        return Err(CknError::InvalidArgument(format!(
            "centres ({t1}, {t2}) outside |t| <= {MAX_CENTRE}"
        )));
    }
    let m = MARGIN / params.sqrt_lambda();
    let (lo, hi) = (t1.min(t2) - m, t1.max(t2) + m);
    let k = ((hi - lo) / STEP).ceil() as usize;
    let h = (hi - lo) / k as f64;
    let sum: f64 = (0..=k).map(|i| f(lo + i as f64 * h)).sum();
    Ok(sphere_area(params.n) * h * sum)
}

/// The moduli appearing in the stability estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulus {
    F1 { nu: usize },
    F2,
    F3,
}

pub fn moduli(kind: Modulus, p: f64, x: f64) -> Result<f64> {
    let needs_log = match kind {
        Modulus::F1 { nu } => nu > 1 && p == 3.0,
        Modulus::F2 => false,
        Modulus::F3 => p <= 3.0,
    };
    if needs_log && !(x > 0.0 && x < 1.0) {
        return Err(CknError::InvalidArgument(format!("logarithmic branch needs 0 < x < 1, got {x}")));
    }
    if !(x >= 0.0) {
        return Err(CknError::InvalidArgument(format!("need x >= 0, got {x}")));
    }
    Ok(match kind {
        Modulus::F1 { nu } => {
            if p > 3.0 || nu == 1 {
                x
            } else if p == 3.0 {
                x * x.ln().abs().sqrt() + x
            } else {
                x.powf((p - 1.0) / 2.0)
            }
        }
        Modulus::F2 => {
            if p >= 3.0 {
                x * x
            } else {
                x.powf(p - 1.0)
            }
        }
        Modulus::F3 => {
            if p > 3.0 {
                x
            } else {
                x.powf((p - 1.0) / 2.0) * (-x.ln()).powf((p - 1.0) / p)
            }
        }
    })
}

/// Measured against a predicted asymptotic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub gap: f64,
    pub value: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// `count` gaps evenly spread over `[4/√Λ, 12/√Λ]`.
pub fn default_gaps(params: &CknParams, count: usize) -> Vec<f64> {
    let (lo, hi) = (4.0 / params.sqrt_lambda(), 12.0 / params.sqrt_lambda());
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64)
        .collect()
}

/// `∫V_0^{q1}V_g^{q2}` against `e^{-√Λ g min(q1,q2)}`, or against
/// `(g+1)e^{-p√Λ g/2}` when `q1 = q2`.
pub fn interaction_window(params: &CknParams, q1: f64, gaps: &[f64]) -> Result<Vec<WindowRow>> {
    let q2 = params.p - q1;
    let sl = params.sqrt_lambda();
    gaps.iter()
        .map(|&g| {
            let value = interaction(params, 0.0, g, q1, q2)?;
            let predicted = if (q1 - q2).abs() < 1e-12 {
                (g + 1.0) * (-params.p * sl * g / 2.0).exp()
            } else {
                (-sl * g * q1.min(q2)).exp()
            };
            Ok(WindowRow { gap: g, value, predicted, ratio: value / predicted })
        })
        .collect()
}

/// `∫V_0^{p-1}∂_sV_g` against `e^{-√Λ g}`.
pub fn derivative_window(params: &CknParams, gaps: &[f64]) -> Result<Vec<WindowRow>> {
    let sl = params.sqrt_lambda();
    gaps.iter()
        .map(|&g| {
            let value = interaction_derivative(params, 0.0, g)?;
            let predicted = (-sl * g).exp();
            Ok(WindowRow { gap: g, value, predicted, ratio: value / predicted })
        })
        .collect()
}

/// `max ratio / min ratio`; infinite if any ratio is not positive.
pub fn window_spread(rows: &[WindowRow]) -> f64 {
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| {
        (a.min(r.ratio), b.max(r.ratio))
    });
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Residual diagnostics for `σ = Σ V_{t_i}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleSumDiagnostics {
    pub nu: usize,
    pub r: f64,
    pub q: f64,
    /// `‖H_1(σ)‖_{H^{-1}}`.
    pub residual: f64,
    pub residual_over_q: f64,
    /// `‖σ^{p-1} - ΣV^{p-1}‖_i` with `i = 1` for `p < 4` and `i = 2` otherwise.
    pub weighted_norm: f64,
    pub norm_index: usize,
}

/// Evaluates `σ` on `cyl`, whose axial range must contain every centre with
/// a margin of `15/√Λ`.
pub fn bubble_sum_residual(config: &BubbleConfig, cyl: &Arc<Cylinder>) -> Result<BubbleSumDiagnostics> {
    let c = cyl.params();
    if c.n != config.params.n || c.p != config.params.p {
        return Err(CknError::DiscretizationMismatch(
            "bubble configuration and cylinder use different (p, n)".into(),
        ));
    }
    let room = cyl.grid().half_width() - 15.0 / c.sqrt_lambda();
    if config.centers.iter().any(|t| t.abs() > room) {
        return Err(CknError::InvalidArgument(format!(
            "centres must satisfy |t| <= {room:.3} on this grid"
        )));
    }
    let mut sigma = ZonalField::zeros(cyl);
    for &t in &config.centers {
        sigma.axpy(1.0, &ZonalField::bubble(cyl, t))?;
    }
    let residual = hminus1_norm(&apply_h1(&sigma))?;
    let norm_index = if c.p < 4.0 { 1 } else { 2 };
    let weighted_norm = if config.nu() >= 2 {
        config.weighted_norm(norm_index, |s| config.nonlinear_excess(s))?
    } else {
        0.0
    };
    Ok(BubbleSumDiagnostics {
        nu: config.nu(),
        r: config.r,
        q: config.q,
        residual,
        residual_over_q: if config.q > 0.0 { residual / config.q } else { f64::NAN },
        weighted_norm,
        norm_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::sech_power_integral;

    fn params(p: f64, n: usize) -> CknParams {
        CknParams::from_pn(p, n).unwrap()
    }

    #[test]
    fn coincident_interaction_is_lp_mass() {
        let c = params(3.5, 3);
        let exact = sphere_area(3) * c.beta.powf(c.p) * sech_power_integral(2.0 * c.p / (c.p - 2.0)) / c.alpha;
        let v = interaction(&c, 0.3, 0.3, 1.5, 2.0).unwrap();
        assert!((v - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn interaction_symmetry() {
        let c = params(4.0, 3);
        let a = interaction(&c, -0.4, 3.1, 1.0, 3.0).unwrap();
        let b = interaction(&c, 3.1, -0.4, 3.0, 1.0).unwrap();
        assert!((a - b).abs() <= 1e-13 * a);
        assert!(interaction(&c, 0.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn derivative_sign_and_reflection() {
        let c = params(3.0, 3);
        let d = interaction_derivative(&c, 0.0, 5.0).unwrap();
        assert!(d > 0.0);
        // reflection s -> -s maps the pair (0, 5) to (-5, 0) with ∂_s odd
        let mirrored = integrate_pair(&c, -5.0, 0.0, |s| {
            c.bubble_pow(s, c.p - 1.0) * c.bubble_ds(s + 5.0)
        })
        .unwrap();
        assert!((d + mirrored).abs() < 1e-12 * d);
        assert!(interaction_derivative(&c, 1.0, 0.0).is_err());
    }

    #[test]
    fn windows_are_bounded() {
        for (p, n) in [(4.0, 3), (4.0, 2), (3.0, 3), (3.0, 4)] {
            let c = params(p, n);
            let gaps = default_gaps(&c, 9);
            for q1 in [1.0, p / 2.0] {
                let w = interaction_window(&c, q1, &gaps).unwrap();
                assert!(window_spread(&w) <= 10.0, "p={p} q1={q1}: {w:?}");
            }
            assert!(window_spread(&derivative_window(&c, &gaps).unwrap()) <= 10.0);
        }
    }

    #[test]
    fn moduli_branches() {
        let x = 0.01;
        assert_eq!(moduli(Modulus::F2, 3.0, x).unwrap(), x * x);
        assert!((moduli(Modulus::F2, 3.0, x).unwrap() - x.powf(3.0 - 1.0)).abs() < 1e-18);
        let f3 = moduli(Modulus::F3, 2.5, x).unwrap();
        assert!((f3 - 0.01f64.powf(0.75) * 100f64.ln().powf(0.6)).abs() < 1e-15);
        for p in [2.3, 3.0, 3.5] {
            for nu in [1, 2] {
                for x in [1e-6, 1e-3, 0.2, 0.36] {
                    assert!(moduli(Modulus::F1 { nu }, p, x).unwrap() >= x);
                }
            }
        }
        assert!(moduli(Modulus::F3, 2.5, 0.0).is_err());
        assert!(moduli(Modulus::F1 { nu: 2 }, 3.0, 1.5).is_err());
        assert!(moduli(Modulus::F2, 3.5, -1.0).is_err());
    }

    #[test]
    fn weights_positive_and_q_pairs_bounded() {
        let c = params(3.5, 3);
        let cfg = BubbleConfig::new(c, vec![-6.0, 0.0, 7.5], DEFAULT_ZETA).unwrap();
        for i in 0..2 {
            assert!(cfg.q_pair(i, i + 1) <= cfg.q * (1.0 + 1e-15));
        }
        assert_eq!(cfg.q_pair(0, 1), cfg.q);
        for s in cfg.samples() {
            assert!(cfg.w1(s) > 0.0 && cfg.w2(s) > 0.0 && cfg.w3(s) > 0.0, "s={s}");
        }
        // monotone under pointwise domination
        let a = cfg.weighted_norm(1, |s| cfg.nonlinear_excess(s)).unwrap();
        let b = cfg.weighted_norm(1, |s| 2.0 * cfg.nonlinear_excess(s).abs()).unwrap();
        assert!(b >= a);
        assert!(BubbleConfig::new(c, vec![1.0, 0.0], DEFAULT_ZETA).is_err());
    }

    #[test]
    fn excess_matches_direct_formula() {
        let c = params(3.0, 3);
        let cfg = BubbleConfig::new(c, vec![0.0, 4.0], DEFAULT_ZETA).unwrap();
        for s in [-1.0, 0.5, 2.0, 3.9] {
            let (a, b) = (c.bubble(s), c.bubble(s - 4.0));
            let direct = (a + b).powf(2.0) - a * a - b * b;
            assert!((cfg.nonlinear_excess(s) - direct).abs() < 1e-12 * direct.abs());
        }
    }

    #[test]
    fn sum_norm_bounded_over_gaps() {
        for p in [3.0, 4.5] {
            let c = params(p, 3);
            let norms: Vec<f64> = default_gaps(&c, 5)
                .into_iter()
                .map(|g| {
                    let cfg = BubbleConfig::new(c, vec![-g / 2.0, g / 2.0], DEFAULT_ZETA).unwrap();
                    let i = if p < 4.0 { 1 } else { 2 };
                    cfg.weighted_norm(i, |s| cfg.nonlinear_excess(s)).unwrap()
                })
                .collect();
            let top = norms.iter().cloned().fold(0.0, f64::max);
            assert!(top.is_finite() && top < 1e3, "p={p}: {norms:?}");
        }
    }

    #[test]
    fn single_bubble_residual_is_at_the_floor() {
        let c = params(4.0, 3);
        let cyl = Cylinder::default_for(c).unwrap();
        let cfg = BubbleConfig::new(c, vec![0.8], DEFAULT_ZETA).unwrap();
        let d = bubble_sum_residual(&cfg, &cyl).unwrap();
        assert!(d.residual < 1e-6 && d.q == 0.0);
        let two = BubbleConfig::new(c, vec![-3.0, 3.0], DEFAULT_ZETA).unwrap();
        let d2 = bubble_sum_residual(&two, &cyl).unwrap();
        assert!(d2.residual_over_q > 0.0 && d2.residual_over_q.is_finite());
    }
}
