use super::{sphere_moment, Cylinder};
use crate::error::{CknError, Result};
use std::sync::Arc;

/// Relative size below which angular projection coefficients are dropped.
const CHOP: f64 = 1e-13;

/// Axisymmetric field `f(s, θ) = Σ_l f_l(s) Y_l(θ_n)`.
#[derive(Debug, Clone)]
pub struct ZonalField {
    cyl: Arc<Cylinder>,
    profiles: Vec<Vec<f64>>,
}

impl ZonalField {
    pub fn zeros(cyl: &Arc<Cylinder>) -> Self {
        let n = cyl.grid().len();
        Self {
            cyl: Arc::clone(cyl),
            profiles: vec![vec![0.0; n]; cyl.l_max() + 1],
        }
    }

    pub fn from_profiles(cyl: &Arc<Cylinder>, profiles: Vec<Vec<f64>>) -> Result<Self> {
        if profiles.len() != cyl.l_max() + 1 {
            return Err(CknError::DiscretizationMismatch(format!(
                "expected {} profiles, got {}",
                cyl.l_max() + 1,
                profiles.len()
            )));
        }
        if let Some(bad) = profiles.iter().find(|p| p.len() != cyl.grid().len()) {
            return Err(CknError::DiscretizationMismatch(format!(
                "profile of length {} on a grid of {} points",
                bad.len(),
                cyl.grid().len()
            )));
        }
        if profiles.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CknError::InvalidArgument("non-finite profile value".into()));
        }
        Ok(Self {
            cyl: Arc::clone(cyl),
            profiles,
        })
    }

    /// Angle-independent field with axial values `v`.
    pub fn from_radial(cyl: &Arc<Cylinder>, v: &[f64]) -> Self {
        Self::single_sector(cyl, 0, v, cyl.sphere_area().sqrt())
    }

    /// Field `coef · v(s) Y_l(θ_n)`.
    pub fn single_sector(cyl: &Arc<Cylinder>, l: usize, v: &[f64], coef: f64) -> Self {
        assert_eq!(v.len(), cyl.grid().len());
        let mut out = Self::zeros(cyl);
        out.profiles[l] = v.iter().map(|x| coef * x).collect();
        out
    }

    /// Field `v(s) θ_n`, using `θ_n = √(m_1) Y_1` with `m_1 = ∫θ_n²`.
    pub fn theta_mode(cyl: &Arc<Cylinder>, v: &[f64]) -> Self {
        Self::single_sector(cyl, 1, v, sphere_moment(cyl.params().n, 1).sqrt())
    }

    /// Separable field `v(s) g(θ_n)`, with `g` projected onto `Y_0..Y_L`.
    pub fn separable(cyl: &Arc<Cylinder>, v: &[f64], g: impl Fn(f64) -> f64) -> Self {
        let coefs = cyl.quad().project(g);
        let top = coefs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut out = Self::zeros(cyl);
        for (l, &c) in coefs.iter().enumerate() {
            if c.abs() > CHOP * top {
                out.profiles[l] = v.iter().map(|x| c * x).collect();
            }
        }
        out
    }

    /// The bubble `V_t`.
    pub fn bubble(cyl: &Arc<Cylinder>, t: f64) -> Self {
        Self::from_radial(cyl, &cyl.bubble(t))
    }

    /// `∂_s V_t`.
    pub fn bubble_ds(cyl: &Arc<Cylinder>, t: f64) -> Self {
        Self::from_radial(cyl, &cyl.bubble_ds(t))
    }

    /// The kernel direction `V_t^{p/2} Y_1`.
    pub fn kernel_mode(cyl: &Arc<Cylinder>, t: f64) -> Self {
        Self::single_sector(cyl, 1, &cyl.bubble_pow(t, cyl.params().p / 2.0), 1.0)
    }

    pub fn cylinder(&self) -> &Arc<Cylinder> {
        &self.cyl
    }

    pub fn l_max(&self) -> usize {
        self.profiles.len() - 1
    }

    pub fn profile(&self, l: usize) -> &[f64] {
        &self.profiles[l]
    }

    pub fn profile_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.profiles[l]
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn into_profiles(self) -> Vec<Vec<f64>> {
        self.profiles
    }

    /// Axial values of the angle-constant part (`f_0 / √|S^{n-1}|`).
    pub fn radial_profile(&self) -> Vec<f64> {
        let c = 1.0 / self.cyl.sphere_area().sqrt();
        self.profiles[0].iter().map(|x| c * x).collect()
    }

    fn is_radial(&self) -> bool {
        self.profiles[1..].iter().all(|p| p.iter().all(|&x| x == 0.0))
    }

    pub fn check_compatible(&self, other: &ZonalField) -> Result<()> {
        if self.cyl.same_discretization(&other.cyl) {
            Ok(())
        } else {
            Err(CknError::DiscretizationMismatch(format!(
                "[{}] vs [{}]",
                self.cyl.signature(),
                other.cyl.signature()
            )))
        }
    }

    /// `Σ_i c_i f_i` over fields sharing one discretization.
    pub fn linear_combination(terms: &[(f64, &ZonalField)]) -> Result<ZonalField> {
        let (_, first) = terms.first().ok_or_else(|| {
            CknError::InvalidArgument("empty linear combination".into())
        })?;
        let mut out = ZonalField::zeros(&first.cyl);
        for &(c, f) in terms {
            out.axpy(c, f)?;
        }
        Ok(out)
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &ZonalField) -> Result<()> {
        self.check_compatible(x)?;
        for (p, q) in self.profiles.iter_mut().zip(&x.profiles) {
            for (u, v) in p.iter_mut().zip(q) {
                *u += a * v;
            }
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> ZonalField {
        let mut out = self.clone();
        out.profiles.iter_mut().flatten().for_each(|x| *x *= a);
        out
    }

    /// Values on the tensor nodes, row-major `[i * M + j]`.
    pub fn synthesize(&self) -> Vec<f64> {
        let quad = self.cyl.quad();
        let (n, m) = (self.cyl.grid().len(), quad.len());
        let mut out = vec![0.0; n * m];
        for (l, prof) in self.profiles.iter().enumerate() {
            if prof.iter().all(|&x| x == 0.0) {
                continue;
            }
            let y = quad.harmonic(l);
            for (i, &f) in prof.iter().enumerate() {
                if f != 0.0 {
                    for (o, &yj) in out[i * m..(i + 1) * m].iter_mut().zip(y) {
                        *o += f * yj;
                    }
                }
            }
        }
        out
    }

    /// Projects tensor-node values onto `Y_0..Y_L`. Also returns the fraction of
    /// the `L²` mass that the projection discards.
    pub fn project(cyl: &Arc<Cylinder>, values: &[f64]) -> (ZonalField, f64) {
        let quad = cyl.quad();
        let (n, m) = (cyl.grid().len(), quad.len());
        assert_eq!(values.len(), n * m);
        let w = quad.weights();
        let mut out = ZonalField::zeros(cyl);
        let (mut total, mut kept) = (0.0, 0.0);
        for i in 0..n {
            let row = &values[i * m..(i + 1) * m];
            total += row.iter().zip(w).map(|(g, w)| w * g * g).sum::<f64>();
            for l in 0..=cyl.l_max() {
                let c: f64 = row
                    .iter()
                    .zip(quad.harmonic(l))
                    .zip(w)
                    .map(|((g, y), w)| w * g * y)
                    .sum();
                out.profiles[l][i] = c;
                kept += c * c;
            }
        }
        let tail = if total > 0.0 {
            ((total - kept) / total).max(0.0)
        } else {
            0.0
        };
        (out, tail)
    }

    /// Applies `map` pointwise and projects back; also returns the discarded
    /// fraction of `L²` mass.
    pub fn pointwise_map_with_tail(&self, map: impl Fn(f64) -> f64) -> (ZonalField, f64) {
        if self.is_radial() {
            let root = self.cyl.sphere_area().sqrt();
            let vals: Vec<f64> = self.profiles[0].iter().map(|&f| map(f / root)).collect();
            return (Self::from_radial(&self.cyl, &vals), 0.0);
        }
        let values: Vec<f64> = self.synthesize().into_iter().map(map).collect();
        Self::project(&self.cyl, &values)
    }

    pub fn pointwise_map(&self, map: impl Fn(f64) -> f64) -> ZonalField {
        self.pointwise_map_with_tail(map).0
    }

    /// `Σ_l ∫ f_l g_l ds`, which is the `L²(C)` pairing.
    pub fn l2_inner(&self, other: &ZonalField) -> Result<f64> {
        self.check_compatible(other)?;
        let h = self.cyl.grid().spacing();
        Ok(h * self
            .profiles
            .iter()
            .zip(&other.profiles)
            .map(|(a, b)| dot(a, b))
            .sum::<f64>())
    }

    /// `Σ_l ∫ (f_l' g_l' + (λ_l + Λ) f_l g_l) ds`.
    pub fn h1_inner(&self, other: &ZonalField) -> Result<f64> {
        self.check_compatible(other)?;
        let h = self.cyl.grid().spacing();
        let mut acc = 0.0;
        for (l, (a, b)) in self.profiles.iter().zip(&other.profiles).enumerate() {
            if a.iter().all(|&x| x == 0.0) || b.iter().all(|&x| x == 0.0) {
                continue;
            }
            acc += dot(a, &self.cyl.stiffness(l).matvec(b));
        }
        Ok(h * acc)
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_inner(self).expect("self-compatible").max(0.0).sqrt()
    }

    /// `(∫_C |f|^q)^{1/q}` by tensor quadrature.
    pub fn lp_norm(&self, q: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(CknError::InvalidArgument(format!("L^q norm needs q >= 1, got {q}")));
        }
        let h = self.cyl.grid().spacing();
        let sum = if self.is_radial() {
            let root = self.cyl.sphere_area().sqrt();
            self.cyl.sphere_area()
                * self.profiles[0].iter().map(|f| (f / root).abs().powf(q)).sum::<f64>()
        } else {
            let w = self.cyl.quad().weights();
            let m = w.len();
            self.synthesize()
                .chunks(m)
                .map(|row| row.iter().zip(w).map(|(g, w)| w * g.abs().powf(q)).sum::<f64>())
                .sum()
        };
        Ok((h * sum).powf(1.0 / q))
    }

    /// Shifts every profile by `k` grid cells (positive `k` moves it towards
    /// larger `s`), filling with zeros.
    pub fn translated_cells(&self, k: isize) -> ZonalField {
        let mut out = ZonalField::zeros(&self.cyl);
        let n = self.cyl.grid().len() as isize;
        for (dst, src) in out.profiles.iter_mut().zip(&self.profiles) {
            for i in 0..n {
                let j = i - k;
                if (0..n).contains(&j) {
                    dst[i as usize] = src[j as usize];
                }
            }
        }
        out
    }

    /// Largest `|f_l(±S)| / max|f_l|` over non-zero profiles.
    pub fn boundary_ratio(&self) -> f64 {
        self.profiles
            .iter()
            .filter_map(|p| {
                let top = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                (top > 0.0).then(|| p[0].abs().max(p[p.len() - 1].abs()) / top)
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
