//! Generalized eigenproblem `-φ'' + (λ_l + Λ)φ = γ V_0^{p-2} φ` per harmonic
//! sector, solved by subspace iteration with Rayleigh–Ritz.

use crate::cylinder::Cylinder;
use crate::error::{CknError, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Floor applied to the weight `V_0^{p-2}` to keep the pencil definite.
pub const WEIGHT_FLOOR: f64 = 1e-300;
/// Target dual-norm residual for each returned eigenpair.
pub const RESIDUAL_TOL: f64 = 1e-9;
const MAX_ITERS: usize = 2000;
const GUARD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

/// Lowest eigenpairs of one sector. Profiles are normalized by
/// `∫ V_0^{p-2} φ² ds = 1`.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub ell: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenprofiles: Vec<Vec<f64>>,
    pub parities: Vec<Parity>,
    /// `‖Aφ - γBφ‖_{A^{-1}}` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn weight(cyl: &Cylinder) -> Vec<f64> {
    cyl.bubble_pow(0.0, cyl.params().p - 2.0)
        .into_iter()
        .map(|w| w.max(WEIGHT_FLOOR))
        .collect()
}

fn parity(phi: &[f64]) -> Parity {
    let n = phi.len();
    let (mut even, mut odd, mut total) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let r = phi[n - 1 - i];
        even += (phi[i] - r).powi(2);
        odd += (phi[i] + r).powi(2);
        total += phi[i] * phi[i];
    }
    if even <= 1e-12 * total {
        Parity::Even
    } else if odd <= 1e-12 * total {
        Parity::Odd
    } else {
        Parity::Mixed
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The `k` smallest eigenvalues of sector `ell` (`k <= 10`).
pub fn eigensolve_sector(cyl: &Cylinder, ell: usize, k: usize) -> Result<SectorSpectrum> {
    if k == 0 || k > 10 {
        return Err(CknError::InvalidArgument(format!("need 1 <= k <= 10, got {k}")));
    }
    if ell > cyl.l_max() {
        return Err(CknError::InvalidArgument(format!(
            "sector {ell} above L = {}",
            cyl.l_max()
        )));
    }
    let n = cyl.grid().len();
    let h = cyl.grid().spacing();
    let a = cyl.stiffness(ell);
    let fac = cyl.stiffness_factor(ell);
    let b = weight(cyl);
    let m = k + GUARD;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + ell as u64);
    let mut x: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    let mut theta = vec![0.0; m];
    for iter in 1..=MAX_ITERS {
        // Y = A^{-1} B X
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|col| {
                let mut v: Vec<f64> = col.iter().zip(&b).map(|(c, w)| c * w).collect();
                fac.solve_in_place(&mut v);
                v
            })
            .collect();
        let ay: Vec<Vec<f64>> = y.iter().map(|v| a.matvec(v)).collect();
        let by: Vec<Vec<f64>> = y
            .iter()
            .map(|v| v.iter().zip(&b).map(|(c, w)| c * w).collect())
            .collect();
        let ah = DMatrix::from_fn(m, m, |i, j| h * dot(&y[i], &ay[j]));
        let bh = DMatrix::from_fn(m, m, |i, j| h * dot(&y[i], &by[j]));
        let ah = (&ah + ah.transpose()) * 0.5;
        let bh = (&bh + bh.transpose()) * 0.5;

        // B̂-orthonormal basis from the eigendecomposition of B̂.
        let be = SymmetricEigen::new(bh);
        let top = be.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(*v));
        let keep: Vec<usize> = (0..m).filter(|&j| be.eigenvalues[j] > 1e-14 * top).collect();
        if keep.len() <= k {
            return Err(CknError::NonConvergence(format!(
                "subspace collapsed in sector {ell} at (p={}, n={})",
                cyl.params().p,
                cyl.params().n
            )));
        }
        let r = keep.len();
        let t = DMatrix::from_fn(m, r, |i, j| {
            be.eigenvectors[(i, keep[j])] / be.eigenvalues[keep[j]].sqrt()
        });
        let c = t.transpose() * &ah * &t;
        let c = (&c + c.transpose()) * 0.5;
        let ce = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&i, &j| ce.eigenvalues[i].total_cmp(&ce.eigenvalues[j]));
        let z = &t * ce.eigenvectors.select_columns(&order);
        theta = order.iter().map(|&i| ce.eigenvalues[i]).collect();

        // Ritz vectors, B-normalized with the quadrature weight h.
        x = (0..r)
            .map(|j| {
                let mut v = vec![0.0; n];
                for (i, yi) in y.iter().enumerate() {
                    let zij = z[(i, j)];
                    if zij != 0.0 {
                        v.iter_mut().zip(yi).for_each(|(o, s)| *o += zij * s);
                    }
                }
                v
            })
            .collect();
        while x.len() < m {
            x.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        }

        let residuals: Vec<f64> = (0..k)
            .map(|j| {
                let phi = &x[j];
                let ap = a.matvec(phi);
                let res: Vec<f64> = ap
                    .iter()
                    .zip(phi.iter().zip(&b))
                    .map(|(av, (p, w))| av - theta[j] * w * p)
                    .collect();
                let sol = fac.solve(&res);
                (h * dot(&res, &sol)).max(0.0).sqrt()
            })
            .collect();
        if residuals.iter().all(|&r| r <= RESIDUAL_TOL * theta[k - 1].abs().max(1.0)) {
            let mut profiles: Vec<Vec<f64>> = x.into_iter().take(k).collect();
            for phi in &mut profiles {
                let big = phi.iter().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { *v } else { acc });
                if big < 0.0 {
                    phi.iter_mut().for_each(|v| *v = -*v);
                }
            }
            let parities = profiles.iter().map(|p| parity(p)).collect();
            return Ok(SectorSpectrum {
                ell,
                eigenvalues: theta[..k].to_vec(),
                eigenprofiles: profiles,
                parities,
                residuals,
                iterations: iter,
            });
        }
    }
    Err(CknError::NonConvergence(format!(
        "sector {ell} at (p={}, n={}): eigenvalues {:?} after {MAX_ITERS} iterations",
        cyl.params().p,
        cyl.params().n,
        &theta[..k.min(theta.len())]
    )))
}

/// The gap eigenvalue: the smallest eigenvalue above `p - 1 + 1e-6` over
/// sectors `l <= L`, with the sector it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma3 {
    pub value: f64,
    pub sector: usize,
}

pub fn gamma3(cyl: &Cylinder) -> Result<Gamma3> {
    let threshold = cyl.params().p - 1.0 + 1e-6;
    let mut best: Option<Gamma3> = None;
    for ell in 0..=cyl.l_max() {
        let spec = eigensolve_sector(cyl, ell, 3)?;
        if let Some(b) = best {
            if spec.eigenvalues[0] > b.value {
                break;
            }
        }
        if let Some(&g) = spec.eigenvalues.iter().find(|&&g| g > threshold) {
            if best.map_or(true, |b| g < b.value) {
                best = Some(Gamma3 { value: g, sector: ell });
            }
        }
    }
    best.ok_or_else(|| CknError::NonConvergence("no eigenvalue above p-1 found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CknParams;
    use std::sync::Arc;

    fn cyl(p: f64, n: usize) -> Arc<Cylinder> {
        Cylinder::default_for(CknParams::from_pn(p, n).unwrap()).unwrap()
    }

    #[test]
    fn known_eigenpairs_at_4_3() {
        let c = cyl(4.0, 3);
        let s0 = eigensolve_sector(&c, 0, 3).unwrap();
        assert!((s0.eigenvalues[0] - 1.0).abs() < 1e-6);
        assert!((s0.eigenvalues[1] - 3.0).abs() < 1e-6);
        assert!(s0.eigenvalues[2] > 3.0 + 1e-3);
        assert_eq!(s0.parities[..2], [Parity::Even, Parity::Odd]);
        // first profile is proportional to V_0
        let v = c.bubble(0.0);
        let cos = dot(&s0.eigenprofiles[0], &v)
            / (dot(&v, &v) * dot(&s0.eigenprofiles[0], &s0.eigenprofiles[0])).sqrt();
        assert!((cos - 1.0).abs() < 1e-8);
        let s1 = eigensolve_sector(&c, 1, 2).unwrap();
        assert!((s1.eigenvalues[0] - 3.0).abs() < 1e-6);
        let w = c.bubble_pow(0.0, 2.0);
        let cos = dot(&s1.eigenprofiles[0], &w)
            / (dot(&w, &w) * dot(&s1.eigenprofiles[0], &s1.eigenprofiles[0])).sqrt();
        assert!((cos - 1.0).abs() < 1e-8);
    }

    #[test]
    fn b_orthonormal_and_a_diagonal() {
        let c = cyl(3.0, 4);
        let s = eigensolve_sector(&c, 0, 4).unwrap();
        let h = c.grid().spacing();
        let b = weight(&c);
        let a = c.stiffness(0);
        for i in 0..4 {
            for j in 0..4 {
                let bij: f64 = h * s.eigenprofiles[i]
                    .iter()
                    .zip(&s.eigenprofiles[j])
                    .zip(&b)
                    .map(|((x, y), w)| x * y * w)
                    .sum::<f64>();
                let aij = h * dot(&s.eigenprofiles[i], &a.matvec(&s.eigenprofiles[j]));
                let (eb, ea) = if i == j { (1.0, s.eigenvalues[i]) } else { (0.0, 0.0) };
                assert!((bij - eb).abs() < 1e-8, "B[{i},{j}] = {bij}");
                assert!((aij - ea).abs() < 1e-8 * s.eigenvalues[3], "A[{i},{j}] = {aij}");
            }
            assert!(s.residuals[i] <= 1e-8);
        }
        assert!(s.eigenvalues.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sector_minima_increase() {
        let c = cyl(3.5, 3);
        let mins: Vec<f64> = (0..=4)
            .map(|l| eigensolve_sector(&c, l, 1).unwrap().eigenvalues[0])
            .collect();
        assert!(mins.windows(2).all(|w| w[1] > w[0]), "{mins:?}");
    }

    #[test]
    fn gamma3_above_degenerate_level() {
        let c = cyl(4.0, 3);
        let g = gamma3(&c).unwrap();
        assert!(g.value > 3.0 + 1e-3);
    }

    #[test]
    fn rejects_bad_requests() {
        let c = cyl(4.0, 3);
        assert!(eigensolve_sector(&c, 0, 0).is_err());
        assert!(eigensolve_sector(&c, 0, 11).is_err());
        assert!(eigensolve_sector(&c, 9, 1).is_err());
    }
}
