use crate::error::{CknError, Result};
use crate::special::{ln_gamma, sphere_area};
use nalgebra::DMatrix;

/// `∫_{S^{n-1}} θ_n^{2k} dθ = |S^{n-1}| (2k-1)!! / (n(n+2)...(n+2k-2))`.
pub fn sphere_moment(n: usize, k: usize) -> f64 {
    let nf = n as f64;
    (0..k).fold(sphere_area(n), |acc, j| {
        acc * (2.0 * j as f64 + 1.0) / (nf + 2.0 * j as f64)
    })
}

/// Gauss quadrature in `x = θ_n` for the measure `|S^{n-2}| (1-x²)^{(n-3)/2} dx`
/// (total mass `|S^{n-1}|`), with a table of normalized zonal harmonics.
#[derive(Debug, Clone)]
pub struct SphereQuad {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `ylm[l][j] = Y_l(x_j)`
    ylm: Vec<Vec<f64>>,
}

impl SphereQuad {
    pub fn new(n: usize, m: usize, l_max: usize) -> Result<Self> {
        if n < 2 {
            return Err(CknError::InvalidArgument(format!("sphere needs n >= 2, got {n}")));
        }
        if m < l_max + 1 || m < 2 {
            return Err(CknError::InvalidArgument(format!(
                "need M > L for exact orthonormality, got M = {m}, L = {l_max}"
            )));
        }
        let lam = (n as f64 - 2.0) / 2.0;
        // Golub–Welsch on the monic recurrence for (1-x²)^{λ-1/2}.
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for k in 1..m {
            let kf = k as f64;
            let b = if k == 1 {
                1.0 / (2.0 * (1.0 + lam))
            } else {
                kf * (kf + 2.0 * lam - 1.0) / (4.0 * (kf + lam) * (kf + lam - 1.0))
            };
            jac[(k, k - 1)] = b.sqrt();
            jac[(k - 1, k)] = b.sqrt();
        }
        let eig = jac.symmetric_eigen();
        let mu0 = (0.5 * std::f64::consts::PI.ln() + ln_gamma(lam + 0.5) - ln_gamma(lam + 1.0))
            .exp()
            * sphere_area(n - 1);
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|j| {
                let v0 = eig.eigenvectors[(0, j)];
                (eig.eigenvalues[j], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrize: the measure is even in x.
        for j in 0..m / 2 {
            let (x, w) = (
                0.5 * (pairs[m - 1 - j].0 - pairs[j].0),
                0.5 * (pairs[m - 1 - j].1 + pairs[j].1),
            );
            pairs[j] = (-x, w);
            pairs[m - 1 - j] = (x, w);
        }
        if m % 2 == 1 {
            pairs[m / 2].0 = 0.0;
        }
        let (nodes, weights): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();

        let mut ylm = Vec::with_capacity(l_max + 1);
        let mut prev: Vec<f64> = vec![1.0; m];
        let mut cur: Vec<f64> = if n == 2 {
            nodes.clone()
        } else {
            nodes.iter().map(|x| 2.0 * lam * x).collect()
        };
        for l in 0..=l_max {
            let raw = if l == 0 { prev.clone() } else { cur.clone() };
            let norm: f64 = raw
                .iter()
                .zip(&weights)
                .map(|(y, w)| w * y * y)
                .sum::<f64>()
                .sqrt();
            ylm.push(raw.iter().map(|y| y / norm).collect());
            if l >= 1 {
                let lf = l as f64;
                let next: Vec<f64> = (0..m)
                    .map(|j| {
                        let x = nodes[j];
                        if n == 2 {
                            2.0 * x * cur[j] - prev[j]
                        } else {
                            (2.0 * x * (lf + lam) * cur[j] - (lf + 2.0 * lam - 1.0) * prev[j])
                                / (lf + 1.0)
                        }
                    })
                    .collect();
                prev = std::mem::replace(&mut cur, next);
            }
        }
        Ok(Self {
            n,
            nodes,
            weights,
            ylm,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn l_max(&self) -> usize {
        self.ylm.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Values `Y_l(x_j)`.
    pub fn harmonic(&self, l: usize) -> &[f64] {
        &self.ylm[l]
    }

    /// `∫_{S^{n-1}} g(θ_n) dθ`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * g(x)).sum()
    }

    /// Coefficients of `g(θ_n)` on `Y_0..Y_L`.
    pub fn project(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let vals: Vec<f64> = self.nodes.iter().map(|&x| g(x)).collect();
        self.ylm
            .iter()
            .map(|y| {
                y.iter()
                    .zip(&vals)
                    .zip(&self.weights)
                    .map(|((a, b), w)| w * a * b)
                    .sum()
            })
            .collect()
    }
}
