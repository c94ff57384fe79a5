//! Banded matrices: symmetric storage with Cholesky and inertia, plus a
//! general band LU with partial pivoting for indefinite systems.

use crate::error::{CknError, Result};

/// Symmetric band matrix with half-bandwidth `k`.
///
/// `bands[d][i]` holds `A[i][i+d]` for `d = 0..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    k: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBand {
    pub fn zeros(n: usize, k: usize) -> Self {
        let bands = (0..=k).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        Self { n, k, bands }
    }

    /// Symmetric Toeplitz matrix from the stencil `[c0, c1, ..., ck]`.
    pub fn toeplitz(n: usize, stencil: &[f64]) -> Self {
        let k = stencil.len() - 1;
        let bands = (0..=k)
            .map(|d| vec![stencil[d]; n.saturating_sub(d)])
            .collect();
        Self { n, k, bands }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = j - i;
        if d > self.k {
            0.0
        } else {
            self.bands[d][i]
        }
    }

    /// Adds `value` at `(i, j)` and its mirror.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let d = j - i;
        assert!(d <= self.k, "entry outside the band");
        self.bands[d][i] += value;
    }

    /// Returns `self + diag(diag)`.
    pub fn plus_diagonal(&self, diag: &[f64]) -> Self {
        assert_eq!(diag.len(), self.n);
        let mut out = self.clone();
        for (a, d) in out.bands[0].iter_mut().zip(diag) {
            *a += d;
        }
        out
    }

    /// Returns `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.bands[0].iter_mut().for_each(|a| *a += shift);
        out
    }

    /// Returns `scale * self`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for band in &mut out.bands {
            band.iter_mut().for_each(|a| *a *= scale);
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y: Vec<f64> = self.bands[0].iter().zip(x).map(|(a, b)| a * b).collect();
        for d in 1..=self.k {
            for (i, &a) in self.bands[d].iter().enumerate() {
                y[i] += a * x[i + d];
                y[i + d] += a * x[i];
            }
        }
        y
    }

    /// Band Cholesky factorization; fails unless the matrix is positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, k) = (self.n, self.k);
        let w = k + 1;
        // l[i*w + (i-j)] = L[i][j]
        let mut l = vec![0.0; n * w];
        for j in 0..n {
            let mut diag = self.bands[0][j];
            for m in j.saturating_sub(k)..j {
                let v = l[j * w + (j - m)];
                diag -= v * v;
            }
            if diag.is_nan() || diag <= 0.0 {
                return Err(CknError::IndefiniteHessian {
                    sector: usize::MAX,
                    detail: format!("non-positive Cholesky pivot {diag:.3e} at row {j}"),
                });
            }
            let ljj = diag.sqrt();
            l[j * w] = ljj;
            for i in (j + 1)..(j + k + 1).min(n) {
                let mut v = self.bands[i - j][j];
                for m in i.saturating_sub(k)..j {
                    v -= l[i * w + (i - m)] * l[j * w + (j - m)];
                }
                l[i * w + (i - j)] = v / ljj;
            }
        }
        Ok(BandCholesky { n, k, l })
    }

    /// Counts negative and positive pivots of an unpivoted `LDLᵀ`, which by
    /// Sylvester's law equal the numbers of negative and positive eigenvalues.
    ///
    /// Returns `(negatives, positives, min |pivot|)`.
    pub fn inertia(&self) -> (usize, usize, f64) {
        let (n, k) = (self.n, self.k);
        let w = k + 1;
        // l[i*w + (i-j)] = L[i][j] (unit lower), d[j] pivots
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let (mut neg, mut pos, mut min_abs) = (0, 0, f64::INFINITY);
        for j in 0..n {
            let mut dj = self.bands[0][j];
            for m in j.saturating_sub(k)..j {
                let v = l[j * w + (j - m)];
                dj -= v * v * d[m];
            }
            d[j] = dj;
            min_abs = min_abs.min(dj.abs());
            if dj < 0.0 {
                neg += 1;
            } else {
                pos += 1;
            }
            for i in (j + 1)..(j + k + 1).min(n) {
                let mut v = self.bands[i - j][j];
                for m in i.saturating_sub(k)..j {
                    v -= l[i * w + (i - m)] * l[j * w + (j - m)] * d[m];
                }
                l[i * w + (i - j)] = v / dj;
            }
        }
        (neg, pos, min_abs)
    }

    /// LU factorization with partial pivoting (works for indefinite matrices).
    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }

    /// Restriction `PᵀMP` to even vectors about the centre of an odd-sized
    /// matrix, where `P` maps `u` to `g[c±k] = u[k]`.
    pub fn even_reduction(&self) -> Self {
        assert!(self.n % 2 == 1, "even reduction needs an odd dimension");
        let c = (self.n - 1) / 2;
        let m = c + 1;
        let mut out = Self::zeros(m, self.k);
        let members = |a: usize| -> Vec<usize> {
            if a == 0 {
                vec![c]
            } else {
                vec![c + a, c - a]
            }
        };
        for a in 0..m {
            for b in a..(a + self.k + 1).min(m) {
                let mut v = 0.0;
                for &i in &members(a) {
                    for &j in &members(b) {
                        v += self.get(i, j);
                    }
                }
                out.bands[b - a][a] = v;
            }
        }
        out
    }
}

/// `Pᵀv` for the even reduction about the centre.
pub fn even_restrict(v: &[f64]) -> Vec<f64> {
    let c = (v.len() - 1) / 2;
    (0..=c)
        .map(|k| if k == 0 { v[c] } else { v[c + k] + v[c - k] })
        .collect()
}

/// `Pu`: the even vector with `g[c±k] = u[k]`.
pub fn even_extend(u: &[f64]) -> Vec<f64> {
    let c = u.len() - 1;
    let mut g = vec![0.0; 2 * c + 1];
    for (k, &x) in u.iter().enumerate() {
        g[c + k] = x;
        g[c - k] = x;
    }
    g
}

/// Cholesky factor of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    k: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, k) = (self.n, self.k);
        let w = k + 1;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let mut v = x[i];
            for m in i.saturating_sub(k)..i {
                v -= self.l[i * w + (i - m)] * x[m];
            }
            x[i] = v / self.l[i * w];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for j in (i + 1)..(i + k + 1).min(n) {
                v -= self.l[j * w + (j - i)] * x[j];
            }
            x[i] = v / self.l[i * w];
        }
    }
}

/// Band LU with partial pivoting, `PA = LU`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    // u[i*w + (j - i + kl)] = U[i][j], w = 2kl + ku + 1
    u: Vec<f64>,
    mult: Vec<f64>,
    piv: Vec<usize>,
    min_pivot: f64,
}

impl BandLu {
    fn factor(a: &SymBand) -> Result<Self> {
        let n = a.n;
        let (kl, ku) = (a.k, a.k);
        let w = 2 * kl + ku + 1;
        let mut u = vec![0.0; n * w];
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                u[i * w + (j + kl - i)] = a.get(i, j);
            }
        }
        let mut mult = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0; n];
        let mut min_pivot = f64::INFINITY;
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        for j in 0..n {
            let last_row = (j + kl).min(n - 1);
            let last_col = (j + ku + kl).min(n - 1);
            let mut p = j;
            for i in (j + 1)..=last_row {
                if u[at(i, j)].abs() > u[at(p, j)].abs() {
                    p = i;
                }
            }
            piv[j] = p;
            if p != j {
                for c in j..=last_col {
                    u.swap(at(j, c), at(p, c));
                }
            }
            let pivot = u[at(j, j)];
            min_pivot = min_pivot.min(pivot.abs());
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(CknError::NonConvergence(format!(
                    "singular band matrix: zero pivot in column {j}"
                )));
            }
            for i in (j + 1)..=last_row {
                let m = u[at(i, j)] / pivot;
                mult[j * kl + (i - j - 1)] = m;
                u[at(i, j)] = 0.0;
                if m != 0.0 {
                    for c in (j + 1)..=last_col {
                        u[at(i, c)] -= m * u[at(j, c)];
                    }
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            u,
            mult,
            piv,
            min_pivot,
        })
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.n, self.kl);
        let w = 2 * kl + self.ku + 1;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in 0..n {
            x.swap(j, self.piv[j]);
            let xj = x[j];
            for i in (j + 1)..(j + kl + 1).min(n) {
                x[i] -= self.mult[j * kl + (i - j - 1)] * xj;
            }
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for c in (i + 1)..(i + self.ku + kl + 1).min(n) {
                v -= self.u[i * w + (c + kl - i)] * x[c];
            }
            x[i] = v / self.u[i * w + kl];
        }
        x
    }
}
