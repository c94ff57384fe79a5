//! Axisymmetric functions on the cylinder `R × S^{n-1}`, stored as zonal
//! harmonic profiles on a uniform axial grid.

mod field;
pub mod ineq;
pub mod io;
mod quad;

pub use field::ZonalField;
pub use quad::{sphere_moment, SphereQuad};

use crate::banded::{BandCholesky, SymBand};
use crate::error::{CknError, Result};
use crate::params::CknParams;
use crate::special::sphere_area;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Centre-outward coefficients of the 6th-order stencil for `-∂²` (times `h²`).
pub const NEG_D2_STENCIL: [f64; 4] = [49.0 / 18.0, -1.5, 0.15, -1.0 / 90.0];

/// Smallest admissible number of axial points.
pub const MIN_POINTS: usize = 129;
/// Largest admissible axial spacing.
pub const MAX_SPACING: f64 = 0.05;

/// Uniform axial grid on `[-S, S]` with an odd number of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    len: usize,
    h: f64,
}

impl Grid {
    pub fn new(half_width: f64, len: usize) -> Result<Self> {
        if len < MIN_POINTS || len % 2 == 0 {
            return Err(CknError::InvalidArgument(format!(
                "grid needs an odd number of points >= {MIN_POINTS}, got {len}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(CknError::InvalidArgument(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self {
            half_width,
            len,
            h: 2.0 * half_width / (len - 1) as f64,
        })
    }

    /// Default grid: `S = 30/√Λ` and `N = 4097`, with `N` raised to the next
    /// `2^k + 1` until `h <= 0.05`.
    pub fn for_params(params: &CknParams) -> Self {
        Self::with_half_width(30.0 / params.sqrt_lambda())
    }

    /// Grid of half-width `s` with the default point-count rule.
    pub fn with_half_width(s: f64) -> Self {
        let mut len = 4097;
        while 2.0 * s / (len - 1) as f64 > MAX_SPACING {
            len = 2 * len - 1;
        }
        Self::new(s, len).expect("default grid is valid")
    }

    /// Same interval with the spacing halved.
    pub fn refined(&self) -> Self {
        Self::new(self.half_width, 2 * self.len - 1).expect("refinement of a valid grid")
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn centre(&self) -> usize {
        (self.len - 1) / 2
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.node(i))
    }

    /// Checks the truncation and resolution requirements for `params`.
    pub fn validate_for(&self, params: &CknParams) -> Result<()> {
        let need = 20.0 / params.sqrt_lambda();
        if self.half_width < need * (1.0 - 1e-12) {
            return Err(CknError::InvalidArgument(format!(
                "grid half-width {} below 20/sqrt(Lambda) = {need}",
                self.half_width
            )));
        }
        if self.h > MAX_SPACING * (1.0 + 1e-12) {
            return Err(CknError::InvalidArgument(format!(
                "grid spacing {} exceeds {MAX_SPACING}",
                self.h
            )));
        }
        Ok(())
    }
}

/// Requested discretization; unset entries take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub grid_points: Option<usize>,
    pub half_width: Option<f64>,
    pub l_max: usize,
    pub angular_nodes: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            grid_points: None,
            half_width: None,
            l_max: 8,
            angular_nodes: 64,
        }
    }
}

impl Discretization {
    pub fn grid_for(&self, params: &CknParams) -> Result<Grid> {
        let s = self.half_width.unwrap_or(30.0 / params.sqrt_lambda());
        match self.grid_points {
            Some(n) => Grid::new(s, n),
            None => Ok(Grid::with_half_width(s)),
        }
    }
}

/// Discretization signature attached to every reported number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSignature {
    pub n: usize,
    pub p: f64,
    pub half_width: f64,
    pub points: usize,
    pub spacing: f64,
    pub l_max: usize,
    pub angular_nodes: usize,
    pub fd_order: usize,
}

impl std::fmt::Display for GridSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "S={:.6} N={} h={:.6} L={} M={} fd={}",
            self.half_width, self.points, self.spacing, self.l_max, self.angular_nodes, self.fd_order
        )
    }
}

/// Shared discretization context: parameters, grid, angular quadrature and the
/// factored sector operators `A_l = -∂² + λ_l + Λ`.
#[derive(Debug)]
pub struct Cylinder {
    params: CknParams,
    grid: Grid,
    quad: SphereQuad,
    neg_d2: SymBand,
    stiffness: Vec<SymBand>,
    factors: Vec<BandCholesky>,
    area: f64,
}

impl Cylinder {
    pub fn new(params: CknParams, grid: Grid, l_max: usize, angular_nodes: usize) -> Result<Arc<Self>> {
        grid.validate_for(&params)?;
        let quad = SphereQuad::new(params.n, angular_nodes, l_max)?;
        let h2 = grid.spacing() * grid.spacing();
        let stencil: Vec<f64> = NEG_D2_STENCIL.iter().map(|c| c / h2).collect();
        let neg_d2 = SymBand::toeplitz(grid.len(), &stencil);
        let stiffness: Vec<SymBand> = (0..=l_max)
            .map(|l| neg_d2.shifted(eigen_sphere(params.n, l) + params.lambda))
            .collect();
        let factors = stiffness
            .iter()
            .map(|a| a.cholesky())
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Self {
            params,
            grid,
            quad,
            neg_d2,
            stiffness,
            factors,
            area: sphere_area(params.n),
        }))
    }

    /// Default discretization `L = 8, M = 64, S = 30/√Λ, N >= 4097`.
    pub fn default_for(params: CknParams) -> Result<Arc<Self>> {
        Self::build(params, &Discretization::default())
    }

    pub fn build(params: CknParams, disc: &Discretization) -> Result<Arc<Self>> {
        let grid = disc.grid_for(&params)?;
        Self::new(params, grid, disc.l_max, disc.angular_nodes)
    }

    /// Same interval with `N -> 2N-1` and `M -> 2M`.
    pub fn doubled(&self) -> Result<Arc<Self>> {
        Self::new(
            self.params,
            self.grid.refined(),
            self.l_max(),
            2 * self.quad.len(),
        )
    }

    pub fn params(&self) -> &CknParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn quad(&self) -> &SphereQuad {
        &self.quad
    }

    pub fn l_max(&self) -> usize {
        self.stiffness.len() - 1
    }

    /// `|S^{n-1}|`.
    pub fn sphere_area(&self) -> f64 {
        self.area
    }

    /// Eigenvalue `λ_l = l(l+n-2)` of `-Δ_θ`.
    pub fn lambda_l(&self, l: usize) -> f64 {
        eigen_sphere(self.params.n, l)
    }

    /// The discrete `-∂²` with zero extension beyond the grid.
    pub fn neg_d2(&self) -> &SymBand {
        &self.neg_d2
    }

    /// `A_l = -∂² + λ_l + Λ`.
    pub fn stiffness(&self, l: usize) -> &SymBand {
        &self.stiffness[l]
    }

    pub fn stiffness_factor(&self, l: usize) -> &BandCholesky {
        &self.factors[l]
    }

    /// Upper bound on the 2-norm condition number of `A_l`.
    pub fn condition_bound(&self, l: usize) -> f64 {
        let h2 = self.grid.spacing().powi(2);
        let top: f64 = NEG_D2_STENCIL[0] + 2.0 * NEG_D2_STENCIL[1..].iter().map(|c| c.abs()).sum::<f64>();
        let base = self.lambda_l(l) + self.params.lambda;
        (base + top / h2) / base
    }

    /// `∫ f ds` on the grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.grid.spacing() * f.iter().sum::<f64>()
    }

    /// Samples of `V_t^q` on the grid.
    pub fn bubble_pow(&self, t: f64, q: f64) -> Vec<f64> {
        self.grid.nodes().map(|s| self.params.bubble_pow(s - t, q)).collect()
    }

    /// Samples of `V_t` on the grid.
    pub fn bubble(&self, t: f64) -> Vec<f64> {
        self.grid.nodes().map(|s| self.params.bubble(s - t)).collect()
    }

    /// Samples of `∂_s V_t` on the grid.
    pub fn bubble_ds(&self, t: f64) -> Vec<f64> {
        self.grid.nodes().map(|s| self.params.bubble_ds(s - t)).collect()
    }

    pub fn signature(&self) -> GridSignature {
        GridSignature {
            n: self.params.n,
            p: self.params.p,
            half_width: self.grid.half_width(),
            points: self.grid.len(),
            spacing: self.grid.spacing(),
            l_max: self.l_max(),
            angular_nodes: self.quad.len(),
            fd_order: 6,
        }
    }

    pub fn same_discretization(&self, other: &Cylinder) -> bool {
        std::ptr::eq(self, other)
            || (self.params == other.params
                && self.grid == other.grid
                && self.l_max() == other.l_max()
                && self.quad.len() == other.quad.len())
    }
}

fn eigen_sphere(n: usize, l: usize) -> f64 {
    (l * (l + n - 2)) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_rules() {
        let c = CknParams::from_pn(4.0, 3).unwrap();
        let g = Grid::for_params(&c);
        assert_eq!(g.len(), 4097);
        assert!((g.half_width() - 30.0 / c.sqrt_lambda()).abs() < 1e-12);
        let c = CknParams::from_pn(12.0, 2).unwrap();
        let g = Grid::for_params(&c);
        assert_eq!(g.len(), 8193);
        assert!(g.spacing() <= MAX_SPACING);
        assert_eq!(g.refined().len(), 16385);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(10.0, 128).is_err());
        assert!(Grid::new(10.0, 65).is_err());
        let c = CknParams::from_pn(4.0, 3).unwrap();
        assert!(Grid::new(5.0, 4097).unwrap().validate_for(&c).is_err());
        assert!(Grid::new(40.0, 1025).unwrap().validate_for(&c).is_err());
        assert!(Grid::new(40.0, 2049).unwrap().validate_for(&c).is_ok());
    }

    #[test]
    fn stencil_is_sixth_order() {
        let g = Grid::new(3.0, 601).unwrap();
        let h = g.spacing();
        let a = SymBand::toeplitz(g.len(), &NEG_D2_STENCIL.map(|c| c / (h * h)));
        let f: Vec<f64> = g.nodes().map(|s| (-s * s).exp()).collect();
        let d = a.matvec(&f);
        let i = g.centre() + 37;
        let s = g.node(i);
        let exact = -(4.0 * s * s - 2.0) * (-s * s).exp();
        assert!((d[i] - exact).abs() < 5e-9);
    }

    #[test]
    fn condition_bound_is_modest() {
        let c = CknParams::from_pn(4.0, 3).unwrap();
        let cyl = Cylinder::default_for(c).unwrap();
        for l in 0..=cyl.l_max() {
            assert!(cyl.condition_bound(l) < 1e12);
        }
    }
}
