//! Numerics for degenerate stability of the Caffarelli–Kohn–Nirenberg
//! inequality on the Felli–Schneider curve, carried out on the cylinder
//! `R × S^{n-1}` after the Emden–Fowler change of variables.

pub mod banded;
pub mod cli;
pub mod cylinder;
pub mod error;
pub mod multibubble;
pub mod operators;
pub mod params;
pub mod special;
pub mod spectrum;
pub mod stability;

pub use cylinder::{Cylinder, Discretization, Grid, GridSignature, ZonalField};
pub use error::{CknError, Result};
pub use params::CknParams;
