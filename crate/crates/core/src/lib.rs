//! Numerics for the three-dimensional interface between light and an atomic
//! ensemble: interaction matrices, dressed and paraxial modes, short-range
//! propagators, perturbative Stokes/spin maps, the collective QND map,
//! point-gas sampling and regime checks.

pub mod dynamics;
pub mod medium;
pub mod modes;
pub mod pointgas;
pub mod propagator;
pub mod qops;
pub mod quadrature;
pub mod regime;

pub use num_complex::Complex64 as C64;

use nalgebra::{Matrix3, Vector3};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type CMatrix3 = Matrix3<C64>;
pub type CVector3 = Vector3<C64>;

/// Matrix `[v]×` with `[v]× u = v × u`.
pub fn cross_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub(crate) fn to_complex(m: &Matrix3<f64>) -> CMatrix3 {
    m.map(|x| C64::new(x, 0.0))
}

/// Levi-Civita symbol over {0,1,2}.
pub fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}
