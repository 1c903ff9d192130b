//! Effective ground-state interaction matrix, its (c0, c1, c2) decomposition,
//! mean dielectric response and the Lorentz-Lorenz resummation.
//!
//! Internal units take ε₀ = ħ = 1; β carries the dimensional content.

use crate::{cross_matrix, to_complex, CMatrix3, CVector3, C64};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(&'static str),
    #[error("matrix is not of the (c0, c1, c2) form: residual {residual:.3e} exceeds {threshold:.3e}")]
    NonDecomposable { residual: f64, threshold: f64 },
    #[error("decomposition undefined for a vanishing spin")]
    Underdetermined,
    #[error("excited state {0} has zero detuning")]
    ZeroDetuning(usize),
    #[error("geometric series diverges: |2V/3| = {0} >= 1")]
    SeriesDiverges(f64),
    #[error("unphysical medium: V = {0} >= 1")]
    UnphysicalMedium(f64),
    #[error("medium scalars outside domain: a0 = {a0}, a1 = {a1}")]
    OutsideDomain { a0: f64, a1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Excited-state linewidth (rad/s).
    pub gamma: f64,
    /// Detuning (rad/s).
    pub delta: f64,
    /// Laser wavenumber (1/m).
    pub k_l: f64,
    /// Laser angular frequency (rad/s).
    pub omega_l: f64,
}

impl PhysicalParams {
    pub fn new(gamma: f64, delta: f64, k_l: f64, omega_l: f64) -> Result<Self, MediumError> {
        if !(gamma > 0.0) {
            return Err(MediumError::InvalidParams("gamma must be positive"));
        }
        if !(k_l > 0.0) {
            return Err(MediumError::InvalidParams("k_L must be positive"));
        }
        if delta == 0.0 || !delta.is_finite() {
            return Err(MediumError::InvalidParams("delta must be finite and nonzero"));
        }
        Ok(Self { gamma, delta, k_l, omega_l })
    }

    /// β = πγ / (2Δk_L³).
    pub fn beta(&self) -> f64 {
        PI * self.gamma / (2.0 * self.delta * self.k_l.powi(3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionCoefficients {
    pub beta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl InteractionCoefficients {
    pub fn new(beta: f64, c0: f64, c1: f64, c2: f64) -> Self {
        Self { beta, c0, c1, c2 }
    }

    pub fn from_physical(p: &PhysicalParams, c0: f64, c1: f64, c2: f64) -> Self {
        Self::new(p.beta(), c0, c1, c2)
    }
}

/// Mean spin of a single atom. `square` is the Casimir value J² (e.g. 3/4 for
/// spin-½), which in general differs from |J|² of the mean vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spin {
    pub vector: Vector3<f64>,
    pub square: f64,
}

impl Spin {
    pub fn new(vector: Vector3<f64>, square: f64) -> Self {
        Self { vector, square }
    }

    /// Classical spin with J² = |J|².
    pub fn classical(vector: Vector3<f64>) -> Self {
        Self { vector, square: vector.norm_squared() }
    }

    /// Spin-½ with the given mean vector.
    pub fn half(vector: Vector3<f64>) -> Self {
        Self { vector, square: 0.75 }
    }

    pub fn j_hat(&self) -> Option<Vector3<f64>> {
        let n = self.vector.norm();
        (n > 0.0).then(|| self.vector / n)
    }
}

/// Density and spin at a point of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSpin {
    pub rho: f64,
    pub spin: Spin,
}

/// Position-dependent density and mean spin.
pub trait SpinField: Sync {
    fn at(&self, r: &Vector3<f64>) -> LocalSpin;
}

/// Uniform density and spin inside an axis-aligned box, vacuum outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformSpinField {
    pub rho: f64,
    pub spin: Spin,
    pub center: Vector3<f64>,
    pub half_extent: Vector3<f64>,
}

impl UniformSpinField {
    pub fn new(rho: f64, spin: Spin, center: Vector3<f64>, half_extent: Vector3<f64>) -> Self {
        Self { rho, spin, center, half_extent }
    }

    /// Unbounded homogeneous medium.
    pub fn everywhere(rho: f64, spin: Spin) -> Self {
        Self::new(rho, spin, Vector3::zeros(), Vector3::repeat(f64::INFINITY))
    }
}

impl SpinField for UniformSpinField {
    fn at(&self, r: &Vector3<f64>) -> LocalSpin {
        let d = r - self.center;
        let inside = (0..3).all(|i| d[i].abs() <= self.half_extent[i]);
        LocalSpin {
            rho: if inside { self.rho } else { 0.0 },
            spin: self.spin,
        }
    }
}

/// Spin field given by a closure; convenient for sampled or analytic profiles.
pub struct FnSpinField<F>(pub F);

impl<F: Fn(&Vector3<f64>) -> LocalSpin + Sync> SpinField for FnSpinField<F> {
    fn at(&self, r: &Vector3<f64>) -> LocalSpin {
        (self.0)(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumScalars {
    pub a0: f64,
    pub a1: f64,
}

impl MediumScalars {
    pub fn new(a0: f64, a1: f64) -> Result<Self, MediumError> {
        if !(a0 > 0.0) || !(a0 - a1.abs() > 0.0) {
            return Err(MediumError::OutsideDomain { a0, a1 });
        }
        Ok(Self { a0, a1 })
    }

    /// a0 = 1 − βρc0J², a1 = βρc1|J|.
    pub fn from_local(coeffs: &InteractionCoefficients, local: &LocalSpin) -> Result<Self, MediumError> {
        let b = coeffs.beta * local.rho;
        Self::new(
            1.0 - b * coeffs.c0 * local.spin.square,
            b * coeffs.c1 * local.spin.vector.norm(),
        )
    }
}

/// The 3×3 interaction matrix V̄[J].
pub fn build_interaction_matrix(coeffs: &InteractionCoefficients, spin: &Spin) -> CMatrix3 {
    let [b0, b1, b2] = basis_matrices(spin);
    (b0 * C64::from(coeffs.c0) + b1 * C64::from(coeffs.c1) + b2 * C64::from(coeffs.c2))
        * C64::from(coeffs.beta)
}

/// J²·I, −i[J]×, JJᵀ − J²·I: the matrices multiplying c0, c1, c2.
fn basis_matrices(spin: &Spin) -> [CMatrix3; 3] {
    let j = &spin.vector;
    let scalar = to_complex(&(Matrix3::identity() * spin.square));
    let vector = to_complex(&cross_matrix(j)) * C64::new(0.0, -1.0);
    let tensor = to_complex(&(j * j.transpose() - Matrix3::identity() * spin.square));
    [scalar, vector, tensor]
}

/// Least-squares fit of V to the (c0, c1, c2) family for the given spin.
pub fn decompose_interaction(
    v: &CMatrix3,
    spin: &Spin,
    beta: f64,
) -> Result<(f64, f64, f64), MediumError> {
    let basis = basis_matrices(spin).map(|m| m * C64::from(beta));
    let mut a = DMatrix::<f64>::zeros(18, 3);
    let mut rhs = DVector::<f64>::zeros(18);
    for (col, b) in basis.iter().enumerate() {
        for (idx, z) in b.iter().enumerate() {
            a[(idx, col)] = z.re;
            a[(idx + 9, col)] = z.im;
        }
    }
    for (idx, z) in v.iter().enumerate() {
        rhs[idx] = z.re;
        rhs[idx + 9] = z.im;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 || svd.rank(smax * 1e-12) < 3 {
        return Err(MediumError::Underdetermined);
    }
    let c = svd
        .solve(&rhs, smax * 1e-12)
        .map_err(|_| MediumError::Underdetermined)?;
    let residual = (&a * &c - &rhs).norm();
    let threshold = 1e-9 * v.norm();
    if residual > threshold {
        return Err(MediumError::NonDecomposable { residual, threshold });
    }
    Ok((c[0], c[1], c[2]))
}

/// One excited state: dipole element ⟨e|P|g⟩ and its detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleTransition {
    pub dipole: CVector3,
    pub detuning: f64,
}

/// V = Σ_j ⟨g|P|e_j⟩⟨e_j|P|g⟩ / Δ_j as a polarizability on field vectors.
pub fn adiabatic_eliminate(transitions: &[DipoleTransition]) -> Result<CMatrix3, MediumError> {
    let mut v = CMatrix3::zeros();
    for (j, t) in transitions.iter().enumerate() {
        if t.detuning == 0.0 {
            return Err(MediumError::ZeroDetuning(j));
        }
        let d = &t.dipole;
        v += d.conjugate() * d.transpose() / C64::from(t.detuning);
    }
    Ok(v)
}

/// Resummed inverse permittivity (1 − V/3)/(1 + 2V/3).
pub fn lorentz_lorenz(v: f64) -> f64 {
    (1.0 - v / 3.0) / (1.0 + 2.0 * v / 3.0)
}

/// Partial sum 1 − V − V·Σ_{n=1}^{terms} (−2V/3)ⁿ.
pub fn lorentz_lorenz_series(v: f64, terms: usize) -> Result<f64, MediumError> {
    let q = -2.0 * v / 3.0;
    if q.abs() >= 1.0 {
        return Err(MediumError::SeriesDiverges(q.abs()));
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..terms {
        term *= q;
        sum += term;
    }
    Ok(1.0 - v - v * sum)
}

/// n = 1/√(1 − V).
pub fn mean_index_of_refraction(v: f64) -> Result<f64, MediumError> {
    if v >= 1.0 {
        return Err(MediumError::UnphysicalMedium(v));
    }
    Ok(1.0 / (1.0 - v).sqrt())
}
