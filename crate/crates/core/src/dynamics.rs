//! Input-output maps: extreme-paraxial Stokes and spin rotations, weak
//! multimode quadrature maps (with and without local polarization frames),
//! spontaneous-emission damping, collective atomic modes and the two-mode
//! QND map acting on Gaussian states.
//!
//! Quadrature ordering for N mode pairs is fixed as
//! (X_P⁰…X_P^{N−1}, P_P⁰…, X_A⁰…, P_A⁰…), with ħ = 1 and [X, P] = i.

use crate::medium::InteractionCoefficients;
use crate::modes::HermiteGaussMode;
use crate::qops::{EnsembleGrid, EnsembleSamples};
use crate::C64;
use nalgebra::{DMatrix, DVector, Vector3};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state has {state} mode pairs but the map expects {map}")]
    OrderingMismatch { state: usize, map: usize },
    #[error("classical mode amplitude varies by {variation:.3e} (> 1%) over the ensemble")]
    NonUniformClassicalMode { variation: f64 },
    #[error("local frame of mode {mode} is not orthonormal (error {error:.3e})")]
    FrameNotOrthonormal { mode: usize, error: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// Anything the linear maps can act on: numbers, operator coefficient
/// matrices, …
pub trait Linear: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>> Linear for T {}

/// φ = k_Lβc1 ∫ρJ_z dz.
pub fn rotation_angle(coeffs: &InteractionCoefficients, k: f64, column_density: f64) -> f64 {
    k * coeffs.beta * coeffs.c1 * column_density
}

/// ∫ρJ_z dz along the line through `r_perp` (trapezoid on `z`).
pub fn column_density(
    field: &dyn crate::medium::SpinField,
    r_perp: (f64, f64),
    z: &crate::quadrature::UniformAxis,
) -> f64 {
    (0..z.points)
        .map(|i| {
            let s = field.at(&Vector3::new(r_perp.0, r_perp.1, z.coord(i)));
            s.rho * s.spin.vector.z * z.weight(i)
        })
        .sum()
}

/// Coherent second-order paraxial Stokes map at one transverse point.
pub fn paraxial_stokes_map<T: Linear>(s: [T; 3], phi: f64) -> [T; 3] {
    let [s1, s2, s3] = s;
    let h = 0.5 * phi * phi;
    [
        s1.clone() - s2.clone() * phi - s1.clone() * h,
        s2.clone() + s1 * phi - s2 * h,
        s3,
    ]
}

/// Ω = βc1k_L Σ_k s3^k e_z for a given s3 value.
pub fn rotation_vector(coeffs: &InteractionCoefficients, k: f64, s3_sum: f64) -> Vector3<f64> {
    Vector3::new(0.0, 0.0, coeffs.beta * coeffs.c1 * k * s3_sum)
}

/// J + J×Ω + ½(J×Ω)×Ω.
pub fn paraxial_spin_map(j: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    let jx = j.cross(omega);
    j + jx + 0.5 * jx.cross(omega)
}

pub fn paraxial_spin_map_field(j: &[Vector3<f64>], omega: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    j.iter().zip(omega).map(|(a, w)| paraxial_spin_map(a, w)).collect()
}

/// First-order light-quadrature increments ΔX^m, ΔP^m.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakMaps {
    pub dx: Vec<f64>,
    pub dp: Vec<f64>,
}

/// Spin increment at a point: direction × Σ_n (p_n P^n − x_n X^n).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinIncrement {
    pub direction: Vector3<f64>,
    pub p_weights: Vec<f64>,
    pub x_weights: Vec<f64>,
}

impl SpinIncrement {
    pub fn apply(&self, x: &[f64], p: &[f64]) -> Vector3<f64> {
        let s: f64 = self.p_weights.iter().zip(p).map(|(w, v)| w * v).sum::<f64>()
            - self.x_weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        self.direction * s
    }
}

fn weak_prefactor(coeffs: &InteractionCoefficients, k: f64, n_photons: f64) -> f64 {
    k * coeffs.beta * coeffs.c1 * (0.5 * n_photons).sqrt()
}

/// Weak-coupling multimode light map around the strong x-polarized
/// classical mode `o`; the sample spins carry the fluctuations J_y, J_z.
pub fn multimode_weak_maps(
    samples: &EnsembleSamples,
    o: usize,
    coeffs: &InteractionCoefficients,
    n_photons: f64,
) -> WeakMaps {
    let g = weak_prefactor(coeffs, samples.k, n_photons);
    let n = samples.n_modes;
    let (mut dx, mut dp) = (vec![0.0; n], vec![0.0; n]);
    for s in &samples.samples {
        let w = s.weight * s.rho * s.spin.vector.z;
        for m in 0..n {
            let psi = s.psi(m, o);
            dx[m] += w * psi.re;
            dp[m] += w * psi.im;
        }
    }
    WeakMaps { dx: dx.into_iter().map(|v| g * v).collect(), dp: dp.into_iter().map(|v| g * v).collect() }
}

/// Spin increment direction J × e_z with weights Re Ψ^{no}, Im Ψ^{no}.
pub fn weak_spin_increment(
    basis: &[HermiteGaussMode],
    o: usize,
    r: &Vector3<f64>,
    spin: &Vector3<f64>,
    coeffs: &InteractionCoefficients,
    n_photons: f64,
) -> SpinIncrement {
    let k = basis[o].k;
    let g = weak_prefactor(coeffs, k, n_photons);
    let uo = basis[o].eval(r);
    let psi: Vec<C64> = basis.iter().map(|m| m.eval(r).conj() * uo).collect();
    SpinIncrement {
        direction: spin.cross(&Vector3::z()),
        p_weights: psi.iter().map(|p| g * p.re).collect(),
        x_weights: psi.iter().map(|p| g * p.im).collect(),
    }
}

/// Local polarization frame (e_x, e_y, e_z) of a mode at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
}

impl Frame {
    pub fn global() -> Self {
        Self { x: Vector3::x(), y: Vector3::y(), z: Vector3::z() }
    }

    pub fn rotated(rot: &nalgebra::Rotation3<f64>) -> Self {
        Self { x: rot * Vector3::x(), y: rot * Vector3::y(), z: rot * Vector3::z() }
    }

    pub fn orthonormality_error(&self) -> f64 {
        let m = nalgebra::Matrix3::from_columns(&[self.x, self.y, self.z]);
        let det_err = (m.determinant() - 1.0).abs();
        (m.transpose() * m - nalgebra::Matrix3::identity()).amax().max(det_err)
    }
}

const FRAME_TOL: f64 = 1e-10;

fn check_frame(mode: usize, f: &Frame) -> Result<(), DynamicsError> {
    let error = f.orthonormality_error();
    if error > FRAME_TOL {
        return Err(DynamicsError::FrameNotOrthonormal { mode, error });
    }
    Ok(())
}

/// (0, J_y, J_z)·e
fn local_component(spin: &Vector3<f64>, e: &Vector3<f64>) -> f64 {
    Vector3::new(0.0, spin.y, spin.z).dot(e)
}

/// Weak light map with mode-dependent local frames `frames(mode, r)`.
pub fn beyond_paraxial_maps<F>(
    samples: &EnsembleSamples,
    o: usize,
    coeffs: &InteractionCoefficients,
    n_photons: f64,
    frames: F,
) -> Result<WeakMaps, DynamicsError>
where
    F: Fn(usize, &Vector3<f64>) -> Frame,
{
    let g = weak_prefactor(coeffs, samples.k, n_photons);
    let n = samples.n_modes;
    let (mut dx, mut dp) = (vec![0.0; n], vec![0.0; n]);
    for s in &samples.samples {
        let fo = frames(o, &s.r);
        check_frame(o, &fo)?;
        let j = &s.spin.vector;
        let (j_oz, j_ox) = (local_component(j, &fo.z), local_component(j, &fo.x));
        for m in 0..n {
            let fm = frames(m, &s.r);
            check_frame(m, &fm)?;
            let w = s.weight * s.rho * (j_oz * fo.x.dot(&fm.x) - j_ox * fo.x.dot(&fm.z));
            let psi = s.psi(m, o);
            dx[m] += w * psi.re;
            dp[m] += w * psi.im;
        }
    }
    Ok(WeakMaps { dx: dx.into_iter().map(|v| g * v).collect(), dp: dp.into_iter().map(|v| g * v).collect() })
}

/// Spin increment with per-mode directions J × (e_ox × e_ny).
pub fn beyond_paraxial_spin_increment<F>(
    basis: &[HermiteGaussMode],
    o: usize,
    r: &Vector3<f64>,
    spin: &Vector3<f64>,
    coeffs: &InteractionCoefficients,
    n_photons: f64,
    frames: F,
) -> Result<Vec<(Vector3<f64>, f64, f64)>, DynamicsError>
where
    F: Fn(usize, &Vector3<f64>) -> Frame,
{
    let base = weak_spin_increment(basis, o, r, spin, coeffs, n_photons);
    let fo = frames(o, r);
    check_frame(o, &fo)?;
    (0..basis.len())
        .map(|n| {
            let fnn = frames(n, r);
            check_frame(n, &fnn)?;
            Ok((spin.cross(&fo.x.cross(&fnn.y)), base.p_weights[n], base.x_weights[n]))
        })
        .collect()
}

/// Zeroth-order ϱ(r⊥) = k³/(16π²) entering the damping terms.
pub fn zeroth_order_rho(k: f64) -> f64 {
    k.powi(3) / (16.0 * PI * PI)
}

/// Column integrals of the damping coefficients along one transverse line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesDamping {
    pub s1_from_s0: f64,
    pub s1_from_s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesDamping {
    /// `column` holds (dz·ρ, J, J²) samples along z.
    pub fn new(coeffs: &InteractionCoefficients, k: f64, column: &[(f64, Vector3<f64>, f64)]) -> Self {
        let pre = -0.5 * coeffs.beta.powi(2) * k * zeroth_order_rho(k);
        let (c0s, c1s) = (coeffs.c0.powi(2), coeffs.c1.powi(2));
        let mut d = Self { s1_from_s0: 0.0, s1_from_s1: 0.0, s2: 0.0, s3: 0.0 };
        for &(w, j, j2) in column {
            let (x2, y2, z2) = (j.x * j.x, j.y * j.y, j.z * j.z);
            let iso = c0s * j2 * j2;
            d.s1_from_s0 += w * c1s * (y2 - z2);
            d.s1_from_s1 += w * (iso + c1s * (4.0 * z2 + y2));
            d.s2 += w * (iso + c1s * (3.0 * z2 + y2 + x2));
            d.s3 += w * (iso + c1s * (z2 + y2 + x2));
        }
        d.s1_from_s0 *= pre;
        d.s1_from_s1 *= pre;
        d.s2 *= pre;
        d.s3 *= pre;
        d
    }

    /// Adds the damping to (s0, s1, s2, s3); s0 itself is left unchanged.
    pub fn apply<T: Linear>(&self, s: [T; 4]) -> [T; 4] {
        let [s0, s1, s2, s3] = s;
        [
            s0.clone(),
            s1.clone() + s0 * self.s1_from_s0 + s1 * self.s1_from_s1,
            s2.clone() + s2 * self.s2,
            s3.clone() + s3 * self.s3,
        ]
    }
}

/// Spin damping from mode-summed (s0, s1, s2) at the transverse position.
pub fn spin_damping<T: Linear>(
    coeffs: &InteractionCoefficients,
    k: f64,
    j: &Vector3<f64>,
    s: [T; 3],
) -> [T; 3] {
    let pre = -coeffs.beta.powi(2) * coeffs.c1.powi(2) * k * zeroth_order_rho(k);
    let [s0, s1, s2] = s;
    let xy = s0.clone() + s1 * 0.5;
    [
        (xy.clone() * j.x + s2.clone() * (0.5 * j.y)) * pre,
        (xy * j.y + s2 * (0.5 * j.x)) * pre,
        s0 * (j.z * pre),
    ]
}

/// κ = k_Lβc1U_o√(NρJ_xL/2).
#[allow(clippy::too_many_arguments)]
pub fn kappa_coupling(k: f64, beta: f64, c1: f64, u_o: f64, n_photons: f64, rho: f64, jx: f64, length: f64) -> f64 {
    k * beta * c1 * u_o * (0.5 * n_photons * rho * jx * length).sqrt()
}

/// Collective atomic quadratures X_A^m, P_A^m as weighted grid sums of the
/// transverse spin fluctuations.
#[derive(Debug, Clone)]
pub struct CollectiveModes {
    pub rho: f64,
    pub jx: f64,
    pub length: f64,
    pub nodes: Vec<(Vector3<f64>, f64)>,
    /// √(ρ/(J_xL)) U_m e^{−ikz} dV per node and mode.
    pub weights: Vec<Vec<C64>>,
}

impl CollectiveModes {
    pub fn new<U>(
        basis: &[HermiteGaussMode],
        grid: &EnsembleGrid,
        rho: f64,
        jx: f64,
        length: f64,
        classical: U,
    ) -> Result<Self, DynamicsError>
    where
        U: Fn(&Vector3<f64>) -> C64,
    {
        if !(rho > 0.0 && jx > 0.0 && length > 0.0) {
            return Err(DynamicsError::InvalidInput("rho, J_x and L must be positive"));
        }
        let nodes: Vec<_> = (0..grid.len()).map(|i| grid.node(i)).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (r, _) in &nodes {
            let a = classical(r).norm();
            lo = lo.min(a);
            hi = hi.max(a);
        }
        let variation = if hi > 0.0 { (hi - lo) / hi } else { 1.0 };
        if variation > 0.01 {
            return Err(DynamicsError::NonUniformClassicalMode { variation });
        }
        let norm = (rho / (jx * length)).sqrt();
        let weights = nodes
            .iter()
            .map(|(r, dv)| {
                let carrier = C64::from_polar(1.0, -basis.first().map_or(0.0, |m| m.k) * r.z);
                basis.iter().map(|m| m.eval(r) * carrier * (norm * dv)).collect()
            })
            .collect();
        Ok(Self { rho, jx, length, nodes, weights })
    }

    pub fn n_modes(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// (X_A^m, P_A^m) for given fluctuation fields J_y, J_z at the nodes.
    pub fn evaluate(&self, m: usize, jy: &[f64], jz: &[f64]) -> (C64, C64) {
        let x = self.weights.iter().zip(jy).map(|(w, v)| w[m] * *v).sum();
        let p = self.weights.iter().zip(jz).map(|(w, v)| w[m] * *v).sum();
        (x, p)
    }

    /// [X_A^m, P_A^{m′}] from [J_y(r), J_z(r′)] = iJ_x δ_{rr′}/(ρ dV).
    pub fn commutator(&self, m: usize, mp: usize) -> C64 {
        self.weights
            .iter()
            .zip(&self.nodes)
            .map(|(w, (_, dv))| w[m] * w[mp] * C64::new(0.0, self.jx / (self.rho * dv)))
            .sum()
    }
}

/// Symplectic form Ω for `n` mode pairs in the fixed ordering.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let d = 4 * n;
    let mut o = DMatrix::zeros(d, d);
    for m in 0..n {
        for (x, p) in [(m, n + m), (2 * n + m, 3 * n + m)] {
            o[(x, p)] = 1.0;
            o[(p, x)] = -1.0;
        }
    }
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub n_modes: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, DynamicsError> {
        let d = mean.len();
        if d % 4 != 0 || cov.shape() != (d, d) {
            return Err(DynamicsError::InvalidInput("state dimension must be 4N with a matching covariance"));
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(DynamicsError::InvalidInput("covariance must be symmetric"));
        }
        Ok(Self { n_modes: d / 4, mean, cov })
    }

    pub fn vacuum(n: usize) -> Self {
        Self { n_modes: n, mean: DVector::zeros(4 * n), cov: DMatrix::identity(4 * n, 4 * n) * 0.5 }
    }

    pub fn x_p(&self, m: usize) -> usize {
        m
    }
    pub fn p_p(&self, m: usize) -> usize {
        self.n_modes + m
    }
    pub fn x_a(&self, m: usize) -> usize {
        2 * self.n_modes + m
    }
    pub fn p_a(&self, m: usize) -> usize {
        3 * self.n_modes + m
    }

    /// Smallest eigenvalue of the real embedding of cov + (i/2)Ω.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let d = self.cov.nrows();
        let half = symplectic_form(self.n_modes) * 0.5;
        let mut big = DMatrix::zeros(2 * d, 2 * d);
        big.view_mut((0, 0), (d, d)).copy_from(&self.cov);
        big.view_mut((d, d), (d, d)).copy_from(&self.cov);
        big.view_mut((0, d), (d, d)).copy_from(&(-&half));
        big.view_mut((d, 0), (d, d)).copy_from(&half);
        big.symmetric_eigenvalues().min()
    }

    pub fn satisfies_uncertainty(&self, tol: f64) -> bool {
        self.uncertainty_min_eigenvalue() >= -tol
    }

    pub fn transform(&self, s: &DMatrix<f64>) -> Self {
        Self { n_modes: self.n_modes, mean: s * &self.mean, cov: s * &self.cov * s.transpose() }
    }
}

/// Light mode m ↔ atomic mode m QND coupling with strength κ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectiveMap {
    pub kappa: f64,
    pub n_modes: usize,
}

impl CollectiveMap {
    pub fn new(kappa: f64, n_modes: usize) -> Self {
        Self { kappa, n_modes }
    }

    /// X_P′ = X_P + κP_A, X_A′ = X_A + κP_P.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_modes;
        let mut s = DMatrix::identity(4 * n, 4 * n);
        for m in 0..n {
            s[(m, 3 * n + m)] = self.kappa;
            s[(2 * n + m, n + m)] = self.kappa;
        }
        s
    }

    pub fn symplectic_residual(&self) -> f64 {
        let s = self.matrix();
        let o = symplectic_form(self.n_modes);
        (&s * &o * s.transpose() - o).amax()
    }
}

pub fn apply_collective_map(state: &GaussianState, map: &CollectiveMap) -> Result<GaussianState, DynamicsError> {
    if state.n_modes != map.n_modes {
        return Err(DynamicsError::OrderingMismatch { state: state.n_modes, map: map.n_modes });
    }
    Ok(state.transform(&map.matrix()))
}

/// Atomic quadrature receiving the feedback displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackTarget {
    XA,
    PA,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryOutcome {
    /// X_P′ values the atoms were conditioned on.
    pub measurement: Vec<f64>,
    /// Atomic (X_A…, P_A…) mean and covariance conditioned on the measurement.
    pub conditional_mean: DVector<f64>,
    pub conditional_cov: DMatrix<f64>,
    /// After displacing the target quadrature by g·(result).
    pub stored_mean: DVector<f64>,
    /// Outcome-averaged atomic covariance under the feedback.
    pub stored_cov: DMatrix<f64>,
}

/// Coupling, homodyne detection of every X_P′ and feedback onto the atoms.
/// `measurement` defaults to the prior mean of X_P′.
pub fn memory_protocol(
    state: &GaussianState,
    map: &CollectiveMap,
    gain: f64,
    target: FeedbackTarget,
    measurement: Option<&[f64]>,
) -> Result<MemoryOutcome, DynamicsError> {
    let out = apply_collective_map(state, map)?;
    let n = out.n_modes;
    let meas: Vec<usize> = (0..n).map(|m| out.x_p(m)).collect();
    let atoms: Vec<usize> = (2 * n..4 * n).collect();
    let x: Vec<f64> = match measurement {
        Some(v) if v.len() == n => v.to_vec(),
        Some(_) => return Err(DynamicsError::InvalidInput("one homodyne result per mode required")),
        None => meas.iter().map(|&i| out.mean[i]).collect(),
    };
    let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |r, c| out.cov[(rows[r], cols[c])]);
    let c_mm = sub(&meas, &meas);
    let c_am = sub(&atoms, &meas);
    let c_aa = sub(&atoms, &atoms);
    let mu_m = DVector::from_iterator(n, meas.iter().map(|&i| out.mean[i]));
    let mu_a = DVector::from_iterator(2 * n, atoms.iter().map(|&i| out.mean[i]));
    let gain_mat = match c_mm.clone().pseudo_inverse(1e-14) {
        Ok(inv) => &c_am * inv,
        Err(_) => return Err(DynamicsError::InvalidInput("singular measurement covariance")),
    };
    let xv = DVector::from_column_slice(&x);
    let conditional_mean = &mu_a + &gain_mat * (&xv - &mu_m);
    let conditional_cov = &c_aa - &gain_mat * c_am.transpose();

    let offset = match target {
        FeedbackTarget::XA => 0,
        FeedbackTarget::PA => n,
    };
    let mut stored_mean = conditional_mean.clone();
    for m in 0..n {
        stored_mean[offset + m] += gain * x[m];
    }
    // unconditional: target += g·X_P′ as a linear map on the whole state
    let mut f = DMatrix::<f64>::identity(4 * n, 4 * n);
    for m in 0..n {
        f[(2 * n + offset + m, m)] += gain;
    }
    let fed = out.transform(&f);
    let stored_cov = DMatrix::from_fn(2 * n, 2 * n, |r, c| fed.cov[(atoms[r], atoms[c])]);
    Ok(MemoryOutcome { measurement: x, conditional_mean, conditional_cov, stored_mean, stored_cov })
}
