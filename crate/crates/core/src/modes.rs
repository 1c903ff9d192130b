//! Dressed plane waves of a homogeneous magnetized medium and Hermite-Gauss
//! paraxial modes, with overlap fields Ψ^{mn} = U*_m U_n on transverse grids.

use crate::medium::MediumScalars;
use crate::quadrature::UniformAxis;
use crate::{CVector3, C64, SPEED_OF_LIGHT};
use nalgebra::Vector3;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error("spin direction parallel to propagation direction; polarization basis undefined")]
    DegenerateGeometry,
    #[error("non-positive branch factor a0 ± a1 ĵ·k̂ = {0}")]
    NonPositiveBranch(f64),
    #[error("modes in a basis must share the same wavenumber")]
    MixedWavenumbers,
    #[error("invalid mode parameters: {0}")]
    InvalidMode(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DressedPlaneWave {
    pub k_hat: Vector3<f64>,
    pub branch: Branch,
    pub polarization: CVector3,
    /// ω² in rad²/s².
    pub omega2: f64,
    /// (2(a0 ± a1 ĵ·k̂))^(−1/2).
    pub norm: f64,
}

/// ⟨a|M̄b⟩ with M̄ = a0 + i a1 ĵ×.
pub fn medium_inner_product(a: &CVector3, b: &CVector3, j_hat: &Vector3<f64>, s: &MediumScalars) -> C64 {
    let jc = j_hat.map(C64::from);
    let mb = b * C64::from(s.a0) + jc.cross(b) * C64::new(0.0, s.a1);
    a.dotc(&mb)
}

fn build_branches(
    k: &Vector3<f64>,
    j_hat: &Vector3<f64>,
    s: &MediumScalars,
    v1: Vector3<f64>,
) -> Result<(DressedPlaneWave, DressedPlaneWave), ModeError> {
    let kn = k.norm();
    let k_hat = k / kn;
    let v2 = k_hat.cross(&v1);
    let jk = j_hat.dot(&k_hat);
    let make = |branch: Branch| {
        let f = s.a0 + branch.sign() * s.a1 * jk;
        if !(f > 0.0) {
            return Err(ModeError::NonPositiveBranch(f));
        }
        let norm = 1.0 / (2.0 * f).sqrt();
        let pol = (v1.map(C64::from) + v2.map(C64::from) * C64::new(0.0, branch.sign())) * C64::from(norm);
        Ok(DressedPlaneWave {
            k_hat,
            branch,
            polarization: pol,
            omega2: SPEED_OF_LIGHT * SPEED_OF_LIGHT * kn * kn * f,
            norm,
        })
    };
    Ok((make(Branch::Plus)?, make(Branch::Minus)?))
}

/// Both helicity branches for wavevector `k`. Fails when ĵ ∥ k̂.
pub fn dressed_modes(
    k: &Vector3<f64>,
    j_hat: &Vector3<f64>,
    s: &MediumScalars,
) -> Result<(DressedPlaneWave, DressedPlaneWave), ModeError> {
    let k_hat = k.normalize();
    let c = j_hat.cross(&k_hat);
    if c.norm() < 1e-12 {
        return Err(ModeError::DegenerateGeometry);
    }
    build_branches(k, j_hat, s, c.normalize())
}

/// As [`dressed_modes`], but resolves ĵ ∥ k̂ with an arbitrary transverse
/// gauge (dispersion is continuous there; only the basis is gauge-dependent).
pub fn dressed_modes_or_limit(
    k: &Vector3<f64>,
    j_hat: &Vector3<f64>,
    s: &MediumScalars,
) -> Result<(DressedPlaneWave, DressedPlaneWave), ModeError> {
    match dressed_modes(k, j_hat, s) {
        Err(ModeError::DegenerateGeometry) => {
            let k_hat = k.normalize();
            let trial = if k_hat.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
            let v1 = (trial - k_hat * k_hat.dot(&trial)).normalize();
            build_branches(k, j_hat, s, v1)
        }
        other => other,
    }
}

/// Normalized Hermite functions h_n(u) = H_n(u)/√(2ⁿ n!) for n = 0..=nmax.
pub fn hermite_normalized(nmax: usize, u: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(nmax + 1);
    h.push(1.0);
    if nmax >= 1 {
        h.push(2f64.sqrt() * u);
    }
    for n in 1..nmax {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * u * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
        h.push(next);
    }
    h
}

/// Physicists' Hermite polynomial H_n(u).
pub fn hermite(n: usize, u: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * u);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * u * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteGaussMode {
    pub m: usize,
    pub n: usize,
    /// Wavenumber (1/m).
    pub k: f64,
    /// Waist (m).
    pub w0: f64,
}

impl HermiteGaussMode {
    pub fn new(m: usize, n: usize, k: f64, w0: f64) -> Result<Self, ModeError> {
        if !(k > 0.0) || !(w0 > 0.0) {
            return Err(ModeError::InvalidMode("k and w0 must be positive"));
        }
        Ok(Self { m, n, k, w0 })
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.k
    }

    /// Rayleigh range πw0²/λ.
    pub fn z0(&self) -> f64 {
        PI * self.w0 * self.w0 / self.wavelength()
    }

    pub fn width(&self, z: f64) -> f64 {
        let t = z / self.z0();
        self.w0 * (1.0 + t * t).sqrt()
    }

    /// Normalization B with ∫|U|² d²r⊥ = 1.
    pub fn normalization(&self) -> f64 {
        let log_fact = |n: usize| (1..=n).map(|i| (i as f64).ln()).sum::<f64>();
        let order = (self.m + self.n) as f64;
        let ln = 0.5 * (PI.ln() + (order - 1.0) * 2f64.ln() + log_fact(self.m) + log_fact(self.n));
        (-ln).exp() / self.w0
    }

    pub fn order(&self) -> usize {
        self.m + self.n
    }

    /// U_mn(r), including the carrier e^{ikz}.
    pub fn eval(&self, r: &Vector3<f64>) -> C64 {
        self.envelope(r) * C64::from_polar(1.0, self.k * r.z)
    }

    /// U_mn(r)·e^{−ikz}: the slowly varying part.
    pub fn envelope(&self, r: &Vector3<f64>) -> C64 {
        let z0 = self.z0();
        let w = self.width(r.z);
        let s = 2f64.sqrt() / w;
        let hx = hermite_normalized(self.m, s * r.x)[self.m];
        let hy = hermite_normalized(self.n, s * r.y)[self.n];
        let rr = r.x * r.x + r.y * r.y;
        // 1/R(z) = z/(z² + z0²), finite at the waist.
        let inv_r = r.z / (r.z * r.z + z0 * z0);
        let phase = -((self.order() + 1) as f64) * (r.z / z0).atan() + 0.5 * self.k * rr * inv_r;
        let amp = (2.0 / PI).sqrt() / w * hx * hy * (-rr / (w * w)).exp();
        C64::from_polar(amp, phase)
    }
}

/// Modes with total order ≤ `max_order`, sorted by (m+n, m).
pub fn hermite_gauss_basis(max_order: usize, k: f64, w0: f64) -> Result<Vec<HermiteGaussMode>, ModeError> {
    let mut out = Vec::new();
    for order in 0..=max_order {
        for m in (0..=order).rev() {
            out.push(HermiteGaussMode::new(m, order - m, k, w0)?);
        }
    }
    Ok(out)
}

/// Tensor basis m, n < `per_axis`, sorted by total order.
pub fn tensor_basis(per_axis: usize, k: f64, w0: f64) -> Result<Vec<HermiteGaussMode>, ModeError> {
    let mut out = Vec::new();
    for m in 0..per_axis {
        for n in 0..per_axis {
            out.push(HermiteGaussMode::new(m, n, k, w0)?);
        }
    }
    out.sort_by_key(|md| (md.order(), std::cmp::Reverse(md.m)));
    Ok(out)
}

/// Uniform transverse tensor grid at a fixed z with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseGrid {
    pub x: UniformAxis,
    pub y: UniformAxis,
    pub z: f64,
}

/// Default grid resolution per axis.
pub const DEFAULT_GRID_POINTS: usize = 128;

impl TransverseGrid {
    pub fn new(x: UniformAxis, y: UniformAxis, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Square grid spanning ±6·w(z), enough for |m|,|n| ≲ 20 at 1e−6.
    pub fn for_beam(width: f64, points: usize, z: f64) -> Self {
        let ax = UniformAxis::symmetric(6.0 * width, points);
        Self::new(ax.clone(), ax, z)
    }

    pub fn len(&self) -> usize {
        self.x.points * self.y.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> Vector3<f64> {
        let (i, j) = (idx / self.y.points, idx % self.y.points);
        Vector3::new(self.x.coord(i), self.y.coord(j), self.z)
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let (i, j) = (idx / self.y.points, idx % self.y.points);
        self.x.weight(i) * self.y.weight(j)
    }

    /// Index of the node nearest to (x, y).
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let pick = |ax: &UniformAxis, v: f64| {
            let h = ax.step();
            if h == 0.0 {
                0
            } else {
                (((v - ax.lo) / h).round().max(0.0) as usize).min(ax.points - 1)
            }
        };
        pick(&self.x, x) * self.y.points + pick(&self.y, y)
    }
}

fn check_shared_k(basis: &[HermiteGaussMode]) -> Result<(), ModeError> {
    match basis.first() {
        Some(first) if basis.iter().any(|m| m.k != first.k) => Err(ModeError::MixedWavenumbers),
        _ => Ok(()),
    }
}

/// Mode amplitudes sampled on a grid; Ψ^{mn} is formed on demand so that
/// Hermiticity holds exactly by construction.
#[derive(Debug, Clone)]
pub struct OverlapField {
    pub grid: TransverseGrid,
    /// amplitudes[mode][grid index]
    pub amplitudes: Vec<Vec<C64>>,
}

impl OverlapField {
    pub fn n_modes(&self) -> usize {
        self.amplitudes.len()
    }

    /// Ψ^{mn}(r_p) = U*_m(r_p) U_n(r_p).
    pub fn psi(&self, m: usize, n: usize, p: usize) -> C64 {
        self.amplitudes[m][p].conj() * self.amplitudes[n][p]
    }

    /// ∫Ψ^{mn} d²r⊥.
    pub fn integrate(&self, m: usize, n: usize) -> C64 {
        (0..self.grid.len())
            .map(|p| self.psi(m, n, p) * self.grid.weight(p))
            .sum()
    }

    /// Gram matrix ∫Ψ^{mn}.
    pub fn gram(&self) -> nalgebra::DMatrix<C64> {
        let n = self.n_modes();
        nalgebra::DMatrix::from_fn(n, n, |a, b| self.integrate(a, b))
    }

    /// Largest |∫Ψ^{mn} − δ_mn|.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.gram();
        let n = self.n_modes();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let d = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[(a, b)] - d).norm());
            }
        }
        worst
    }

    /// CSV with columns x, y, re, im for Ψ^{mn}.
    pub fn write_csv<W: Write>(&self, m: usize, n: usize, out: &mut W) -> io::Result<()> {
        writeln!(out, "x,y,re,im")?;
        for p in 0..self.grid.len() {
            let r = self.grid.point(p);
            let v = self.psi(m, n, p);
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r.x, r.y, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Sample every mode of the basis on the grid.
pub fn overlap_field(basis: &[HermiteGaussMode], grid: &TransverseGrid) -> Result<OverlapField, ModeError> {
    check_shared_k(basis)?;
    let amplitudes = basis
        .par_iter()
        .map(|mode| (0..grid.len()).map(|p| mode.eval(&grid.point(p))).collect())
        .collect();
    Ok(OverlapField { grid: grid.clone(), amplitudes })
}

#[derive(Debug, Clone)]
pub struct CompletenessReport {
    /// |Σ_{n<N} U*_n(r)U_n(r′) − δ_grid(r, r′)| per grid node.
    pub residual: Vec<f64>,
    pub sup_norm: f64,
    /// The partial sum at r = r′.
    pub diagonal_value: f64,
}

/// Distance of the truncated completeness sum from a discrete delta at node `r_prime`.
pub fn completeness_check(field: &OverlapField, truncation: usize, r_prime: usize) -> CompletenessReport {
    let n = truncation.min(field.n_modes());
    let grid = &field.grid;
    let delta = 1.0 / grid.weight(r_prime);
    let residual: Vec<f64> = (0..grid.len())
        .map(|p| {
            let s: C64 = (0..n)
                .map(|m| field.amplitudes[m][p].conj() * field.amplitudes[m][r_prime])
                .sum();
            let d = if p == r_prime { delta } else { 0.0 };
            (s - d).norm()
        })
        .collect();
    let diagonal_value = (0..n).map(|m| field.amplitudes[m][r_prime].norm_sqr()).sum();
    let sup_norm = residual.iter().cloned().fold(0.0, f64::max);
    CompletenessReport { residual, sup_norm, diagonal_value }
}

/// Project `f` onto the first `truncation` modes and resum; returns the
/// coefficients and the relative L² reconstruction error.
pub fn expand_and_resum(field: &OverlapField, truncation: usize, f: &[C64]) -> (Vec<C64>, f64) {
    let grid = &field.grid;
    let n = truncation.min(field.n_modes());
    let coeffs: Vec<C64> = (0..n)
        .map(|m| {
            (0..grid.len())
                .map(|p| field.amplitudes[m][p].conj() * f[p] * grid.weight(p))
                .sum()
        })
        .collect();
    let (mut err, mut norm) = (0.0, 0.0);
    for p in 0..grid.len() {
        let rec: C64 = (0..n).map(|m| coeffs[m] * field.amplitudes[m][p]).sum();
        err += (rec - f[p]).norm_sqr() * grid.weight(p);
        norm += f[p].norm_sqr() * grid.weight(p);
    }
    (coeffs, (err / norm).sqrt())
}
