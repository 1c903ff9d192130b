//! Green's-function mode sums, the dipole propagator, the infinitely-short
//! propagator coefficients (ϱ_∥, ϱ_⊥, ϱ_Γ) and the derived decay matrices.
//!
//! Propagators are returned multiplied by c² (i.e. per unit δ(t−t′)/c²).

use crate::medium::Spin;
use crate::quadrature::GaussLegendre;
use crate::{cross_matrix, to_complex, CMatrix3, C64};
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("medium scalars outside the domain a0 > a1 ≥ 0: a0 = {a0}, a1 = {a1}")]
    OutsideDomain { a0: f64, a1: f64 },
    #[error("quadrature needs at least 64 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("radiative dipole propagator requested at zero separation")]
    ZeroSeparation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortPropagatorCoeffs {
    pub rho_par: f64,
    pub rho_perp: f64,
    pub rho_gamma: f64,
    /// Set when a0 − a1 < 0.05·a0, where the coefficients blow up.
    pub near_singular: bool,
}

impl ShortPropagatorCoeffs {
    /// Vacuum-like coefficients ϱ_∥ = ϱ_⊥ = ϱ, ϱ_Γ = 0.
    pub fn isotropic(rho: f64) -> Self {
        Self { rho_par: rho, rho_perp: rho, rho_gamma: 0.0, near_singular: false }
    }

    /// Largest relative deviation from `other`, per coefficient.
    pub fn max_relative_difference(&self, other: &Self) -> f64 {
        let scale = self.rho_par.abs().max(self.rho_perp.abs());
        let rel = |a: f64, b: f64, s: f64| (a - b).abs() / s;
        rel(self.rho_par, other.rho_par, self.rho_par.abs())
            .max(rel(self.rho_perp, other.rho_perp, self.rho_perp.abs()))
            .max(rel(self.rho_gamma, other.rho_gamma, self.rho_gamma.abs().max(1e-3 * scale)))
    }
}

fn check_domain(a0: f64, a1: f64) -> Result<bool, PropagatorError> {
    if !(a0 > 0.0) || !(a1 >= 0.0) || !(a0 - a1 > 0.0) {
        return Err(PropagatorError::OutsideDomain { a0, a1 });
    }
    Ok(a0 - a1 < 0.05 * a0)
}

/// Below this a1/a0 the closed forms lose digits to 1/a1³ cancellation and a
/// binomial series is summed instead.
pub const SERIES_THRESHOLD: f64 = 0.1;

/// Closed-form coefficients, with an isotropic branch at a1 = 0 and a series
/// branch for small a1/a0.
pub fn short_propagator_closed(a0: f64, a1: f64, k_l: f64) -> Result<ShortPropagatorCoeffs, PropagatorError> {
    let near_singular = check_domain(a0, a1)?;
    let k3 = k_l.powi(3);
    if a1 == 0.0 {
        let rho = k3 / (3.0 * PI) * a0.powf(-2.5);
        return Ok(ShortPropagatorCoeffs::isotropic(rho));
    }
    if a1 / a0 < SERIES_THRESHOLD {
        return Ok(series(a0, a1, k_l));
    }
    let mut c = displayed_closed_forms(a0, a1, k_l);
    c.near_singular = near_singular;
    Ok(c)
}

/// The displayed closed forms verbatim (no branch selection).
pub fn displayed_closed_forms(a0: f64, a1: f64, k_l: f64) -> ShortPropagatorCoeffs {
    let k3 = k_l.powi(3);
    let (sm, sp) = (a0 - a1, a0 + a1);
    let pre = -k3 / (3.0 * PI * a1.powi(3));
    let rho_par = pre * ((-4.0 * a0 + 2.0 * a1) / sm.sqrt() + (4.0 * a0 + 2.0 * a1) / sp.sqrt());
    let rho_perp = pre
        * ((2.0 * a0 * a0 - 3.0 * a0 * a1 + 0.5 * a1 * a1) / sm.powf(1.5)
            - (2.0 * a0 * a0 + 3.0 * a0 * a1 + 0.5 * a1 * a1) / sp.powf(1.5));
    let rho_gamma = k3 / (6.0 * PI * a1 * a1)
        * ((2.0 * a0 - 3.0 * a1) / sm.powf(1.5) - (2.0 * a0 + 3.0 * a1) / sp.powf(1.5));
    ShortPropagatorCoeffs { rho_par, rho_perp, rho_gamma, near_singular: sm < 0.05 * a0 }
}

/// ∫_{−1}^{1} xⁿ dx.
fn moment(n: usize) -> f64 {
    if n % 2 == 1 {
        0.0
    } else {
        2.0 / (n as f64 + 1.0)
    }
}

/// Expansion of (1 + t x)^(−5/2) with moments integrated exactly.
fn series(a0: f64, a1: f64, k_l: f64) -> ShortPropagatorCoeffs {
    let t = a1 / a0;
    let (mut par, mut perp, mut gam) = (0.0, 0.0, 0.0);
    let mut c = 1.0; // binom(−5/2, n) tⁿ
    for n in 0..80 {
        par += c * 2.0 * (moment(n) - moment(n + 2));
        perp += c * (moment(n) + moment(n + 2));
        gam += c * 2.0 * moment(n + 1);
        c *= (-2.5 - n as f64) / (n as f64 + 1.0) * t;
        if c.abs() < 1e-18 {
            break;
        }
    }
    let pre = k_l.powi(3) / (8.0 * PI) * a0.powf(-2.5);
    ShortPropagatorCoeffs { rho_par: pre * par, rho_perp: pre * perp, rho_gamma: pre * gam, near_singular: false }
}

/// Gauss-Legendre integration of (k³/8π) M(x,+)/(a0 + a1x)^{5/2} over x ∈ [−1, 1].
pub fn short_propagator_quadrature(
    a0: f64,
    a1: f64,
    k_l: f64,
    n_points: usize,
) -> Result<ShortPropagatorCoeffs, PropagatorError> {
    let near_singular = check_domain(a0, a1)?;
    let m = aligned_matrix_quadrature(a0, a1, k_l, n_points)?;
    Ok(ShortPropagatorCoeffs {
        rho_par: m[(0, 0)].re,
        rho_perp: m[(1, 1)].re,
        rho_gamma: m[(1, 2)].im,
        near_singular,
    })
}

/// Full 3×3 matrix in the frame ĵ = x̂, integrating the angular matrix
/// [[2(1−x²),0,0],[0,1+x²,2ix],[0,−2ix,1+x²]] entrywise.
pub fn aligned_matrix_quadrature(a0: f64, a1: f64, k_l: f64, n_points: usize) -> Result<CMatrix3, PropagatorError> {
    if n_points < 64 {
        return Err(PropagatorError::TooFewNodes(n_points));
    }
    check_domain(a0, a1)?;
    let gl = GaussLegendre::new(n_points);
    let mut acc = CMatrix3::zeros();
    for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
        let f = w * (a0 + a1 * x).powf(-2.5);
        let i2x = C64::new(0.0, 2.0 * x);
        let m = CMatrix3::new(
            C64::from(2.0 * (1.0 - x * x)), C64::from(0.0), C64::from(0.0),
            C64::from(0.0), C64::from(1.0 + x * x), i2x,
            C64::from(0.0), -i2x, C64::from(1.0 + x * x),
        );
        acc += m * C64::from(f);
    }
    Ok(acc * C64::from(k_l.powi(3) / (8.0 * PI)))
}

/// ϱ_⊥·I − iϱ_Γ[ĵ]× + (ϱ_∥ − ϱ_⊥)ĵĵᵀ.
pub fn coordinate_free_short_propagator(c: &ShortPropagatorCoeffs, j_hat: &Vector3<f64>) -> CMatrix3 {
    let sym = Matrix3::identity() * c.rho_perp + j_hat * j_hat.transpose() * (c.rho_par - c.rho_perp);
    to_complex(&sym) + to_complex(&cross_matrix(j_hat)) * C64::new(0.0, -c.rho_gamma)
}

/// Coefficient of the contact term (2/3)·I·δ(n), kept separate from the
/// radiative part and never smeared.
pub const DIPOLE_SELF_TERM: f64 = 2.0 / 3.0;

/// Radiative dipole propagator
/// −(k³/4π)(e^{ikn}/kn)[(1+3i/kn−3/(kn)²)n̂n̂ − (1+i/kn−1/(kn)²)I].
pub fn dipole_propagator(n_vec: &Vector3<f64>, k_l: f64) -> Result<CMatrix3, PropagatorError> {
    let n = n_vec.norm();
    if n == 0.0 {
        return Err(PropagatorError::ZeroSeparation);
    }
    let x = k_l * n;
    let nh = n_vec / n;
    let i = C64::i();
    let long = C64::from(1.0) + i * (3.0 / x) - C64::from(3.0 / (x * x));
    let tran = C64::from(1.0) + i / x - C64::from(1.0 / (x * x));
    let pre = C64::from_polar(1.0, x) * C64::from(-k_l.powi(3) / (4.0 * PI * x));
    let nn = to_complex(&(nh * nh.transpose()));
    Ok((nn * long - CMatrix3::identity() * tran) * pre)
}

/// (j0 − j1/x, j2) with small-argument series.
fn transverse_bessel(x: f64) -> (f64, f64) {
    if x < 0.1 {
        let x2 = x * x;
        let j0 = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
        let j1x = 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0;
        let j2 = x2 / 15.0 - x2 * x2 / 210.0;
        return (j0 - j1x, j2);
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
    (j0 - j1 / x, j2)
}

/// Radiative propagator from the k-space representation
/// ∫d³k/(2π)³ (I − k̂k̂) k² e^{ik·n}/(k² − k_L² − i0), evaluated on a radial
/// grid: the angular part in closed form (spherical Bessel functions), the
/// "1" piece of k²/(k²−k_L²) as the transverse delta at n ≠ 0, and the
/// remainder by principal value + outgoing pole, with a Gaussian cutoff
/// at `cutoff`·k_L.
pub fn dipole_propagator_kspace(n_vec: &Vector3<f64>, k_l: f64, cutoff: f64) -> Result<CMatrix3, PropagatorError> {
    let n = n_vec.norm();
    if n == 0.0 {
        return Err(PropagatorError::ZeroSeparation);
    }
    let nh = n_vec / n;
    let kmax = cutoff * k_l;
    let gl = GaussLegendre::new(16);
    // g(k)/(k − k_L) with g = k_L² k² F(kn) / ((k + k_L) 2π²)
    let g = |k: f64| {
        let (a, b) = transverse_bessel(k * n);
        let s = k_l * k_l * k * k / ((k + k_l) * 2.0 * PI * PI);
        (s * a, s * b)
    };
    let (ga, gb) = g(k_l);
    let panels_near = 64;
    let mut pv = (0.0, 0.0);
    // symmetric window [0, 2k_L]: PV of 1/(k−k_L) integrates to zero there
    for (which, gl0) in [(0, ga), (1, gb)] {
        let val = gl.integrate_composite(0.0, 2.0 * k_l, panels_near, |k| {
            let gk = g(k);
            let gv = if which == 0 { gk.0 } else { gk.1 };
            (gv - gl0) / (k - k_l)
        });
        if which == 0 { pv.0 = val } else { pv.1 = val }
    }
    let upper = 2.0 * k_l + 6.0 * kmax;
    let panels = (((upper - 2.0 * k_l) * n / (0.5 * PI)).ceil() as usize).max(64);
    let tail = |which: usize| {
        gl.integrate_composite(2.0 * k_l, upper, panels, |k| {
            let gk = g(k);
            let gv = if which == 0 { gk.0 } else { gk.1 };
            gv / (k - k_l) * (-(k / kmax).powi(2)).exp()
        })
    };
    let a = C64::new(pv.0 + tail(0), PI * ga);
    let b = C64::new(pv.1 + tail(1), PI * gb);
    // transverse delta for n ≠ 0: (3n̂n̂ − I)/(4πn³)
    let td = 1.0 / (4.0 * PI * n.powi(3));
    let nn = to_complex(&(nh * nh.transpose()));
    Ok(CMatrix3::identity() * (a - C64::from(td)) + nn * (b + C64::from(3.0 * td)))
}

/// Truncated plane-wave mode sum for the (isotropic) Green's function.
#[derive(Debug, Clone)]
pub struct GreensSum {
    pub k_grid: Vec<Vector3<f64>>,
    /// Box-normalization weight 1/V per mode.
    pub weight: f64,
    pub omega_l: f64,
    /// Phase velocity c/n (units of the k-grid).
    pub speed: f64,
}

impl GreensSum {
    /// `n³` wavevectors (2π/L)(i − (n−1)/2), symmetric under k → −k.
    pub fn vacuum_box(n: usize, box_length: f64, omega_l: f64, speed: f64) -> Self {
        let dk = 2.0 * PI / box_length;
        let c = (n as f64 - 1.0) / 2.0;
        let mut k_grid = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    k_grid.push(Vector3::new(i as f64 - c, j as f64 - c, l as f64 - c) * dk);
                }
            }
        }
        Self { k_grid, weight: box_length.powi(-3), omega_l, speed }
    }

    /// G(r,t|r′,t′) = −i Σ_k (I−k̂k̂) e^{−ik·(r−r′)} e^{i(ω_k−ω_L)(t−t′)}/(2ω_L)·Θ(t−t′).
    pub fn evaluate(&self, r: &Vector3<f64>, t: f64, rp: &Vector3<f64>, tp: f64) -> CMatrix3 {
        if t < tp {
            return CMatrix3::zeros();
        }
        let d = r - rp;
        let dt = t - tp;
        let mut acc = Matrix3::<C64>::zeros();
        for k in &self.k_grid {
            let kn = k.norm();
            let kh = k / kn;
            let phase = -k.dot(&d) + (self.speed * kn - self.omega_l) * dt;
            let proj = Matrix3::identity() - kh * kh.transpose();
            acc += to_complex(&proj) * C64::from_polar(1.0, phase);
        }
        acc * C64::new(0.0, -self.weight / (2.0 * self.omega_l))
    }
}

/// Largest ‖G(r,t|r′,t′) − G(r′,−t′|r,−t)‖ over the pairs, relative to the
/// larger of the two norms (absolute when both vanish).
pub fn greens_reciprocity_residual(sum: &GreensSum, pairs: &[(Vector3<f64>, f64, Vector3<f64>, f64)]) -> f64 {
    pairs
        .iter()
        .map(|(r, t, rp, tp)| {
            let g1 = sum.evaluate(r, *t, rp, *tp);
            let g2 = sum.evaluate(rp, -tp, r, -t);
            let scale = g1.norm().max(g2.norm());
            let diff = (g1 - g2).norm();
            if scale > 0.0 { diff / scale } else { diff }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightDecayMatrix {
    pub gamma_par: f64,
    pub gamma_perp1: f64,
    pub gamma_perp2: f64,
    pub gamma_gamma: f64,
}

impl LightDecayMatrix {
    /// [[Γ_∥,0,0],[0,Γ_⊥1,iΓ_Γ],[0,−iΓ_Γ,Γ_⊥2]].
    pub fn matrix(&self) -> CMatrix3 {
        let z = C64::from(0.0);
        let ig = C64::new(0.0, self.gamma_gamma);
        CMatrix3::new(
            C64::from(self.gamma_par), z, z,
            z, C64::from(self.gamma_perp1), ig,
            z, -ig, C64::from(self.gamma_perp2),
        )
    }
}

/// Light decay coefficients for mean spin J (frame with the mean spin along x).
pub fn light_decay_matrix(c: &ShortPropagatorCoeffs, c0: f64, c1: f64, spin: &Spin) -> LightDecayMatrix {
    let (jx, jy, jz) = (spin.vector.x, spin.vector.y, spin.vector.z);
    let j2 = spin.square;
    let j4 = j2 * j2;
    let (rp, rq, rg) = (c.rho_par, c.rho_perp, c.rho_gamma);
    let common = c0 * c0 * j4 * rq + 2.0 * c0 * c1 * rg * j2 * jx;
    LightDecayMatrix {
        gamma_par: c0 * c0 * j4 * rp + c1 * c1 * rq * (jz * jz + jy * jy),
        gamma_perp1: common + c1 * c1 * (rp * jz * jz + rq * jx * jx),
        gamma_perp2: common + c1 * c1 * (rp * jy * jy + rq * jx * jx),
        gamma_gamma: 2.0 * rq * c1 * c0 * j2 * jx - rp * 0.5 * c1 * c1 * jx + rg * (c0 * c0 * j2 + c1 * c1 * jx * jx),
    }
}

/// Spin decay rates (2Γ_D, Γ_D, Γ_D), Γ_D = β²c1²ϱ⟨D⁻ₓD⁺ₓ⟩, for x-polarized light.
/// ϱ is taken as the mean of ϱ_∥ and ϱ_⊥ (equal in the isotropic case).
pub fn spin_decay_rates(c: &ShortPropagatorCoeffs, c1: f64, beta: f64, d_intensity: f64) -> [f64; 3] {
    let rho = 0.5 * (c.rho_par + c.rho_perp);
    let g = beta * beta * c1 * c1 * rho * d_intensity;
    [2.0 * g, g, g]
}
