//! Quadratic-form operator algebra over a truncated (mode, polarization)
//! basis: Stokes operators, position-dependent Stokes fields and the
//! perturbative Stokes-generator and spin terms.
//!
//! Basis index of (mode m, polarization p) is `2m + p` with x = 0, y = 1.
//! A [`QuadraticOperator`] with coefficient matrix M stands for Σ a†_a M_ab a_b,
//! so that [a†Ma, a†Na] = a†[M,N]a.

use crate::medium::{InteractionCoefficients, Spin, SpinField};
use crate::modes::HermiteGaussMode;
use crate::quadrature::UniformAxis;
use crate::{levi_civita, CMatrix3, CVector3, C64};
use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use std::io::{self, Write};
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QopsError {
    #[error("operators act on different bases (dims {0} and {1})")]
    BasisMismatch(usize, usize),
    #[error("invalid basis index pair ({0}, {1}) for dimension {2}")]
    BadIndex(usize, usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pol {
    X = 0,
    Y = 1,
}

/// Flattened basis index of (mode, polarization).
pub fn index(mode: usize, pol: Pol) -> usize {
    2 * mode + pol as usize
}

fn split(idx: usize) -> (usize, usize) {
    (idx / 2, idx % 2)
}

/// δ_{lx}δ_{jy} − δ_{jx}δ_{ly} over polarization indices.
pub fn pol_antisym(j: usize, l: usize) -> f64 {
    match (j, l) {
        (1, 0) => 1.0,
        (0, 1) => -1.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOperator {
    pub coeff: DMatrix<C64>,
    pub label: String,
}

impl QuadraticOperator {
    pub fn new(coeff: DMatrix<C64>, label: impl Into<String>) -> Self {
        Self { coeff, label: label.into() }
    }

    pub fn zeros(dim: usize, label: impl Into<String>) -> Self {
        Self::new(DMatrix::zeros(dim, dim), label)
    }

    pub fn dim(&self) -> usize {
        self.coeff.nrows()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.coeff - self.coeff.adjoint()).camax()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// ⟨n|A|n⟩ in the Fock state with occupations `occ`.
    pub fn expectation_fock(&self, occ: &[f64]) -> C64 {
        occ.iter().enumerate().map(|(a, &n)| self.coeff[(a, a)] * n).sum()
    }

    /// ⟨α|A|α⟩ = α†Mα for a multimode coherent state.
    pub fn expectation_coherent(&self, alpha: &[C64]) -> C64 {
        let a = nalgebra::DVector::from_column_slice(alpha);
        a.dotc(&(&self.coeff * &a))
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "row,col,re,im")?;
        for r in 0..self.dim() {
            for c in 0..self.dim() {
                let v = self.coeff[(r, c)];
                writeln!(out, "{r},{c},{:.16e},{:.16e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

impl Add for QuadraticOperator {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.coeff + o.coeff, self.label)
    }
}

impl Sub for QuadraticOperator {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.coeff - o.coeff, self.label)
    }
}

impl Mul<f64> for QuadraticOperator {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.coeff * C64::from(s), self.label)
    }
}

impl Mul<C64> for QuadraticOperator {
    type Output = Self;
    fn mul(self, s: C64) -> Self {
        Self::new(self.coeff * s, self.label)
    }
}

/// [A, B] as the quadratic operator with coefficients AB − BA.
pub fn commutator(a: &QuadraticOperator, b: &QuadraticOperator) -> Result<QuadraticOperator, QopsError> {
    if a.dim() != b.dim() {
        return Err(QopsError::BasisMismatch(a.dim(), b.dim()));
    }
    Ok(QuadraticOperator::new(
        &a.coeff * &b.coeff - &b.coeff * &a.coeff,
        format!("[{},{}]", a.label, b.label),
    ))
}

/// Largest ‖[s_n, s_m] − iε_{nml}s_l‖ (entrywise max) over n, m.
pub fn su2_residual(s: &[QuadraticOperator; 3]) -> f64 {
    let mut worst = 0.0f64;
    for n in 0..3 {
        for m in 0..3 {
            let c = commutator(&s[n], &s[m]).expect("same basis");
            let mut expect = DMatrix::<C64>::zeros(s[0].dim(), s[0].dim());
            for l in 0..3 {
                let e = levi_civita(n, m, l);
                if e != 0.0 {
                    expect += &s[l].coeff * C64::new(0.0, e);
                }
            }
            worst = worst.max((c.coeff - expect).camax());
        }
    }
    worst
}

/// Operators built from generator matrix elements E_{qq′}:
/// s1 = ½(E_qq − E_q′q′), s2 = ½(E_qq′ + E_q′q), s3 = (1/2i)(E_qq′ − E_q′q).
pub fn stokes_from_generator<F>(gen: F, q: usize, qp: usize) -> [QuadraticOperator; 3]
where
    F: Fn(usize, usize) -> DMatrix<C64>,
{
    let half = C64::from(0.5);
    let s1 = (gen(q, q) - gen(qp, qp)) * half;
    let s2 = (gen(q, qp) + gen(qp, q)) * half;
    let s3 = (gen(q, qp) - gen(qp, q)) * C64::new(0.0, -0.5);
    [
        QuadraticOperator::new(s1, "s1"),
        QuadraticOperator::new(s2, "s2"),
        QuadraticOperator::new(s3, "s3"),
    ]
}

/// Zeroth-order generator element a†_q a_q′.
pub fn unit_generator(dim: usize, q: usize, qp: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(q, qp)] = C64::from(1.0);
    m
}

/// (s1, s2, s3) for the mode pair (q, q′) on a basis of dimension `dim`.
pub fn stokes_mode_pair(dim: usize, q: usize, qp: usize) -> Result<[QuadraticOperator; 3], QopsError> {
    if q == qp || q >= dim || qp >= dim {
        return Err(QopsError::BadIndex(q, qp, dim));
    }
    Ok(stokes_from_generator(|a, b| unit_generator(dim, a, b), q, qp))
}

/// Pointwise Stokes operators s_i(r⊥) from detector-plane mode profiles.
#[derive(Debug, Clone)]
pub struct StokesField {
    pub field: crate::modes::OverlapField,
}

impl StokesField {
    pub fn new(field: crate::modes::OverlapField) -> Self {
        Self { field }
    }

    pub fn dim(&self) -> usize {
        2 * self.field.n_modes()
    }

    /// [s0, s1, s2, s3] at grid node `p`, each weighted by ½Ψ^{mm′}(r⊥).
    pub fn at(&self, p: usize) -> [QuadraticOperator; 4] {
        let n = self.field.n_modes();
        let psi = DMatrix::from_fn(n, n, |m, mp| self.field.psi(m, mp, p));
        self.assemble(&psi)
    }

    /// ∫ s_i(r⊥) d²r⊥.
    pub fn integrated(&self) -> [QuadraticOperator; 4] {
        let n = self.field.n_modes();
        let psi = DMatrix::from_fn(n, n, |m, mp| self.field.integrate(m, mp));
        self.assemble(&psi)
    }

    fn assemble(&self, psi: &DMatrix<C64>) -> [QuadraticOperator; 4] {
        let n = psi.nrows();
        let d = 2 * n;
        let mut s = [(); 4].map(|_| DMatrix::<C64>::zeros(d, d));
        for m in 0..n {
            for mp in 0..n {
                let w = psi[(m, mp)] * 0.5;
                let (mx, my) = (index(m, Pol::X), index(m, Pol::Y));
                let (px, py) = (index(mp, Pol::X), index(mp, Pol::Y));
                s[0][(mx, px)] += w;
                s[0][(my, py)] += w;
                s[1][(mx, px)] += w;
                s[1][(my, py)] -= w;
                s[2][(mx, py)] += w;
                s[2][(my, px)] += w;
                s[3][(mx, py)] += w * C64::new(0.0, -1.0);
                s[3][(my, px)] += w * C64::new(0.0, 1.0);
            }
        }
        let labels = ["s0", "s1", "s2", "s3"];
        let mut i = 0;
        s.map(|c| {
            let op = QuadraticOperator::new(c, labels[i]);
            i += 1;
            op
        })
    }
}

/// Mode-summed Stokes operators Σ_m s_i^{mm}.
pub fn mode_summed_stokes(n_modes: usize) -> [QuadraticOperator; 3] {
    let d = 2 * n_modes;
    let mut acc = [(); 3].map(|_| QuadraticOperator::zeros(d, ""));
    for m in 0..n_modes {
        let s = stokes_mode_pair(d, index(m, Pol::X), index(m, Pol::Y)).expect("valid pair");
        for (a, b) in acc.iter_mut().zip(s) {
            a.coeff += b.coeff;
        }
    }
    acc
}

/// Box-shaped 3D quadrature grid over the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleGrid {
    pub x: UniformAxis,
    pub y: UniformAxis,
    pub z: UniformAxis,
}

impl EnsembleGrid {
    pub fn new(x: UniformAxis, y: UniformAxis, z: UniformAxis) -> Self {
        Self { x, y, z }
    }

    pub fn len(&self) -> usize {
        self.x.points * self.y.points * self.z.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, idx: usize) -> (Vector3<f64>, f64) {
        let nyz = self.y.points * self.z.points;
        let (i, rem) = (idx / nyz, idx % nyz);
        let (j, l) = (rem / self.z.points, rem % self.z.points);
        (
            Vector3::new(self.x.coord(i), self.y.coord(j), self.z.coord(l)),
            self.x.weight(i) * self.y.weight(j) * self.z.weight(l),
        )
    }
}

/// One quadrature node inside the ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSample {
    pub r: Vector3<f64>,
    pub weight: f64,
    pub rho: f64,
    pub spin: Spin,
    /// U_m(r) for each mode of the basis.
    pub amplitudes: Vec<C64>,
}

impl EnsembleSample {
    pub fn psi(&self, m: usize, n: usize) -> C64 {
        self.amplitudes[m].conj() * self.amplitudes[n]
    }
}

/// Mode amplitudes, densities and spins sampled on the ensemble grid.
/// Nodes with zero density are dropped.
#[derive(Debug, Clone)]
pub struct EnsembleSamples {
    pub samples: Vec<EnsembleSample>,
    pub n_modes: usize,
    pub k: f64,
}

impl EnsembleSamples {
    pub fn new(basis: &[HermiteGaussMode], field: &dyn SpinField, grid: &EnsembleGrid) -> Self {
        let samples = (0..grid.len())
            .into_par_iter()
            .filter_map(|idx| {
                let (r, weight) = grid.node(idx);
                let local = field.at(&r);
                (local.rho != 0.0).then(|| EnsembleSample {
                    r,
                    weight,
                    rho: local.rho,
                    spin: local.spin,
                    amplitudes: basis.iter().map(|m| m.eval(&r)).collect(),
                })
            })
            .collect();
        Self { samples, n_modes: basis.len(), k: basis.first().map_or(0.0, |m| m.k) }
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    /// T_{(m,j),(n,l)} = ∫ρ Θ^{mn}_{jl} d³r with paraxial frames (e_z = ẑ).
    pub fn theta_transfer(&self) -> DMatrix<C64> {
        let n = self.n_modes;
        let d = 2 * n;
        let mut t = DMatrix::<C64>::zeros(d, d);
        for s in &self.samples {
            let w = s.weight * s.rho * s.spin.vector.z;
            if w == 0.0 {
                continue;
            }
            for m in 0..n {
                for nn in 0..n {
                    let psi = s.psi(m, nn) * w;
                    // (j, l) = (y, x): +1; (x, y): −1
                    t[(index(m, Pol::Y), index(nn, Pol::X))] += psi;
                    t[(index(m, Pol::X), index(nn, Pol::Y))] -= psi;
                }
            }
        }
        t
    }
}

/// Θ^{mn}_{jl} from its vector form e_j·[(0,J_y,J_z) × e_l] (without Ψ).
pub fn theta_polarization_factor(spin: &Vector3<f64>, e_j: &Vector3<f64>, e_l: &Vector3<f64>) -> f64 {
    let jt = Vector3::new(0.0, spin.y, spin.z);
    e_j.dot(&jt.cross(e_l))
}

/// First-order Stokes-generator increment, t = k_Lβc1·T.
#[derive(Debug, Clone)]
pub struct FirstOrderStokes {
    pub t: DMatrix<C64>,
}

impl FirstOrderStokes {
    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Coefficients of the increment to E_{qq′}:
    /// ½{conj(t_{q a}) a†_a a_q′ + t_{q′ b} a†_q a_b}.
    pub fn generator(&self, q: usize, qp: usize) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for a in 0..d {
            m[(a, qp)] += self.t[(q, a)].conj() * 0.5;
            m[(q, a)] += self.t[(qp, a)] * 0.5;
        }
        m
    }

    pub fn stokes(&self, q: usize, qp: usize) -> [QuadraticOperator; 3] {
        stokes_from_generator(|a, b| self.generator(a, b), q, qp)
    }
}

pub fn stokes_first_order(samples: &EnsembleSamples, coeffs: &InteractionCoefficients) -> FirstOrderStokes {
    let g = samples.k * coeffs.beta * coeffs.c1;
    FirstOrderStokes { t: samples.theta_transfer() * C64::from(g) }
}

/// e_j·{(J × [e_l′ × e_l″]) × e_l}.
pub fn s2c_coefficient(spin: &Vector3<f64>, frame: &[Vector3<f64>; 2], j: usize, l: usize, lp: usize, lpp: usize) -> f64 {
    let inner = frame[lp].cross(&frame[lpp]);
    frame[j].dot(&spin.cross(&inner).cross(&frame[l]))
}

/// Largest |C^{l′l″}_{jl}| over the 16 index tuples in {x, y}⁴.
pub fn s2c_contraction_max(spin: &Vector3<f64>, frame: &[Vector3<f64>; 2]) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..2 {
        for l in 0..2 {
            for lp in 0..2 {
                for lpp in 0..2 {
                    worst = worst.max(s2c_coefficient(spin, frame, j, l, lp, lpp).abs());
                }
            }
        }
    }
    worst
}

/// Operator ordering of a [`QuarticOperator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuarticForm {
    /// Σ T_abcd a†_a a†_b a_c a_d
    NormalOrdered,
    /// Σ T_abcd a†_a a_b a†_c a_d
    PairProduct,
}

/// Dense 4-index coefficient tensor; only evaluated under coherent-state
/// expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticOperator {
    pub dim: usize,
    pub form: QuarticForm,
    pub coeff: Vec<C64>,
    pub label: String,
}

impl QuarticOperator {
    pub fn zeros(dim: usize, form: QuarticForm, label: impl Into<String>) -> Self {
        Self { dim, form, coeff: vec![C64::from(0.0); dim.pow(4)], label: label.into() }
    }

    fn at(&self, a: usize, b: usize, c: usize, d: usize) -> usize {
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }

    pub fn add(&mut self, a: usize, b: usize, c: usize, d: usize, v: C64) {
        let i = self.at(a, b, c, d);
        self.coeff[i] += v;
    }

    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> C64 {
        self.coeff[self.at(a, b, c, d)]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ⟨α| · |α⟩ for a multimode coherent state.
    pub fn expectation_coherent(&self, alpha: &[C64]) -> C64 {
        let n = self.dim;
        let mut acc = C64::from(0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let t = self.get(a, b, c, d);
                        if t == C64::from(0.0) {
                            continue;
                        }
                        acc += t * match self.form {
                            QuarticForm::NormalOrdered => alpha[a].conj() * alpha[b].conj() * alpha[c] * alpha[d],
                            QuarticForm::PairProduct => {
                                let mut v = alpha[a].conj() * alpha[b] * alpha[c].conj() * alpha[d];
                                if b == c {
                                    v += alpha[a].conj() * alpha[d];
                                }
                                v
                            }
                        };
                    }
                }
            }
        }
        acc
    }
}

/// The second-order Stokes-generator pieces S2_A … S2_D.
#[derive(Debug, Clone)]
pub struct SecondOrderStokes {
    /// k_Lβc1·T as for the first order.
    pub t: DMatrix<C64>,
    t2: DMatrix<C64>,
    /// ∫ρ(J·e_z)²Ψ^{nm}Ψ^{m′n′}, indexed [(n·N + m), (m′·N + n′)].
    k1: DMatrix<C64>,
    /// ∫ρJ⁴Ψ^{nm}Ψ^{m′n′}.
    k0: DMatrix<C64>,
    pre_d: (f64, f64),
    c_pref: f64,
    n_modes: usize,
    /// Per-node S2_C ingredients: (ρ·w, J, Ψ matrix).
    c_nodes: Vec<(f64, Vector3<f64>, DMatrix<C64>)>,
}

pub fn stokes_second_order_terms(samples: &EnsembleSamples, coeffs: &InteractionCoefficients) -> SecondOrderStokes {
    let g = samples.k * coeffs.beta * coeffs.c1;
    let t = samples.theta_transfer() * C64::from(g);
    let t2 = &t * &t;
    let n = samples.n_modes;
    let mut k1 = DMatrix::<C64>::zeros(n * n, n * n);
    let mut k0 = DMatrix::<C64>::zeros(n * n, n * n);
    let mut c_nodes = Vec::with_capacity(samples.samples.len());
    for s in &samples.samples {
        let w = s.weight * s.rho;
        let psi = DMatrix::from_fn(n, n, |a, b| s.psi(a, b));
        let jz2 = s.spin.vector.z.powi(2);
        let j4 = s.spin.square.powi(2);
        for nn in 0..n {
            for m in 0..n {
                for mp in 0..n {
                    for np in 0..n {
                        let v = psi[(nn, m)] * psi[(mp, np)] * w;
                        k1[(nn * n + m, mp * n + np)] += v * jz2;
                        k0[(nn * n + m, mp * n + np)] += v * j4;
                    }
                }
            }
        }
        c_nodes.push((w, s.spin.vector, psi));
    }
    let kb = samples.k * coeffs.beta;
    SecondOrderStokes {
        t,
        t2,
        k1,
        k0,
        pre_d: (0.25 * kb * kb * coeffs.c1 * coeffs.c1, 0.25 * kb * kb * coeffs.c0 * coeffs.c0),
        c_pref: 0.125 * g * g,
        n_modes: n,
        c_nodes,
    }
}

impl SecondOrderStokes {
    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    /// ¼ conj(t_{q a}) t_{q′ b} a†_a a_b.
    pub fn a(&self, q: usize, qp: usize) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |a, b| self.t[(q, a)].conj() * self.t[(qp, b)] * 0.25)
    }

    /// ⅛{conj((t²)_{q a}) a†_a a_q′ + (t²)_{q′ b} a†_q a_b}.
    pub fn b(&self, q: usize, qp: usize) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for a in 0..d {
            m[(a, qp)] += self.t2[(q, a)].conj() * 0.125;
            m[(q, a)] += self.t2[(qp, a)] * 0.125;
        }
        m
    }

    /// Quartic S2_C element in pair-product ordering (first term) plus
    /// normal ordering folded in via a†_q a†_a a_b a_c = a†_q a_c a†_a a_b − δ…
    /// Only the magnitude matters: the C coefficients vanish for x/y indices.
    pub fn c(&self, q: usize, qp: usize) -> (QuarticOperator, QuarticOperator) {
        let d = self.dim();
        let n = self.n_modes;
        let frame = [Vector3::x(), Vector3::y()];
        let (m, j) = split(q);
        let (mp, jp) = split(qp);
        let mut first = QuarticOperator::zeros(d, QuarticForm::PairProduct, "S2_C(a†a a†a)");
        let mut second = QuarticOperator::zeros(d, QuarticForm::NormalOrdered, "S2_C(a†a†aa)");
        for (w, spin, psi) in &self.c_nodes {
            for l in 0..2 {
                for lp in 0..2 {
                    for lpp in 0..2 {
                        let c1 = s2c_coefficient(spin, &frame, j, l, lp, lpp) * w * self.c_pref;
                        let c2 = s2c_coefficient(spin, &frame, jp, l, lp, lpp) * w * self.c_pref;
                        if c1 == 0.0 && c2 == 0.0 {
                            continue;
                        }
                        for nn in 0..n {
                            for np in 0..n {
                                for npp in 0..n {
                                    let (a, b, c) = (2 * np + lp, 2 * npp + lpp, 2 * nn + l);
                                    first.add(a, b, c, qp, psi[(m, nn)].conj() * psi[(np, npp)] * c1);
                                    second.add(q, a, b, c, psi[(mp, nn)] * psi[(np, npp)].conj() * c2);
                                }
                            }
                        }
                    }
                }
            }
        }
        (first, second)
    }

    /// ¼(k_Lβ)²∫ρΨ^{nm}Ψ^{m′n′}{c1²(J·e_z)²ε_{jl}ε_{j′l′} + c0²J⁴δ_{jl}δ_{j′l′}} a†_{nl}a_{n′l′}.
    pub fn d(&self, q: usize, qp: usize) -> DMatrix<C64> {
        let n = self.n_modes;
        let dm = self.dim();
        let (m, j) = split(q);
        let (mp, jp) = split(qp);
        let mut out = DMatrix::zeros(dm, dm);
        for nn in 0..n {
            for np in 0..n {
                let v1 = self.k1[(nn * n + m, mp * n + np)] * self.pre_d.0;
                let v0 = self.k0[(nn * n + m, mp * n + np)] * self.pre_d.1;
                for l in 0..2 {
                    for lp in 0..2 {
                        let mut v = v1 * (pol_antisym(j, l) * pol_antisym(jp, lp));
                        if j == l && jp == lp {
                            v += v0;
                        }
                        out[(2 * nn + l, 2 * np + lp)] += v;
                    }
                }
            }
        }
        out
    }

    /// Stokes operators from S2_A + S2_B (the coherent second order).
    pub fn stokes_ab(&self, q: usize, qp: usize) -> [QuadraticOperator; 3] {
        stokes_from_generator(|a, b| self.a(a, b) + self.b(a, b), q, qp)
    }

    pub fn stokes_d(&self, q: usize, qp: usize) -> [QuadraticOperator; 3] {
        stokes_from_generator(|a, b| self.d(a, b), q, qp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpinTermValue {
    Quadratic(QuadraticOperator),
    Quartic(QuarticOperator),
    /// A classical rate vector dJ/dt.
    Rate(Vector3<f64>),
}

/// Spin increment: `direction` times an operator-valued coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinTermResult {
    pub direction: Vector3<f64>,
    pub value: SpinTermValue,
    pub order: u8,
    pub label: String,
}

/// J⁽¹⁾ = −βc1k (J×e_z) Σ_{mm′}{Re Ψ^{mm′} s3^{mm′} + Im Ψ^{mm′} s2^{mm′}}.
pub fn spin_first_order(
    basis: &[HermiteGaussMode],
    r: &Vector3<f64>,
    coeffs: &InteractionCoefficients,
    spin: &Vector3<f64>,
) -> SpinTermResult {
    let n = basis.len();
    let d = 2 * n;
    let k = basis.first().map_or(0.0, |m| m.k);
    let u: Vec<C64> = basis.iter().map(|m| m.eval(r)).collect();
    let mut op = DMatrix::<C64>::zeros(d, d);
    for m in 0..n {
        for mp in 0..n {
            let psi = u[m].conj() * u[mp];
            let (mx, py) = (index(m, Pol::X), index(mp, Pol::Y));
            // s3^{mm′} = (1/2i)(a†_{mx}a_{m′y} − h.c.), s2^{mm′} = ½(a†_{mx}a_{m′y} + h.c.)
            let c = C64::new(0.0, -0.5) * psi.re + C64::from(0.5 * psi.im);
            op[(mx, py)] += c;
            op[(py, mx)] += c.conj();
        }
    }
    let pre = -coeffs.beta * coeffs.c1 * k;
    SpinTermResult {
        direction: spin.cross(&Vector3::z()),
        value: SpinTermValue::Quadratic(QuadraticOperator::new(op * C64::from(pre), "J1")),
        order: 1,
        label: "J1".into(),
    }
}

/// Second-order coherent spin terms at point `r`.
#[derive(Debug, Clone)]
pub struct SpinSecondOrder {
    pub j2a: SpinTermResult,
    pub j2b: SpinTermResult,
}

pub fn spin_second_order_terms(
    basis: &[HermiteGaussMode],
    samples: &EnsembleSamples,
    coeffs: &InteractionCoefficients,
    r: &Vector3<f64>,
    spin: &Vector3<f64>,
) -> SpinSecondOrder {
    let n = basis.len();
    let d = 2 * n;
    let k = basis.first().map_or(0.0, |m| m.k);
    let g2 = (coeffs.beta * coeffs.c1 * k * 0.5).powi(2);
    let u: Vec<C64> = basis.iter().map(|m| m.eval(r)).collect();
    let psi_r = |a: usize, b: usize| u[a].conj() * u[b];

    // J2_A: −(i/2)g² Σ ρ w J_ez(r′) a†_{m′l}a_{m″l} Σ_m{Ψ^{mm″}(r)Ψ^{m′m}(r′) − Ψ^{m′m}(r)Ψ^{mm″}(r′)}
    let mut ta = DMatrix::<C64>::zeros(n, n);
    for s in &samples.samples {
        let w = s.weight * s.rho * s.spin.vector.z;
        if w == 0.0 {
            continue;
        }
        for mp in 0..n {
            for mpp in 0..n {
                let sum: C64 = (0..n)
                    .map(|m| psi_r(m, mpp) * s.psi(mp, m) - psi_r(mp, m) * s.psi(m, mpp))
                    .sum();
                ta[(mp, mpp)] += sum * w;
            }
        }
    }
    let mut a_op = DMatrix::<C64>::zeros(d, d);
    for mp in 0..n {
        for mpp in 0..n {
            let v = ta[(mp, mpp)] * C64::new(0.0, -0.5 * g2);
            for l in 0..2 {
                a_op[(2 * mp + l, 2 * mpp + l)] += v;
            }
        }
    }
    let ez = Vector3::z();
    let j2a = SpinTermResult {
        direction: spin.cross(&ez),
        value: SpinTermValue::Quadratic(QuadraticOperator::new(a_op, "J2_A")),
        order: 2,
        label: "J2_A".into(),
    };

    // J2_B: −½g²Ψ^{mn}Ψ^{m′n′}{2a†_{mx}a†_{m′y}a_{ny}a_{n′x} − a†_{my}a†_{m′y}a_{nx}a_{n′x} − a†_{mx}a†_{m′x}a_{ny}a_{n′y}}
    let mut b_op = QuarticOperator::zeros(d, QuarticForm::NormalOrdered, "J2_B");
    let (x, y) = (0, 1);
    for m in 0..n {
        for mp in 0..n {
            for nn in 0..n {
                for np in 0..n {
                    let w = psi_r(m, nn) * psi_r(mp, np) * (-0.5 * g2);
                    b_op.add(2 * m + x, 2 * mp + y, 2 * nn + y, 2 * np + x, w * 2.0);
                    b_op.add(2 * m + y, 2 * mp + y, 2 * nn + x, 2 * np + x, -w);
                    b_op.add(2 * m + x, 2 * mp + x, 2 * nn + y, 2 * np + y, -w);
                }
            }
        }
    }
    let j2b = SpinTermResult {
        direction: spin - ez * spin.dot(&ez),
        value: SpinTermValue::Quartic(b_op),
        order: 2,
        label: "J2_B".into(),
    };
    SpinSecondOrder { j2a, j2b }
}

/// Incoherent second-order spin rate for classical light D⁻ and short
/// propagator A⁻ (A⁺ = conj(A⁻)):
/// β²{c1c0J²[A⁻D⁻(J·D⁺) − D⁻(J·A⁺D⁺)] + (c1²/2)[A⁺D⁻(J·D⁺) − (D⁻·D⁺)A⁻J
/// − Tr(A⁻)D⁻(J·D⁺) + D⁻(J·A⁻D⁺)] + c.c.}.
pub fn spin_incoherent_rate(
    a_minus: &CMatrix3,
    coeffs: &InteractionCoefficients,
    spin: &Spin,
    d_minus: &CVector3,
) -> SpinTermResult {
    let a_plus = a_minus.conjugate();
    let dp = d_minus.conjugate();
    let j = spin.vector.map(C64::from);
    let jd = j.dot(&dp);
    let (c0, c1) = (coeffs.c0, coeffs.c1);
    let cross = (a_minus * d_minus) * jd - d_minus * j.dot(&(a_plus * dp));
    let quad = (a_plus * d_minus) * jd - (a_minus * j) * d_minus.dot(&dp) - d_minus * (a_minus.trace() * jd)
        + d_minus * j.dot(&(a_minus * dp));
    let v = cross * C64::from(c1 * c0 * spin.square) + quad * C64::from(0.5 * c1 * c1);
    let rate = (v + v.conjugate()).map(|z| z.re) * coeffs.beta.powi(2);
    SpinTermResult {
        direction: Vector3::new(1.0, 1.0, 1.0),
        value: SpinTermValue::Rate(rate),
        order: 2,
        label: "J2_incoherent".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_commutator_vanishes() {
        let [s1, _, _] = stokes_mode_pair(2, 0, 1).unwrap();
        assert_eq!(commutator(&s1, &s1).unwrap().coeff.camax(), 0.0);
    }

    #[test]
    fn single_pair_su2_exact() {
        let s = stokes_mode_pair(2, 0, 1).unwrap();
        assert_eq!(su2_residual(&s), 0.0);
        let c = commutator(&s[0], &s[1]).unwrap();
        assert_eq!(c.coeff, &s[2].coeff * C64::i());
    }

    #[test]
    fn mismatch_rejected() {
        let a = QuadraticOperator::zeros(2, "a");
        let b = QuadraticOperator::zeros(4, "b");
        assert_eq!(commutator(&a, &b), Err(QopsError::BasisMismatch(2, 4)));
        assert!(stokes_mode_pair(4, 1, 1).is_err());
    }

    #[test]
    fn s1_fock_expectation() {
        let [s1, _, _] = stokes_mode_pair(4, 0, 3).unwrap();
        assert_eq!(s1.expectation_fock(&[3.0, 0.0, 0.0, 1.0]), C64::from(1.0));
    }

    #[test]
    fn constructors_hermitian() {
        for q in 0..6 {
            for qp in 0..6 {
                if q != qp {
                    for s in stokes_mode_pair(6, q, qp).unwrap() {
                        assert!(s.is_hermitian(0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn theta_factor_matches_kronecker_form() {
        let spin = Vector3::new(0.3, -0.7, 1.1);
        let e = [Vector3::x(), Vector3::y()];
        for j in 0..2 {
            for l in 0..2 {
                let v = theta_polarization_factor(&spin, &e[j], &e[l]);
                assert_eq!(v, pol_antisym(j, l) * spin.z);
            }
        }
    }

    #[test]
    fn s2c_vanishes_in_canonical_frame() {
        let spin = Vector3::new(0.4, -1.3, 0.8);
        assert_eq!(s2c_contraction_max(&spin, &[Vector3::x(), Vector3::y()]), 0.0);
    }

    #[test]
    fn quartic_pair_product_expectation() {
        // a†a a†a on one mode → |α|⁴ + |α|²
        let mut q = QuarticOperator::zeros(1, QuarticForm::PairProduct, "n²");
        q.add(0, 0, 0, 0, C64::from(1.0));
        let a = C64::new(1.0, 1.0);
        assert!((q.expectation_coherent(&[a]) - C64::from(6.0)).norm() < 1e-15);
    }

    #[test]
    fn incoherent_isotropic_reduces_and_gives_two_one_one() {
        let rho = 0.37;
        let a = CMatrix3::identity() * C64::from(rho);
        let coeffs = InteractionCoefficients::new(1.3, 0.9, 0.6, 0.0);
        let d = CVector3::new(C64::from(2.0), C64::from(0.0), C64::from(0.0));
        let spin = Spin::classical(Vector3::new(0.5, 0.5, 0.5));
        let SpinTermValue::Rate(r) = spin_incoherent_rate(&a, &coeffs, &spin, &d).value else { panic!() };
        // −β²c1²ϱ|D|²(J + J_x x̂)
        let g = 1.3f64.powi(2) * 0.36 * rho * 4.0;
        assert!((r.x + 2.0 * g * 0.5).abs() < 1e-14);
        assert!((r.y + g * 0.5).abs() < 1e-14);
        assert!((r.z + g * 0.5).abs() < 1e-14);
    }

    fn single_mode_slab() -> (EnsembleSamples, InteractionCoefficients, f64) {
        use crate::medium::UniformSpinField;
        let k = 2.0 * std::f64::consts::PI / 0.8;
        let basis = vec![HermiteGaussMode::new(0, 0, k, 3.0).unwrap()];
        let field = UniformSpinField::everywhere(0.8, Spin::classical(Vector3::new(0.2, 0.1, 0.7)));
        let grid = EnsembleGrid::new(
            UniformAxis::symmetric(12.0, 41),
            UniformAxis::symmetric(12.0, 41),
            UniformAxis::symmetric(1.0, 5),
        );
        let samples = EnsembleSamples::new(&basis, &field, &grid);
        let coeffs = InteractionCoefficients::new(0.01, 0.5, 0.3, 0.0);
        let integral: f64 = samples.samples.iter().map(|s| s.weight * s.rho * s.spin.vector.z * s.amplitudes[0].norm_sqr()).sum();
        let phi = k * coeffs.beta * coeffs.c1 * integral;
        (samples, coeffs, phi)
    }

    #[test]
    fn first_order_rotates_polarization() {
        let (samples, coeffs, phi) = single_mode_slab();
        let s = stokes_mode_pair(2, 0, 1).unwrap();
        let f = stokes_first_order(&samples, &coeffs).stokes(0, 1);
        assert!((&f[0].coeff + &s[1].coeff * C64::from(phi)).camax() < 1e-14);
        assert!((&f[1].coeff - &s[0].coeff * C64::from(phi)).camax() < 1e-14);
        assert!(f[2].coeff.camax() < 1e-14);
    }

    #[test]
    fn second_order_coherent_part_is_rotation_square() {
        let (samples, coeffs, phi) = single_mode_slab();
        let s = stokes_mode_pair(2, 0, 1).unwrap();
        let so = stokes_second_order_terms(&samples, &coeffs);
        let ab = so.stokes_ab(0, 1);
        assert!((&ab[0].coeff + &s[0].coeff * C64::from(0.5 * phi * phi)).camax() < 1e-14);
        assert!((&ab[1].coeff + &s[1].coeff * C64::from(0.5 * phi * phi)).camax() < 1e-14);
        let (c1, c2) = so.c(0, 1);
        assert_eq!(c1.max_abs() + c2.max_abs(), 0.0);
        for op in so.stokes_d(0, 1) {
            assert!(op.is_hermitian(1e-14));
        }
    }

    proptest! {
        #[test]
        fn random_hermitian_commutator_antihermitian(
            re in proptest::collection::vec(-1.0..1.0f64, 72),
        ) {
            let mk = |off: usize| {
                let m = DMatrix::from_fn(6, 6, |i, j| C64::new(re[off + i * 6 + j] , re[(off + j * 6 + i + 7) % 72]));
                QuadraticOperator::new(&m + m.adjoint(), "h")
            };
            let (a, b) = (mk(0), mk(36));
            let c = commutator(&a, &b).unwrap();
            prop_assert!((&c.coeff + c.coeff.adjoint()).camax() < 1e-13);
            prop_assert!((c * C64::i()).is_hermitian(1e-13));
        }

        #[test]
        fn su2_any_pair(dim in 2usize..12, q in 0usize..12, qp in 0usize..12) {
            prop_assume!(q < dim && qp < dim && q != qp);
            let s = stokes_mode_pair(dim, q, qp).unwrap();
            prop_assert!(su2_residual(&s) < 1e-13);
        }

        #[test]
        fn s2c_small_in_rotated_frames(
            j in proptest::array::uniform3(-2.0..2.0f64),
            axis in proptest::array::uniform3(-1.0..1.0f64), angle in -3.0..3.0f64,
        ) {
            let av = Vector3::from(axis);
            prop_assume!(av.norm() > 0.1);
            let r = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(av), angle);
            let frame = [r * Vector3::x(), r * Vector3::y()];
            prop_assert!(s2c_contraction_max(&Vector3::from(j), &frame) < 1e-14);
        }
    }
}
