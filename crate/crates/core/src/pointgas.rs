//! Monte-Carlo ideal gas: i.i.d. point atoms, the density and spin
//! correlation decompositions, and the coherent-forward vs incoherent split
//! of |Σ e^{iΔk·r}|².
//!
//! Clouds are drawn from ChaCha8 seeded with `seed_from_u64(seed)`; batch b
//! uses stream b, so batches are independent and order-free under rayon.

use crate::quadrature::GaussLegendre;
use crate::{levi_civita, C64};
use nalgebra::{Matrix2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PointGasError {
    #[error("unknown density profile '{0}' (expected 'uniform-box' or 'gaussian')")]
    UnknownProfile(String),
    #[error("{got} independent clouds supplied, at least {need} required")]
    TooFewBatches { got: usize, need: usize },
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

pub const MIN_BATCHES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    UniformBox { center: Vector3<f64>, half_extent: Vector3<f64> },
    Gaussian { center: Vector3<f64>, sigma: Vector3<f64> },
}

impl Profile {
    /// `size` is the box half-extent or the Gaussian σ per axis.
    pub fn from_name(name: &str, center: Vector3<f64>, size: Vector3<f64>) -> Result<Self, PointGasError> {
        if size.iter().any(|s| !(*s > 0.0)) {
            return Err(PointGasError::InvalidInput("profile sizes must be positive"));
        }
        match name {
            "uniform-box" | "uniform" | "box" => Ok(Self::UniformBox { center, half_extent: size }),
            "gaussian" => Ok(Self::Gaussian { center, sigma: size }),
            other => Err(PointGasError::UnknownProfile(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformBox { .. } => "uniform-box",
            Self::Gaussian { .. } => "gaussian",
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vector3<f64> {
        match self {
            Self::UniformBox { center, half_extent } => {
                center + Vector3::from_fn(|i, _| half_extent[i] * rng.gen_range(-1.0..1.0))
            }
            Self::Gaussian { center, sigma } => {
                center + Vector3::from_fn(|i, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    sigma[i] * z
                })
            }
        }
    }

    /// Probability mass of the axis-aligned box [lo, hi].
    pub fn box_probability(&self, lo: &Vector3<f64>, hi: &Vector3<f64>) -> f64 {
        match self {
            Self::UniformBox { center, half_extent } => (0..3)
                .map(|i| {
                    let a = lo[i].max(center[i] - half_extent[i]);
                    let b = hi[i].min(center[i] + half_extent[i]);
                    ((b - a) / (2.0 * half_extent[i])).max(0.0)
                })
                .product(),
            Self::Gaussian { center, sigma } => {
                let gl = GaussLegendre::new(32);
                (0..3)
                    .map(|i| {
                        let (a, b) = ((lo[i] - center[i]) / sigma[i], (hi[i] - center[i]) / sigma[i]);
                        gl.integrate_composite(a, b, 8, |u| (-0.5 * u * u).exp())
                            / (2.0 * std::f64::consts::PI).sqrt()
                    })
                    .product()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomCloud {
    pub positions: Vec<Vector3<f64>>,
    pub seed: u64,
    pub stream: u64,
    pub profile: Profile,
}

impl AtomCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_cloud(profile: &Profile, n_atoms: usize, seed: u64) -> Result<AtomCloud, PointGasError> {
    sample_cloud_stream(profile, n_atoms, seed, 0)
}

fn sample_cloud_stream(profile: &Profile, n_atoms: usize, seed: u64, stream: u64) -> Result<AtomCloud, PointGasError> {
    if n_atoms == 0 {
        return Err(PointGasError::InvalidInput("at least one atom required"));
    }
    let mut rng = rng_for(seed, stream);
    let positions = (0..n_atoms).map(|_| profile.draw(&mut rng)).collect();
    Ok(AtomCloud { positions, seed, stream, profile: *profile })
}

/// `batches` independent clouds, cloud b drawn from stream b.
pub fn sample_clouds(profile: &Profile, n_atoms: usize, batches: usize, seed: u64) -> Result<Vec<AtomCloud>, PointGasError> {
    (0..batches as u64)
        .into_par_iter()
        .map(|b| sample_cloud_stream(profile, n_atoms, seed, b))
        .collect()
}

/// |Σ_j e^{iΔk·r_j}|².
pub fn scattering_sum(cloud: &AtomCloud, delta_k: &Vector3<f64>) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for r in &cloud.positions {
        let (sn, cs) = delta_k.dot(r).sin_cos();
        c += cs;
        s += sn;
    }
    c * c + s * s
}

/// Mean, sample variance and standard error of a set of batch values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchStats {
    pub mean: f64,
    pub variance: f64,
    pub std_err: f64,
    pub batches: usize,
}

impl BatchStats {
    pub fn from_values(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let variance = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, variance, std_err: (variance / n).sqrt(), batches: v.len() }
    }

    /// |mean − target| / std_err.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.std_err
    }
}

pub fn scattering_statistics(clouds: &[AtomCloud], delta_k: &Vector3<f64>) -> BatchStats {
    let v: Vec<f64> = clouds.par_iter().map(|c| scattering_sum(c, delta_k)).collect();
    BatchStats::from_values(&v)
}

/// Regular cell partition of an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub lo: Vector3<f64>,
    pub hi: Vector3<f64>,
    pub cells: usize,
}

impl CellGrid {
    pub fn new(lo: Vector3<f64>, hi: Vector3<f64>, cells_per_axis: usize) -> Self {
        Self { lo, hi, cells: cells_per_axis }
    }

    pub fn len(&self) -> usize {
        self.cells.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }

    fn step(&self) -> Vector3<f64> {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.step().product()
    }

    pub fn locate(&self, r: &Vector3<f64>) -> Option<usize> {
        let s = self.step();
        let mut idx = 0;
        for i in 0..3 {
            let f = ((r[i] - self.lo[i]) / s[i]).floor();
            if !(0.0..self.cells as f64).contains(&f) {
                return None;
            }
            idx = idx * self.cells + f as usize;
        }
        Some(idx)
    }

    pub fn bounds(&self, idx: usize) -> (Vector3<f64>, Vector3<f64>) {
        let s = self.step();
        let c = self.cells;
        let ijk = [idx / (c * c), (idx / c) % c, idx % c];
        let lo = Vector3::from_fn(|i, _| self.lo[i] + ijk[i] as f64 * s[i]);
        (lo, lo + s)
    }

    pub fn counts(&self, cloud: &AtomCloud) -> Vec<u64> {
        let mut n = vec![0u64; self.len()];
        for r in &cloud.positions {
            if let Some(i) = self.locate(r) {
                n[i] += 1;
            }
        }
        n
    }
}

/// Binned two-point density estimate, ⟨ρ(c)ρ(c′)⟩ for cells c ≠ c′.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub n_atoms: usize,
    pub batches: usize,
    /// Σ_i δ-term: each atom paired with itself, counted per cloud.
    pub self_term: f64,
    /// Off-diagonal pair densities (row-major cells × cells, diagonal zero).
    pub raw: Vec<f64>,
    /// raw · N²/(N(N−1)), unbiased for ⟨ρ⟩⟨ρ′⟩.
    pub corrected: Vec<f64>,
    /// Standard error of the mean over batches.
    pub error: Vec<f64>,
    /// ⟨ρ(c)⟩⟨ρ(c′)⟩ from the profile.
    pub expected: Vec<f64>,
    pub cells: usize,
}

impl CorrelationEstimate {
    /// Fraction of off-diagonal bins whose corrected estimate lies within
    /// `k` standard errors of ⟨ρ⟩⟨ρ′⟩.
    pub fn fraction_within(&self, k: f64) -> f64 {
        let (mut ok, mut total) = (0usize, 0usize);
        for a in 0..self.cells {
            for b in 0..self.cells {
                if a == b {
                    continue;
                }
                let i = a * self.cells + b;
                total += 1;
                let err = self.error[i] * self.correction_factor();
                if (self.corrected[i] - self.expected[i]).abs() <= k * err {
                    ok += 1;
                }
            }
        }
        ok as f64 / total.max(1) as f64
    }

    pub fn correction_factor(&self) -> f64 {
        if self.n_atoms > 1 {
            self.n_atoms as f64 / (self.n_atoms as f64 - 1.0)
        } else {
            0.0
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "cell_a,cell_b,raw,corrected,stderr,expected")?;
        for a in 0..self.cells {
            for b in 0..self.cells {
                if a != b {
                    let i = a * self.cells + b;
                    writeln!(
                        out,
                        "{a},{b},{:.16e},{:.16e},{:.16e},{:.16e}",
                        self.raw[i], self.corrected[i], self.error[i], self.expected[i]
                    )?;
                }
            }
        }
        Ok(())
    }
}

pub fn density_correlation(clouds: &[AtomCloud], grid: &CellGrid) -> Result<CorrelationEstimate, PointGasError> {
    if clouds.len() < MIN_BATCHES {
        return Err(PointGasError::TooFewBatches { got: clouds.len(), need: MIN_BATCHES });
    }
    let n_atoms = clouds[0].len();
    if clouds.iter().any(|c| c.len() != n_atoms) {
        return Err(PointGasError::InvalidInput("clouds must share the atom number"));
    }
    let m = grid.len();
    let v = grid.cell_volume();
    let counts: Vec<Vec<u64>> = clouds.par_iter().map(|c| grid.counts(c)).collect();
    let self_term = clouds.iter().map(|c| c.len() as f64).sum::<f64>() / clouds.len() as f64;

    let nb = clouds.len() as f64;
    let mut raw = vec![0.0; m * m];
    let mut sq = vec![0.0; m * m];
    for n in &counts {
        for a in 0..m {
            if n[a] == 0 {
                continue;
            }
            for b in 0..m {
                if a != b {
                    let x = (n[a] * n[b]) as f64 / (v * v);
                    raw[a * m + b] += x;
                    sq[a * m + b] += x * x;
                }
            }
        }
    }
    let error: Vec<f64> = raw
        .iter()
        .zip(&sq)
        .map(|(s, q)| {
            let mean = s / nb;
            ((q / nb - mean * mean).max(0.0) * nb / (nb - 1.0) / nb).sqrt()
        })
        .collect();
    raw.iter_mut().for_each(|x| *x /= nb);

    let profile = clouds[0].profile;
    let rho: Vec<f64> = (0..m)
        .map(|c| {
            let (lo, hi) = grid.bounds(c);
            n_atoms as f64 * profile.box_probability(&lo, &hi) / v
        })
        .collect();
    let mut expected = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            if a != b {
                expected[a * m + b] = rho[a] * rho[b];
            }
        }
    }
    let mut est = CorrelationEstimate {
        n_atoms,
        batches: clouds.len(),
        self_term,
        corrected: Vec::new(),
        raw,
        error,
        expected,
        cells: m,
    };
    let f = est.correction_factor();
    est.corrected = est.raw.iter().map(|x| x * f).collect();
    Ok(est)
}

fn pauli() -> [Matrix2<C64>; 3] {
    let (o, l, i) = (C64::from(0.0), C64::from(1.0), C64::i());
    [Matrix2::new(o, l, l, o), Matrix2::new(o, -i, i, o), Matrix2::new(l, o, o, -l)]
}

/// ⟨J_nJ_m⟩ for one spin-½ atom with mean spin J̄ (|J̄| ≤ ½), from the
/// density matrix ½(1 + 2J̄·σ) and J = σ/2.
pub fn single_atom_product(mean: &Vector3<f64>, n: usize, m: usize) -> C64 {
    let s = pauli();
    let bloch = s[0] * C64::from(mean.x) + s[1] * C64::from(mean.y) + s[2] * C64::from(mean.z);
    let rho = (Matrix2::identity() + bloch * C64::from(2.0)) * C64::from(0.5);
    (rho * s[n] * s[m]).trace() * 0.25
}

/// δ_nm/4 + (i/2)ε_nml J̄_l.
pub fn single_atom_product_formula(mean: &Vector3<f64>, n: usize, m: usize) -> C64 {
    let mut v = C64::from(if n == m { 0.25 } else { 0.0 });
    for l in 0..3 {
        v += C64::new(0.0, 0.5 * levi_civita(n, m, l) * mean[l]);
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinCorrelationReport {
    /// Mean self-term per atom from the density-matrix evaluation.
    pub self_term: C64,
    pub self_expected: C64,
    /// Σ_{i≠j} J̄_n^i J̄_m^j over clouds.
    pub cross: BatchStats,
    /// N(N−1)⟨J̄_n⟩⟨J̄_m⟩.
    pub cross_expected: f64,
    pub residual: f64,
}

/// Each atom carries mean spin ±`spin` with P(+) = (1 + polarization)/2;
/// signs come from stream `clouds.len() + b` of `seed`.
pub fn spin_correlation_check(
    clouds: &[AtomCloud],
    spin: &Vector3<f64>,
    polarization: f64,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<SpinCorrelationReport, PointGasError> {
    if clouds.len() < MIN_BATCHES {
        return Err(PointGasError::TooFewBatches { got: clouds.len(), need: MIN_BATCHES });
    }
    if spin.norm() > 0.5 + 1e-12 || !(-1.0..=1.0).contains(&polarization) || n > 2 || m > 2 {
        return Err(PointGasError::InvalidInput("need |J̄| ≤ ½, |polarization| ≤ 1, components in 0..3"));
    }
    let p_up = 0.5 * (1.0 + polarization);
    let base = clouds.len() as u64;
    let per_cloud: Vec<(f64, C64, C64, usize)> = clouds
        .par_iter()
        .enumerate()
        .map(|(b, c)| {
            let mut rng = rng_for(seed, base + b as u64);
            let (mut sn, mut sm, mut diag) = (0.0, 0.0, 0.0);
            let (mut self_sum, mut self_exp) = (C64::from(0.0), C64::from(0.0));
            for _ in &c.positions {
                let j = if rng.gen_bool(p_up) { *spin } else { -spin };
                sn += j[n];
                sm += j[m];
                diag += j[n] * j[m];
                self_sum += single_atom_product(&j, n, m);
                self_exp += single_atom_product_formula(&j, n, m);
            }
            (sn * sm - diag, self_sum, self_exp, c.len())
        })
        .collect();
    let cross_vals: Vec<f64> = per_cloud.iter().map(|p| p.0).collect();
    let atoms: usize = per_cloud.iter().map(|p| p.3).sum();
    let self_term = per_cloud.iter().map(|p| p.1).sum::<C64>() / atoms as f64;
    let self_expected = per_cloud.iter().map(|p| p.2).sum::<C64>() / atoms as f64;
    let na = clouds[0].len() as f64;
    let mean = spin * polarization;
    Ok(SpinCorrelationReport {
        self_term,
        self_expected,
        cross: BatchStats::from_values(&cross_vals),
        cross_expected: na * (na - 1.0) * mean[n] * mean[m],
        residual: (self_term - self_expected).norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box() -> Profile {
        Profile::from_name("uniform-box", Vector3::zeros(), Vector3::repeat(0.5)).unwrap()
    }

    #[test]
    fn reproducible_single_point() {
        let a = sample_cloud(&unit_box(), 1, 17).unwrap();
        let b = sample_cloud(&unit_box(), 1, 17).unwrap();
        assert_eq!(a, b);
        assert!(a.positions[0].amax() <= 0.5);
    }

    #[test]
    fn unknown_profile() {
        assert_eq!(
            Profile::from_name("lorentzian", Vector3::zeros(), Vector3::repeat(1.0)),
            Err(PointGasError::UnknownProfile("lorentzian".into()))
        );
    }

    #[test]
    fn forward_sum_is_n_squared() {
        let c = sample_cloud(&unit_box(), 100, 3).unwrap();
        assert_eq!(scattering_sum(&c, &Vector3::zeros()), 10000.0);
    }

    #[test]
    fn single_atom_no_pairs() {
        let clouds = sample_clouds(&unit_box(), 1, 16, 5).unwrap();
        let grid = CellGrid::new(Vector3::repeat(-0.5), Vector3::repeat(0.5), 3);
        let est = density_correlation(&clouds, &grid).unwrap();
        assert!(est.raw.iter().all(|&x| x == 0.0));
        assert_eq!(est.self_term, 1.0);
        assert!(matches!(
            density_correlation(&clouds[..15], &grid),
            Err(PointGasError::TooFewBatches { got: 15, need: 16 })
        ));
    }

    #[test]
    fn spin_self_terms() {
        let half_z = Vector3::new(0.0, 0.0, 0.5);
        assert!((single_atom_product(&half_z, 2, 2) - C64::from(0.25)).norm() < 1e-15);
        let v = single_atom_product(&half_z, 0, 1);
        assert!((v - C64::new(0.0, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn gaussian_box_probability_normalized() {
        let g = Profile::from_name("gaussian", Vector3::zeros(), Vector3::new(1.0, 2.0, 0.5)).unwrap();
        let p = g.box_probability(&Vector3::repeat(-20.0), &Vector3::repeat(20.0));
        assert!((p - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn pauli_matches_formula(v in proptest::array::uniform3(-0.28..0.28f64), n in 0usize..3, m in 0usize..3) {
            let j = Vector3::from(v);
            prop_assert!((single_atom_product(&j, n, m) - single_atom_product_formula(&j, n, m)).norm() < 1e-15);
        }

        #[test]
        fn seeds_deterministic(seed in any::<u64>(), n in 1usize..50) {
            let a = sample_clouds(&unit_box(), n, 3, seed).unwrap();
            let b = sample_clouds(&unit_box(), n, 3, seed).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
