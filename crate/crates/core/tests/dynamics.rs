use lightatom::dynamics::{
    apply_collective_map, beyond_paraxial_maps, beyond_paraxial_spin_increment, kappa_coupling, memory_protocol,
    multimode_weak_maps, weak_spin_increment, CollectiveMap, CollectiveModes, DynamicsError, FeedbackTarget, Frame,
    GaussianState,
};
use lightatom::medium::{InteractionCoefficients, Spin, UniformSpinField};
use lightatom::modes::hermite_gauss_basis;
use lightatom::qops::{EnsembleGrid, EnsembleSamples};
use lightatom::quadrature::UniformAxis;
use lightatom::C64;
use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use std::f64::consts::PI;

const K: f64 = 2.0 * PI / 0.8;
const W0: f64 = 3.0;

fn coeffs() -> InteractionCoefficients {
    InteractionCoefficients::new(0.02, 0.4, 0.6, 0.0)
}

fn slab_grid(z_half: f64, z_points: usize) -> EnsembleGrid {
    EnsembleGrid::new(UniformAxis::symmetric(14.0, 57), UniformAxis::symmetric(14.0, 57), UniformAxis::symmetric(z_half, z_points))
}

fn samples_with(spin: Vector3<f64>, grid: &EnsembleGrid) -> EnsembleSamples {
    let basis = hermite_gauss_basis(2, K, W0).unwrap();
    EnsembleSamples::new(&basis, &UniformSpinField::everywhere(0.6, Spin::classical(spin)), grid)
}

#[test]
fn collective_quadratures_are_canonical() {
    let basis = hermite_gauss_basis(1, K, W0).unwrap();
    let grid = EnsembleGrid::new(UniformAxis::symmetric(18.0, 121), UniformAxis::symmetric(18.0, 121), UniformAxis::symmetric(0.005, 3));
    let modes = CollectiveModes::new(&basis, &grid, 2.0, 0.5, 0.01, |_| C64::from(1.0)).unwrap();
    for m in 0..modes.n_modes() {
        for mp in 0..modes.n_modes() {
            let c = modes.commutator(m, mp);
            let want = if m == mp { C64::i() } else { C64::from(0.0) };
            assert!((c - want).norm() < 1e-6, "[X{m}, P{mp}] = {c}");
        }
    }
    let jy = vec![0.0; grid.len()];
    let (x, _) = modes.evaluate(0, &jy, &jy);
    assert_eq!(x, C64::from(0.0));
}

#[test]
fn varying_classical_mode_rejected() {
    let basis = hermite_gauss_basis(0, K, W0).unwrap();
    let grid = slab_grid(0.5, 3);
    let err = CollectiveModes::new(&basis, &grid, 1.0, 0.5, 1.0, |r| C64::from(1.0 + 0.1 * r.x)).unwrap_err();
    assert!(matches!(err, DynamicsError::NonUniformClassicalMode { .. }));
}

#[test]
fn kappa_grows_as_root_of_polarization() {
    let a = kappa_coupling(K, 0.02, 0.6, 0.3, 1e8, 2.0, 0.5, 0.01);
    let b = kappa_coupling(K, 0.02, 0.6, 0.3, 1e8, 2.0, 2.0, 0.01);
    assert!((b / a - 2.0).abs() < 1e-14);
}

#[test]
fn weak_maps_at_waist_leave_p_untouched() {
    // a single plane at z = 0: every Ψ^{mo} is real
    let grid = EnsembleGrid::new(UniformAxis::symmetric(14.0, 57), UniformAxis::symmetric(14.0, 57), UniformAxis::new(-0.5, 0.5, 1));
    let samples = samples_with(Vector3::new(0.5, 0.0, 0.3), &grid);
    let maps = multimode_weak_maps(&samples, 0, &coeffs(), 1e6);
    assert!(maps.dp.iter().all(|v| *v == 0.0));
    assert!(maps.dx[0] > 0.0);
}

#[test]
fn classical_mode_has_no_phase_kick() {
    let samples = samples_with(Vector3::new(0.5, 0.1, 0.3), &slab_grid(40.0, 9));
    for o in 0..3 {
        let maps = multimode_weak_maps(&samples, o, &coeffs(), 1e6);
        assert_eq!(maps.dp[o], 0.0);
    }
}

#[test]
fn global_frames_reduce_to_paraxial() {
    let samples = samples_with(Vector3::new(0.5, 0.2, 0.3), &slab_grid(40.0, 9));
    let par = multimode_weak_maps(&samples, 1, &coeffs(), 1e6);
    let bp = beyond_paraxial_maps(&samples, 1, &coeffs(), 1e6, |_, _| Frame::global()).unwrap();
    for (a, b) in par.dx.iter().zip(&bp.dx).chain(par.dp.iter().zip(&bp.dp)) {
        assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-300) || a == b);
    }
    let basis = hermite_gauss_basis(2, K, W0).unwrap();
    let r = Vector3::new(0.4, -1.0, 3.0);
    let j = Vector3::new(0.5, 0.2, 0.3);
    let weak = weak_spin_increment(&basis, 0, &r, &j, &coeffs(), 1e6);
    let bp = beyond_paraxial_spin_increment(&basis, 0, &r, &j, &coeffs(), 1e6, |_, _| Frame::global()).unwrap();
    for (n, (dir, p, x)) in bp.iter().enumerate() {
        assert_eq!(*dir, weak.direction);
        assert_eq!((*p, *x), (weak.p_weights[n], weak.x_weights[n]));
    }
}

#[test]
fn tilted_classical_frame_mixes_in_jy() {
    let (jy, jz, eps) = (0.2, 0.3, 1e-3);
    let grid = slab_grid(40.0, 9);
    let tilted = samples_with(Vector3::new(0.5, jy, jz), &grid);
    let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), eps);
    let bp = beyond_paraxial_maps(&tilted, 0, &coeffs(), 1e6, |m, _| if m == 0 { Frame::rotated(&rot) } else { Frame::global() })
        .unwrap();
    // e_oz = (0, −sin ε, cos ε): the effective longitudinal spin is J_z cos ε − J_y sin ε
    let eff = samples_with(Vector3::new(0.5, 0.0, jz * eps.cos() - jy * eps.sin()), &grid);
    let want = multimode_weak_maps(&eff, 0, &coeffs(), 1e6);
    for (a, b) in bp.dx.iter().zip(&want.dx) {
        assert!((a - b).abs() < 1e-13 * a.abs().max(1e-12));
    }
    let flat = multimode_weak_maps(&tilted, 0, &coeffs(), 1e6);
    let slope = (bp.dx[0] - flat.dx[0]) / eps;
    assert!((slope / flat.dx[0] + jy / jz).abs() < 1e-2);
}

#[test]
fn skewed_frame_rejected() {
    let samples = samples_with(Vector3::new(0.5, 0.2, 0.3), &slab_grid(1.0, 3));
    let bad = Frame { x: Vector3::x(), y: Vector3::new(0.1, 1.0, 0.0), z: Vector3::z() };
    let err = beyond_paraxial_maps(&samples, 0, &coeffs(), 1e6, |_, _| bad).unwrap_err();
    assert!(matches!(err, DynamicsError::FrameNotOrthonormal { .. }));
}

#[test]
fn memory_with_unit_kappa_transfers_light() {
    // coherent input on the light, vacuum atoms
    let mut mean = DVector::zeros(4);
    mean.copy_from_slice(&[0.4, -1.3, 0.0, 0.0]);
    let state = GaussianState::new(mean, DMatrix::identity(4, 4) * 0.5).unwrap();
    let map = CollectiveMap::new(1.0, 1);
    let out = memory_protocol(&state, &map, -1.0, FeedbackTarget::PA, None).unwrap();
    // X_A′ = X_A + P_P carries P_P,in; P_A″ = P_A − X_P′ = −X_P,in
    assert!((out.stored_mean[0] + 1.3).abs() < 1e-14);
    assert!((out.stored_mean[1] + 0.4).abs() < 1e-14);
    let after = apply_collective_map(&state, &map).unwrap();
    assert!(after.satisfies_uncertainty(1e-12));
}
