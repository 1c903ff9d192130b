use lightatom::medium::{InteractionCoefficients, Spin, UniformSpinField};
use lightatom::modes::{hermite_gauss_basis, overlap_field, TransverseGrid};
use lightatom::qops::{
    mode_summed_stokes, spin_first_order, spin_second_order_terms, stokes_first_order, EnsembleGrid,
    EnsembleSamples, SpinTermValue, StokesField,
};
use lightatom::quadrature::UniformAxis;
use nalgebra::Vector3;
use std::f64::consts::PI;

const K: f64 = 2.0 * PI / 0.8;

#[test]
fn integrated_stokes_is_mode_sum() {
    let basis = hermite_gauss_basis(3, K, 3.0).unwrap();
    let z = 0.4 * basis[0].z0();
    let grid = TransverseGrid::for_beam(basis[0].width(z), 128, z);
    let field = StokesField::new(overlap_field(&basis, &grid).unwrap());
    let integrated = field.integrated();
    let summed = mode_summed_stokes(basis.len());
    for i in 0..3 {
        let d = (&integrated[i + 1].coeff - &summed[i].coeff).camax();
        assert!(d < 1e-6, "s{} differs by {d:.3e}", i + 1);
    }
}

#[test]
fn first_order_spin_increment_is_transverse_to_z() {
    let basis = hermite_gauss_basis(2, K, 3.0).unwrap();
    let coeffs = InteractionCoefficients::new(0.1, 0.2, 0.7, 0.0);
    for j in [Vector3::new(0.3, -0.2, 0.9), Vector3::new(0.0, 1.0, 0.0)] {
        let t = spin_first_order(&basis, &Vector3::new(0.5, -0.3, 1.0), &coeffs, &j);
        assert_eq!(t.direction.z, 0.0);
        assert!(t.direction.dot(&j).abs() < 1e-15);
        let SpinTermValue::Quadratic(op) = t.value else { panic!("expected quadratic") };
        assert!(op.is_hermitian(1e-14));
    }
    // J ∥ e_z: no increment
    let t = spin_first_order(&basis, &Vector3::zeros(), &coeffs, &Vector3::new(0.0, 0.0, 0.5));
    assert_eq!(t.direction.norm(), 0.0);
}

#[test]
fn single_mode_real_overlap_has_no_dipole_dipole_term() {
    let basis = hermite_gauss_basis(0, K, 3.0).unwrap();
    let field = UniformSpinField::everywhere(0.5, Spin::classical(Vector3::new(0.1, 0.2, 0.6)));
    let grid = EnsembleGrid::new(UniformAxis::symmetric(9.0, 21), UniformAxis::symmetric(9.0, 21), UniformAxis::new(-0.5, 0.5, 1));
    let samples = EnsembleSamples::new(&basis, &field, &grid);
    let coeffs = InteractionCoefficients::new(0.05, 0.3, 0.4, 0.0);
    let r = Vector3::new(0.2, 0.1, 0.0);
    let terms = spin_second_order_terms(&basis, &samples, &coeffs, &r, &Vector3::new(0.1, 0.2, 0.6));
    let SpinTermValue::Quadratic(a) = terms.j2a.value else { panic!() };
    assert_eq!(a.coeff.camax(), 0.0);
    // J2_B direction drops the z component
    assert_eq!(terms.j2b.direction, Vector3::new(0.1, 0.2, 0.0));
}

#[test]
fn first_order_stokes_hermitian() {
    let basis = hermite_gauss_basis(1, K, 3.0).unwrap();
    let field = UniformSpinField::everywhere(0.5, Spin::classical(Vector3::new(0.0, 0.0, 0.6)));
    let grid = EnsembleGrid::new(UniformAxis::symmetric(9.0, 15), UniformAxis::symmetric(9.0, 15), UniformAxis::symmetric(0.5, 3));
    let samples = EnsembleSamples::new(&basis, &field, &grid);
    let f = stokes_first_order(&samples, &InteractionCoefficients::new(0.05, 0.3, 0.4, 0.0));
    for q in 0..f.dim() {
        for qp in 0..f.dim() {
            for op in f.stokes(q, qp) {
                assert!(op.is_hermitian(1e-12));
            }
        }
    }
}
