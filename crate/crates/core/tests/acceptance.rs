//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any
//! criterion fails other than those listed in `KNOWN_UNATTAINABLE`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lightatom::dynamics::{
    apply_collective_map, beyond_paraxial_maps, multimode_weak_maps, paraxial_spin_map, paraxial_stokes_map,
    CollectiveMap, Frame, GaussianState,
};
use lightatom::medium::{lorentz_lorenz, lorentz_lorenz_series, InteractionCoefficients, Spin, UniformSpinField};
use lightatom::modes::{hermite_gauss_basis, overlap_field, tensor_basis, TransverseGrid};
use lightatom::pointgas::{sample_cloud, sample_clouds, scattering_statistics, scattering_sum, Profile};
use lightatom::propagator::{
    greens_reciprocity_residual, short_propagator_closed, short_propagator_quadrature, spin_decay_rates, GreensSum,
};
use lightatom::qops::{
    s2c_contraction_max, stokes_mode_pair, stokes_second_order_terms, su2_residual, EnsembleGrid, EnsembleSamples,
};
use lightatom::quadrature::UniformAxis;
use lightatom::regime::{check_light_series, fresnel_check, Scenario};
use lightatom::C64;
use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The partial sum at V = 0.9 − ε has ratio 0.6 and 30 terms leave a
/// truncation error of ~1e−7, far above 1e−12.
const KNOWN_UNATTAINABLE: &[u32] = &[6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed<F: FnOnce() -> Outcome>(limit: Duration, f: F) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let dt = t.elapsed();
    o.detail = format!("{}; {:.2}s (limit {:.0}s)", o.detail, dt.as_secs_f64(), limit.as_secs_f64());
    o.pass &= dt < limit;
    o
}

fn rho_oracle() -> Outcome {
    timed(Duration::from_secs(5), || {
        let k = 1.7;
        let mut worst = 0.0f64;
        for i in 0..20 {
            let a0 = 0.2 + 2.8 * i as f64 / 19.0;
            for j in 0..20 {
                let a1 = (a0 - 0.0501) * j as f64 / 19.0;
                let c = short_propagator_closed(a0, a1, k).expect("inside domain");
                let q = short_propagator_quadrature(a0, a1, k, 128).expect("inside domain");
                worst = worst.max(c.max_relative_difference(&q));
            }
        }
        let iso = short_propagator_closed(1.0, 0.0, k).unwrap();
        let want = k.powi(3) / (3.0 * PI);
        let iso_err = [iso.rho_par, iso.rho_perp].iter().map(|v| (v - want).abs() / want).fold(iso.rho_gamma.abs(), f64::max);
        outcome(worst < 1e-10 && iso_err < 1e-12, format!("max rel {worst:.2e} (tol 1e-10), isotropic {iso_err:.2e} (tol 1e-12)"))
    })
}

fn spin_decay() -> Outcome {
    let mut ok = true;
    for (a1, beta, c1, d) in [(0.0, 1.0, 1.0, 1.0), (0.3, 0.7, 1.9, 2.5), (0.6, 3.1, 0.2, 0.05)] {
        let c = short_propagator_closed(1.0, a1, 2.0).unwrap();
        let r = spin_decay_rates(&c, c1, beta, d);
        ok &= r[0] == 2.0 * r[1] && r[1] == r[2] && r[1] > 0.0;
    }
    outcome(ok, "x:y:z = 2:1:1 exactly for three media".into())
}

fn su2_algebra() -> Outcome {
    timed(Duration::from_secs(1), || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let dim = rng.gen_range(2..40);
            let q = rng.gen_range(0..dim);
            let qp = (q + rng.gen_range(1..dim)) % dim;
            worst = worst.max(su2_residual(&stokes_mode_pair(dim, q, qp).unwrap()));
        }
        outcome(worst < 1e-13, format!("max residual {worst:.2e} over 50 pairs (tol 1e-13)"))
    })
}

fn second_order_consistency() -> Outcome {
    // exact in the paraxial frame; rotated frames only to rounding
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut c_max, mut c_rot) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let j = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        c_max = c_max.max(s2c_contraction_max(&j, &[Vector3::x(), Vector3::y()]));
        let axis = Unit::new_normalize(Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(-PI..PI));
        c_rot = c_rot.max(s2c_contraction_max(&j, &[rot * Vector3::x(), rot * Vector3::y()]));
    }

    let k = 2.0 * PI / 0.8;
    let basis = hermite_gauss_basis(0, k, 3.0).unwrap();
    let field = UniformSpinField::everywhere(0.8, Spin::classical(Vector3::new(0.2, 0.1, 0.7)));
    let grid = EnsembleGrid::new(UniformAxis::symmetric(12.0, 41), UniformAxis::symmetric(12.0, 41), UniformAxis::symmetric(1.0, 5));
    let samples = EnsembleSamples::new(&basis, &field, &grid);
    let coeffs = InteractionCoefficients::new(0.01, 0.5, 0.3, 0.0);
    let column: f64 = samples.samples.iter().map(|s| s.weight * s.rho * s.spin.vector.z * s.amplitudes[0].norm_sqr()).sum();
    let phi = k * coeffs.beta * coeffs.c1 * column;
    let so = stokes_second_order_terms(&samples, &coeffs);
    let (ca, cb) = so.c(0, 1);
    c_max = c_max.max(ca.max_abs()).max(cb.max_abs());
    let s = stokes_mode_pair(2, 0, 1).unwrap();
    let ab = so.stokes_ab(0, 1);
    let h = C64::from(0.5 * phi * phi);
    let err = (&ab[0].coeff + &s[0].coeff * h).camax().max((&ab[1].coeff + &s[1].coeff * h).camax()) / h.re;
    outcome(
        c_max == 0.0 && c_rot < 1e-15 && err < 1e-12,
        format!("S2_C max {c_max:e} (exact 0; rotated frames {c_rot:.1e}), AB vs -phi^2/2 rel {err:.2e} (tol 1e-12)"),
    )
}

fn memory_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sym, mut var) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let kappa = rng.gen_range(-3.0..3.0);
        let map = CollectiveMap::new(kappa, 1);
        sym = sym.max(map.symplectic_residual());
        let out = apply_collective_map(&GaussianState::vacuum(1), &map).unwrap();
        var = var.max((out.cov[(2, 2)] - (0.5 + 0.5 * kappa * kappa)).abs());
    }
    let mut invariant = true;
    for _ in 0..100 {
        let s3 = rng.gen_range(-1.0..1.0);
        let out = paraxial_stokes_map([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), s3], rng.gen_range(-0.5..0.5));
        invariant &= out[2] == s3;
        let j = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let omega = Vector3::z() * rng.gen_range(-0.5..0.5);
        invariant &= paraxial_spin_map(&j, &omega).z == j.z;
    }
    outcome(
        sym < 1e-13 && var < 1e-14 && invariant,
        format!("symplectic {sym:.2e} (tol 1e-13), Var(X_A') {var:.2e} (tol 1e-14), s3/J_z invariant: {invariant}"),
    )
}

fn lorentz_lorenz_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for v in [0.1, 0.3, 0.9 - 1e-9] {
        let e = (lorentz_lorenz_series(v, 30).unwrap() - lorentz_lorenz(v)).abs();
        parts.push(format!("V={v:.3}: {e:.2e}"));
        worst = worst.max(e);
    }
    outcome(worst < 1e-12, format!("{} (tol 1e-12)", parts.join(", ")))
}

fn point_gas() -> Outcome {
    timed(Duration::from_secs(10), || {
        let profile = Profile::UniformBox { center: Vector3::zeros(), half_extent: Vector3::new(1.0, 1.0, 1.0) };
        let cloud = sample_cloud(&profile, 100, 17).unwrap();
        let forward = scattering_sum(&cloud, &Vector3::zeros());
        let clouds = sample_clouds(&profile, 100, 256, 17).unwrap();
        let stats = scattering_statistics(&clouds, &Vector3::new(300.0, 0.0, 0.0));
        let z = stats.z_score(100.0);
        outcome(
            forward == 1e4 && z < 5.0,
            format!("forward {forward} (exact 1e4), incoherent mean {:.2} ± {:.2}, z = {z:.2} (< 5)", stats.mean, stats.std_err),
        )
    })
}

fn mode_hygiene() -> Outcome {
    let k = 2.0 * PI / 0.8;
    let basis = tensor_basis(6, k, 4.0).unwrap();
    let z0 = basis[0].z0();
    let mut ortho = 0.0f64;
    for z in [0.0, 0.5 * z0, 2.0 * z0] {
        let grid = TransverseGrid::for_beam(basis[0].width(z), 128, z);
        ortho = ortho.max(overlap_field(&basis, &grid).unwrap().orthonormality_error());
    }
    let sum = GreensSum::vacuum_box(32, 10.0, 2.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let pairs: Vec<_> = (0..5)
        .map(|_| {
            let mut v = || Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (r, rp) = (v(), v());
            let tp = rng.gen_range(0.0..1.0);
            (r, tp + rng.gen_range(0.0..1.0), rp, tp)
        })
        .collect();
    let recip = greens_reciprocity_residual(&sum, &pairs);
    outcome(ortho < 1e-6 && recip < 1e-10, format!("orthonormality {ortho:.2e} (tol 1e-6), reciprocity {recip:.2e} (tol 1e-10)"))
}

fn regime_anchor() -> Outcome {
    let fresnel = (0..=100).all(|order| fresnel_check(1e4, order).pass);
    let s = Scenario::new(1.0, 1e8, 1e6, Some(30.0), None, 0.01, 0.01, 1e-7, 1e3, 1.0, 1e-3).unwrap();
    let light = check_light_series(&s);
    let ok = light.iter().all(|c| c.pass);
    let values: Vec<String> = light.iter().map(|c| format!("{:.2e}", c.value)).collect();
    outcome(fresnel && ok, format!("F = 1e4 passes up to m+n = 100: {fresnel}; light checks [{}] < 0.1", values.join(", ")))
}

fn beyond_paraxial() -> Outcome {
    let k = 2.0 * PI / 0.8;
    let basis = hermite_gauss_basis(3, k, 3.0).unwrap();
    let field = UniformSpinField::everywhere(0.6, Spin::classical(Vector3::new(0.5, 0.2, 0.3)));
    let grid = EnsembleGrid::new(UniformAxis::symmetric(14.0, 41), UniformAxis::symmetric(14.0, 41), UniformAxis::symmetric(40.0, 7));
    let samples = EnsembleSamples::new(&basis, &field, &grid);
    let coeffs = InteractionCoefficients::new(0.02, 0.4, 0.6, 0.0);
    let mut worst = 0.0f64;
    for o in 0..basis.len() {
        let par = multimode_weak_maps(&samples, o, &coeffs, 1e6);
        let bp = beyond_paraxial_maps(&samples, o, &coeffs, 1e6, |_, _| Frame::global()).unwrap();
        let scale = par.dx.iter().chain(&par.dp).fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in par.dx.iter().zip(&bp.dx).chain(par.dp.iter().zip(&bp.dp)) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    outcome(worst < 1e-13, format!("max rel deviation {worst:.2e} over {} classical modes (tol 1e-13)", basis.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "rho coefficients: closed form vs quadrature", rho_oracle),
        (2, "spin-decay anisotropy 2:1:1", spin_decay),
        (3, "Stokes su(2) algebra", su2_algebra),
        (4, "second-order Stokes consistency", second_order_consistency),
        (5, "symplectic memory map", memory_map),
        (6, "Lorentz-Lorenz series", lorentz_lorenz_check),
        (7, "point-gas coherent/incoherent split", point_gas),
        (8, "mode orthonormality and reciprocity", mode_hygiene),
        (9, "regime checker anchor", regime_anchor),
        (10, "beyond-paraxial reduction", beyond_paraxial),
    ];
    let mut unexpected = 0;
    for (id, name, f) in criteria {
        let o = f();
        let known = KNOWN_UNATTAINABLE.contains(&id);
        println!(
            "{} criterion {id:>2}: {name}: {}{}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            if !o.pass && known { " [known unattainable]" } else { "" }
        );
        if !o.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
