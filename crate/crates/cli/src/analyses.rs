use lightatom::dynamics::{
    apply_collective_map, memory_protocol, paraxial_stokes_map, CollectiveMap, FeedbackTarget, GaussianState,
};
use lightatom::modes::{hermite_gauss_basis, overlap_field, TransverseGrid};
use lightatom::pointgas::{
    density_correlation, sample_clouds, scattering_statistics, scattering_sum, CellGrid, Profile,
};
use lightatom::propagator::{short_propagator_closed, short_propagator_quadrature};
use lightatom::qops::{index, Pol, StokesField};
use lightatom::regime::{regime_report, Scenario};
use lightatom::C64;
use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{RunConfig, Target};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push_f64(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }
}

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub name: &'static str,
    pub summary: Value,
    pub table: Table,
}

fn failed(name: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Analysis(format!("{name}: {e}"))
}

pub fn run_analysis(name: &str, cfg: &RunConfig) -> Result<AnalysisOutput, CliError> {
    match name {
        "rho-coefficients" => rho_coefficients(cfg),
        "stokes-map" => stokes_map(cfg),
        "memory-protocol" => memory(cfg),
        "pointgas" => pointgas(cfg),
        "regime" => regime(cfg),
        other => Err(CliError::Config(format!("analyses: unknown analysis '{other}'"))),
    }
}

fn rho_coefficients(cfg: &RunConfig) -> Result<AnalysisOutput, CliError> {
    const NAME: &str = "rho-coefficients";
    let m = cfg.medium.as_ref().expect("validated");
    let closed = short_propagator_closed(m.a0, m.a1, m.k_l).map_err(|e| failed(NAME, e))?;
    let quad = short_propagator_quadrature(m.a0, m.a1, m.k_l, m.quadrature_nodes).map_err(|e| failed(NAME, e))?;
    let rel = closed.max_relative_difference(&quad);
    let mut table = Table::new(&[
        "a0", "a1", "k_l", "rho_par", "rho_perp", "rho_gamma", "quad_rho_par", "quad_rho_perp", "quad_rho_gamma",
        "max_rel_diff",
    ]);
    table.push_f64(&[
        m.a0, m.a1, m.k_l, closed.rho_par, closed.rho_perp, closed.rho_gamma, quad.rho_par, quad.rho_perp,
        quad.rho_gamma, rel,
    ]);
    Ok(AnalysisOutput {
        name: NAME,
        summary: json!({
            "a0": m.a0, "a1": m.a1, "k_l": m.k_l,
            "rho_par": closed.rho_par, "rho_perp": closed.rho_perp, "rho_gamma": closed.rho_gamma,
            "quad_rho_par": quad.rho_par, "quad_rho_perp": quad.rho_perp, "quad_rho_gamma": quad.rho_gamma,
            "max_rel_diff": rel, "near_singular": closed.near_singular,
        }),
        table,
    })
}

fn stokes_map(cfg: &RunConfig) -> Result<AnalysisOutput, CliError> {
    const NAME: &str = "stokes-map";
    let b = cfg.basis.as_ref().expect("validated");
    let s = cfg.stokes.as_ref().expect("validated");
    let basis = hermite_gauss_basis(b.max_order, b.k, b.w0).map_err(|e| failed(NAME, e))?;
    let grid = TransverseGrid::for_beam(basis[0].width(cfg.grid.z), cfg.grid.points, cfg.grid.z);
    let field = overlap_field(&basis, &grid).map_err(|e| failed(NAME, e))?;
    let ortho = field.orthonormality_error();
    let stokes = StokesField::new(field);
    let mut alpha = vec![C64::from(0.0); stokes.dim()];
    alpha[index(0, Pol::X)] = C64::new(s.alpha_x[0], s.alpha_x[1]);
    alpha[index(0, Pol::Y)] = C64::new(s.alpha_y[0], s.alpha_y[1]);
    // uniform slab: φ = kβc1ρJ_zL at every transverse point
    let phi = b.k * s.beta * s.c1 * s.rho * s.spin[2] * s.length;

    let rows: Vec<[f64; 9]> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let ops = stokes.at(p);
            let v = ops.map(|o| o.expectation_coherent(&alpha).re);
            let out = paraxial_stokes_map([v[1], v[2], v[3]], phi);
            let r = grid.point(p);
            [r.x, r.y, v[0], v[1], v[2], v[3], out[0], out[1], out[2]]
        })
        .collect();
    let mut totals = [0.0f64; 7];
    for (p, row) in rows.iter().enumerate() {
        let w = grid.weight(p);
        for (t, v) in totals.iter_mut().zip(&row[2..]) {
            *t += w * v;
        }
    }
    let mut table = Table::new(&["x", "y", "s0", "s1_in", "s2_in", "s3_in", "s1_out", "s2_out", "s3_out"]);
    for r in &rows {
        table.push_f64(r);
    }
    Ok(AnalysisOutput {
        name: NAME,
        summary: json!({
            "phi": phi,
            "n_modes": basis.len(),
            "grid_points": cfg.grid.points,
            "orthonormality_error": ortho,
            "s0_total": totals[0],
            "s1_in_total": totals[1], "s2_in_total": totals[2], "s3_in_total": totals[3],
            "s1_out_total": totals[4], "s2_out_total": totals[5], "s3_out_total": totals[6],
        }),
        table,
    })
}

fn memory(cfg: &RunConfig) -> Result<AnalysisOutput, CliError> {
    const NAME: &str = "memory-protocol";
    let m = cfg.memory.as_ref().expect("validated");
    let state = GaussianState::new(
        DVector::from_column_slice(&m.input_mean),
        DMatrix::from_diagonal(&DVector::from_column_slice(&m.input_variance)),
    )
    .map_err(|e| failed(NAME, e))?;
    let map = CollectiveMap::new(m.kappa, 1);
    let out = apply_collective_map(&state, &map).map_err(|e| failed(NAME, e))?;
    let target = match m.target {
        Target::XA => FeedbackTarget::XA,
        Target::PA => FeedbackTarget::PA,
    };
    let mem = memory_protocol(&state, &map, m.gain, target, None).map_err(|e| failed(NAME, e))?;
    let values = [
        ("kappa", m.kappa),
        ("gain", m.gain),
        ("var_xp_after_map", out.cov[(0, 0)]),
        ("var_pp_after_map", out.cov[(1, 1)]),
        ("var_xa_after_map", out.cov[(2, 2)]),
        ("var_pa_after_map", out.cov[(3, 3)]),
        ("symplectic_residual", map.symplectic_residual()),
        ("uncertainty_min_eigenvalue", out.uncertainty_min_eigenvalue()),
        ("measurement", mem.measurement[0]),
        ("conditional_var_xa", mem.conditional_cov[(0, 0)]),
        ("conditional_var_pa", mem.conditional_cov[(1, 1)]),
        ("stored_mean_xa", mem.stored_mean[0]),
        ("stored_mean_pa", mem.stored_mean[1]),
        ("stored_var_xa", mem.stored_cov[(0, 0)]),
        ("stored_var_pa", mem.stored_cov[(1, 1)]),
    ];
    let mut table = Table::new(&values.map(|v| v.0));
    table.push_f64(&values.map(|v| v.1));
    let mut summary = serde_json::Map::new();
    for (k, v) in values {
        summary.insert(k.into(), json!(v));
    }
    summary.insert("target".into(), json!(m.target));
    Ok(AnalysisOutput { name: NAME, summary: Value::Object(summary), table })
}

fn pointgas(cfg: &RunConfig) -> Result<AnalysisOutput, CliError> {
    const NAME: &str = "pointgas";
    let p = cfg.pointgas.as_ref().expect("validated");
    let size = Vector3::from(p.size);
    let profile = Profile::from_name(&p.profile, Vector3::zeros(), size)
        .map_err(|e| CliError::Config(format!("pointgas.profile: {e}")))?;
    let clouds = sample_clouds(&profile, p.n_atoms, p.batches, cfg.seed).map_err(|e| failed(NAME, e))?;
    let dk = Vector3::new(p.delta_k, 0.0, 0.0);
    let extent = match profile {
        Profile::UniformBox { .. } => size,
        Profile::Gaussian { .. } => size * 3.0,
    };
    let cells = CellGrid::new(-extent, extent, p.cells);
    let corr = density_correlation(&clouds, &cells).map_err(|e| failed(NAME, e))?;
    let stats = scattering_statistics(&clouds, &dk);
    let n = p.n_atoms as f64;
    let mut table = Table::new(&["batch", "forward_sum", "scattered_sum"]);
    let mut forward_exact = true;
    for (b, c) in clouds.iter().enumerate() {
        let f = scattering_sum(c, &Vector3::zeros());
        forward_exact &= f == n * n;
        table.rows.push(vec![b.to_string(), fmt_f64(f), fmt_f64(scattering_sum(c, &dk))]);
    }
    Ok(AnalysisOutput {
        name: NAME,
        summary: json!({
            "profile": profile.name(),
            "n_atoms": p.n_atoms,
            "batches": p.batches,
            "seed": cfg.seed,
            "delta_k": p.delta_k,
            "forward_equals_n_squared": forward_exact,
            "scattered_mean": stats.mean,
            "scattered_std_err": stats.std_err,
            "scattered_z_score_vs_n": stats.z_score(n),
            "scattered_variance_over_n2": stats.variance / (n * n),
            "density_self_term": corr.self_term,
            "density_fraction_within_3sigma": corr.fraction_within(3.0),
        }),
        table,
    })
}

fn regime(cfg: &RunConfig) -> Result<AnalysisOutput, CliError> {
    const NAME: &str = "regime";
    let s = cfg.scenario.as_ref().expect("validated");
    let sc = Scenario::new(s.kappa, s.n_p, s.n_a, s.od, s.rho, s.d, s.length, s.lambda, s.delta, s.gamma, s.w)
        .map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    let report = regime_report(&sc, s.m, s.n);
    let mut table = Table::new(&["check", "value", "threshold", "margin", "pass"]);
    let mut checks = Vec::new();
    for c in report.checks() {
        table.rows.push(vec![
            c.name.to_string(),
            fmt_f64(c.value),
            fmt_f64(c.threshold),
            fmt_f64(c.margin),
            c.pass.to_string(),
        ]);
        checks.push(json!({"name": c.name, "value": c.value, "threshold": c.threshold, "margin": c.margin, "pass": c.pass}));
    }
    let light_pass = report.light.iter().all(|c| c.pass);
    let spin_pass = report.spin.iter().all(|c| c.pass);
    Ok(AnalysisOutput {
        name: NAME,
        summary: json!({
            "od": sc.od,
            "checks": checks,
            "light_series_pass": light_pass,
            "spin_series_pass": spin_pass,
            "fresnel_pass": report.fresnel.pass,
            "verdict": report.verdict,
            "report": report.to_string(),
        }),
        table,
    })
}
