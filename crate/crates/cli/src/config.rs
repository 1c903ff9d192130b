use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::CliError;

pub const ANALYSES: [&str; 5] = ["rho-coefficients", "stokes-map", "memory-protocol", "pointgas", "regime"];

/// Smallest transverse grid accepted for overlap quadratures.
pub const MIN_GRID_POINTS: usize = 16;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub analyses: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub basis: Option<BasisConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub medium: Option<MediumConfig>,
    #[serde(default)]
    pub stokes: Option<StokesConfig>,
    #[serde(default)]
    pub memory: Option<MemoryConfig>,
    #[serde(default)]
    pub pointgas: Option<PointGasConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kappa: f64,
    pub n_p: f64,
    pub n_a: f64,
    #[serde(default)]
    pub od: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    pub d: f64,
    pub length: f64,
    pub lambda: f64,
    pub delta: f64,
    pub gamma: f64,
    pub w: f64,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "default_family")]
    pub family: String,
    pub max_order: usize,
    pub w0: f64,
    pub k: f64,
}

fn default_family() -> String {
    "hermite-gauss".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_points")]
    pub points: usize,
    /// Detector plane position.
    #[serde(default)]
    pub z: f64,
}

fn default_points() -> usize {
    lightatom::modes::DEFAULT_GRID_POINTS
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points: default_points(), z: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub a0: f64,
    pub a1: f64,
    pub k_l: f64,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

fn default_nodes() -> usize {
    128
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesConfig {
    pub beta: f64,
    pub c1: f64,
    /// Atomic density of the uniform slab.
    pub rho: f64,
    /// Mean spin J̄ per atom.
    pub spin: [f64; 3],
    /// Slab length along z.
    pub length: f64,
    /// Coherent amplitudes (re, im) of the x and y components of mode 0.
    #[serde(default = "default_alpha")]
    pub alpha_x: [f64; 2],
    #[serde(default = "default_alpha")]
    pub alpha_y: [f64; 2],
}

fn default_alpha() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    XA,
    PA,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    pub kappa: f64,
    #[serde(default)]
    pub gain: f64,
    #[serde(default = "default_target")]
    pub target: Target,
    /// (X_P, P_P, X_A, P_A) input means.
    #[serde(default)]
    pub input_mean: [f64; 4],
    /// Diagonal input variances; vacuum is ½.
    #[serde(default = "default_variance")]
    pub input_variance: [f64; 4],
}

fn default_target() -> Target {
    Target::XA
}

fn default_variance() -> [f64; 4] {
    [0.5; 4]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointGasConfig {
    #[serde(default = "default_profile")]
    pub profile: String,
    pub n_atoms: usize,
    pub batches: usize,
    /// Box half-extent or Gaussian σ per axis.
    pub size: [f64; 3],
    /// |Δk| along x for the incoherent sum.
    pub delta_k: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn default_profile() -> String {
    "uniform-box".into()
}

fn default_cells() -> usize {
    4
}

fn invalid(field: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {why}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Value, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_value(v: Value) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (i, a) in self.analyses.iter().enumerate() {
            if !ANALYSES.contains(&a.as_str()) {
                return Err(invalid(&format!("analyses[{i}]"), format!("unknown analysis '{a}' (known: {})", ANALYSES.join(", "))));
            }
        }
        if self.grid.points < MIN_GRID_POINTS {
            return Err(invalid("grid.points", format!("must be at least {MIN_GRID_POINTS} (got {})", self.grid.points)));
        }
        let needs = |name: &str| self.analyses.iter().any(|a| a == name);
        if needs("rho-coefficients") && self.medium.is_none() {
            return Err(invalid("medium", "required by rho-coefficients"));
        }
        if needs("stokes-map") {
            if self.stokes.is_none() {
                return Err(invalid("stokes", "required by stokes-map"));
            }
            match &self.basis {
                None => return Err(invalid("basis", "required by stokes-map")),
                Some(b) if b.family != "hermite-gauss" => {
                    return Err(invalid("basis.family", format!("unsupported family '{}'", b.family)))
                }
                Some(b) if !(b.w0 > 0.0 && b.k > 0.0) => return Err(invalid("basis", "w0 and k must be positive")),
                _ => {}
            }
        }
        if needs("memory-protocol") && self.memory.is_none() {
            return Err(invalid("memory", "required by memory-protocol"));
        }
        if let Some(m) = &self.memory {
            if m.input_variance.iter().any(|v| !(*v > 0.0)) {
                return Err(invalid("memory.input_variance", "variances must be positive"));
            }
        }
        if needs("pointgas") {
            let Some(p) = &self.pointgas else {
                return Err(invalid("pointgas", "required by pointgas"));
            };
            if p.n_atoms == 0 {
                return Err(invalid("pointgas.n_atoms", "must be at least 1"));
            }
            if p.batches < lightatom::pointgas::MIN_BATCHES {
                return Err(invalid("pointgas.batches", format!("must be at least {}", lightatom::pointgas::MIN_BATCHES)));
            }
            if p.cells == 0 {
                return Err(invalid("pointgas.cells", "must be at least 1"));
            }
        }
        if needs("regime") && self.scenario.is_none() {
            return Err(invalid("scenario", "required by regime"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (key-sorted) JSON form.
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Dotted (`memory.kappa`) or pointer (`/memory/kappa`) path → JSON pointer.
pub fn to_pointer(path: &str) -> String {
    if path.starts_with('/') {
        path.to_string()
    } else {
        format!("/{}", path.replace('.', "/"))
    }
}

/// Overwrites the scalar at `path` with `value`.
pub fn set_param(cfg: &mut Value, path: &str, value: f64) -> Result<(), CliError> {
    let ptr = to_pointer(path);
    let slot = cfg.pointer_mut(&ptr).ok_or_else(|| CliError::BadParameterPath(path.to_string()))?;
    if !slot.is_number() {
        return Err(CliError::BadParameterPath(format!("{path} does not name a numeric field")));
    }
    *slot = if value.fract() == 0.0 && slot.is_u64() && value >= 0.0 {
        Value::from(value as u64)
    } else {
        Value::from(value)
    };
    Ok(())
}
