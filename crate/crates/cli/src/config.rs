//! Run configuration: a flat JSON document whose keys can be overridden by
//! command-line flags. Everything is validated before any output is written.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nsdarcy::analysis::{builtin_suite, lid_driven_case, InfSupPair, DEFAULT_C_MULT};
use nsdarcy::gmsh::load_gmsh_subset;
use nsdarcy::solver::SolverConfig;
use nsdarcy::{build_rectangle_mesh, MixedMesh, ModelParams, PressureNormalization};
use serde::{Deserialize, Serialize};

/// Data set used by `solve`. Named suite cases carry their own
/// coefficients; `constant` and `lid_driven` take ν, G and 𝕂 from the config.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum DataCase {
    #[default]
    Constant,
    UniformPush,
    Swirl,
    PorousSource,
    Anisotropic,
    Mixed,
    LidDriven,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MmsKind {
    #[default]
    Smooth,
    Representable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `builtin:WxH` (cells across × cells up on (0,1)×(0,2)) or a mesh file.
    pub mesh: String,
    /// Uniform refinements applied to the mesh before `solve` and `mesh-info`.
    pub refine: usize,
    /// Refinement levels of the `verify` compensation sweep (default 3) and
    /// of `mms` (default 4).
    pub levels: Option<usize>,
    pub case: DataCase,
    pub nu: f64,
    pub friction: f64,
    pub permeability: [[f64; 2]; 2],
    pub sigma: Option<f64>,
    pub convection: bool,
    /// Constant body force of the `constant` case.
    pub fluid_force: [f64; 2],
    /// Constant porous source of the `constant` case.
    pub porous_source: f64,
    /// Multiplies all data of the selected case.
    pub amplitude: f64,
    pub pressure: PressureNormalization,
    /// Nonlinear solver settings; `mms` defaults to a relative tolerance of
    /// 1e-12 so that representable solutions are reproduced.
    pub solver: Option<SolverConfig>,
    pub c_mult: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Velocity/pressure pair checked by `verify`.
    pub pair: InfSupPair,
    pub mms_case: MmsKind,
    /// Fail `mms` when observed rates leave their bands.
    pub assert_rates: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: "builtin:2x4".into(),
            refine: 0,
            levels: None,
            case: DataCase::Constant,
            nu: 1.0,
            friction: 1.0,
            permeability: [[1.0, 0.0], [0.0, 1.0]],
            sigma: None,
            convection: true,
            fluid_force: [1.0, 0.0],
            porous_source: 0.0,
            amplitude: 1.0,
            pressure: PressureNormalization::ZeroMean,
            solver: None,
            c_mult: DEFAULT_C_MULT,
            seed: 0,
            out: PathBuf::from("out"),
            pair: InfSupPair::TaylorHood,
            mms_case: MmsKind::Smooth,
            assert_rates: true,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("malformed config {}: {e}", path.display())))
    }

    /// Check scalar ranges, the solver settings and the output path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [("nu", self.nu), ("friction", self.friction), ("c_mult", self.c_mult)] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return fail(format!("sigma must be positive, got {s}"));
            }
        }
        if !self.amplitude.is_finite() {
            return fail("amplitude must be finite");
        }
        if self.levels == Some(0) {
            return fail("levels must be at least 1");
        }
        let k = self.permeability;
        if k[0][1] != k[1][0] {
            return fail("permeability must be symmetric");
        }
        if permeability_bounds(k).0 <= 0.0 {
            return fail("permeability must be positive definite");
        }
        if let Some(s) = &self.solver {
            s.validate().map_err(|e| ConfigError(e.to_string()))?;
        }
        if self.out.is_file() {
            return fail(format!("output path {} is a file", self.out.display()));
        }
        Ok(())
    }

    pub fn solver_or(&self, default: SolverConfig) -> SolverConfig {
        self.solver.clone().unwrap_or(default)
    }

    pub fn load_mesh(&self) -> Result<MixedMesh, ConfigError> {
        let mut mesh = parse_mesh_spec(&self.mesh)?;
        for _ in 0..self.refine {
            mesh = mesh.refine_uniform();
        }
        Ok(mesh)
    }

    /// Model data of the selected case, with the config's σ, convection flag
    /// and amplitude applied.
    pub fn params(&self) -> ModelParams {
        let base = match self.case {
            DataCase::Constant => {
                let (g, q) = (self.fluid_force, self.porous_source);
                let mut p = self.coefficients().with_fluid_force(Arc::new(move |_| g));
                if q != 0.0 {
                    p = p.with_porous_source(Arc::new(move |_| q));
                }
                p
            }
            DataCase::LidDriven => ModelParams {
                velocity_bc: lid_driven_case(self.nu).velocity_bc,
                ..self.coefficients()
            },
            named => {
                let name = match named {
                    DataCase::UniformPush => "uniform_push",
                    DataCase::Swirl => "swirl",
                    DataCase::PorousSource => "porous_source",
                    DataCase::Anisotropic => "anisotropic",
                    _ => "mixed",
                };
                builtin_suite().into_iter().find(|c| c.name == name).expect("suite case exists").params
            }
        };
        self.adjust(base).scaled_data(self.amplitude)
    }

    /// σ and the convection switch applied to externally built data.
    pub fn adjust(&self, mut p: ModelParams) -> ModelParams {
        if let Some(s) = self.sigma {
            p = p.with_sigma(s);
        }
        if !self.convection {
            p = p.without_convection();
        }
        p
    }

    fn coefficients(&self) -> ModelParams {
        let k = self.permeability;
        let (lo, hi) = permeability_bounds(k);
        ModelParams::new(self.nu)
            .with_friction(self.friction)
            .with_permeability(Arc::new(move |_| k), lo, hi)
    }
}

fn permeability_bounds(k: [[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (k[0][0] + k[1][1]);
    let r = (0.25 * (k[0][0] - k[1][1]).powi(2) + k[0][1] * k[0][1]).sqrt();
    (mean - r, mean + r)
}

/// `builtin:WxH` or a path to a `.msh` file or a mesh dump.
pub fn parse_mesh_spec(spec: &str) -> Result<MixedMesh, ConfigError> {
    if let Some(dims) = spec.strip_prefix("builtin:") {
        let parsed = dims
            .split_once('x')
            .and_then(|(w, h)| Some((w.parse::<usize>().ok()?, h.parse::<usize>().ok()?)));
        let Some((w, h)) = parsed else {
            return fail(format!("bad builtin mesh `{spec}`, expected builtin:WxH"));
        };
        if w == 0 || h < 2 || h % 2 != 0 {
            return fail(format!("builtin mesh needs W >= 1 and an even H >= 2, got {w}x{h}"));
        }
        return build_rectangle_mesh(w, h, 1.0).map_err(|e| ConfigError(e.to_string()));
    }
    let path = Path::new(spec);
    let loaded = if path.extension().is_some_and(|e| e == "msh") {
        load_gmsh_subset(path)
    } else {
        std::fs::read_to_string(path)
            .map_err(nsdarcy::MeshError::from)
            .and_then(|t| MixedMesh::from_dump(&t))
    };
    loaded.map_err(|e| ConfigError(format!("cannot load mesh {spec}: {e}")))
}
