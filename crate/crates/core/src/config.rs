//! Run configuration: one JSON document per experiment.
//!
//! Units are MPa and voxel lengths; tensors use the 6-component Voigt order
//! `(11, 22, 33, 23, 13, 12)` with tensor (not engineering) shear strains.
//! Unknown keys are rejected so that typos surface as errors naming the key.
//!
//! ```json
//! {
//!   "grid": { "dims": [64, 64, 64] },
//!   "scheme": "tetrahedral",
//!   "phases": [
//!     { "name": "matrix", "elastic": { "isotropic": { "mu_nu": { "mu": 132300.0, "nu": 0.26 } } } },
//!     { "name": "pore", "elastic": "void" }
//!   ],
//!   "geometry": { "cube": { "edge": 31, "phase": "pore" } },
//!   "reference": { "scale_matrix": 0.8 },
//!   "loading": { "stress": [-300.0, -300.0, -300.0, 0.0, 0.0, 0.0] },
//!   "tol": 1e-10,
//!   "max_iter": 1000
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::ReferenceRule;
use crate::grid::Grid;
use crate::microstructure::{gen_centered_cube, gen_centered_sphere, MaterialFields, Phase};
use crate::solver::{Algorithm, Loading, ResidualNorm, SolverOptions, SolverSetup};
use crate::stencil::Scheme;
use crate::tensor::{isotropic_stiffness, IsotropicConstants, VoigtTensor2, VoigtTensor4};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: [usize; 3],
    #[serde(default = "unit")]
    pub spacing: f64,
}

fn unit() -> f64 {
    1.0
}

/// Elastic law of one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ElasticSpec {
    Isotropic(IsotropicConstants),
    Cubic { c11: f64, c12: f64, c44: f64 },
    /// Full 6x6 Voigt stiffness.
    Voigt(VoigtTensor4),
    Void,
}

impl ElasticSpec {
    pub fn stiffness(&self) -> Result<VoigtTensor4> {
        match self {
            Self::Isotropic(c) => isotropic_stiffness(*c),
            Self::Cubic { c11, c12, c44 } => Ok(VoigtTensor4::cubic(*c11, *c12, *c44)),
            Self::Voigt(c) => Ok(*c),
            Self::Void => Ok(VoigtTensor4::ZERO),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub name: String,
    pub elastic: ElasticSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenstrain: Option<VoigtTensor2>,
}

impl PhaseSpec {
    pub fn build(&self) -> Result<Phase> {
        let mut p = match &self.elastic {
            ElasticSpec::Void => Phase::void(&self.name),
            e => Phase::elastic(&self.name, e.stiffness()?)?,
        };
        if let Some(e0) = self.eigenstrain {
            if p.is_void() && e0 != VoigtTensor2::ZERO {
                return Err(Error::Config(format!("phases.{}.eigenstrain: a void cannot carry an eigenstrain", self.name)));
            }
            p.eigenstrain = e0;
        }
        Ok(p)
    }
}

/// Where the non-matrix phases sit. The first phase fills the rest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    #[default]
    Homogeneous,
    /// Centered cube of `edge` voxels.
    Cube { edge: usize, phase: String },
    /// Centered sphere; voxel centers strictly inside `radius`.
    Sphere { radius: f64, phase: String },
    /// Phase ids read from a raw dump; `path` is relative to the config file.
    Raw { path: PathBuf },
}

/// Which files a run writes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// VTK legacy files for stress, strain, von Mises and phase map.
    pub vtk: bool,
    /// Raw little-endian dumps with JSON sidecars.
    pub raw: bool,
    /// Corner displacements (displacement algorithm only).
    pub displacement: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { vtk: true, raw: false, displacement: false }
    }
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub scheme: Scheme,
    /// Defaults to displacement (strain for the continuum scheme).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    /// First entry is the matrix.
    pub phases: Vec<PhaseSpec>,
    #[serde(default)]
    pub geometry: Geometry,
    pub reference: ReferenceRule,
    pub loading: Loading,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub residual_norm: ResidualNorm,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks that do not need the voxel data.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        if self.scheme == Scheme::Tetrahedral {
            if let Some(axis) = grid.dims().iter().position(|&n| n % 2 == 1) {
                return Err(Error::Config(format!(
                    "grid.dims: the tetrahedral scheme needs even dimensions, axis {axis} has {}",
                    grid.dims()[axis]
                )));
            }
        }
        if self.scheme == Scheme::MoulinecSuquet && self.algorithm.is_some_and(|a| a != Algorithm::Strain) {
            return Err(Error::Config("algorithm: the continuum scheme only iterates on strain".into()));
        }
        if self.phases.is_empty() {
            return Err(Error::Config("phases: at least one phase is required".into()));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if self.phases[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::Config(format!("phases: duplicate name `{}`", p.name)));
            }
            p.build().map_err(|e| Error::Config(format!("phases.{}: {e}", p.name)))?;
        }
        if self.phases[0].elastic == ElasticSpec::Void {
            return Err(Error::Config("phases: the first (matrix) phase cannot be void".into()));
        }
        match &self.geometry {
            Geometry::Cube { phase, .. } | Geometry::Sphere { phase, .. } => {
                if self.phase_id(phase).is_none() {
                    return Err(Error::Config(format!("geometry.phase: unknown phase `{phase}`")));
                }
            }
            Geometry::Homogeneous | Geometry::Raw { .. } => {}
        }
        if let Geometry::Cube { edge, .. } = self.geometry {
            if grid.dims().iter().any(|&n| edge > n) {
                return Err(Error::Config(format!("geometry.cube.edge: {edge} exceeds the grid")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol: must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter: must be at least 1".into()));
        }
        let lam0 = self.reference_stiffness().map_err(|e| Error::Config(format!("reference: {e}")))?;
        if self.scheme == Scheme::MoulinecSuquet && lam0.isotropic_moduli().is_none() {
            return Err(Error::Config("reference: the continuum scheme needs an isotropic reference medium".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::with_spacing(self.grid.dims, self.grid.spacing).map_err(|e| Error::Config(format!("grid: {e}")))
    }

    pub fn phase_id(&self, name: &str) -> Option<u16> {
        self.phases.iter().position(|p| p.name == name).map(|i| i as u16)
    }

    /// Reference stiffness from the phase palette.
    pub fn reference_stiffness(&self) -> Result<VoigtTensor4> {
        let palette = self.phases.iter().map(|p| p.elastic.stiffness()).collect::<Result<Vec<_>>>()?;
        self.reference.resolve(&palette)
    }

    /// Voxel microstructure. `base_dir` resolves a relative raw path.
    pub fn build_materials(&self, base_dir: &Path) -> Result<MaterialFields> {
        let grid = self.grid()?;
        let phases = self.phases.iter().map(PhaseSpec::build).collect::<Result<Vec<_>>>()?;
        let id = |name: &str| self.phase_id(name).ok_or_else(|| Error::Config(format!("geometry.phase: unknown phase `{name}`")));
        match &self.geometry {
            Geometry::Homogeneous => MaterialFields::from_voxels(&grid, phases, vec![0; grid.len()]),
            Geometry::Cube { edge, phase } => {
                let p = id(phase)?;
                gen_centered_cube(MaterialFields::from_voxels(&grid, phases, vec![0; grid.len()])?, *edge, p)
            }
            Geometry::Sphere { radius, phase } => {
                let p = id(phase)?;
                gen_centered_sphere(MaterialFields::from_voxels(&grid, phases, vec![0; grid.len()])?, *radius, p)
            }
            Geometry::Raw { path } => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                let ids = crate::io::read_phase_ids(&full, &grid)?;
                MaterialFields::from_voxels(&grid, phases, ids)
            }
        }
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_iter: self.max_iter, residual_norm: self.residual_norm, ..SolverOptions::default() }
    }

    pub fn solver_setup(&self) -> Result<SolverSetup> {
        Ok(SolverSetup {
            scheme: self.scheme,
            algorithm: self.algorithm,
            reference: self.reference_stiffness()?,
            loading: self.loading,
            options: self.options(),
        })
    }

    /// Copy with the inclusion (second phase) replaced for a contrast sweep:
    /// bulk modulus `C k_matrix` with the matrix Poisson ratio, or a void,
    /// and the reference interpolated with `alpha = 0.45` for `C > 1` and
    /// `0.55` otherwise.
    pub fn with_contrast(&self, contrast: Contrast) -> Result<Self> {
        if self.phases.len() != 2 {
            return Err(Error::Config(format!("a contrast sweep needs exactly two phases, got {}", self.phases.len())));
        }
        let (lm, mm) = self.phases[0]
            .elastic
            .stiffness()?
            .isotropic_moduli()
            .ok_or_else(|| Error::Config("a contrast sweep needs an isotropic matrix".into()))?;
        let k_m = lm + 2.0 * mm / 3.0;
        let nu = lm / (2.0 * (lm + mm));
        let mut cfg = self.clone();
        let (elastic, alpha) = match contrast {
            Contrast::Ratio(c) if c > 0.0 && c.is_finite() => {
                let k = c * k_m;
                let mu = 3.0 * k * (1.0 - 2.0 * nu) / (2.0 * (1.0 + nu));
                (ElasticSpec::Isotropic(IsotropicConstants::KMu { k, mu }), if c > 1.0 { 0.45 } else { 0.55 })
            }
            Contrast::Ratio(c) => return Err(Error::Config(format!("contrast must be positive and finite, got {c}"))),
            Contrast::Void => (ElasticSpec::Void, 0.55),
        };
        cfg.phases[1].elastic = elastic;
        cfg.phases[1].eigenstrain = None;
        cfg.reference = ReferenceRule::BulkInterp(alpha);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Inclusion-to-matrix bulk modulus ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contrast {
    Ratio(f64),
    Void,
}

impl std::str::FromStr for Contrast {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "void" | "inf" | "infinity" => Ok(Self::Void),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|c| *c > 0.0 && c.is_finite())
                .map(Self::Ratio)
                .ok_or_else(|| Error::Config(format!("contrast `{s}` is not a positive number or `void`"))),
        }
    }
}

impl std::fmt::Display for Contrast {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ratio(c) => write!(f, "{c}"),
            Self::Void => f.write_str("void"),
        }
    }
}
