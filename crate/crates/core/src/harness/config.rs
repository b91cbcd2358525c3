use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fem::VectorField;
use crate::fracpow::{Integrator, PseudoParabolicConfig};
use crate::schemes::{SchemeConfig, SchemeKind, SqrtMethod};
use crate::sparse::SolverOptions;

/// Where the mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Generate(u32),
    File(PathBuf),
}

impl MeshSource {
    pub fn label(&self) -> String {
        match self {
            MeshSource::Generate(level) => format!("level{level}"),
            MeshSource::File(p) => p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

/// Experiment description. Every field has a default, so a config file only
/// lists what it changes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh_level: Option<u32>,
    pub mesh_file: Option<PathBuf>,
    pub mu: f64,
    pub delta: f64,
    pub scheme: String,
    pub sigma: f64,
    pub n_steps: usize,
    pub k_pseudo: usize,
    pub integrator: String,
    pub sqrt_method: String,
    pub t_final: f64,
    pub inner_tol: f64,
    pub solver_tol: f64,
    /// `zero`, `bubble_rotation` or `bubble_rotation:AMPLITUDE`.
    pub velocity: String,
    pub seed: u64,
    /// Report or sweep CSV.
    pub out: Option<PathBuf>,
    /// Per-level trajectory CSV.
    pub trajectory_out: Option<PathBuf>,
    pub vtk: Option<PathBuf>,
    /// Directory for MatrixMarket dumps of M, A (and C).
    pub matrix_dump: Option<PathBuf>,
    /// Step counts for `sweep`.
    pub n_list: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mesh_level: None,
            mesh_file: None,
            mu: 10.0,
            delta: 1.0,
            scheme: "regularized2".into(),
            sigma: 0.25,
            n_steps: 100,
            k_pseudo: 100,
            integrator: "cn".into(),
            sqrt_method: "pseudo_parabolic".into(),
            t_final: 0.25,
            inner_tol: 1e-10,
            solver_tol: 1e-10,
            velocity: "zero".into(),
            seed: 0,
            out: None,
            trajectory_out: None,
            vtk: None,
            matrix_dump: None,
            n_list: vec![25, 50, 100, 200],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| e.context(format!("config file {}", path.display())))
    }

    /// Level 2 when neither source is given.
    pub fn mesh_source(&self) -> Result<MeshSource> {
        match (&self.mesh_level, &self.mesh_file) {
            (Some(_), Some(_)) => Err(Error::Config("give either mesh_level or mesh_file, not both".into())),
            (Some(l), None) => Ok(MeshSource::Generate(*l)),
            (None, Some(p)) => Ok(MeshSource::File(p.clone())),
            (None, None) => Ok(MeshSource::Generate(2)),
        }
    }

    pub fn scheme_kind(&self) -> Result<SchemeKind> {
        self.scheme.parse()
    }

    pub fn velocity_field(&self) -> Result<VectorField> {
        self.velocity.parse()
    }

    pub fn pseudo_config(&self) -> Result<PseudoParabolicConfig<f64>> {
        let cfg = PseudoParabolicConfig {
            steps: self.k_pseudo,
            integrator: self.integrator.parse::<Integrator>()?,
            inner_tol: self.inner_tol,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig<f64>> {
        let mut cfg = SchemeConfig::new(self.scheme_kind()?, self.t_final, self.n_steps)
            .with_sigma(self.sigma)
            .with_frac(self.pseudo_config()?)
            .with_sqrt_method(self.sqrt_method.parse::<SqrtMethod>()?);
        cfg.solver = SolverOptions::with_tol(self.solver_tol);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be finite and >= 0, got {}", self.t_final)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(Error::Config(format!("solver_tol {} not in (0, 1)", self.solver_tol)));
        }
        if let MeshSource::File(p) = self.mesh_source()? {
            if !p.exists() {
                return Err(Error::Config(format!("mesh file {} does not exist", p.display())));
            }
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must not be empty".into()));
        }
        self.velocity_field()?;
        self.scheme_config()?;
        Ok(())
    }
}
