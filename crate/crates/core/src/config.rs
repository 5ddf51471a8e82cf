//! Run configuration covering every module, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::{AutoencoderSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::fem::{BeamGeometry, FemProblem, GenerationSpec, LoadKind, MaterialParams, Mesh2D, SolveSettings};
use crate::gpr::GpConfig;
use crate::surrogate::{McConfig, MissingRegionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let m = MaterialParams::beam_default();
        Self {
            youngs_modulus: m.youngs_modulus,
            poisson_ratio: m.poisson_ratio,
            density: m.density,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: LoadKind,
    /// Half-widths of the symmetric sampling interval per force component.
    pub force_range: [f64; 2],
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: LoadKind::PointLoad,
            force_range: [2.5, 2.5],
            n_train: 600,
            n_test: 60,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub encoder_widths: Vec<usize>,
    pub latent_dim: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            encoder_widths: vec![256, 128, 64, 32],
            latent_dim: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { out: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: BeamGeometry,
    pub material: MaterialConfig,
    pub solver: SolveSettings,
    pub data: DataConfig,
    pub autoencoder: NetworkConfig,
    pub training: TrainConfig,
    pub gp: GpConfig,
    pub surrogate: McConfig,
    pub experiment: MissingRegionSpec,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Sets every module seed to `seed`.
    pub fn apply_seed(&mut self, seed: u64) {
        self.data.seed = seed;
        self.training.seed = seed;
        self.gp.seed = seed;
        self.surrogate.mc_seed = seed;
        self.experiment.scatter_seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: String| Error::Config(e);
        self.material().map_err(|e| cfg(e.to_string()))?;
        self.solver.validate().map_err(|e| cfg(e.to_string()))?;
        self.training.validate().map_err(|e| cfg(e.to_string()))?;
        if self.data.force_range.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(cfg(format!("invalid force range {:?}", self.data.force_range)));
        }
        if self.data.n_train + self.data.n_test == 0 {
            return Err(cfg("data.n_train + data.n_test must be positive".into()));
        }
        if self.surrogate.sample_count < 2 {
            return Err(cfg("surrogate.sample_count must be at least 2".into()));
        }
        if self.mesh.elements_x == 0 || self.mesh.elements_y == 0 || !(self.mesh.length > 0.0 && self.mesh.height > 0.0) {
            return Err(cfg(format!("invalid mesh geometry {:?}", self.mesh)));
        }
        Ok(())
    }

    pub fn material(&self) -> Result<MaterialParams> {
        let m = &self.material;
        Ok(MaterialParams::new(m.youngs_modulus, m.poisson_ratio, m.density)?)
    }

    pub fn problem(&self) -> Result<FemProblem> {
        Ok(FemProblem {
            mesh: Mesh2D::cantilever(&self.mesh)?,
            material: self.material()?,
            settings: self.solver,
        })
    }

    /// All train and test samples come from one stream; test cases follow the training cases.
    pub fn generation_spec(&self) -> GenerationSpec {
        GenerationSpec {
            kind: self.data.kind,
            force_range: self.data.force_range,
            n_samples: self.data.n_train + self.data.n_test,
            seed: self.data.seed,
        }
    }

    pub fn autoencoder_spec(&self, input_dim: usize) -> AutoencoderSpec {
        AutoencoderSpec::new(input_dim, self.autoencoder.encoder_widths.clone(), self.autoencoder.latent_dim)
    }
}
