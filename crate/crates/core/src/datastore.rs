//! On-disk containers: one directory per artifact holding a JSON manifest and
//! raw float64 little-endian row-major blobs, guarded by SHA-256 checksums.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::{Activation, AutoencoderModel, AutoencoderSpec, DenseLayer, Normalizer, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Result, StoreError};
use crate::fem::{LoadKind, MaterialParams};
use crate::gpr::{GPModel, Hyperparams, LatentGPBundle, Standardizer};
use crate::surrogate::{McConfig, SurrogateModel};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORCES_FILE: &str = "forces.bin";
pub const DISPLACEMENTS_FILE: &str = "displacements.bin";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub const GP_FILE: &str = "gp.bin";
const LAYOUT: &str = "float64 little-endian, row-major";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Row-major little-endian bytes of `m`.
pub fn matrix_to_bytes(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    out
}

pub fn bytes_to_f64(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_blob(path: &Path, expected_len: usize) -> Result<Vec<u8>, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() != expected_len {
        return Err(StoreError::TruncatedBlob {
            path: path.display().to_string(),
            expected: expected_len,
            found: bytes.len(),
        });
    }
    Ok(bytes)
}

fn verify(path: &Path, expected: &str, parts: &[&[u8]]) -> Result<(), StoreError> {
    let actual = sha256_hex(parts);
    if actual != expected {
        return Err(StoreError::ChecksumMismatch {
            path: path.display().to_string(),
            expected: expected.to_string(),
            actual,
        });
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), StoreError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| StoreError::Manifest {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    write_file(path, format!("{text}\n").as_bytes())
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

fn read_manifest<T: DeserializeOwned>(dir: &Path) -> Result<T, StoreError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let bad = |e: serde_json::Error| StoreError::Manifest {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let probe: VersionProbe = serde_json::from_str(&text).map_err(bad)?;
    if probe.format_version != FORMAT_VERSION {
        return Err(StoreError::VersionMismatch {
            found: probe.format_version,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_str(&text).map_err(bad)
}

fn ensure_dir(dir: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Provenance recorded alongside a dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetInfo {
    pub force_range: [f64; 2],
    pub material: Option<MaterialParams>,
    pub mesh: String,
    pub generator_seed: u64,
    pub failures: usize,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub n_samples: usize,
    pub input_dim: usize,
    pub field_dim: usize,
    pub load_kind: LoadKind,
    pub force_range: [f64; 2],
    pub material: Option<MaterialParams>,
    pub mesh: String,
    pub generator_seed: u64,
    pub failures: usize,
    pub layout: String,
    /// SHA-256 over the forces blob followed by the displacements blob.
    pub checksum: String,
    pub config: serde_json::Value,
}

pub fn write_dataset(dir: &Path, dataset: &Dataset, info: &DatasetInfo) -> Result<DatasetManifest> {
    ensure_dir(dir)?;
    let forces = matrix_to_bytes(&dataset.forces);
    let displacements = matrix_to_bytes(&dataset.displacements);
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        n_samples: dataset.len(),
        input_dim: dataset.input_dim(),
        field_dim: dataset.field_dim(),
        load_kind: dataset.kind,
        force_range: info.force_range,
        material: info.material,
        mesh: info.mesh.clone(),
        generator_seed: info.generator_seed,
        failures: info.failures,
        layout: LAYOUT.into(),
        checksum: sha256_hex(&[&forces, &displacements]),
        config: info.config.clone(),
    };
    write_file(&dir.join(FORCES_FILE), &forces)?;
    write_file(&dir.join(DISPLACEMENTS_FILE), &displacements)?;
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn read_dataset(dir: &Path) -> Result<(Dataset, DatasetManifest)> {
    let m: DatasetManifest = read_manifest(dir)?;
    let fp = dir.join(FORCES_FILE);
    let dp = dir.join(DISPLACEMENTS_FILE);
    let forces = read_blob(&fp, 8 * m.n_samples * m.input_dim)?;
    let displacements = read_blob(&dp, 8 * m.n_samples * m.field_dim)?;
    verify(&dir.join(MANIFEST_FILE), &m.checksum, &[&forces, &displacements])?;
    let f = DMatrix::from_row_slice(m.n_samples, m.input_dim, &bytes_to_f64(&forces));
    let u = DMatrix::from_row_slice(m.n_samples, m.field_dim, &bytes_to_f64(&displacements));
    Ok((Dataset::new(m.load_kind, f, u)?, m))
}

/// One dense layer's place in the weights blob (offsets count float64 values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub weights_offset: usize,
    pub bias_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderManifest {
    pub spec: AutoencoderSpec,
    pub decoder_widths: Vec<usize>,
    pub normalizer: Normalizer,
    pub parameter_count: usize,
    pub layers: Vec<LayerEntry>,
    pub training: Option<TrainConfig>,
    pub final_loss: Option<f64>,
    pub final_relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpMember {
    pub hyperparams: Hyperparams,
    pub standardizer: Standardizer,
    pub lml: Option<f64>,
    pub constant: bool,
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpManifest {
    pub latent_dim: usize,
    pub input_dim: usize,
    pub n_train: usize,
    /// Training inputs (`n_train × input_dim`) then raw latent targets (`n_train × latent_dim`).
    pub layout: String,
    pub members: Vec<GpMember>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub autoencoder: AutoencoderManifest,
    pub gp: Option<GpManifest>,
    pub monte_carlo: McConfig,
    /// SHA-256 per blob file name.
    pub checksums: BTreeMap<String, String>,
    pub config: serde_json::Value,
}

/// Training provenance stored with a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelInfo {
    pub training: Option<TrainConfig>,
    pub final_loss: Option<f64>,
    pub final_relative_error: Option<f64>,
    pub config: serde_json::Value,
}

fn layer_names(blocks: usize) -> Vec<String> {
    let mut v = Vec::new();
    for i in 0..blocks {
        v.push(format!("encoder.{i}.a"));
        v.push(format!("encoder.{i}.b"));
    }
    v.push("latent".into());
    for i in 0..blocks {
        v.push(format!("decoder.{i}.a"));
        v.push(format!("decoder.{i}.b"));
    }
    v.push("output".into());
    v
}

/// Writes an autoencoder and, when present, its GP bundle.
pub fn write_model(
    dir: &Path,
    autoencoder: &AutoencoderModel,
    bundle: Option<&LatentGPBundle>,
    mc: McConfig,
    info: &ModelInfo,
) -> Result<ModelManifest> {
    ensure_dir(dir)?;
    let mut weights = Vec::with_capacity(8 * autoencoder.parameter_count());
    let mut entries = Vec::new();
    let mut offset = 0;
    for (layer, name) in autoencoder.layers().into_iter().zip(layer_names(autoencoder.encoder_blocks.len())) {
        weights.extend(matrix_to_bytes(&layer.weights));
        let bias_offset = offset + layer.weights.len();
        for b in layer.bias.iter() {
            weights.extend_from_slice(&b.to_le_bytes());
        }
        entries.push(LayerEntry {
            name,
            rows: layer.out_dim(),
            cols: layer.in_dim(),
            activation: layer.activation,
            weights_offset: offset,
            bias_offset,
        });
        offset = bias_offset + layer.bias.len();
    }
    let mut checksums = BTreeMap::new();
    checksums.insert(WEIGHTS_FILE.to_string(), sha256_hex(&[&weights]));
    write_file(&dir.join(WEIGHTS_FILE), &weights)?;

    let gp = match bundle {
        Some(b) => {
            if b.latent_dim() != autoencoder.latent_dim() {
                return Err(StoreError::Invalid(format!(
                    "{} GPs for latent dimension {}",
                    b.latent_dim(),
                    autoencoder.latent_dim()
                ))
                .into());
            }
            let inputs = b.train_inputs().cloned().unwrap_or_else(|| DMatrix::zeros(0, 0));
            let n = inputs.nrows();
            let targets = DMatrix::from_fn(n, b.latent_dim(), |i, l| b.gps[l].raw_targets()[i]);
            let mut blob = matrix_to_bytes(&inputs);
            blob.extend(matrix_to_bytes(&targets));
            checksums.insert(GP_FILE.to_string(), sha256_hex(&[&blob]));
            write_file(&dir.join(GP_FILE), &blob)?;
            Some(GpManifest {
                latent_dim: b.latent_dim(),
                input_dim: inputs.ncols(),
                n_train: n,
                layout: format!("inputs {n}x{} then targets {n}x{}; {LAYOUT}", inputs.ncols(), b.latent_dim()),
                members: b
                    .gps
                    .iter()
                    .map(|g| GpMember {
                        hyperparams: *g.hyperparams(),
                        standardizer: *g.standardizer(),
                        lml: g.lml(),
                        constant: g.is_constant(),
                        jitter: g.jitter(),
                    })
                    .collect(),
            })
        }
        None => None,
    };

    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        autoencoder: AutoencoderManifest {
            spec: autoencoder.spec.clone(),
            decoder_widths: autoencoder.spec.decoder_widths(),
            normalizer: autoencoder.normalizer,
            parameter_count: autoencoder.parameter_count(),
            layers: entries,
            training: info.training.clone(),
            final_loss: info.final_loss,
            final_relative_error: info.final_relative_error,
        },
        gp,
        monte_carlo: mc,
        checksums,
        config: info.config.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Contents of a model directory.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub manifest: ModelManifest,
    pub autoencoder: AutoencoderModel,
    pub bundle: Option<LatentGPBundle>,
}

impl LoadedModel {
    pub fn surrogate(self) -> Result<SurrogateModel> {
        let bundle = self
            .bundle
            .ok_or_else(|| StoreError::Invalid("model archive has no GP stage".into()))?;
        SurrogateModel::new(self.autoencoder, bundle, self.manifest.monte_carlo)
    }
}

fn checksum_for<'a>(m: &'a ModelManifest, file: &str) -> Result<&'a str, StoreError> {
    m.checksums
        .get(file)
        .map(String::as_str)
        .ok_or_else(|| StoreError::Invalid(format!("no checksum recorded for {file}")))
}

pub fn read_model(dir: &Path) -> Result<LoadedModel> {
    let m: ModelManifest = read_manifest(dir)?;
    let ae = &m.autoencoder;
    let wp = dir.join(WEIGHTS_FILE);
    let weights = read_blob(&wp, 8 * ae.parameter_count)?;
    verify(&wp, checksum_for(&m, WEIGHTS_FILE)?, &[&weights])?;
    let values = bytes_to_f64(&weights);
    let mut layers = Vec::with_capacity(ae.layers.len());
    for e in &ae.layers {
        let wend = e.weights_offset + e.rows * e.cols;
        let bend = e.bias_offset + e.rows;
        if wend > values.len() || bend > values.len() {
            return Err(StoreError::Invalid(format!("layer {} lies outside the weights blob", e.name)).into());
        }
        layers.push(DenseLayer {
            weights: DMatrix::from_row_slice(e.rows, e.cols, &values[e.weights_offset..wend]),
            bias: DVector::from_column_slice(&values[e.bias_offset..bend]),
            activation: e.activation,
        });
    }
    let autoencoder = AutoencoderModel::from_layers(ae.spec.clone(), layers, ae.normalizer)?;

    let bundle = match &m.gp {
        None => None,
        Some(g) => {
            let gpp = dir.join(GP_FILE);
            let blob = read_blob(&gpp, 8 * g.n_train * (g.input_dim + g.latent_dim))?;
            verify(&gpp, checksum_for(&m, GP_FILE)?, &[&blob])?;
            if g.members.len() != g.latent_dim {
                return Err(StoreError::Invalid(format!("{} GP members for latent dim {}", g.members.len(), g.latent_dim)).into());
            }
            let vals = bytes_to_f64(&blob);
            let split = g.n_train * g.input_dim;
            let inputs = DMatrix::from_row_slice(g.n_train, g.input_dim, &vals[..split]);
            let targets = DMatrix::from_row_slice(g.n_train, g.latent_dim, &vals[split..]);
            let gps = g
                .members
                .iter()
                .enumerate()
                .map(|(l, mem)| GPModel::from_hyperparams(inputs.clone(), targets.column(l).into_owned(), mem.hyperparams))
                .collect::<Result<Vec<_>, _>>()?;
            Some(LatentGPBundle::new(gps)?)
        }
    };
    Ok(LoadedModel {
        manifest: m,
        autoencoder,
        bundle,
    })
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|v| v.to_string()).collect());
    }
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), StoreError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.headers)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes `<stem>.json` and one `<stem>_<name>.csv` per table into `dir`.
pub fn write_report<T: Serialize + ?Sized>(
    dir: &Path,
    stem: &str,
    summary: &T,
    tables: &[(&str, &Table)],
) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let json = dir.join(format!("{stem}.json"));
    write_json(&json, summary)?;
    written.push(json);
    for (name, table) in tables {
        let p = dir.join(format!("{stem}_{name}.csv"));
        write_csv(&p, table)?;
        written.push(p);
    }
    Ok(written)
}
