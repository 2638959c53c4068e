//! On-disk dataset container: a binary feature matrix, a parameter CSV, a
//! provenance JSON, and a manifest written last so a complete manifest
//! implies a complete dataset.

use super::{AnnotatedDataset, GenConfig, GenFailure, GenerationOutcome, SceneRecord, PARAM_NAMES};
use crate::error::{Error, Result};
use crate::gllim::TrainingSet;
use crate::io::write_atomic;
use crate::math::fnv1a64;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::Path;

/// Magic number opening `features.bin`.
pub const FEATURES_MAGIC: &[u8; 4] = b"ERFT";
/// Current `features.bin` layout version.
pub const FEATURES_VERSION: u32 = 1;

const FEATURES_FILE: &str = "features.bin";
const PARAMS_FILE: &str = "params.csv";
const PROVENANCE_FILE: &str = "provenance.json";
const MANIFEST_FILE: &str = "manifest.json";

/// Dataset-level metadata. Written last during a save, so its presence
/// marks the directory as complete.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Version of the tool that generated the dataset.
    pub tool_version: String,
    pub master_seed: u64,
    /// Number of rows.
    pub n: usize,
    /// Feature dimension.
    pub d: usize,
    /// Parameter dimension.
    pub l: usize,
    /// Hash of the JSON-serialized generation config (hexadecimal).
    pub config_hash: String,
    /// The full generation config, kept so rows can be regenerated from
    /// their provenance records without external state.
    pub config: GenConfig,
    /// Scenes that failed during generation and were skipped.
    pub failures: Vec<GenFailure>,
}

/// Hexadecimal hash of a generation config's canonical JSON form.
pub fn config_hash(config: &GenConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(format!("{:016x}", fnv1a64(&bytes)))
}

fn encode_features(ds: &AnnotatedDataset) -> Vec<u8> {
    let mut buf = Vec::with_capacity(4 + 4 + 16 + 4 * ds.features.len());
    buf.extend_from_slice(FEATURES_MAGIC);
    buf.write_u32::<LittleEndian>(FEATURES_VERSION)
        .expect("vec write");
    buf.write_u64::<LittleEndian>(ds.n as u64)
        .expect("vec write");
    buf.write_u64::<LittleEndian>(ds.d as u64)
        .expect("vec write");
    for &v in &ds.features {
        buf.write_f32::<LittleEndian>(v as f32).expect("vec write");
    }
    buf
}

fn encode_params(ds: &AnnotatedDataset) -> String {
    let mut out = String::new();
    out.push_str("index");
    for name in PARAM_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (row, rec) in ds.provenance.iter().enumerate() {
        write!(out, "{}", rec.index).expect("string write");
        for j in 0..AnnotatedDataset::PARAM_DIM {
            let v = ds.params[row * AnnotatedDataset::PARAM_DIM + j];
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Writes a generated dataset to a directory. Refuses to overwrite a
/// directory that already holds a manifest unless `force` is set. The
/// manifest is written last, atomically, so interrupted saves never look
/// complete.
pub fn save_dataset(
    outcome: &GenerationOutcome,
    config: &GenConfig,
    dir: &Path,
    force: bool,
) -> Result<()> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() && !force {
        return Err(Error::OutputExists(manifest_path.display().to_string()));
    }
    fs::create_dir_all(dir)?;
    let ds = &outcome.dataset;

    write_atomic(&dir.join(FEATURES_FILE), &encode_features(ds))?;
    write_atomic(&dir.join(PARAMS_FILE), encode_params(ds).as_bytes())?;
    write_atomic(
        &dir.join(PROVENANCE_FILE),
        &serde_json::to_vec_pretty(&ds.provenance)?,
    )?;

    let manifest = DatasetManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: ds.master_seed,
        n: ds.n,
        d: ds.d,
        l: AnnotatedDataset::PARAM_DIM,
        config_hash: config_hash(config)?,
        config: config.clone(),
        failures: outcome.failures.clone(),
    };
    write_atomic(&manifest_path, &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// A dataset read back from disk.
#[derive(Debug, Clone)]
pub struct StoredDataset {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    /// Features, N×D row-major (widened from the stored 32-bit values).
    pub features: Vec<f64>,
    /// Parameters, N×L row-major.
    pub params: Vec<f64>,
    pub provenance: Vec<SceneRecord>,
    pub manifest: DatasetManifest,
}

impl StoredDataset {
    /// Packages the stored dataset for model fitting.
    pub fn training_set(&self) -> Result<TrainingSet> {
        TrainingSet::new(
            self.features.clone(),
            self.params.clone(),
            self.n,
            self.d,
            self.l,
        )?
        .with_names(&PARAM_NAMES)
    }
}

fn decode_features(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    std::io::Read::read_exact(&mut cur, &mut magic)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    if &magic != FEATURES_MAGIC {
        return Err(Error::Format(format!(
            "{}: wrong magic number",
            path.display()
        )));
    }
    let version = cur
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    if version != FEATURES_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported version {version} (expected {FEATURES_VERSION})",
            path.display()
        )));
    }
    let n = cur
        .read_u64::<LittleEndian>()
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?
        as usize;
    let d = cur
        .read_u64::<LittleEndian>()
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?
        as usize;
    let expected = n
        .checked_mul(d)
        .ok_or_else(|| Error::Format(format!("{}: implausible shape", path.display())))?;
    let remaining = bytes.len() - cur.position() as usize;
    if remaining != expected * 4 {
        return Err(Error::Format(format!(
            "{}: {} bytes of data for a {}×{} matrix",
            path.display(),
            remaining,
            n,
            d
        )));
    }
    let mut features = vec![0.0f64; expected];
    for slot in features.iter_mut() {
        *slot = f64::from(cur.read_f32::<LittleEndian>().expect("length checked"));
    }
    Ok((n, d, features))
}

fn decode_params(text: &str, path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    let mut expected = vec!["index".to_string()];
    expected.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
    let got: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    if got != expected {
        return Err(Error::Format(format!(
            "{}: header {:?}, expected {:?}",
            path.display(),
            got.join(","),
            expected.join(",")
        )));
    }
    let mut indices = Vec::new();
    let mut params = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if record.len() != 1 + AnnotatedDataset::PARAM_DIM {
            return Err(Error::Format(format!(
                "{}: row has {} fields",
                path.display(),
                record.len()
            )));
        }
        let idx: usize = record[0].parse().map_err(|_| {
            Error::Format(format!("{}: bad index {:?}", path.display(), &record[0]))
        })?;
        indices.push(idx);
        for j in 1..record.len() {
            let v: f64 = record[j].parse().map_err(|_| {
                Error::Format(format!("{}: bad value {:?}", path.display(), &record[j]))
            })?;
            params.push(v);
        }
    }
    Ok((indices, params))
}

/// Reads a dataset directory back, verifying the pieces agree with the
/// manifest and with each other.
pub fn load_dataset(dir: &Path) -> Result<StoredDataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_bytes = fs::read(&manifest_path)
        .map_err(|_| Error::NotFound(format!("dataset manifest {}", manifest_path.display())))?;
    let manifest: DatasetManifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;

    let features_path = dir.join(FEATURES_FILE);
    let feature_bytes = fs::read(&features_path)
        .map_err(|_| Error::NotFound(format!("feature file {}", features_path.display())))?;
    let (n, d, features) = decode_features(&feature_bytes, &features_path)?;
    if n != manifest.n || d != manifest.d {
        return Err(Error::Format(format!(
            "feature file is {n}×{d} but manifest says {}×{}",
            manifest.n, manifest.d
        )));
    }

    let params_path = dir.join(PARAMS_FILE);
    let params_text = fs::read_to_string(&params_path)
        .map_err(|_| Error::NotFound(format!("parameter file {}", params_path.display())))?;
    let (indices, params) = decode_params(&params_text, &params_path)?;
    if indices.len() != n {
        return Err(Error::Format(format!(
            "parameter file has {} rows but manifest says {}",
            indices.len(),
            n
        )));
    }

    let prov_path = dir.join(PROVENANCE_FILE);
    let prov_bytes = fs::read(&prov_path)
        .map_err(|_| Error::NotFound(format!("provenance file {}", prov_path.display())))?;
    let provenance: Vec<SceneRecord> = serde_json::from_slice(&prov_bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", prov_path.display())))?;
    if provenance.len() != n {
        return Err(Error::Format(format!(
            "provenance has {} records but manifest says {}",
            provenance.len(),
            n
        )));
    }
    for (row, (rec, idx)) in provenance.iter().zip(&indices).enumerate() {
        if rec.index != *idx {
            return Err(Error::Format(format!(
                "row {row}: provenance index {} disagrees with parameter file index {idx}",
                rec.index
            )));
        }
    }

    Ok(StoredDataset {
        n,
        d,
        l: manifest.l,
        features,
        params,
        provenance,
        manifest,
    })
}
