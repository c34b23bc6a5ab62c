//! Dataset export: PNG images, a JSON-lines label sidecar, optional map
//! files and a manifest with content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use leyes_core::pcr::{encode_maps, FeatureMapSet};
use leyes_core::scenario::{CrTruth, ScenarioConfig, ScenarioError, ScenarioId, Stage};
use leyes_core::stream::{PupilLabel, Sample, SampleStream, DEFAULT_MAP_SIGMA};
use leyes_core::GrayImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::frames::{decode_png, encode_png, FrameError};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("maps: {0}")]
    Maps(#[from] leyes_core::pcr::MapFormatError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("dataset check failed: {0}")]
    Mismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One line of the label sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub file: String,
    pub pupil: Option<PupilLabel>,
    pub crs: Vec<CrTruth>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: u64,
    pub file: String,
    pub sha256: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub maps_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub maps_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub scenario: ScenarioId,
    pub stage: Stage,
    pub master_seed: u64,
    pub first_index: u64,
    pub count: u64,
    /// False when the export stopped early; `count` then reflects what
    /// was written.
    pub complete: bool,
    pub map_sigma: Option<f64>,
    pub map_scale: Option<f64>,
    pub labels_file: String,
    pub labels_sha256: String,
    /// Hash over the label sidecar and every file hash, in index order.
    pub content_hash: String,
    pub config: ScenarioConfig,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExportOptions {
    pub include_heatmaps: bool,
    /// Width of the target heatmaps in pixels.
    pub map_sigma: f64,
    /// Peak value of written maps (1 gives unit-peak training targets).
    pub map_scale: f64,
    /// Worker count; output does not depend on it.
    pub threads: usize,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self {
            include_heatmaps: false,
            map_sigma: DEFAULT_MAP_SIGMA,
            map_scale: 1.0,
            threads: 1,
        }
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn image_name(index: u64) -> String {
    format!("{index:06}.png")
}

pub fn maps_name(index: u64) -> String {
    format!("{index:06}.maps")
}

/// Everything written for one sample, produced off the main thread.
struct Encoded {
    index: u64,
    png: Vec<u8>,
    label_line: String,
    maps: Option<Vec<u8>>,
}

fn encode_sample(s: &Sample, opts: &ExportOptions) -> Result<Encoded, DatasetError> {
    let png = encode_png(&s.image)?;
    let record = LabelRecord {
        file: image_name(s.index),
        pupil: s.labels.pupil,
        crs: s.labels.crs.clone(),
        seed: s.scene_seed,
    };
    let label_line = serde_json::to_string(&record)?;
    let maps = match &s.labels.target_heatmaps {
        Some(h) if opts.include_heatmaps => {
            let scale = |m: &leyes_core::FloatImage| m.map(|&v| (v * opts.map_scale) as f32);
            let set = FeatureMapSet {
                pupil_map: scale(&h[0]),
                cr_maps: h[1..].iter().map(scale).collect(),
                crop_origin: (0, 0),
            };
            Some(encode_maps(&set)?)
        }
        _ => None,
    };
    Ok(Encoded {
        index: s.index,
        png,
        label_line,
        maps,
    })
}

fn content_hash(labels_sha: &str, entries: &[ManifestEntry]) -> String {
    let mut h = Sha256::new();
    h.update(labels_sha.as_bytes());
    for e in entries {
        h.update(e.file.as_bytes());
        h.update(e.sha256.as_bytes());
        if let Some(m) = &e.maps_sha256 {
            h.update(m.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Writes `n` samples starting at the stream's current position into
/// `dir` and returns the manifest (also written to `manifest.json`).
///
/// Samples are rendered in parallel but written in index order, so the
/// output is byte-identical for any worker count. If a sample fails, the
/// samples before it are kept and the manifest is marked incomplete.
pub fn export_dataset(stream: &SampleStream, n: u64, dir: &Path, opts: &ExportOptions) -> Result<DatasetManifest, DatasetError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let stream = if opts.include_heatmaps {
        stream.clone().with_heatmaps(opts.map_sigma)
    } else {
        stream.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.threads.max(1)).build()?;
    let first = stream.position();
    let labels_path = dir.join(LABELS_FILE);
    let mut labels = Vec::new();
    let mut entries = Vec::with_capacity(n as usize);
    let mut failure = None;

    let chunk = 64 * opts.threads.max(1) as u64;
    let mut start = first;
    'chunks: while start < first + n {
        let end = (start + chunk).min(first + n);
        let encoded: Vec<Result<Encoded, DatasetError>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| encode_sample(&stream.sample_at(i)?, opts))
                .collect()
        });
        for e in encoded {
            let e = match e {
                Ok(e) => e,
                Err(err) => {
                    failure = Some(err);
                    break 'chunks;
                }
            };
            let file = image_name(e.index);
            let path = dir.join(&file);
            if let Err(err) = fs::write(&path, &e.png).map_err(io_err(&path)) {
                failure = Some(err);
                break 'chunks;
            }
            let (maps_file, maps_sha256) = match &e.maps {
                Some(bytes) => {
                    let name = maps_name(e.index);
                    let path = dir.join(&name);
                    if let Err(err) = fs::write(&path, bytes).map_err(io_err(&path)) {
                        failure = Some(err);
                        break 'chunks;
                    }
                    (Some(name), Some(sha_hex(bytes)))
                }
                None => (None, None),
            };
            labels.extend_from_slice(e.label_line.as_bytes());
            labels.push(b'\n');
            entries.push(ManifestEntry {
                index: e.index,
                file,
                sha256: sha_hex(&e.png),
                maps_file,
                maps_sha256,
            });
        }
        start = end;
    }

    fs::write(&labels_path, &labels).map_err(io_err(&labels_path))?;
    let labels_sha256 = sha_hex(&labels);
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        scenario: stream.config().id,
        stage: stream.config().stage,
        master_seed: stream.master_seed(),
        first_index: first,
        count: entries.len() as u64,
        complete: failure.is_none(),
        map_sigma: opts.include_heatmaps.then_some(opts.map_sigma),
        map_scale: opts.include_heatmaps.then_some(opts.map_scale),
        labels_file: LABELS_FILE.into(),
        content_hash: content_hash(&labels_sha256, &entries),
        labels_sha256,
        config: stream.config().clone(),
        samples: entries,
    };
    write_manifest(&manifest, dir)?;
    match failure {
        Some(err) => Err(err),
        None => Ok(manifest),
    }
}

pub fn write_manifest(m: &DatasetManifest, dir: &Path) -> Result<(), DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let mut bytes = serde_json::to_vec_pretty(m)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    Ok(serde_json::from_slice(&fs::read(&path).map_err(io_err(&path))?)?)
}

pub fn read_labels(dir: &Path) -> Result<Vec<LabelRecord>, DatasetError> {
    let path = dir.join(LABELS_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(DatasetError::from))
        .collect()
}

/// Image and label record of the `k`-th exported sample.
pub fn load_sample(dir: &Path, k: usize) -> Result<(GrayImage, LabelRecord), DatasetError> {
    let labels = read_labels(dir)?;
    let record = labels
        .get(k)
        .cloned()
        .ok_or_else(|| DatasetError::Mismatch(format!("no label record {k}")))?;
    let path = dir.join(&record.file);
    let img = decode_png(&fs::read(&path).map_err(io_err(&path))?)?;
    Ok((img, record))
}

/// Checks that every file named in the manifest exists with the recorded
/// hash and that the label sidecar matches.
pub fn verify_dataset(dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let m = read_manifest(dir)?;
    if m.samples.len() as u64 != m.count {
        return Err(DatasetError::Mismatch("sample list length differs from count".into()));
    }
    let check = |name: &str, want: &str| -> Result<(), DatasetError> {
        let path = dir.join(name);
        let got = sha_hex(&fs::read(&path).map_err(io_err(&path))?);
        if got != want {
            return Err(DatasetError::Mismatch(format!("{name} hash differs")));
        }
        Ok(())
    };
    check(&m.labels_file, &m.labels_sha256)?;
    for e in &m.samples {
        check(&e.file, &e.sha256)?;
        if let (Some(f), Some(h)) = (&e.maps_file, &e.maps_sha256) {
            check(f, h)?;
        }
    }
    if read_labels(dir)?.len() as u64 != m.count {
        return Err(DatasetError::Mismatch("label count differs from count".into()));
    }
    if content_hash(&m.labels_sha256, &m.samples) != m.content_hash {
        return Err(DatasetError::Mismatch("content hash differs".into()));
    }
    Ok(m)
}
