//! Feature-map files (`LEYESMAPS` format) on disk.

use std::fs;
use std::path::{Path, PathBuf};

use leyes_core::pcr::{decode_maps, encode_maps, FeatureMapSet, MapFormatError};
use thiserror::Error;

pub const MAPS_EXTENSION: &str = "maps";

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: MapFormatError,
    },
}

pub fn write_maps(set: &FeatureMapSet, path: &Path) -> Result<(), MapIoError> {
    let bytes = encode_maps(set).map_err(|source| MapIoError::Format {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, bytes).map_err(|source| MapIoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_maps(path: &Path) -> Result<FeatureMapSet, MapIoError> {
    let bytes = fs::read(path).map_err(|source| MapIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_maps(&bytes).map_err(|source| MapIoError::Format {
        path: path.to_path_buf(),
        source,
    })
}
