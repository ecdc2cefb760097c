//! Feature cache files: a fixed header followed by row-major little-endian f32.
//!
//! Header layout (little-endian): 8-byte magic, u32 version, u32 dims,
//! u32 frames, u64 front-end config hash.

use std::path::{Path, PathBuf};

use sbcm_core::{FeatureMatrix, Matrix};

use crate::error::{write_atomic, Error, Result};

const MAGIC: &[u8; 8] = b"SBCMFEAT";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 4 + 8;

pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * f.frames() * f.dims());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(f.dims() as u32).to_le_bytes());
    out.extend_from_slice(&(f.frames() as u32).to_le_bytes());
    out.extend_from_slice(&f.config_hash().to_le_bytes());
    for v in f.matrix().as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8]) -> std::result::Result<FeatureMatrix, String> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err("not a feature cache file".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(8);
    if version != VERSION {
        return Err(format!("unsupported feature cache version {version}"));
    }
    let (dims, frames) = (u32_at(12) as usize, u32_at(16) as usize);
    let hash = u64::from_le_bytes(bytes[20..28].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * dims * frames {
        return Err(format!("expected {} data bytes for {frames}x{dims}, found {}", 4 * dims * frames, body.len()));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    let m = Matrix::from_vec(frames, dims, data).map_err(|e| e.to_string())?;
    FeatureMatrix::new(m, hash).map_err(|e| e.to_string())
}

pub fn cache_path(cache_dir: &Path, utterance_id: &str) -> PathBuf {
    cache_dir.join(format!("{utterance_id}.feat"))
}

pub fn write_features(path: &Path, f: &FeatureMatrix) -> Result<()> {
    write_atomic(path, &encode_features(f))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes).map_err(|m| Error::format(path, m))
}
