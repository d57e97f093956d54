//! Checkpoint files.
//!
//! Layout: one line of UTF-8 JSON (the header) terminated by `\n`, then the
//! tensor bytes. Each tensor is stored as little-endian `f64`, complex tensors
//! as interleaved `(re, im)` pairs, at the byte offset (relative to the start
//! of the body) recorded in the header. The header carries a SHA-256 of the
//! body and a SHA-256 of itself computed with that field left empty, so a
//! change to any byte is detected on load.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::params::ParamRef;
use crate::model::{DType, ModelConfig, ModelParams, TensorData};

pub const CHECKPOINT_FORMAT: &str = "braincast-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Metadata stored alongside the tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub seed: u64,
    pub epoch: usize,
    pub val_loss: Option<f64>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 2],
    dtype: DType,
    offset: u64,
    nbytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(flatten)]
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
    body_sha256: String,
    header_sha256: String,
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

const HEADER_HASH_KEY: &str = "\"header_sha256\":\"";

/// Serializes tensors and metadata to the on-disk byte layout.
pub fn encode_checkpoint(tensors: &[ParamRef<'_>], meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let mut body = Vec::new();
    let mut entries = Vec::with_capacity(tensors.len());
    for t in tensors {
        let offset = body.len() as u64;
        for v in t.data {
            body.extend_from_slice(&v.to_le_bytes());
        }
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: [t.shape.0, t.shape.1],
            dtype: t.dtype,
            offset,
            nbytes: body.len() as u64 - offset,
        });
    }
    let mut header = Header {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        meta: meta.clone(),
        tensors: entries,
        body_sha256: hex_digest(&body),
        header_sha256: String::new(),
    };
    let unsigned = serde_json::to_string(&header)?;
    header.header_sha256 = hex_digest(unsigned.as_bytes());
    let signed = serde_json::to_string(&header)?;
    debug_assert_eq!(
        signed.replacen(&format!("{HEADER_HASH_KEY}{}\"", header.header_sha256), &format!("{HEADER_HASH_KEY}\""), 1),
        unsigned
    );

    let mut out = signed.into_bytes();
    out.push(b'\n');
    out.extend_from_slice(&body);
    Ok(out)
}

/// Parses and validates the on-disk byte layout.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Vec<TensorData>, CheckpointMeta)> {
    let bad = |m: String| Error::Checkpoint(m);
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header_text = std::str::from_utf8(&bytes[..nl]).map_err(|_| bad("header is not UTF-8".into()))?;
    let header: Header = serde_json::from_str(header_text).map_err(|e| bad(format!("malformed header: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(bad(format!("unknown format `{}`", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    let signed_field = format!("{HEADER_HASH_KEY}{}\"", header.header_sha256);
    if header.header_sha256.len() != 64 || header_text.matches(&signed_field).count() != 1 {
        return Err(bad("header checksum field is malformed".into()));
    }
    let unsigned = header_text.replacen(&signed_field, &format!("{HEADER_HASH_KEY}\""), 1);
    if hex_digest(unsigned.as_bytes()) != header.header_sha256 {
        return Err(bad("header checksum mismatch".into()));
    }

    let body = &bytes[nl + 1..];
    let mut expected_offset = 0u64;
    for t in &header.tensors {
        let want = 8 * t.dtype.scalar_count(t.shape[0], t.shape[1]) as u64;
        if t.nbytes != want {
            return Err(bad(format!("tensor `{}` declares {} bytes, shape implies {want}", t.name, t.nbytes)));
        }
        if t.offset != expected_offset {
            return Err(bad(format!(
                "tensor `{}` at offset {} overlaps or leaves a gap (expected {expected_offset})",
                t.name, t.offset
            )));
        }
        expected_offset += t.nbytes;
    }
    if (body.len() as u64) < expected_offset {
        return Err(bad(format!("truncated body: {} of {expected_offset} bytes", body.len())));
    }
    if body.len() as u64 != expected_offset {
        return Err(bad(format!("{} trailing bytes after the last tensor", body.len() as u64 - expected_offset)));
    }
    if hex_digest(body) != header.body_sha256 {
        return Err(bad("body checksum mismatch".into()));
    }

    let tensors = header
        .tensors
        .iter()
        .map(|t| {
            let raw = &body[t.offset as usize..(t.offset + t.nbytes) as usize];
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            TensorData {
                name: t.name.clone(),
                dtype: t.dtype,
                shape: (t.shape[0], t.shape[1]),
                data,
            }
        })
        .collect();
    Ok((tensors, header.meta))
}

pub fn save_checkpoint(path: impl AsRef<Path>, tensors: &[ParamRef<'_>], meta: &CheckpointMeta) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(tensors, meta)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Vec<TensorData>, CheckpointMeta)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Saves model parameters only.
pub fn save_params(path: impl AsRef<Path>, params: &ModelParams, meta: &CheckpointMeta) -> Result<()> {
    save_checkpoint(path, &params.tensors(), meta)
}

/// Loads a parameters-only checkpoint and rebuilds the registry for the
/// stored configuration.
pub fn load_params(path: impl AsRef<Path>) -> Result<(ModelParams, CheckpointMeta)> {
    let (tensors, meta) = load_checkpoint(path)?;
    let params = ModelParams::from_named(&meta.model, &tensors)?;
    Ok((params, meta))
}
