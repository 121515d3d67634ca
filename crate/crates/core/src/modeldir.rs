//! Shared layout of saved model directories: `meta.json` plus f32
//! little-endian `weights.bin`, each file guarded by a SHA-256.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{read_checked, sha256_hex, Reader};
use crate::embeddings::{load_static_vecs, StaticVecTable};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
pub(crate) const STATIC_FILE: &str = "static.vec";

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct TensorEntry {
    pub name: String,
    pub len: usize,
}

pub(crate) fn write_file(dir: &Path, name: &str, bytes: &[u8], sums: &mut BTreeMap<String, String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::from(e).in_file(&path))?;
    sums.insert(name.to_string(), sha256_hex(bytes));
    Ok(())
}

pub(crate) fn weights_bytes<'a>(tensors: impl IntoIterator<Item = &'a [f64]>) -> Vec<u8> {
    let mut out = Vec::new();
    for t in tensors {
        for &v in t {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub(crate) fn check_version(found: u32) -> Result<()> {
    if found != MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    Ok(())
}

/// Compare a saved manifest with the shapes implied by the metadata.
pub(crate) fn check_manifest(saved: &[TensorEntry], expected: &[(&str, usize)]) -> Result<()> {
    let same = saved.len() == expected.len()
        && saved.iter().zip(expected).all(|(s, &(n, l))| s.name == n && s.len == l);
    if !same {
        let show = |v: Vec<String>| v.join(", ");
        return Err(Error::Shape(format!(
            "weights hold [{}], metadata implies [{}]",
            show(saved.iter().map(|s| format!("{}:{}", s.name, s.len)).collect()),
            show(expected.iter().map(|(n, l)| format!("{n}:{l}")).collect()),
        )));
    }
    Ok(())
}

/// Fill `tensors` from f32 little-endian bytes.
pub(crate) fn read_weights(bytes: &[u8], tensors: Vec<&mut [f64]>) -> Result<()> {
    let mut r = Reader::new(bytes);
    for t in tensors {
        let vals = r.f32s(t.len(), "weights")?;
        for (d, v) in t.iter_mut().zip(vals) {
            *d = f64::from(v);
        }
    }
    r.expect_end()
}

/// Parse `meta.json`, rejecting unknown format versions before anything else.
pub(crate) fn read_meta<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<T> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::from(e).in_file(&path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(&path))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format("meta.json has no format_version".into()).in_file(&path))?;
    check_version(u32::try_from(version).unwrap_or(u32::MAX))?;
    serde_json::from_value(value).map_err(|e| Error::from(e).in_file(&path))
}

/// Load the frozen word vectors saved next to a model, if any.
pub(crate) fn read_static(dir: &Path, sums: &BTreeMap<String, String>) -> Result<Option<StaticVecTable>> {
    let Some(sum) = sums.get(STATIC_FILE) else {
        return Ok(None);
    };
    let bytes = read_checked(dir, STATIC_FILE, sum)?;
    load_static_vecs(&String::from_utf8_lossy(&bytes)).map(Some)
}

pub(crate) fn write_meta<T: Serialize>(dir: &Path, meta: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    let path = dir.join(META_FILE);
    fs::write(&path, text).map_err(|e| Error::from(e).in_file(&path))
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))
}
