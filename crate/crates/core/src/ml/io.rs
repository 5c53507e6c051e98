//! Binary model files.
//!
//! Layout: `SSHALA`, format version (u32 LE), module id (u32 LE length +
//! UTF-8), JSON header (u64 LE length + UTF-8), then every parameter value
//! as an f64 LE in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Init, Param, ParamStore};

pub const MAGIC: &[u8; 6] = b"SSHALA";
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on header sizes, to fail fast on garbage input.
const MAX_HEADER: u64 = 64 << 20;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model file version {found}, reader expects {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("model file holds module {found:?}, expected {expected:?}")]
    WrongModule { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub module: String,
    pub params: ParamStore,
    /// Model-specific configuration and vocabularies.
    pub meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Header {
    params: Vec<Param>,
    store_version: u64,
    meta: serde_json::Value,
}

pub fn write_model<W: Write>(mut w: W, file: &ModelFile, version: u32) -> Result<(), ModelIoError> {
    let header = Header {
        params: file.params.iter().map(|(_, p)| p.clone()).collect(),
        store_version: file.params.version,
        meta: file.meta.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(file.module.len() as u32).to_le_bytes())?;
    w.write_all(file.module.as_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, p) in file.params.iter() {
        for v in &p.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), ModelIoError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => ModelIoError::CorruptFile("truncated".into()),
        _ => ModelIoError::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ModelIoError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_model<R: Read>(mut r: R, expected_version: u32) -> Result<ModelFile, ModelIoError> {
    let corrupt = |m: &str| ModelIoError::CorruptFile(m.to_string());
    let mut magic = [0u8; 6];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic bytes"));
    }
    let found = read_u32(&mut r)?;
    if found != expected_version {
        return Err(ModelIoError::VersionMismatch {
            expected: expected_version,
            found,
        });
    }
    let module_len = read_u32(&mut r)? as usize;
    if module_len > 1024 {
        return Err(corrupt("module id too long"));
    }
    let mut module = vec![0u8; module_len];
    read_exact(&mut r, &mut module)?;
    let module = String::from_utf8(module).map_err(|_| corrupt("module id is not UTF-8"))?;
    let mut len = [0u8; 8];
    read_exact(&mut r, &mut len)?;
    let json_len = u64::from_le_bytes(len);
    if json_len > MAX_HEADER {
        return Err(corrupt("header too large"));
    }
    let mut json = vec![0u8; json_len as usize];
    read_exact(&mut r, &mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;

    let mut params = ParamStore::new();
    let mut buf = [0u8; 8];
    for p in header.params {
        let n = p.rows.checked_mul(p.cols).ok_or_else(|| corrupt("shape overflow"))?;
        let mut values = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            read_exact(&mut r, &mut buf)?;
            let v = f64::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(corrupt("non-finite parameter value"));
            }
            values.push(v);
        }
        let id = params
            .add(&p.name, p.rows, p.cols, Init::Values(values))
            .map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;
        params.set_trainable(id, p.trainable);
    }
    params.version = header.store_version;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(ModelFile {
        module,
        params,
        meta: header.meta,
    })
}

pub fn save_model(path: impl AsRef<Path>, file: &ModelFile) -> Result<(), ModelIoError> {
    let f = File::create(path)?;
    write_model(BufWriter::new(f), file, FORMAT_VERSION)
}

/// Loads a model and checks that it belongs to `module`.
pub fn load_model(path: impl AsRef<Path>, module: &str) -> Result<ModelFile, ModelIoError> {
    let f = File::open(path)?;
    let file = read_model(BufReader::new(f), FORMAT_VERSION)?;
    if file.module != module {
        return Err(ModelIoError::WrongModule {
            expected: module.to_string(),
            found: file.module,
        });
    }
    Ok(file)
}
