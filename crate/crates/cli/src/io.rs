use std::fs;
use std::path::Path;

use ovseg3r_core::model::codec::Codec;
use ovseg3r_core::model::ply::{load_ply, save_ply};
use ovseg3r_core::model::PointCloud;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn read<T: Codec>(path: &Path) -> CliResult<T> {
    ovseg3r_core::model::codec::load(path).map_err(|source| CliError::Read { path: path.into(), source })
}

pub fn write<T: Codec>(path: &Path, value: &T) -> CliResult<()> {
    ensure_parent(path)?;
    ovseg3r_core::model::codec::save(path, value).map_err(|source| CliError::Read { path: path.into(), source })
}

pub fn read_points(path: &Path) -> CliResult<PointCloud> {
    load_ply(path).map_err(|source| CliError::Read { path: path.into(), source })
}

pub fn write_points(path: &Path, cloud: &PointCloud) -> CliResult<()> {
    ensure_parent(path)?;
    save_ply(path, cloud).map_err(|source| CliError::Read { path: path.into(), source })
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline; field order follows the type, so
/// output is stable.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable value");
    bytes.push(b'\n');
    bytes
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_bytes(path, &to_json_bytes(value))
}

/// Writes JSON to `path`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&to_json_bytes(value)).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = read_bytes(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e)),
        _ => Ok(()),
    }
}
