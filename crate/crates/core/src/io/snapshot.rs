//! Binary primitive snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 4     | magic `SPLT`                           |
//! | 4     | version `u32` (currently 1)            |
//! | 4     | mode `u32`: 0 = 2D, 1 = 3D             |
//! | 8     | primitive count `u64`                  |
//! | n·4·k | per primitive, `k` `f32` values        |
//!
//! Per primitive the values are position, log_scale, rotation, opacity
//! logit and feature, each truncated to the live width of the mode:
//! `k = 2+2+1+1+3 = 9` in 2D and `3+3+4+1+3 = 14` in 3D.

use std::path::Path;

use crate::error::IoError;
use crate::primitive::{GaussianPrimitive, Mode, ParamGroup, Scene};

pub const MAGIC: [u8; 4] = *b"SPLT";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 20;

pub fn floats_per_primitive(mode: Mode) -> usize {
    ParamGroup::ALL.iter().map(|g| g.width(mode)).sum()
}

fn mode_flag(mode: Mode) -> u32 {
    match mode {
        Mode::TwoD => 0,
        Mode::ThreeD => 1,
    }
}

pub fn encode_snapshot(scene: &Scene) -> Vec<u8> {
    let k = floats_per_primitive(scene.mode);
    let mut out = Vec::with_capacity(HEADER_BYTES + scene.len() * k * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&mode_flag(scene.mode).to_le_bytes());
    out.extend_from_slice(&(scene.len() as u64).to_le_bytes());
    for p in &scene.primitives {
        for g in ParamGroup::ALL {
            for &v in p.group(g, scene.mode) {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Parses a snapshot. `path` only labels error messages.
pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<Scene, IoError> {
    let path_buf = || path.to_path_buf();
    let truncated = |expected: usize| IoError::Truncated {
        path: path_buf(),
        expected: expected as u64,
        actual: bytes.len() as u64,
    };
    if bytes.len() < HEADER_BYTES {
        return Err(truncated(HEADER_BYTES));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(IoError::BadMagic {
            path: path_buf(),
            found: magic,
        });
    }
    let version = u32_at(4);
    if version != VERSION {
        return Err(IoError::BadVersion {
            path: path_buf(),
            found: version,
            supported: VERSION,
        });
    }
    let mode = match u32_at(8) {
        0 => Mode::TwoD,
        1 => Mode::ThreeD,
        found => return Err(IoError::BadMode { path: path_buf(), found }),
    };
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let k = floats_per_primitive(mode) as u64;
    let expected = count
        .checked_mul(4 * k)
        .and_then(|b| b.checked_add(HEADER_BYTES as u64))
        .ok_or_else(|| IoError::Invalid(format!("{}: primitive count {count} overflows", path.display())))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(IoError::Truncated {
            path: path_buf(),
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(IoError::TrailingBytes {
            path: path_buf(),
            expected,
            actual,
        });
    }

    let mut floats = bytes[HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut primitives = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut p = GaussianPrimitive::default();
        for g in ParamGroup::ALL {
            for v in p.group_mut(g, mode) {
                *v = floats.next().expect("length checked above");
            }
        }
        primitives.push(p);
    }
    Ok(Scene::with_primitives(mode, primitives))
}

pub fn save_snapshot(scene: &Scene, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, encode_snapshot(scene)).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_snapshot(path: &Path) -> Result<Scene, IoError> {
    let bytes = std::fs::read(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_snapshot(&bytes, path)
}
