//! Binary embedding files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes   | field                          |
//! |---------|--------------------------------|
//! | 4       | magic `EMBX`                   |
//! | 2       | format version (u16, = 1)      |
//! | 1       | language code length `L`       |
//! | L       | language code, UTF-8           |
//! | 4       | row count `n` (u32)            |
//! | 4       | dimension `d` (u32)            |
//! | 4·n·d   | f32 values, row-major          |

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBX";
pub const VERSION: u16 = 1;

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated while reading {what}")),
        _ => Error::Io(e),
    })
}

pub fn read<R: Read>(mut r: R) -> Result<EmbeddingMatrix> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut b2 = [0u8; 2];
    read_exact(&mut r, &mut b2, "version")?;
    let version = u16::from_le_bytes(b2);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut b1 = [0u8; 1];
    read_exact(&mut r, &mut b1, "language length")?;
    let mut code = vec![0u8; b1[0] as usize];
    read_exact(&mut r, &mut code, "language code")?;
    let lang = String::from_utf8(code).map_err(|_| Error::Format("language code is not UTF-8".into()))?;

    let mut b4 = [0u8; 4];
    read_exact(&mut r, &mut b4, "row count")?;
    let n = u32::from_le_bytes(b4) as usize;
    read_exact(&mut r, &mut b4, "dimension")?;
    let d = u32::from_le_bytes(b4) as usize;
    if n == 0 || d == 0 {
        return Err(Error::Format(format!("empty matrix {n}x{d}")));
    }

    let mut payload = vec![0u8; n * d * 4];
    read_exact(&mut r, &mut payload, "values")?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after values".into()));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    EmbeddingMatrix::new(lang, DMatrix::from_row_slice(n, d, &values))
}

/// Writes `m` rounding every value to f32.
pub fn write<W: Write>(m: &EmbeddingMatrix, mut w: W) -> Result<()> {
    let code = m.lang.as_bytes();
    let code_len = u8::try_from(code.len())
        .map_err(|_| Error::Format(format!("language code {:?} longer than 255 bytes", m.lang)))?;
    let n = u32::try_from(m.n()).map_err(|_| Error::Format("too many rows".into()))?;
    let d = u32::try_from(m.d()).map_err(|_| Error::Format("dimension too large".into()))?;

    let mut buf = Vec::with_capacity(15 + code.len() + m.n() * m.d() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(code_len);
    buf.extend_from_slice(code);
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&d.to_le_bytes());
    for i in 0..m.n() {
        for j in 0..m.d() {
            buf.extend_from_slice(&(m.values[(i, j)] as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path)?;
    read(&bytes[..]).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
