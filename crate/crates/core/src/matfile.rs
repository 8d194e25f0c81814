//! Matrix files: a JSON format with property tags, a raw little-endian
//! binary sidecar, content hashes and atomic writes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matcore::{c, hermitian_defect, is_finite, unitarity_defect, ComplexMatrix};

pub const FORMAT_VERSION: u32 = 1;
/// Tolerance for tagged properties on load.
pub const TAG_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Hermitian,
    Unitary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub version: u32,
    pub dim: usize,
    /// Rows of [re, im] pairs.
    pub entries: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<Tag>,
}

impl MatrixFile {
    pub fn from_matrix(m: &ComplexMatrix, tags: &[Tag]) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch("matrix files hold square matrices".into()));
        }
        if !is_finite(m) {
            return Err(Error::NonFinite("matrix file entries".into()));
        }
        let entries = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        Ok(MatrixFile {
            version: FORMAT_VERSION,
            dim: m.nrows(),
            entries,
            tags: tags.to_vec(),
        })
    }

    /// The matrix, after checking shape, finiteness and tagged properties.
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported format version {}", self.version)));
        }
        let n = self.dim;
        if self.entries.len() != n || self.entries.iter().any(|r| r.len() != n) {
            return Err(Error::DimMismatch(format!("entries do not form a {n}×{n} array")));
        }
        let m = ComplexMatrix::from_fn(n, n, |i, j| c(self.entries[i][j][0], self.entries[i][j][1]));
        if !is_finite(&m) {
            return Err(Error::NonFinite("matrix file entries".into()));
        }
        for tag in &self.tags {
            match tag {
                Tag::Hermitian => {
                    let d = hermitian_defect(&m);
                    if d > TAG_TOL {
                        return Err(Error::NotHermitian(d));
                    }
                }
                Tag::Unitary => {
                    let d = unitarity_defect(&m);
                    if d > TAG_TOL {
                        return Err(Error::NotUnitary(d));
                    }
                }
            }
        }
        Ok(m)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Io(format!("matrix file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite entries serialize")
    }
}

/// Reads a matrix from a JSON matrix file, or a `.cbin` sidecar by extension.
pub fn read_matrix(path: &Path) -> Result<(ComplexMatrix, Vec<Tag>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|x| x == "cbin") {
        return Ok((decode_cbin(&bytes)?, Vec::new()));
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mf: MatrixFile = serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let m = mf.to_matrix()?;
    Ok((m, mf.tags))
}

/// Raw sidecar: dim as u64 LE, then 2·dim² f64 LE, row-major (re, im).
pub fn encode_cbin(m: &ComplexMatrix) -> Vec<u8> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(8 + 16 * n * n);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            out.extend_from_slice(&m[(i, j)].re.to_le_bytes());
            out.extend_from_slice(&m[(i, j)].im.to_le_bytes());
        }
    }
    out
}

pub fn decode_cbin(bytes: &[u8]) -> Result<ComplexMatrix> {
    let head: [u8; 8] = bytes
        .get(..8)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| Error::Io("cbin: missing header".into()))?;
    let n = u64::from_le_bytes(head) as usize;
    let need = n
        .checked_mul(n)
        .and_then(|x| x.checked_mul(16))
        .and_then(|x| x.checked_add(8))
        .ok_or_else(|| Error::Io("cbin: dimension overflows".into()))?;
    if bytes.len() != need {
        return Err(Error::Io(format!("cbin: expected {need} bytes, found {}", bytes.len())));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes"));
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let k = 2 * (i * n + j);
        c(f(k), f(k + 1))
    }))
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes through a temporary file in the target directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix, tags: &[Tag]) -> Result<()> {
    write_atomic(path, MatrixFile::from_matrix(m, tags)?.to_json().as_bytes())
}
