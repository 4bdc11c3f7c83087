// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary embedding-matrix files.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CLAN"
//! 4       4     version, u32 LE (= 1)
//! 8       8     rows, u64 LE
//! 16      8     cols, u64 LE
//! 24      1     dtype (1 = f32)
//! 25      4·n   payload, f32 LE, row-major
//! ```

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::solver::DenseMatrix;

pub const MAGIC: [u8; 4] = *b"CLAN";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 1;
pub const HEADER_LEN: usize = 25;
/// Default cap on `rows × cols` accepted by the reader.
pub const DEFAULT_MAX_ELEMENTS: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixHeader {
    pub rows: u64,
    pub cols: u64,
    pub dtype: u8,
}

impl MatrixHeader {
    pub fn payload_len(&self) -> u64 {
        self.rows * self.cols * 4
    }

    fn parse(bytes: &[u8; HEADER_LEN], max_elements: u64) -> Result<Self> {
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
        let dtype = bytes[24];
        if dtype != DTYPE_F32 {
            return Err(Error::UnsupportedDtype(dtype));
        }
        match rows.checked_mul(cols) {
            Some(n) if n <= max_elements && usize::try_from(n).is_ok() => {}
            _ => {
                return Err(Error::OversizeGuard {
                    rows,
                    cols,
                    cap: max_elements,
                })
            }
        }
        Ok(Self { rows, cols, dtype })
    }
}

pub fn encode_matrix(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&m.to_le_bytes());
    out
}

/// Decodes a matrix from a complete in-memory file image.
pub fn decode_matrix(bytes: &[u8], max_elements: u64) -> Result<DenseMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let header = MatrixHeader::parse(bytes[..HEADER_LEN].try_into().unwrap(), max_elements)?;
    let body = &bytes[HEADER_LEN..];
    check_body_len(&header, body.len() as u64)?;
    payload_to_matrix(&header, body)
}

fn check_body_len(header: &MatrixHeader, actual: u64) -> Result<()> {
    let expected = header.payload_len();
    if actual < expected {
        return Err(Error::TruncatedPayload { expected, actual });
    }
    if actual > expected {
        return Err(Error::TrailingData {
            extra: actual - expected,
        });
    }
    Ok(())
}

fn payload_to_matrix(header: &MatrixHeader, body: &[u8]) -> Result<DenseMatrix> {
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::new(header.rows as usize, header.cols as usize, data)
}

pub fn write_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &encode_matrix(m))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    read_matrix_with_cap(path, DEFAULT_MAX_ELEMENTS)
}

/// Reads a matrix file, validating the header and the file length before
/// allocating the payload.
pub fn read_matrix_with_cap(path: impl AsRef<Path>, max_elements: u64) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut head = [0u8; HEADER_LEN];
    if file_len < HEADER_LEN as u64 {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN as u64,
            actual: file_len,
        });
    }
    file.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    let header = MatrixHeader::parse(&head, max_elements)?;
    check_body_len(&header, file_len - HEADER_LEN as u64)?;
    let mut body = vec![0u8; header.payload_len() as usize];
    file.read_exact(&mut body).map_err(|e| Error::io(path, e))?;
    payload_to_matrix(&header, &body)
}

/// Streams a matrix to any writer (no atomic rename).
pub fn write_matrix_to(m: &DenseMatrix, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(&encode_matrix(m))
}
