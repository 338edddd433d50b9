//! Weight file layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "S2MLPWTS"
//! version    u32      1
//! count      u32      number of tensors
//! per tensor, in lexicographic path order:
//!   name_len u16, name (UTF-8), dtype u8 (0 = f32, 1 = f64), ndim u8,
//!   dims     u64 × ndim, data (raw little-endian values)
//! crc32      u32      over every preceding byte
//! ```
//!
//! Decoding checks the magic first, then the checksum, then the version, and
//! only then walks the tensor records.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, WeightFileError};
use crate::model::ParamStore;
use crate::tensor::{DType, Scalar, Tensor};

pub const MAGIC: &[u8; 8] = b"S2MLPWTS";
pub const VERSION: u32 = 1;

const HEADER: usize = 8 + 4 + 4;
const TRAILER: usize = 4;

/// Serializes `store` into a fresh buffer.
pub fn encode_weights<T: Scalar>(store: &ParamStore<T>) -> Result<Vec<u8>> {
    if store.is_empty() {
        return Err(WeightFileError::EmptyStore.into());
    }
    let payload: usize = store
        .iter()
        .map(|(p, t)| 2 + p.len() + 2 + 8 * t.rank() + t.numel() * T::DTYPE.size())
        .sum();
    let mut out = Vec::with_capacity(HEADER + payload + TRAILER);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (path, t) in store.iter() {
        let name = path.as_bytes();
        let name_len = u16::try_from(name.len())
            .map_err(|_| WeightFileError::Malformed(format!("path {path} is too long")))?;
        let ndim = u8::try_from(t.rank())
            .map_err(|_| WeightFileError::Malformed(format!("tensor {path} has too many axes")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(T::DTYPE.code());
        out.push(ndim);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Writes `store` to `sink`, returning the number of bytes written.
pub fn save_weights<T: Scalar>(store: &ParamStore<T>, mut sink: impl Write) -> Result<usize> {
    let bytes = encode_weights(store)?;
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(bytes.len())
}

pub fn write_weights<T: Scalar>(store: &ParamStore<T>, path: impl AsRef<Path>) -> Result<usize> {
    save_weights(store, BufWriter::new(File::create(path)?))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WeightFileError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                WeightFileError::Truncated(format!(
                    "{what} needs {n} bytes at offset {}, only {} remain",
                    self.pos,
                    self.bytes.len() - self.pos
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, WeightFileError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, WeightFileError> {
        Ok(u16::from_le_bytes(
            self.take(2, what)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self, what: &str) -> Result<u32, WeightFileError> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &str) -> Result<u64, WeightFileError> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Parses a complete weight file. Every tensor must have dtype `T`.
pub fn decode_weights<T: Scalar>(bytes: &[u8]) -> Result<ParamStore<T>> {
    Ok(decode(bytes)?)
}

fn decode<T: Scalar>(bytes: &[u8]) -> Result<ParamStore<T>, WeightFileError> {
    let head = &bytes[..bytes.len().min(MAGIC.len())];
    if head != &MAGIC[..head.len()] {
        return Err(WeightFileError::BadMagic);
    }
    if bytes.len() < HEADER + TRAILER {
        return Err(WeightFileError::Truncated(format!(
            "{} bytes is shorter than the fixed header and checksum",
            bytes.len()
        )));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - TRAILER);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(WeightFileError::ChecksumMismatch { stored, computed });
    }

    let mut cur = Cursor {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(WeightFileError::UnsupportedVersion(version));
    }
    let count = cur.u32("tensor count")?;
    let mut store = ParamStore::new();
    let mut previous: Option<String> = None;
    for index in 0..count {
        let name_len = cur.u16("name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "tensor name")?)
            .map_err(|_| WeightFileError::Malformed(format!("tensor {index} name is not UTF-8")))?
            .to_string();
        if previous.as_deref().is_some_and(|p| p >= name.as_str()) {
            return Err(WeightFileError::Malformed(format!(
                "tensor {name} is out of lexicographic order or duplicated"
            )));
        }
        let code = cur.u8("dtype")?;
        let dtype = DType::from_code(code).ok_or_else(|| {
            WeightFileError::Malformed(format!("tensor {name} has unknown dtype code {code}"))
        })?;
        if dtype != T::DTYPE {
            return Err(WeightFileError::DTypeMismatch {
                path: name,
                found: dtype.name(),
                expected: T::DTYPE.name(),
            });
        }
        let ndim = cur.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let d = cur.u64("dimension")?;
            shape.push(usize::try_from(d).map_err(|_| {
                WeightFileError::Malformed(format!("tensor {name} dimension {d} is too large"))
            })?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(dtype.size()))
            .ok_or_else(|| WeightFileError::Malformed(format!("tensor {name} size overflows")))?;
        let raw = cur.take(numel, &format!("data of {name}"))?;
        let data: Vec<T> = raw.chunks_exact(dtype.size()).map(T::read_le).collect();
        let tensor = Tensor::from_vec(&shape, data)
            .map_err(|e| WeightFileError::Malformed(format!("tensor {name}: {e}")))?;
        previous = Some(name.clone());
        store.insert(name, tensor);
    }
    if cur.pos != body.len() {
        return Err(WeightFileError::Malformed(format!(
            "{} unexpected bytes after the last tensor",
            body.len() - cur.pos
        )));
    }
    Ok(store)
}

pub fn load_weights<T: Scalar>(mut source: impl Read) -> Result<ParamStore<T>> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode_weights(&bytes)
}

pub fn read_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<ParamStore<T>> {
    load_weights(BufReader::new(File::open(path)?))
}
