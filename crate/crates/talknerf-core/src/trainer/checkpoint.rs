//! Binary checkpoint format.
//!
//! Layout: magic "DTNF", u32 LE version, u32 tensor count, then per tensor
//! u32 name length + UTF-8 name, u32 rank, u64 dims, raw little-endian
//! 4-byte floats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"DTNF";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl CheckpointTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Self {
        let t = Self {
            name: name.into(),
            shape,
            values,
        };
        assert_eq!(
            t.shape.iter().product::<usize>(),
            t.values.len(),
            "tensor {} shape/value mismatch",
            t.name
        );
        t
    }

    pub fn scalar(name: impl Into<String>, value: f32) -> Self {
        Self::new(name, vec![1], vec![value])
    }
}

pub fn save_checkpoint(path: &Path, tensors: &[CheckpointTensor]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        let name = t.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
        for &d in &t.shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in &t.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &str) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Checkpoint(format!("truncated while reading {what}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.bytes(8, what)?;
        Ok(u64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<CheckpointTensor>> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    let magic = r.bytes(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let count = r.u32("tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = r.u32(&format!("tensor {i} name length"))? as usize;
        if name_len > 4096 {
            return Err(Error::Checkpoint(format!(
                "tensor {i}: implausible name length {name_len}"
            )));
        }
        let name = String::from_utf8(r.bytes(name_len, "tensor name")?)
            .map_err(|_| Error::Checkpoint(format!("tensor {i}: name is not UTF-8")))?;
        let rank = r.u32(&format!("rank of '{name}'"))? as usize;
        if rank > 8 {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}': implausible rank {rank}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut len = 1usize;
        for _ in 0..rank {
            let d = r.u64(&format!("dims of '{name}'"))? as usize;
            len = len
                .checked_mul(d)
                .ok_or_else(|| Error::Checkpoint(format!("tensor '{name}': size overflow")))?;
            shape.push(d);
        }
        if len > 1 << 28 {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}': implausible element count {len}"
            )));
        }
        let raw = r.bytes(len * 4, &format!("values of '{name}'"))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(CheckpointTensor {
            name,
            shape,
            values,
        });
    }
    Ok(tensors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CheckpointTensor> {
        vec![
            CheckpointTensor::new("a.w", vec![2, 3], vec![1.0, -2.5, 0.0, 3.25, 9.125, -0.5]),
            CheckpointTensor::new("b", vec![4], vec![f32::MIN_POSITIVE, 1e30, -1e-30, 0.125]),
            CheckpointTensor::scalar("meta.step", 1234.0),
        ]
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let tensors = sample();
        save_checkpoint(&path, &tensors).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.len(), tensors.len());
        for (a, b) in loaded.iter().zip(tensors.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_names_the_problem() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        save_checkpoint(&path, &sample()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"DTNF");
        bytes.extend_from_slice(&99u32.to_le_bytes());
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("version"));
    }
}
