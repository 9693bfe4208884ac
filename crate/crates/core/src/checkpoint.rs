//! Versioned binary checkpoint files holding named tensors.
//!
//! Layout: magic `RRCK`, u32 version, u32 tensor count, then per tensor a
//! u16 name length, the UTF-8 name, a u8 rank, one u32 per dimension, and the
//! row-major f64 payload. All integers and floats are little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const MAGIC: [u8; 4] = *b"RRCK";
pub const VERSION: u32 = 1;

/// An ordered collection of named tensors.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub entries: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.entries.push((name.into(), tensor));
    }

    /// Look up a tensor by exact name.
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Lookup(format!("checkpoint has no tensor named '{name}'")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    /// Serialize to bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, tensor) in &self.entries {
            let name_bytes = name.as_bytes();
            if name_bytes.len() > u16::MAX as usize {
                return Err(Error::Validation(format!("tensor name too long: {name}")));
            }
            if tensor.rank() > u8::MAX as usize {
                return Err(Error::Validation(format!("tensor rank too high: {name}")));
            }
            buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
            buf.extend_from_slice(name_bytes);
            buf.push(tensor.rank() as u8);
            for &dim in &tensor.shape {
                buf.extend_from_slice(&(dim as u32).to_le_bytes());
            }
            for &x in &tensor.data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        Ok(buf)
    }

    /// Write atomically: serialize to a temp file in the same directory, then
    /// rename over the destination.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != MAGIC {
            return Err(Error::Validation("bad checkpoint magic bytes".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let count = cur.u32()? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = cur.u16()? as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| Error::Validation("tensor name is not valid UTF-8".into()))?;
            let rank = cur.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u32()? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut data = Vec::with_capacity(numel);
            for _ in 0..numel {
                data.push(cur.f64()?);
            }
            entries.push((name, Tensor::new(shape, data)?));
        }
        if cur.pos != bytes.len() {
            return Err(Error::Validation(format!(
                "{} trailing bytes after checkpoint payload",
                bytes.len() - cur.pos
            )));
        }
        Ok(Checkpoint { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// Encode a u64 as a finite two-element tensor (high 32 bits, low 32 bits) so
/// fingerprints can ride inside the tensor-only checkpoint format.
pub fn u64_to_tensor(x: u64) -> Tensor {
    Tensor {
        shape: vec![2],
        data: vec![(x >> 32) as f64, (x & 0xffff_ffff) as f64],
    }
}

pub fn tensor_to_u64(t: &Tensor) -> Result<u64> {
    if t.numel() != 2 {
        return Err(Error::Validation("fingerprint tensor must have 2 entries".into()));
    }
    let hi = t.data[0] as u64;
    let lo = t.data[1] as u64;
    Ok((hi << 32) | lo)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Validation("checkpoint file truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ck = Checkpoint::new();
        ck.push("verifier.W1", Tensor::uniform(&mut rng, vec![4, 3], 1.0));
        ck.push("verifier.b1", Tensor::uniform(&mut rng, vec![3], 1.0));
        ck.push("scalar", Tensor::scalar(-0.25));
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.entries.len(), 3);
        for ((n1, t1), (n2, t2)) in ck.entries.iter().zip(&back.entries) {
            assert_eq!(n1, n2);
            assert_eq!(t1, t2);
        }
        // Serialization is deterministic.
        assert_eq!(bytes, back.to_bytes().unwrap());
    }

    #[test]
    fn header_starts_with_magic_and_version() {
        let ck = Checkpoint::new();
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[0..4], b"RRCK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut ck = Checkpoint::new();
        ck.push("t", Tensor::scalar(1.0));
        let mut bytes = ck.to_bytes().unwrap();
        let mut corrupted = bytes.clone();
        corrupted[0] = b'X';
        assert!(Checkpoint::from_bytes(&corrupted).is_err());
        bytes.truncate(bytes.len() - 1);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn missing_tensor_is_a_lookup_error() {
        let ck = Checkpoint::new();
        assert!(matches!(ck.get("nope"), Err(Error::Lookup(_))));
    }

    #[test]
    fn u64_fingerprint_roundtrip() {
        for x in [0u64, 1, 0xdeadbeefcafebabe, u64::MAX] {
            assert_eq!(tensor_to_u64(&u64_to_tensor(x)).unwrap(), x);
        }
    }

    #[test]
    fn save_and_load_via_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut ck = Checkpoint::new();
        ck.push("a", Tensor::new(vec![2], vec![1.5, -2.5]).unwrap());
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.get("a").unwrap().data, vec![1.5, -2.5]);
        // The temp file is gone after the rename.
        assert!(!path.with_extension("tmp").exists());
    }
}
