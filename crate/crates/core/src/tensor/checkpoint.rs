//! Flat binary weight container.
//!
//! ```text
//! "SPEC"  u32 version  [u8; 32] config digest
//! repeated until EOF:
//!   u32 name length, name bytes (UTF-8)
//!   u32 rank, rank × u64 extents
//!   numel × f32 payload
//! ```
//!
//! All integers and floats are little-endian. Parameters are written as
//! binary32, so a store whose values are binary32-representable round-trips
//! exactly.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ParamStore, Precision, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPEC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConfigDigest(pub [u8; 32]);

impl ConfigDigest {
    /// SHA-256 of a configuration's canonical text.
    pub fn of_text(text: &str) -> Self {
        let out = Sha256::digest(text.as_bytes());
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&out);
        ConfigDigest(bytes)
    }
}

impl fmt::Display for ConfigDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|b| write!(f, "{b:02x}"))
    }
}

impl fmt::Debug for ConfigDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConfigDigest({self})")
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub digest: ConfigDigest,
    pub params: ParamStore,
}

pub fn to_bytes(params: &ParamStore, digest: &ConfigDigest) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + params.num_elements() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&digest.0);
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &e in t.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for &x in t.data() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| {
            Error::Checkpoint(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a weight checkpoint".into()));
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let digest = ConfigDigest(cur.take(32, "digest")?.try_into().unwrap());
    let mut params = ParamStore::new(Precision::Binary32);
    while cur.pos < bytes.len() {
        let len = cur.u32("name length")? as usize;
        let name = std::str::from_utf8(cur.take(len, "name")?)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = cur.u32("rank")? as usize;
        let shape = (0..rank)
            .map(|_| cur.u64("extent").map(|e| e as usize))
            .collect::<Result<Vec<_>>>()?;
        let numel: usize = shape.iter().product();
        let payload = cur.take(numel * 4, &name)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        params.add(name, Tensor::new(&shape, data)?)?;
    }
    Ok(Checkpoint { digest, params })
}

pub fn save(mut w: impl Write, params: &ParamStore, digest: &ConfigDigest) -> std::io::Result<()> {
    w.write_all(&to_bytes(params, digest))
}

pub fn load(mut r: impl Read) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    from_bytes(&bytes)
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_file(path: &Path, params: &ParamStore, digest: &ConfigDigest) -> Result<()> {
    crate::io::write_atomic(path, &to_bytes(params, digest))
}

pub fn read_file(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rng;

    fn sample_store() -> ParamStore {
        let mut p = ParamStore::new(Precision::Binary32);
        let mut r = rng::seeded(5);
        p.add_weight("layer.weight", 3, 4, &mut r).unwrap();
        p.add_zeros("layer.bias", 3).unwrap();
        p.add("scalar", Tensor::scalar(0.1)).unwrap();
        p
    }

    #[test]
    fn byte_exact_round_trip() {
        let store = sample_store();
        let digest = ConfigDigest::of_text("d = 8\n");
        let bytes = to_bytes(&store, &digest);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back.digest, digest);
        assert_eq!(back.params, store);
        assert_eq!(to_bytes(&back.params, &back.digest), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&ParamStore::new(Precision::Binary32), &ConfigDigest([7; 32]));
        assert_eq!(&bytes[..4], b"SPEC");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..40], &[7u8; 32]);
        assert_eq!(bytes.len(), 40);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = to_bytes(&sample_store(), &ConfigDigest([0; 32]));
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
    }

    #[test]
    fn digest_hex_is_stable() {
        let d = ConfigDigest::of_text("");
        assert_eq!(
            d.to_string(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
