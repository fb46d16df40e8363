//! Little-endian checkpoint container.
//!
//! Layout: magic `HDRS`, `u32` version, `u32`-prefixed UTF-8 `key=value`
//! lines, `u32` array count, then per array a `u32`-prefixed name, `u32`
//! rank, `u64` dims and raw `f32` data; a trailing CRC-32 covers everything
//! before it.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"HDRS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    /// Ordered `key=value` metadata. Keys and values must not contain
    /// newlines; keys must not contain `=`.
    pub meta: Vec<(String, String)>,
    pub arrays: BTreeMap<String, Tensor<f32>>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Corrupt("invalid UTF-8".into()))
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

impl Checkpoint {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Corrupt(format!("missing metadata key {key}")))
    }

    /// Metadata entries whose key starts with `prefix.`, with the prefix removed.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.meta.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('.'))
                .map(|r| (r, v.as_str()))
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        let text: String = self.meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        put_str(&mut out, &text);
        put_u32(&mut out, self.arrays.len() as u32);
        for (name, t) in &self.arrays {
            put_str(&mut out, name);
            put_u32(&mut out, t.rank() as u32);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Corrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::FormatVersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if buf.len() < 12 {
            return Err(Error::Corrupt("truncated".into()));
        }
        let (body, tail) = buf.split_at(buf.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
            return Err(Error::Corrupt("checksum mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 8 };
        let text = r.string()?;
        let meta = text
            .lines()
            .map(|l| {
                l.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::Corrupt(format!("bad metadata line `{l}`")))
            })
            .collect::<Result<_>>()?;
        let count = r.u32()?;
        let mut arrays = BTreeMap::new();
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let n = n.ok_or_else(|| Error::Corrupt(format!("{name}: shape overflow")))?;
            let bytes = r.take(n.checked_mul(4).ok_or_else(|| Error::Corrupt("size overflow".into()))?)?;
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            arrays.insert(name, Tensor::new(shape, data)?);
        }
        if r.pos != body.len() {
            return Err(Error::Corrupt("trailing bytes".into()));
        }
        Ok(Self { meta, arrays })
    }

    /// Writes to a sibling temporary file, then renames over `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(&self.to_bytes()).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut arrays = BTreeMap::new();
        arrays.insert("a.weight".into(), Tensor::new([2, 3], vec![1.5f32, -0.0, f32::MIN_POSITIVE, 3.0, 1e-30, -7.25]).unwrap());
        arrays.insert("b".into(), Tensor::from_vec(vec![0.1f32]));
        Checkpoint {
            meta: vec![("model.hidden".into(), "4".into()), ("state.step".into(), "12".into())],
            arrays,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        for (k, t) in &c.arrays {
            let bits: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
            let got: Vec<u32> = back.arrays[k].data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, got);
        }
        assert_eq!(back.section("model").collect::<Vec<_>>(), vec![("hidden", "4")]);
    }

    #[test]
    fn truncation_and_corruption_detected() {
        let bytes = sample().to_bytes();
        for cut in [3, 8, 20, bytes.len() - 1] {
            assert!(matches!(Checkpoint::from_bytes(&bytes[..cut]), Err(Error::Corrupt(_))), "{cut}");
        }
        let mut flipped = bytes.clone();
        flipped[30] ^= 1;
        assert!(matches!(Checkpoint::from_bytes(&flipped), Err(Error::Corrupt(_))));
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(matches!(
            Checkpoint::from_bytes(&v2),
            Err(Error::FormatVersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn save_is_atomic_replace() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.hdrs");
        sample().save(&p).unwrap();
        let mut c = sample();
        c.meta.push(("k".into(), "v".into()));
        c.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), c);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
