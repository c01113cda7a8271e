//! Binary container for named tensors.
//!
//! Layout (little-endian): 4-byte magic, `u32` version, `u32` header length
//! and a UTF-8 JSON header, `u32` block count, then per block a `u32`
//! name length, the name, a dtype tag byte, `u32` rank, `u64` dims and the
//! raw data. A footer holds the `u64` length of everything before it and
//! its CRC32.

use super::{DType, Scalar, Tensor};
use crate::error::{Error, Result};

const FOOTER: usize = 12;

/// Serializes `header` and `blocks` into a container.
pub fn encode<'a, T: Scalar + 'a>(
    magic: &[u8; 4],
    version: u32,
    header: &str,
    blocks: impl IntoIterator<Item = (&'a str, &'a Tensor<T>)>,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    let count_at = out.len();
    out.extend_from_slice(&0u32.to_le_bytes());
    let mut count = 0u32;
    for (name, t) in blocks {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(T::DTYPE as u8);
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.reserve(t.len() * T::DTYPE.size());
        for &v in t.data() {
            v.write_le(&mut out);
        }
        count += 1;
    }
    out[count_at..count_at + 4].copy_from_slice(&count.to_le_bytes());
    let len = out.len() as u64;
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// One tensor block borrowed from a decoded container.
#[derive(Clone, Debug)]
pub struct RawBlock<'a> {
    pub name: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    data: &'a [u8],
}

impl RawBlock<'_> {
    /// Converts to `T`, going through `f64` when the stored type differs.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let size = self.dtype.size();
        let data = self
            .data
            .chunks_exact(size)
            .map(|c| match self.dtype {
                d if d == T::DTYPE => T::read_le(c),
                DType::F32 => T::from_f64(f32::read_le(c) as f64),
                DType::F64 => T::from_f64(f64::read_le(c)),
            })
            .collect();
        Tensor::new(&self.shape, data).expect("block size checked on decode")
    }
}

#[derive(Clone, Debug)]
pub struct Decoded<'a> {
    pub header: String,
    pub blocks: Vec<RawBlock<'a>>,
}

fn integrity<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Integrity(msg.into()))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => integrity(format!("record at byte {} runs past the payload", self.pos)),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Verifies magic, version, length and checksum, then splits the blocks.
/// Nothing is returned unless the whole file checks out.
pub fn decode<'a>(bytes: &'a [u8], magic: &[u8; 4], version: u32) -> Result<Decoded<'a>> {
    if bytes.len() < 8 + FOOTER {
        return integrity(format!("file is only {} bytes long", bytes.len()));
    }
    if &bytes[..4] != magic {
        return integrity(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        ));
    }
    let found = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if found != version {
        return Err(Error::UnsupportedVersion {
            found,
            supported: version,
        });
    }
    let body_len = bytes.len() - FOOTER;
    let stored_len = u64::from_le_bytes(bytes[body_len..body_len + 8].try_into().expect("8"));
    let stored_crc = u32::from_le_bytes(bytes[body_len + 8..].try_into().expect("4"));
    if stored_len != body_len as u64 {
        return integrity(format!(
            "length footer says {stored_len} bytes but {body_len} are present"
        ));
    }
    let crc = crc32fast::hash(&bytes[..body_len]);
    if crc != stored_crc {
        return integrity(format!(
            "checksum mismatch (stored {stored_crc:08x}, computed {crc:08x})"
        ));
    }
    let mut r = Reader {
        bytes: &bytes[..body_len],
        pos: 8,
    };
    let hlen = r.u32()? as usize;
    let header = match std::str::from_utf8(r.take(hlen)?) {
        Ok(s) => s.to_string(),
        Err(_) => return integrity("header is not UTF-8"),
    };
    let count = r.u32()?;
    let mut blocks = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let nlen = r.u32()? as usize;
        let Ok(name) = std::str::from_utf8(r.take(nlen)?) else {
            return integrity("tensor name is not UTF-8");
        };
        let tag = r.take(1)?[0];
        let Some(dtype) = DType::from_tag(tag) else {
            return integrity(format!("unknown dtype tag {tag} for `{name}`"));
        };
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(dtype.size(), |acc, &d| acc.checked_mul(d));
        let Some(n) = n else {
            return integrity(format!("shape {shape:?} of `{name}` overflows"));
        };
        let data = r.take(n)?;
        blocks.push(RawBlock {
            name: name.to_string(),
            dtype,
            shape,
            data,
        });
    }
    if r.pos != body_len {
        return integrity(format!(
            "{} trailing bytes after the last block",
            body_len - r.pos
        ));
    }
    Ok(Decoded { header, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let a = Tensor::<f32>::from_fn(&[2, 3], |i| i as f32 * 0.5);
        let b = Tensor::<f32>::full(&[4], -1.0);
        let bytes = encode(b"TEST", 7, "{\"k\":1}", [("a", &a), ("b", &b)]);
        let d = decode(&bytes, b"TEST", 7).unwrap();
        assert_eq!(d.header, "{\"k\":1}");
        assert_eq!(d.blocks.len(), 2);
        assert_eq!(d.blocks[0].to_tensor::<f32>(), a);
        assert_eq!(d.blocks[1].to_tensor::<f64>(), b.cast::<f64>());

        assert!(matches!(
            decode(&bytes, b"TEST", 8),
            Err(Error::UnsupportedVersion {
                found: 7,
                supported: 8
            })
        ));
        assert!(matches!(
            decode(&bytes, b"XXXX", 7),
            Err(Error::Integrity(_))
        ));
        let mut bad = bytes.clone();
        *bad.last_mut().unwrap() ^= 1;
        assert!(matches!(decode(&bad, b"TEST", 7), Err(Error::Integrity(_))));
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert!(matches!(
            decode(&flipped, b"TEST", 7),
            Err(Error::Integrity(_))
        ));
        for cut in [0, 5, 19, bytes.len() - 1] {
            assert!(matches!(
                decode(&bytes[..cut], b"TEST", 7),
                Err(Error::Integrity(_))
            ));
        }
    }
}
