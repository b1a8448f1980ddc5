//! PMTE matrix container.
//!
//! Layout, all little-endian, row-major:
//!
//! ```text
//! "PMTE"            4 bytes magic
//! version: u32      always 1
//! count:   u32      number of tensors
//! per tensor:
//!   rank:  u32
//!   dims:  u32 * rank
//!   data:  f32 * product(dims)
//! ```
//!
//! Readers reject anything that does not consume the buffer exactly, so a
//! truncated or padded file never yields a partial result.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PMTE";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "tensor dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_matrix(m: &Array2<f64>) -> Self {
        let (r, c) = m.dim();
        Tensor {
            dims: vec![r, c],
            data: m.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_vector(v: &[f64]) -> Self {
        Tensor {
            dims: vec![v.len()],
            data: v.iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<Array2<f64>> {
        if self.dims.len() != 2 {
            return Err(Error::Shape(format!(
                "expected rank-2 tensor, got rank {}",
                self.dims.len()
            )));
        }
        let data = self.data.iter().map(|&v| v as f64).collect();
        Array2::from_shape_vec((self.dims[0], self.dims[1]), data)
            .map_err(|e| Error::Shape(e.to_string()))
    }

    pub fn to_vector(&self) -> Result<Vec<f64>> {
        if self.dims.len() != 1 {
            return Err(Error::Shape(format!(
                "expected rank-1 tensor, got rank {}",
                self.dims.len()
            )));
        }
        Ok(self.data.iter().map(|&v| v as f64).collect())
    }
}

pub fn encode(tensors: &[Tensor]) -> Vec<u8> {
    let payload: usize = tensors
        .iter()
        .map(|t| 4 + 4 * t.dims.len() + 4 * t.data.len())
        .sum();
    let mut out = Vec::with_capacity(12 + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
        for &d in &t.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Container(format!(
                    "truncated: need {n} bytes at offset {}, have {}",
                    self.pos,
                    self.buf.len() - self.pos
                ))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<Tensor>> {
    let mut cur = Cursor { buf, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::Container(format!("bad magic {magic:?}")));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let rank = cur.u32()? as usize;
        let mut dims = Vec::with_capacity(rank.min(16));
        for _ in 0..rank {
            dims.push(cur.u32()? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Container("tensor size overflows".into()))?;
        let bytes = cur.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::Container("tensor size overflows".into()))?,
        )?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(Tensor { dims, data });
    }
    if cur.pos != buf.len() {
        return Err(Error::Container(format!(
            "{} trailing bytes after last tensor",
            buf.len() - cur.pos
        )));
    }
    Ok(tensors)
}

pub fn write(path: &Path, tensors: &[Tensor]) -> Result<()> {
    fs::write(path, encode(tensors)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<Vec<Tensor>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -2.5]).unwrap();
        let bytes = encode(&[t]);
        assert_eq!(&bytes[0..4], b"PMTE");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &2u32.to_le_bytes());
        assert_eq!(&bytes[24..28], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 32);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let good = encode(&[t]);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Container(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode(&bad), Err(Error::Container(_))));

        for cut in 0..good.len() {
            assert!(decode(&good[..cut]).is_err(), "cut at {cut}");
        }

        let mut long = good.clone();
        long.push(0);
        assert!(decode(&long).is_err());
    }

    #[test]
    fn shape_checked_on_construction() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_identical(
            shapes in prop::collection::vec((0usize..5, 1usize..5), 0..4),
            seed in any::<u64>()
        ) {
            use rand::Rng as _;
            let mut rng = crate::seed::rng(seed);
            let tensors: Vec<Tensor> = shapes
                .iter()
                .map(|&(r, c)| {
                    let data = (0..r * c).map(|_| f32::from_bits(rng.random::<u32>() & 0xbfff_ffff)).collect();
                    Tensor::new(vec![r, c], data).unwrap()
                })
                .collect();
            let back = decode(&encode(&tensors)).unwrap();
            prop_assert_eq!(back.len(), tensors.len());
            for (a, b) in back.iter().zip(&tensors) {
                prop_assert_eq!(&a.dims, &b.dims);
                let abits: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
                let bbits: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(abits, bbits);
            }
        }
    }
}
