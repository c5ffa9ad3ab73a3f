//! Flat binary tensor blobs.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "HYQT" | version: u32 | dtype: u8 | rank: u8 | dims: rank x u64 | values
//! ```
//!
//! Values are row-major, `f32` or `f64` per the dtype byte.

use std::fs;
use std::path::Path;

use super::{DType, Element, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HYQT";
pub const VERSION: u32 = 1;

pub fn encode<T: Element>(t: &Tensor<T>) -> Vec<u8> {
    let shape = t.shape();
    let mut out = Vec::with_capacity(10 + 8 * shape.len() + t.numel() * T::DTYPE.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(T::DTYPE as u8);
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data().iter() {
        v.write_le(&mut out);
    }
    out
}

/// Decodes a blob; the stored dtype must match `T`.
pub fn decode<T: Element>(bytes: &[u8]) -> Result<Tensor<T>> {
    let bad = |m: &str| Error::Format(format!("tensor blob: {m}"));
    if bytes.len() < 10 || &bytes[..4] != MAGIC {
        return Err(bad("missing HYQT magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dtype = DType::from_code(bytes[8]).ok_or_else(|| bad("unknown dtype"))?;
    if dtype != T::DTYPE {
        return Err(bad(&format!("stored {dtype:?}, requested {:?}", T::DTYPE)));
    }
    let rank = bytes[9] as usize;
    let header = 10 + 8 * rank;
    if bytes.len() < header {
        return Err(bad("truncated header"));
    }
    let shape: Vec<usize> = (0..rank)
        .map(|i| {
            let off = 10 + 8 * i;
            u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize
        })
        .collect();
    let count: usize = shape.iter().product();
    let size = dtype.size();
    if bytes.len() != header + count * size {
        return Err(bad(&format!(
            "expected {} value bytes, found {}",
            count * size,
            bytes.len() - header
        )));
    }
    let values = bytes[header..].chunks_exact(size).map(T::read_le).collect();
    Tensor::new(values, &shape, false)
}

pub fn save<T: Element>(t: &Tensor<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(t))?;
    Ok(())
}

pub fn load<T: Element>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::<f32>::from_slice(&[1.0, 2.0], &[1, 2], false).unwrap();
        let b = encode(&t);
        assert_eq!(&b[..4], b"HYQT");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(b[8], 0);
        assert_eq!(b[9], 2);
        assert_eq!(u64::from_le_bytes(b[10..18].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[18..26].try_into().unwrap()), 2);
        assert_eq!(&b[26..30], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 34);
    }

    #[test]
    fn rejects_corruption() {
        let t = Tensor::<f64>::from_slice(&[1.0, 2.0, 3.0], &[3], false).unwrap();
        let mut b = encode(&t);
        assert!(decode::<f32>(&b).is_err());
        b.pop();
        assert!(matches!(decode::<f64>(&b), Err(Error::Format(_))));
        b[0] = b'X';
        assert!(decode::<f64>(&b).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(values in prop::collection::vec(-1e6f64..1e6, 1..64)) {
            let n = values.len();
            let t = Tensor::<f64>::new(values.clone(), &[n], false).unwrap();
            let back = decode::<f64>(&encode(&t)).unwrap();
            prop_assert_eq!(back.shape(), &[n]);
            prop_assert_eq!(back.to_vec(), values);
        }
    }
}
