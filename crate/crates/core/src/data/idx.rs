//! IDX files as used by MNIST: a big-endian header followed by raw bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

/// Decoded images, row-major `[count, rows, cols]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<u32> {
        let b = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| Error::Format("IDX header truncated".into()))?;
        self.pos += 4;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")))
    }

    fn body(self, len: usize) -> Result<&'a [u8]> {
        let rest = &self.bytes[self.pos..];
        match rest.len().cmp(&len) {
            std::cmp::Ordering::Less => Err(Error::Format(format!(
                "IDX body truncated: {} of {len} bytes",
                rest.len()
            ))),
            std::cmp::Ordering::Greater => Err(Error::Format(format!(
                "IDX body has {} trailing bytes",
                rest.len() - len
            ))),
            std::cmp::Ordering::Equal => Ok(rest),
        }
    }
}

fn expect_magic(r: &mut Reader<'_>, want: u32) -> Result<()> {
    let got = r.u32()?;
    if got != want {
        return Err(Error::Format(format!("IDX magic {got}, expected {want}")));
    }
    Ok(())
}

pub fn decode_images(bytes: &[u8]) -> Result<IdxImages> {
    let mut r = Reader { bytes, pos: 0 };
    expect_magic(&mut r, IMAGE_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("IDX image dimensions overflow".into()))?;
    let pixels = r.body(len)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut r = Reader { bytes, pos: 0 };
    expect_magic(&mut r, LABEL_MAGIC)?;
    let count = r.u32()? as usize;
    Ok(r.body(count)?.to_vec())
}

pub fn encode_images(images: &IdxImages) -> Result<Vec<u8>> {
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::dim(format!(
            "{} pixels for {}x{}x{} images",
            images.pixels.len(),
            images.count,
            images.rows,
            images.cols
        )));
    }
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    Ok(out)
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    decode_images(&fs::read(path)?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    decode_labels(&fs::read(path)?)
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    fs::write(path, encode_images(images)?)?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    fs::write(path, encode_labels(labels))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_decoded_image() {
        let mut bytes = Vec::new();
        for v in [2051u32, 1, 2, 2] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        bytes.extend_from_slice(&[0, 128, 255, 64]);
        let img = decode_images(&bytes).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (1, 2, 2));
        assert_eq!(img.pixels, vec![0, 128, 255, 64]);
    }

    #[test]
    fn hand_decoded_labels() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 3, 0, 1, 1];
        assert_eq!(decode_labels(&bytes).unwrap(), vec![0, 1, 1]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut bytes = 9999u32.to_be_bytes().to_vec();
        bytes.extend_from_slice(&[0; 12]);
        assert!(matches!(decode_images(&bytes), Err(Error::Format(_))));
        assert!(matches!(
            decode_labels(&[0, 0, 8, 1, 0, 0, 0, 3, 0]),
            Err(Error::Format(_))
        ));
        assert!(matches!(decode_labels(&[0, 0, 8]), Err(Error::Format(_))));
        // image magic in a label file
        assert!(matches!(
            decode_labels(&[0, 0, 8, 3, 0, 0, 0, 0]),
            Err(Error::Format(_))
        ));
    }

    proptest! {
        #[test]
        fn roundtrip(count in 0usize..4, rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..count * rows * cols)
                .map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8)
                .collect();
            let img = IdxImages { count, rows, cols, pixels };
            prop_assert_eq!(decode_images(&encode_images(&img).unwrap()).unwrap(), img);
            let labels: Vec<u8> = (0..count).map(|i| (i as u64 ^ seed) as u8 % 10).collect();
            prop_assert_eq!(decode_labels(&encode_labels(&labels)).unwrap(), labels);
        }
    }
}
