//! Image datasets: IDX files, synthetic glyphs, filtering and batching.

pub mod idx;
pub mod synthetic;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optim::to_one_hot;
use crate::tensor::{Element, Tensor};

pub use idx::{load_idx_images, load_idx_labels, write_idx_images, write_idx_labels, IdxImages};
pub use synthetic::{qae_product_states, synthetic_digits};

/// Greyscale images (0..=255, row-major) with one label each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledImages {
    pixels: Vec<u8>,
    labels: Vec<u8>,
    rows: usize,
    cols: usize,
}

impl LabeledImages {
    pub fn new(pixels: Vec<u8>, labels: Vec<u8>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || pixels.len() != labels.len() * rows * cols {
            return Err(Error::dim(format!(
                "{} pixels do not make {} images of {rows}x{cols}",
                pixels.len(),
                labels.len()
            )));
        }
        Ok(LabeledImages {
            pixels,
            labels,
            rows,
            cols,
        })
    }

    /// Pairs an image file with a label file of the same length.
    pub fn load(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        let img = load_idx_images(images)?;
        let lab = load_idx_labels(labels)?;
        if img.count != lab.len() {
            return Err(Error::Format(format!(
                "{} images but {} labels",
                img.count,
                lab.len()
            )));
        }
        Self::new(img.pixels, lab, img.rows, img.cols)
    }

    /// Writes `<stem>-images.idx3-ubyte` and `<stem>-labels.idx1-ubyte` into
    /// `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_idx_images(
            dir.join(format!("{stem}-images.idx3-ubyte")),
            &self.to_idx(),
        )?;
        write_idx_labels(dir.join(format!("{stem}-labels.idx1-ubyte")), &self.labels)
    }

    pub fn to_idx(&self) -> IdxImages {
        IdxImages {
            count: self.len(),
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    fn select(&self, keep: impl IntoIterator<Item = usize>) -> Self {
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for i in keep {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        LabeledImages {
            pixels,
            labels,
            rows: self.rows,
            cols: self.cols,
        }
    }

    /// The first `n` samples (or all of them).
    pub fn take(&self, n: usize) -> Self {
        self.select(0..n.min(self.len()))
    }
}

/// Keeps samples whose label is in `digits`, in order.
pub fn filter_digits(data: &LabeledImages, digits: &[u8]) -> LabeledImages {
    data.select((0..data.len()).filter(|&i| digits.contains(&data.labels[i])))
}

/// One mini-batch: images `[B, 1, rows, cols]` scaled to `[0, 1]`, one-hot
/// targets `[B, classes]`, and the raw labels.
pub struct Batch<T: Element> {
    pub x: Tensor<T>,
    pub y: Tensor<T>,
    pub labels: Vec<usize>,
}

/// Iterator over mini-batches; the last one may be short.
pub struct Batches<'a, T: Element> {
    data: &'a LabeledImages,
    order: Vec<usize>,
    batch_size: usize,
    classes: usize,
    pos: usize,
    _t: std::marker::PhantomData<T>,
}

/// Splits `data` into batches, optionally in a seeded random order.
pub fn batch_generator<T: Element>(
    data: &LabeledImages,
    batch_size: usize,
    classes: usize,
    shuffle: bool,
    seed: u64,
) -> Result<Batches<'_, T>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if let Some(&l) = data.labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::Config(format!(
            "label {l} does not fit {classes} classes"
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    if shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(Batches {
        data,
        order,
        batch_size,
        classes,
        pos: 0,
        _t: std::marker::PhantomData,
    })
}

impl<T: Element> Iterator for Batches<'_, T> {
    type Item = Result<Batch<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let idx = &self.order[self.pos..(self.pos + self.batch_size).min(self.order.len())];
        self.pos += idx.len();
        let (r, c) = (self.data.rows, self.data.cols);
        let mut px = Vec::with_capacity(idx.len() * r * c);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            px.extend(self.data.image(i).iter().map(|&p| T::of(p as f64 / 255.0)));
            labels.push(self.data.labels[i] as usize);
        }
        let batch = (|| {
            Ok(Batch {
                x: Tensor::new(px, &[idx.len(), 1, r, c], false)?,
                y: to_one_hot(&labels, self.classes)?,
                labels,
            })
        })();
        Some(batch)
    }
}
