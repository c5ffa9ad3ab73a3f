use std::rc::Rc;

use rand::Rng;

use super::{Module, Parameter};
use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{Element, GraphNode, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// No padding; windows must fit inside the input.
    Valid,
    /// Output extent `ceil(in / stride)`; odd padding puts the extra pixel
    /// on the bottom/right.
    Same,
}

impl Padding {
    /// (output extent, leading pad) along one axis.
    pub(crate) fn resolve(
        self,
        input: usize,
        kernel: usize,
        stride: usize,
    ) -> Result<(usize, usize)> {
        match self {
            Padding::Valid => {
                if input < kernel {
                    return Err(Error::dim(format!(
                        "kernel {kernel} larger than input {input} with valid padding"
                    )));
                }
                Ok(((input - kernel) / stride + 1, 0))
            }
            Padding::Same => {
                let out = input.div_ceil(stride);
                let total = ((out - 1) * stride + kernel).saturating_sub(input);
                Ok((out, total / 2))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    oh: usize,
    ow: usize,
    pt: usize,
    pl: usize,
}

impl Geometry {
    fn k(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.oh * self.ow
    }

    /// Source pixel for column row `k`, output position `p`, if inside.
    #[inline]
    fn source(&self, k: usize, p: usize) -> Option<usize> {
        let kj = k % self.kw;
        let ki = (k / self.kw) % self.kh;
        let ch = k / (self.kw * self.kh);
        let (oy, ox) = (p / self.ow, p % self.ow);
        let iy = (oy * self.sh + ki).checked_sub(self.pt)?;
        let ix = (ox * self.sw + kj).checked_sub(self.pl)?;
        if iy >= self.h || ix >= self.w {
            return None;
        }
        Some((ch * self.h + iy) * self.w + ix)
    }

    fn im2col<T: Element>(&self, img: &[T]) -> Vec<T> {
        let (k, p) = (self.k(), self.p());
        let mut cols = vec![T::zero(); k * p];
        for r in 0..k {
            for q in 0..p {
                if let Some(s) = self.source(r, q) {
                    cols[r * p + q] = img[s];
                }
            }
        }
        cols
    }

    fn col2im<T: Element>(&self, cols: &[T]) -> Vec<T> {
        let (k, p) = (self.k(), self.p());
        let mut img = vec![T::zero(); self.c * self.h * self.w];
        for r in 0..k {
            for q in 0..p {
                if let Some(s) = self.source(r, q) {
                    img[s] = img[s] + cols[r * p + q];
                }
            }
        }
        img
    }
}

/// Sequential row-major `m×k · k×n`; the callers parallelize over samples.
fn gemm<T: Element>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

/// 2-D cross-correlation (no kernel flip) of `x [N, C, H, W]` with
/// `weight [O, C, kh, kw]` plus `bias [O]`.
pub fn conv2d<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: (usize, usize),
    padding: Padding,
) -> Result<Tensor<T>> {
    let xs = x.shape();
    let ws = weight.shape();
    if xs.len() != 4 || ws.len() != 4 {
        return Err(Error::dim(format!(
            "conv2d expects 4-D input and weight, got {xs:?}, {ws:?}"
        )));
    }
    let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (o, wc, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    if wc != c {
        return Err(Error::dim(format!(
            "conv2d input has {c} channels, weight expects {wc}"
        )));
    }
    if bias.shape() != [o] {
        return Err(Error::dim(format!(
            "conv2d bias {:?} for {o} filters",
            bias.shape()
        )));
    }
    if stride.0 == 0 || stride.1 == 0 {
        return Err(Error::dim("conv2d stride must be positive"));
    }
    let (oh, pt) = padding.resolve(h, kh, stride.0)?;
    let (ow, pl) = padding.resolve(w, kw, stride.1)?;
    let g = Geometry {
        c,
        h,
        w,
        kh,
        kw,
        sh: stride.0,
        sw: stride.1,
        oh,
        ow,
        pt,
        pl,
    };
    let (k, p) = (g.k(), g.p());

    let xd = x.to_vec();
    let wd = Rc::new(weight.to_vec());
    let bd = bias.to_vec();
    let img_len = c * h * w;

    let per_sample: Vec<(Vec<T>, Vec<T>)> = {
        let wd = &*wd;
        par::map_range(n, |i| {
            let cols = g.im2col(&xd[i * img_len..(i + 1) * img_len]);
            let mut out = gemm(wd, &cols, o, k, p);
            for (f, row) in out.chunks_mut(p).enumerate() {
                row.iter_mut().for_each(|v| *v = *v + bd[f]);
            }
            (out, cols)
        })
    };
    let mut data = Vec::with_capacity(n * o * p);
    let mut all_cols = Vec::with_capacity(n);
    for (out, cols) in per_sample {
        data.extend_from_slice(&out);
        all_cols.push(cols);
    }
    let all_cols = Rc::new(all_cols);
    let out_len = o * p;

    let mut nodes = Vec::new();
    if x.tracks() {
        let wd = wd.clone();
        nodes.push(GraphNode::new(x, move |gr: &[T]| {
            // weightᵀ (K×O) · g (O×P) per sample, then scatter back.
            let wt = crate::tensor::transpose(&wd, o, k);
            let parts = par::map_range(n, |i| {
                let dcols = gemm(&wt, &gr[i * out_len..(i + 1) * out_len], k, o, p);
                g.col2im(&dcols)
            });
            Ok(parts.concat())
        }));
    }
    if weight.tracks() {
        let all_cols = all_cols.clone();
        nodes.push(GraphNode::new(weight, move |gr: &[T]| {
            let cols: &[Vec<T>] = &all_cols;
            let parts = par::map_range(n, |i| {
                let colst = crate::tensor::transpose(&cols[i], k, p);
                gemm(&gr[i * out_len..(i + 1) * out_len], &colst, o, p, k)
            });
            let mut acc = vec![T::zero(); o * k];
            for part in parts {
                acc.iter_mut().zip(&part).for_each(|(a, &b)| *a = *a + b);
            }
            Ok(acc)
        }));
    }
    if bias.tracks() {
        nodes.push(GraphNode::new(bias, move |gr: &[T]| {
            let mut acc = vec![T::zero(); o];
            for i in 0..n {
                for (f, slot) in acc.iter_mut().enumerate() {
                    let base = i * out_len + f * p;
                    *slot = *slot + gr[base..base + p].iter().fold(T::zero(), |a, &b| a + b);
                }
            }
            Ok(acc)
        }));
    }
    Ok(Tensor::from_op(data, vec![n, o, oh, ow], nodes))
}

pub struct Conv2d<T: Element> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pub stride: (usize, usize),
    pub padding: Padding,
}

impl<T: Element> Conv2d<T> {
    pub fn new(
        input_channels: usize,
        output_channels: usize,
        kernel_size: (usize, usize),
        stride: (usize, usize),
        padding: Padding,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (kh, kw) = kernel_size;
        let weight = Parameter::glorot(
            &[output_channels, input_channels, kh, kw],
            input_channels * kh * kw,
            output_channels * kh * kw,
            rng,
        )?;
        Ok(Conv2d {
            weight,
            bias: Parameter::zeros(&[output_channels])?,
            stride,
            padding,
        })
    }

    pub fn from_parameters(
        weight: Parameter<T>,
        bias: Parameter<T>,
        stride: (usize, usize),
        padding: Padding,
    ) -> Self {
        Conv2d {
            weight,
            bias,
            stride,
            padding,
        }
    }
}

impl<T: Element> Module<T> for Conv2d<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, &self.weight, &self.bias, self.stride, self.padding)
    }

    fn local_parameters(&self) -> Vec<(&str, &Parameter<T>)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64], s: &[usize], g: bool) -> Tensor<f64> {
        Tensor::from_slice(v, s, g).unwrap()
    }

    #[test]
    fn one_by_one_scales() {
        let x = t(&[1., 2., 3., 4.], &[1, 1, 2, 2], false);
        let w = t(&[2.0], &[1, 1, 1, 1], false);
        let b = t(&[0.0], &[1], false);
        let y = conv2d(&x, &w, &b, (1, 1), Padding::Valid).unwrap();
        assert_eq!(y.to_vec(), vec![2., 4., 6., 8.]);
    }

    #[test]
    fn window_sums() {
        let x = t(&[1., 2., 3., 4., 5., 6., 7., 8., 9.], &[1, 1, 3, 3], false);
        let w = t(&[1.0; 4], &[1, 1, 2, 2], false);
        let b = t(&[0.0], &[1], false);
        let y = conv2d(&x, &w, &b, (1, 1), Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.to_vec(), vec![12., 16., 24., 28.]);
    }

    #[test]
    fn output_extents() {
        assert_eq!(Padding::Valid.resolve(28, 3, 1).unwrap(), (26, 0));
        assert_eq!(Padding::Valid.resolve(28, 5, 1).unwrap(), (24, 0));
        assert_eq!(Padding::Same.resolve(5, 2, 1).unwrap(), (5, 0));
        assert_eq!(Padding::Same.resolve(5, 3, 1).unwrap(), (5, 1));
        assert_eq!(Padding::Same.resolve(6, 3, 2).unwrap(), (3, 0));
        assert!(Padding::Valid.resolve(2, 3, 1).is_err());
    }

    #[test]
    fn same_padding_extra_on_bottom_right() {
        // 2x2 ones-kernel, "same" on 2x2: pad 1 total, all of it bottom/right.
        let x = t(&[1., 2., 3., 4.], &[1, 1, 2, 2], false);
        let w = t(&[1.0; 4], &[1, 1, 2, 2], false);
        let b = t(&[0.0], &[1], false);
        let y = conv2d(&x, &w, &b, (1, 1), Padding::Same).unwrap();
        assert_eq!(y.to_vec(), vec![10., 6., 7., 4.]);
    }

    #[test]
    fn channel_mismatch() {
        let x = Tensor::<f32>::zeros(&[1, 2, 4, 4]).unwrap();
        let w = Tensor::<f32>::zeros(&[1, 3, 2, 2]).unwrap();
        let b = Tensor::<f32>::zeros(&[1]).unwrap();
        assert!(matches!(
            conv2d(&x, &w, &b, (1, 1), Padding::Valid),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn bias_gradient_counts_positions() {
        let x = t(&[0.5; 2 * 9], &[2, 1, 3, 3], true);
        let w = t(&[1.0; 4], &[1, 1, 2, 2], true);
        let b = t(&[0.0], &[1], true);
        let y = conv2d(&x, &w, &b, (1, 1), Padding::Valid).unwrap();
        y.sum().backward().unwrap();
        assert_eq!(b.grad().unwrap(), vec![8.0]);
        assert_eq!(w.grad().unwrap(), vec![4.0; 4]);
        // center pixel is covered by all four windows
        assert_eq!(x.grad().unwrap()[4], 4.0);
        assert_eq!(x.grad().unwrap()[0], 1.0);
    }
}
