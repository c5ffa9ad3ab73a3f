use super::{Module, Padding};
use crate::error::{Error, Result};
use crate::tensor::{Element, GraphNode, Tensor};

/// Max pooling over `x [N, C, H, W]`. Gradient flows only to the arg-max of
/// each window; ties go to the first position in row-major order.
pub fn maxpool2d<T: Element>(
    x: &Tensor<T>,
    window: (usize, usize),
    stride: (usize, usize),
    padding: Padding,
) -> Result<Tensor<T>> {
    let xs = x.shape();
    if xs.len() != 4 {
        return Err(Error::dim(format!(
            "maxpool2d expects [N, C, H, W], got {xs:?}"
        )));
    }
    if stride.0 == 0 || stride.1 == 0 || window.0 == 0 || window.1 == 0 {
        return Err(Error::dim("maxpool2d window and stride must be positive"));
    }
    let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (oh, pt) = padding.resolve(h, window.0, stride.0)?;
    let (ow, pl) = padding.resolve(w, window.1, stride.1)?;

    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best: Option<(T, usize)> = None;
                for ky in 0..window.0 {
                    let Some(iy) = (oy * stride.0 + ky).checked_sub(pt).filter(|&v| v < h) else {
                        continue;
                    };
                    for kx in 0..window.1 {
                        let Some(ix) = (ox * stride.1 + kx).checked_sub(pl).filter(|&v| v < w)
                        else {
                            continue;
                        };
                        let idx = base + iy * w + ix;
                        let v = xd[idx];
                        if best.is_none_or(|(b, _)| v > b) {
                            best = Some((v, idx));
                        }
                    }
                }
                let (v, idx) = best.expect("window overlaps input");
                out.push(v);
                argmax.push(idx);
            }
        }
    }
    drop(xd);

    let mut nodes = Vec::new();
    if x.tracks() {
        let len = x.numel();
        nodes.push(GraphNode::new(x, move |g: &[T]| {
            let mut dx = vec![T::zero(); len];
            for (&gv, &i) in g.iter().zip(&argmax) {
                dx[i] = dx[i] + gv;
            }
            Ok(dx)
        }));
    }
    Ok(Tensor::from_op(out, vec![n, c, oh, ow], nodes))
}

#[derive(Clone, Copy, Debug)]
pub struct MaxPool2d {
    pub window: (usize, usize),
    pub stride: (usize, usize),
    pub padding: Padding,
}

impl MaxPool2d {
    pub fn new(window: (usize, usize), stride: (usize, usize), padding: Padding) -> Self {
        MaxPool2d {
            window,
            stride,
            padding,
        }
    }
}

impl<T: Element> Module<T> for MaxPool2d {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        maxpool2d(x, self.window, self.stride, self.padding)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_max() {
        let x = Tensor::<f64>::from_slice(&[1., 2., 3., 4.], &[1, 1, 2, 2], false).unwrap();
        let y = maxpool2d(&x, (2, 2), (2, 2), Padding::Valid).unwrap();
        assert_eq!(y.to_vec(), vec![4.0]);
    }

    #[test]
    fn ties_route_to_first() {
        let x = Tensor::<f64>::from_slice(&[7.0; 16], &[1, 1, 4, 4], true).unwrap();
        let y = maxpool2d(&x, (2, 2), (2, 2), Padding::Valid).unwrap();
        assert_eq!(y.to_vec(), vec![7.0; 4]);
        y.sum().backward().unwrap();
        let g = x.grad().unwrap();
        let hot: Vec<usize> = (0..16).filter(|&i| g[i] == 1.0).collect();
        assert_eq!(hot, vec![0, 2, 8, 10]);
        assert_eq!(g.iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn shapes_and_errors() {
        let x = Tensor::<f32>::zeros(&[1, 32, 26, 26]).unwrap();
        let y = maxpool2d(&x, (2, 2), (2, 2), Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 32, 13, 13]);
        let small = Tensor::<f32>::zeros(&[1, 1, 1, 1]).unwrap();
        assert!(matches!(
            maxpool2d(&small, (2, 2), (2, 2), Padding::Valid),
            Err(Error::Dimension(_))
        ));
        let same = maxpool2d(
            &Tensor::<f32>::zeros(&[1, 1, 5, 5]).unwrap(),
            (2, 2),
            (2, 2),
            Padding::Same,
        )
        .unwrap();
        assert_eq!(same.shape(), &[1, 1, 3, 3]);
    }
}
