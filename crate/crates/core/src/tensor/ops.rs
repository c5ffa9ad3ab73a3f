use super::{numel, Element, GraphNode, Tensor};
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Output shape under trailing-dimension broadcasting.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() {
            1
        } else {
            a[i - (rank - a.len())]
        };
        let db = if i < rank - b.len() {
            1
        } else {
            b[i - (rank - b.len())]
        };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(Error::dim(format!(
                    "shapes {a:?} and {b:?} are not broadcastable"
                )))
            }
        };
    }
    Ok(out)
}

/// For every flat index of `out_shape`, the flat index into an operand of
/// `shape` broadcast to it.
fn broadcast_index(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let offset = rank - shape.len();
    let mut strides = vec![0usize; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        strides[i + offset] = if shape[i] == 1 { 0 } else { acc };
        acc *= shape[i];
    }
    let total = numel(out_shape);
    let mut idx = vec![0usize; total];
    let mut coord = vec![0usize; rank];
    let mut flat = 0usize;
    for slot in idx.iter_mut() {
        *slot = flat;
        for d in (0..rank).rev() {
            coord[d] += 1;
            flat += strides[d];
            if coord[d] < out_shape[d] {
                break;
            }
            flat -= strides[d] * coord[d];
            coord[d] = 0;
        }
    }
    idx
}

fn reduce_to(g: &[f64], idx: &[usize], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (o, &i) in idx.iter().enumerate() {
        out[i] += g[o];
    }
    out
}

pub(crate) fn matmul_raw<T: Element>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let row = |i: usize| {
        let mut out = vec![T::zero(); n];
        let ar = &a[i * k..(i + 1) * k];
        for (p, &av) in ar.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let br = &b[p * n..(p + 1) * n];
            for (o, &bv) in out.iter_mut().zip(br) {
                *o = *o + av * bv;
            }
        }
        out
    };
    let rows: Vec<Vec<T>> = if m * k * n >= 1 << 16 {
        par::map_range(m, row)
    } else {
        (0..m).map(row).collect()
    };
    rows.concat()
}

pub(crate) fn transpose_raw<T: Copy>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len());
    for c in 0..cols {
        for r in 0..rows {
            out.push(a[r * cols + c]);
        }
    }
    out
}

impl<T: Element> Tensor<T> {
    /// Broadcasting elementwise arithmetic. Division by an exact zero follows
    /// IEEE semantics (inf or NaN), it is not trapped.
    pub fn elementwise(&self, op: BinaryOp, other: &Tensor<T>) -> Result<Tensor<T>> {
        let a_shape = self.shape().to_vec();
        let b_shape = other.shape().to_vec();
        let out_shape = broadcast_shape(&a_shape, &b_shape)?;
        let a = self.to_vec();
        let b = other.to_vec();

        let same = a_shape == b_shape;
        let (ai, bi) = if same {
            (
                (0..a.len()).collect::<Vec<_>>(),
                (0..b.len()).collect::<Vec<_>>(),
            )
        } else {
            (
                broadcast_index(&a_shape, &out_shape),
                broadcast_index(&b_shape, &out_shape),
            )
        };
        let f = |x: T, y: T| match op {
            BinaryOp::Add => x + y,
            BinaryOp::Sub => x - y,
            BinaryOp::Mul => x * y,
            BinaryOp::Div => x / y,
        };
        let data: Vec<T> = ai.iter().zip(&bi).map(|(&i, &j)| f(a[i], b[j])).collect();

        let mut nodes = Vec::new();
        let ai = std::rc::Rc::new(ai);
        let bi = std::rc::Rc::new(bi);
        let a = std::rc::Rc::new(a);
        let b = std::rc::Rc::new(b);
        if self.tracks() {
            let (ai, bi, b) = (ai.clone(), bi.clone(), b.clone());
            let len = self.numel();
            nodes.push(GraphNode::new(self, move |g: &[T]| {
                let local: Vec<f64> = match op {
                    BinaryOp::Add | BinaryOp::Sub => g.iter().map(|v| v.as_f64()).collect(),
                    BinaryOp::Mul => g
                        .iter()
                        .zip(bi.iter())
                        .map(|(&gv, &j)| (gv * b[j]).as_f64())
                        .collect(),
                    BinaryOp::Div => g
                        .iter()
                        .zip(bi.iter())
                        .map(|(&gv, &j)| (gv / b[j]).as_f64())
                        .collect(),
                };
                Ok(reduce_to(&local, &ai, len).into_iter().map(T::of).collect())
            }));
        }
        if other.tracks() {
            let len = other.numel();
            nodes.push(GraphNode::new(other, move |g: &[T]| {
                let local: Vec<f64> = match op {
                    BinaryOp::Add => g.iter().map(|v| v.as_f64()).collect(),
                    BinaryOp::Sub => g.iter().map(|v| -v.as_f64()).collect(),
                    BinaryOp::Mul => g
                        .iter()
                        .zip(ai.iter())
                        .map(|(&gv, &i)| (gv * a[i]).as_f64())
                        .collect(),
                    BinaryOp::Div => g
                        .iter()
                        .zip(ai.iter().zip(bi.iter()))
                        .map(|(&gv, (&i, &j))| (-gv * a[i] / (b[j] * b[j])).as_f64())
                        .collect(),
                };
                Ok(reduce_to(&local, &bi, len).into_iter().map(T::of).collect())
            }));
        }
        Ok(Tensor::from_op(data, out_shape, nodes))
    }

    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.elementwise(BinaryOp::Add, other)
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.elementwise(BinaryOp::Sub, other)
    }

    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.elementwise(BinaryOp::Mul, other)
    }

    pub fn div(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.elementwise(BinaryOp::Div, other)
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor<T> {
        let c = T::of(c);
        self.map_unary(|x| x * c, move |_, _| c)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor<T> {
        let c = T::of(c);
        self.map_unary(|x| x + c, |_, _| T::one())
    }

    pub fn neg(&self) -> Tensor<T> {
        self.mul_scalar(-1.0)
    }

    /// ReLU; the derivative at exactly zero is taken as 0.
    pub fn relu(&self) -> Tensor<T> {
        self.map_unary(
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _| if x > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn tanh(&self) -> Tensor<T> {
        self.map_unary(|x| x.tanh(), |_, y| T::one() - y * y)
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        self.map_unary(
            |x| T::one() / (T::one() + (-x).exp()),
            |_, y| y * (T::one() - y),
        )
    }

    /// Elementwise map whose derivative is `dfdx(x, y)`.
    fn map_unary(&self, f: impl Fn(T) -> T, dfdx: impl Fn(T, T) -> T + 'static) -> Tensor<T> {
        let x = self.to_vec();
        let y: Vec<T> = x.iter().map(|&v| f(v)).collect();
        let mut nodes = Vec::new();
        if self.tracks() {
            let yc = y.clone();
            nodes.push(GraphNode::new(self, move |g: &[T]| {
                Ok(g.iter()
                    .zip(x.iter().zip(&yc))
                    .map(|(&gv, (&xv, &yv))| gv * dfdx(xv, yv))
                    .collect())
            }));
        }
        Tensor::from_op(y, self.shape().to_vec(), nodes)
    }

    /// Sum of all elements as a one-element tensor.
    pub fn sum(&self) -> Tensor<T> {
        let n = self.numel();
        let total = self.data().iter().fold(T::zero(), |a, &b| a + b);
        let mut nodes = Vec::new();
        if self.tracks() {
            nodes.push(GraphNode::new(self, move |g: &[T]| Ok(vec![g[0]; n])));
        }
        Tensor::from_op(vec![total], vec![1], nodes)
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = self.numel();
        self.sum().mul_scalar(1.0 / n as f64)
    }

    /// 2-D matrix product.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 2 || sb.len() != 2 {
            return Err(Error::dim(format!(
                "matmul needs 2-D operands, got {sa:?} and {sb:?}"
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        if sb[0] != k {
            return Err(Error::dim(format!(
                "matmul inner dims differ: {sa:?} x {sb:?}"
            )));
        }
        let a = self.to_vec();
        let b = other.to_vec();
        let data = matmul_raw(&a, &b, m, k, n);
        let mut nodes = Vec::new();
        if self.tracks() {
            let bt = transpose_raw(&b, k, n);
            nodes.push(GraphNode::new(self, move |g: &[T]| {
                Ok(matmul_raw(g, &bt, m, n, k))
            }));
        }
        if other.tracks() {
            let at = transpose_raw(&a, m, k);
            nodes.push(GraphNode::new(other, move |g: &[T]| {
                Ok(matmul_raw(&at, g, k, m, n))
            }));
        }
        Ok(Tensor::from_op(data, vec![m, n], nodes))
    }

    /// 2-D transpose.
    pub fn transpose(&self) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::dim(format!(
                "transpose needs a 2-D tensor, got {s:?}"
            )));
        }
        let (r, c) = (s[0], s[1]);
        let data = transpose_raw(&self.data(), r, c);
        let mut nodes = Vec::new();
        if self.tracks() {
            nodes.push(GraphNode::new(self, move |g: &[T]| {
                Ok(transpose_raw(g, c, r))
            }));
        }
        Ok(Tensor::from_op(data, vec![c, r], nodes))
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor<T>> {
        super::check_shape(new_shape)?;
        if numel(new_shape) != self.numel() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {:?}",
                self.shape(),
                new_shape
            )));
        }
        let mut nodes = Vec::new();
        if self.tracks() {
            nodes.push(GraphNode::new(self, |g: &[T]| Ok(g.to_vec())));
        }
        Ok(Tensor::from_op(self.to_vec(), new_shape.to_vec(), nodes))
    }

    /// Collapses dimensions `axis..` into one.
    pub fn flatten(&self, axis: usize) -> Result<Tensor<T>> {
        let s = self.shape();
        if axis >= s.len() {
            return Err(Error::dim(format!(
                "flatten axis {axis} out of range for {s:?}"
            )));
        }
        let mut shape: Vec<usize> = s[..axis].to_vec();
        shape.push(s[axis..].iter().product());
        self.reshape(&shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64], s: &[usize]) -> Tensor<f64> {
        Tensor::from_slice(v, s, true).unwrap()
    }

    #[test]
    fn add_and_mismatch() {
        let a = t(&[1.0, 2.0], &[2]);
        let b = t(&[3.0, 4.0], &[2]);
        assert_eq!(a.add(&b).unwrap().to_vec(), vec![4.0, 6.0]);
        let c = t(&[1.0, 2.0, 3.0], &[3]);
        assert!(matches!(a.add(&c), Err(Error::Dimension(_))));
    }

    #[test]
    fn mul_by_zero_gradients() {
        let a = t(&[2.0], &[1]);
        let b = t(&[0.0], &[1]);
        let c = a.mul(&b).unwrap();
        assert_eq!(c.to_vec(), vec![0.0]);
        c.backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![0.0]);
        assert_eq!(b.grad().unwrap(), vec![2.0]);
    }

    #[test]
    fn div_by_zero_is_ieee() {
        let a = Tensor::<f64>::from_slice(&[1.0, 0.0], &[2], false).unwrap();
        let b = Tensor::<f64>::from_slice(&[0.0, 0.0], &[2], false).unwrap();
        let c = a.div(&b).unwrap().to_vec();
        assert!(c[0].is_infinite() && c[1].is_nan());
    }

    #[test]
    fn broadcast_bias_gradient_sums() {
        let x = t(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
        let b = t(&[10.0, 20.0, 30.0], &[3]);
        let y = x.add(&b).unwrap();
        assert_eq!(y.to_vec(), vec![11.0, 22.0, 33.0, 14.0, 25.0, 36.0]);
        y.sum().backward().unwrap();
        assert_eq!(b.grad().unwrap(), vec![2.0, 2.0, 2.0]);
        assert_eq!(x.grad().unwrap(), vec![1.0; 6]);
    }

    #[test]
    fn broadcast_column_and_row() {
        let a = t(&[1.0, 2.0], &[2, 1]);
        let b = t(&[10.0, 20.0, 30.0], &[1, 3]);
        let y = a.mul(&b).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        assert_eq!(y.to_vec(), vec![10.0, 20.0, 30.0, 20.0, 40.0, 60.0]);
        y.sum().backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![60.0, 60.0]);
        assert_eq!(b.grad().unwrap(), vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn matmul_cases() {
        let i = t(&[1.0, 0.0, 0.0, 1.0], &[2, 2]);
        let m = t(&[1.0, 2.0, 3.0, 4.0], &[2, 2]);
        assert_eq!(i.matmul(&m).unwrap().to_vec(), m.to_vec());
        let r = t(&[1.0, 2.0], &[1, 2]);
        let c = t(&[3.0, 4.0], &[2, 1]);
        let p = r.matmul(&c).unwrap();
        assert_eq!(p.to_vec(), vec![11.0]);
        p.backward().unwrap();
        assert_eq!(r.grad().unwrap(), vec![3.0, 4.0]);
        assert_eq!(c.grad().unwrap(), vec![1.0, 2.0]);
        let x = t(&[0.0; 6], &[2, 3]);
        assert!(matches!(x.matmul(&x), Err(Error::Dimension(_))));
    }

    #[test]
    fn reshape_and_flatten() {
        let x = Tensor::<f32>::zeros(&[2, 3, 4]).unwrap();
        assert_eq!(x.flatten(1).unwrap().shape(), &[2, 12]);
        let y = Tensor::<f32>::from_slice(&[1., 2., 3., 4., 5., 6.], &[6], false).unwrap();
        assert_eq!(y.reshape(&[3, 2]).unwrap().shape(), &[3, 2]);
        assert!(matches!(y.reshape(&[4]), Err(Error::Dimension(_))));
    }

    #[test]
    fn relu_values_and_kink() {
        let x = t(&[-1.0, 0.0, 2.0], &[3]);
        let y = x.relu();
        assert_eq!(y.to_vec(), vec![0.0, 0.0, 2.0]);
        y.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 0.0, 1.0]);
        let pos = Tensor::<f64>::from_slice(&[0.5, 3.0], &[2], false).unwrap();
        assert_eq!(pos.relu().to_vec(), pos.to_vec());
    }

    #[test]
    fn broadcast_index_matches_coordinates() {
        let idx = broadcast_index(&[3, 1], &[2, 3, 4]);
        for o in 0..24 {
            let j = (o / 4) % 3;
            assert_eq!(idx[o], j);
        }
    }
}
