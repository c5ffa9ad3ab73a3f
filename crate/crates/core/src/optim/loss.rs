use crate::error::{Error, Result};
use crate::tensor::{Element, GraphNode, Tensor};

/// Mean softmax cross-entropy of `logits [N, C]` against one-hot `targets`.
///
/// Uses max-subtraction so large logits do not overflow. The gradient with
/// respect to the logits is `(softmax - target) / N`.
pub fn softmax_cross_entropy<T: Element>(
    targets: &Tensor<T>,
    logits: &Tensor<T>,
) -> Result<Tensor<T>> {
    let s = logits.shape();
    if s.len() != 2 || targets.shape() != s {
        return Err(Error::dim(format!(
            "cross-entropy needs equal [N, C] shapes, got targets {:?} logits {:?}",
            targets.shape(),
            s
        )));
    }
    let (n, c) = (s[0], s[1]);
    let y = targets.to_f64_vec();
    for (row, t) in y.chunks(c).enumerate() {
        let ones = t.iter().filter(|&&v| v == 1.0).count();
        if ones != 1 || t.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Contract(format!(
                "target row {row} is not one-hot: {t:?}"
            )));
        }
    }
    let z = logits.to_f64_vec();
    let mut probs = vec![0.0; n * c];
    let mut total = 0.0;
    for i in 0..n {
        let row = &z[i * c..(i + 1) * c];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_denom = denom.ln();
        for j in 0..c {
            let lp = row[j] - max - log_denom;
            probs[i * c + j] = lp.exp();
            if y[i * c + j] == 1.0 {
                total -= lp;
            }
        }
    }
    let loss = total / n as f64;

    let mut nodes = Vec::new();
    if logits.tracks() {
        nodes.push(GraphNode::new(logits, move |g: &[T]| {
            let scale = g[0].as_f64() / n as f64;
            Ok(probs
                .iter()
                .zip(&y)
                .map(|(p, t)| T::of((p - t) * scale))
                .collect())
        }));
    }
    Ok(Tensor::from_op(vec![T::of(loss)], vec![1], nodes))
}

/// Mean squared error between two equally shaped tensors.
pub fn mse<T: Element>(prediction: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    if prediction.shape() != target.shape() {
        return Err(Error::dim(format!(
            "mse shapes differ: {:?} vs {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let d = prediction.sub(target)?;
    Ok(d.mul(&d)?.mean())
}

/// One-hot encodes integer labels into `[N, classes]`.
pub fn to_one_hot<T: Element>(labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    let mut data = vec![T::zero(); labels.len() * classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Contract(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        data[i * classes + l] = T::one();
    }
    Tensor::new(data, &[labels.len(), classes], false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits(v: &[f64]) -> Tensor<f64> {
        Tensor::from_slice(v, &[1, v.len()], true).unwrap()
    }

    #[test]
    fn uniform_logits_give_ln2() {
        let y = to_one_hot::<f64>(&[0], 2).unwrap();
        let l = softmax_cross_entropy(&y, &logits(&[0.0, 0.0])).unwrap();
        assert!((l.item().unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn large_logits_are_stable() {
        let y = to_one_hot::<f64>(&[0], 2).unwrap();
        let l = softmax_cross_entropy(&y, &logits(&[1000.0, 0.0])).unwrap();
        let v = l.item().unwrap();
        assert!(v.is_finite() && v.abs() < 1e-12);
    }

    #[test]
    fn gradient_is_softmax_minus_target() {
        let y = to_one_hot::<f64>(&[0], 2).unwrap();
        let z = logits(&[0.0, 0.0]);
        softmax_cross_entropy(&y, &z).unwrap().backward().unwrap();
        let g = z.grad().unwrap();
        assert!((g[0] + 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_soft_targets() {
        let y = Tensor::<f64>::from_slice(&[0.5, 0.5], &[1, 2], false).unwrap();
        assert!(matches!(
            softmax_cross_entropy(&y, &logits(&[0.0, 1.0])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn batch_rows_sum_to_zero() {
        let y = to_one_hot::<f64>(&[2, 0, 1], 3).unwrap();
        let z = Tensor::from_slice(
            &[0.1, -2.0, 3.0, 0.0, 0.5, 0.2, 7.0, -1.0, 0.0],
            &[3, 3],
            true,
        )
        .unwrap();
        let l = softmax_cross_entropy(&y, &z).unwrap();
        assert!(l.item().unwrap() >= 0.0);
        l.backward().unwrap();
        for row in z.grad().unwrap().chunks(3) {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
