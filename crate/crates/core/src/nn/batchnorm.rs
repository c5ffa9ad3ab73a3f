use std::cell::{Cell, RefCell};

use super::{Module, Parameter};
use crate::error::{Error, Result};
use crate::tensor::{Element, GraphNode, Tensor};

/// Per-channel batch normalization for `[N, C]` or `[N, C, ...]` input.
///
/// Training mode normalizes with the batch statistics and folds them into
/// the running estimates with `momentum`; evaluation mode uses the running
/// estimates. Both the normalization and the running variance use the
/// biased (1/m) batch variance, so the two modes agree once the running
/// statistics have converged.
pub struct BatchNorm<T: Element> {
    pub gamma: Parameter<T>,
    pub beta: Parameter<T>,
    pub eps: f64,
    pub momentum: f64,
    running_mean: RefCell<Vec<f64>>,
    running_var: RefCell<Vec<f64>>,
    training: Cell<bool>,
}

impl<T: Element> BatchNorm<T> {
    pub fn new(channels: usize) -> Result<Self> {
        Ok(BatchNorm {
            gamma: Parameter::new(vec![T::one(); channels], &[channels])?,
            beta: Parameter::zeros(&[channels])?,
            eps: 1e-5,
            momentum: 0.1,
            running_mean: RefCell::new(vec![0.0; channels]),
            running_var: RefCell::new(vec![1.0; channels]),
            training: Cell::new(true),
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.numel()
    }

    pub fn running_mean(&self) -> Vec<f64> {
        self.running_mean.borrow().clone()
    }

    pub fn running_var(&self) -> Vec<f64> {
        self.running_var.borrow().clone()
    }

    pub fn is_training(&self) -> bool {
        self.training.get()
    }
}

impl<T: Element> Module<T> for BatchNorm<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = x.shape().to_vec();
        let c = self.channels();
        if s.len() < 2 || s[1] != c {
            return Err(Error::dim(format!(
                "batchnorm over {c} channels got input {s:?}"
            )));
        }
        let n = s[0];
        let inner: usize = s[2..].iter().product();
        let m = (n * inner) as f64;
        let xd = x.to_f64_vec();
        let at = move |b: usize, ch: usize, k: usize| (b * c + ch) * inner + k;

        let (mean, var) = if self.training.get() {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ch in 0..c {
                let mut sum = 0.0;
                for b in 0..n {
                    for k in 0..inner {
                        sum += xd[at(b, ch, k)];
                    }
                }
                mean[ch] = sum / m;
                let mut sq = 0.0;
                for b in 0..n {
                    for k in 0..inner {
                        let d = xd[at(b, ch, k)] - mean[ch];
                        sq += d * d;
                    }
                }
                var[ch] = sq / m;
            }
            let mut rm = self.running_mean.borrow_mut();
            let mut rv = self.running_var.borrow_mut();
            for ch in 0..c {
                rm[ch] = (1.0 - self.momentum) * rm[ch] + self.momentum * mean[ch];
                rv[ch] = (1.0 - self.momentum) * rv[ch] + self.momentum * var[ch];
            }
            drop((rm, rv));
            (mean, var)
        } else {
            (self.running_mean(), self.running_var())
        };

        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let gamma = self.gamma.to_f64_vec();
        let beta = self.beta.to_f64_vec();
        let mut xhat = vec![0.0; xd.len()];
        let mut out = vec![T::zero(); xd.len()];
        for b in 0..n {
            for ch in 0..c {
                for k in 0..inner {
                    let i = at(b, ch, k);
                    xhat[i] = (xd[i] - mean[ch]) * inv_std[ch];
                    out[i] = T::of(gamma[ch] * xhat[i] + beta[ch]);
                }
            }
        }

        let training = self.training.get();
        let xhat = std::rc::Rc::new(xhat);
        let mut nodes = Vec::new();
        if x.tracks() {
            let xhat = xhat.clone();
            let gamma = gamma.clone();
            let inv_std = inv_std.clone();
            nodes.push(GraphNode::new(x, move |g: &[T]| {
                let mut dx = vec![T::zero(); g.len()];
                for ch in 0..c {
                    let scale = gamma[ch] * inv_std[ch];
                    if training {
                        let mut sum_g = 0.0;
                        let mut sum_gx = 0.0;
                        for b in 0..n {
                            for k in 0..inner {
                                let i = at(b, ch, k);
                                let gv = g[i].as_f64();
                                sum_g += gv;
                                sum_gx += gv * xhat[i];
                            }
                        }
                        for b in 0..n {
                            for k in 0..inner {
                                let i = at(b, ch, k);
                                let gv = g[i].as_f64();
                                dx[i] = T::of(scale * (gv - sum_g / m - xhat[i] * sum_gx / m));
                            }
                        }
                    } else {
                        for b in 0..n {
                            for k in 0..inner {
                                let i = at(b, ch, k);
                                dx[i] = T::of(scale * g[i].as_f64());
                            }
                        }
                    }
                }
                Ok(dx)
            }));
        }
        if self.gamma.tracks() {
            let xhat = xhat.clone();
            nodes.push(GraphNode::new(&self.gamma, move |g: &[T]| {
                let mut dg = vec![0.0; c];
                for b in 0..n {
                    for (ch, slot) in dg.iter_mut().enumerate() {
                        for k in 0..inner {
                            let i = at(b, ch, k);
                            *slot += g[i].as_f64() * xhat[i];
                        }
                    }
                }
                Ok(dg.into_iter().map(T::of).collect())
            }));
        }
        if self.beta.tracks() {
            nodes.push(GraphNode::new(&self.beta, move |g: &[T]| {
                let mut db = vec![0.0; c];
                for b in 0..n {
                    for (ch, slot) in db.iter_mut().enumerate() {
                        for k in 0..inner {
                            *slot += g[at(b, ch, k)].as_f64();
                        }
                    }
                }
                Ok(db.into_iter().map(T::of).collect())
            }));
        }
        Ok(Tensor::from_op(out, s, nodes))
    }

    fn local_parameters(&self) -> Vec<(&str, &Parameter<T>)> {
        vec![("gamma", &self.gamma), ("beta", &self.beta)]
    }

    fn set_training(&self, training: bool) {
        self.training.set(training);
    }
}
