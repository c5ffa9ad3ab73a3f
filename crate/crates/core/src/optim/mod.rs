//! Loss functions and first-order optimizers.

pub mod loss;

pub use loss::{mse, softmax_cross_entropy, to_one_hot};

use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::nn::Parameter;
use crate::tensor::{Element, Tensor};

pub trait Optimizer<T: Element> {
    fn step(&mut self);

    fn parameters(&self) -> &[Parameter<T>];

    fn zero_grad(&self) {
        for p in self.parameters() {
            p.zero_grad();
        }
    }
}

/// Plain gradient descent: `p ← p − lr·grad`.
pub struct Sgd<T: Element> {
    params: Vec<Parameter<T>>,
    pub lr: f64,
}

impl<T: Element> Sgd<T> {
    pub fn new(params: Vec<Parameter<T>>, lr: f64) -> Self {
        Sgd { params, lr }
    }
}

impl<T: Element> Optimizer<T> for Sgd<T> {
    fn step(&mut self) {
        let lr = T::of(self.lr);
        for (i, p) in self.params.iter().enumerate() {
            let Some(g) = p.grad() else {
                warn!("sgd: parameter {i} has no gradient, skipped");
                continue;
            };
            let mut data = p.data_mut();
            data.iter_mut()
                .zip(&g)
                .for_each(|(v, &gv)| *v = *v - lr * gv);
        }
    }

    fn parameters(&self) -> &[Parameter<T>] {
        &self.params
    }
}

/// Adam with bias correction.
///
/// Moments are kept in `f64` regardless of the parameter type.
pub struct Adam<T: Element> {
    params: Vec<Parameter<T>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl<T: Element> Adam<T> {
    pub fn new(params: Vec<Parameter<T>>, lr: f64) -> Self {
        Self::with_betas(params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(
        params: Vec<Parameter<T>>,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Self {
        let m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        let v = params.iter().map(|p| vec![0.0; p.numel()]).collect();
        Adam {
            params,
            lr,
            beta1,
            beta2,
            eps,
            m,
            v,
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn moments(&self, index: usize) -> (&[f64], &[f64]) {
        (&self.m[index], &self.v[index])
    }

    /// Stores `t`, `m` and `v` as tensor blobs under `dir`.
    pub fn save_state(&self, dir: impl AsRef<Path>) -> Result<()> {
        let mut entries = vec![(
            "adam.t".to_string(),
            Tensor::<f64>::scalar(self.t as f64, false),
        )];
        for (i, (m, v)) in self.m.iter().zip(&self.v).enumerate() {
            entries.push((
                format!("adam.m.{i}"),
                Tensor::new(m.clone(), &[m.len()], false)?,
            ));
            entries.push((
                format!("adam.v.{i}"),
                Tensor::new(v.clone(), &[v.len()], false)?,
            ));
        }
        checkpoint::save_tensors(dir, &entries)
    }

    pub fn load_state(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        let stored = checkpoint::load_tensors::<f64>(dir)?;
        let find = |name: &str| {
            stored
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.to_vec())
                .ok_or_else(|| Error::Format(format!("optimizer state has no {name}")))
        };
        let t = find("adam.t")?;
        let mut m = Vec::with_capacity(self.params.len());
        let mut v = Vec::with_capacity(self.params.len());
        for (i, p) in self.params.iter().enumerate() {
            let (mi, vi) = (find(&format!("adam.m.{i}"))?, find(&format!("adam.v.{i}"))?);
            if mi.len() != p.numel() || vi.len() != p.numel() {
                return Err(Error::dim(format!(
                    "optimizer state {i} does not match parameter size"
                )));
            }
            m.push(mi);
            v.push(vi);
        }
        self.t = t[0] as u64;
        self.m = m;
        self.v = v;
        Ok(())
    }
}

impl<T: Element> Optimizer<T> for Adam<T> {
    fn step(&mut self) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, p) in self.params.iter().enumerate() {
            let Some(g) = p.grad() else {
                warn!("adam: parameter {i} has no gradient, skipped");
                continue;
            };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let mut data = p.data_mut();
            for (j, slot) in data.iter_mut().enumerate() {
                let gj = g[j].as_f64();
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / c1;
                let vhat = v[j] / c2;
                *slot = T::of(slot.as_f64() - self.lr * mhat / (vhat.sqrt() + self.eps));
            }
        }
    }

    fn parameters(&self) -> &[Parameter<T>] {
        &self.params
    }
}
