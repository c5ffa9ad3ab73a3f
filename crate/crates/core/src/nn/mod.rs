//! Classical calculation nodes and the module tree they live in.
//!
//! A model is a tree of [`Module`]s. Each module reports its own parameters
//! and its named children; [`Module::named_parameters`] walks the tree and
//! yields every parameter once under a dotted path such as `conv1.weight`.

mod batchnorm;
pub mod checkpoint;
mod conv;
mod linear;
mod pool;

pub use batchnorm::BatchNorm;
pub use conv::{conv2d, Conv2d, Padding};
pub use linear::Linear;
pub use pool::{maxpool2d, MaxPool2d};

use std::collections::HashSet;
use std::ops::Deref;

use rand::Rng;

use crate::error::Result;
use crate::tensor::{Element, Tensor};

/// A tensor that always tracks gradients and is owned by a module.
pub struct Parameter<T: Element>(Tensor<T>);

impl<T: Element> Clone for Parameter<T> {
    fn clone(&self) -> Self {
        Parameter(self.0.clone())
    }
}

impl<T: Element> std::fmt::Debug for Parameter<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Parameter({:?})", self.0)
    }
}

impl<T: Element> Parameter<T> {
    pub fn new(values: Vec<T>, shape: &[usize]) -> Result<Self> {
        Ok(Parameter(Tensor::new(values, shape, true)?))
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(vec![T::zero(); n], shape)
    }

    /// Uniform in `[-bound, bound]`.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Result<Self> {
        let n: usize = shape.iter().product();
        let values = (0..n)
            .map(|_| T::of(rng.random_range(-bound..=bound)))
            .collect();
        Self::new(values, shape)
    }

    /// Glorot-uniform initialization.
    pub fn glorot(
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self::uniform(shape, bound, rng)
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }
}

impl<T: Element> Deref for Parameter<T> {
    type Target = Tensor<T>;

    fn deref(&self) -> &Tensor<T> {
        &self.0
    }
}

pub trait Module<T: Element> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Parameters owned directly by this module, in registration order.
    fn local_parameters(&self) -> Vec<(&str, &Parameter<T>)> {
        Vec::new()
    }

    fn children(&self) -> Vec<(&str, &dyn Module<T>)> {
        Vec::new()
    }

    /// Switches training/evaluation mode for the whole subtree.
    fn set_training(&self, training: bool) {
        for (_, c) in self.children() {
            c.set_training(training);
        }
    }

    fn train(&self) {
        self.set_training(true);
    }

    fn eval(&self) {
        self.set_training(false);
    }

    /// Every parameter in the subtree exactly once, depth-first, with its
    /// dotted path. A parameter shared by two modules keeps its first path.
    fn named_parameters(&self) -> Vec<(String, Parameter<T>)> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (name, p) in self.local_parameters() {
            if seen.insert(p.id()) {
                out.push((name.to_string(), p.clone()));
            }
        }
        for (name, c) in self.children() {
            collect(c, &format!("{name}."), &mut out, &mut seen);
        }
        out
    }

    fn parameters(&self) -> Vec<Parameter<T>> {
        self.named_parameters()
            .into_iter()
            .map(|(_, p)| p)
            .collect()
    }

    fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.numel()).sum()
    }

    fn zero_grad(&self) {
        for p in self.parameters() {
            p.zero_grad();
        }
    }
}

fn collect<T: Element>(
    m: &dyn Module<T>,
    prefix: &str,
    out: &mut Vec<(String, Parameter<T>)>,
    seen: &mut HashSet<usize>,
) {
    for (name, p) in m.local_parameters() {
        if seen.insert(p.id()) {
            out.push((format!("{prefix}{name}"), p.clone()));
        }
    }
    for (name, c) in m.children() {
        collect(c, &format!("{prefix}{name}."), out, seen);
    }
}

/// ReLU as a module.
#[derive(Clone, Copy, Debug, Default)]
pub struct Relu;

impl<T: Element> Module<T> for Relu {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(x.relu())
    }
}

/// Flattens every dimension after the batch axis.
#[derive(Clone, Copy, Debug, Default)]
pub struct Flatten;

impl<T: Element> Module<T> for Flatten {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.flatten(1)
    }
}

/// Named children applied in order.
pub struct Sequential<T: Element> {
    layers: Vec<(String, Box<dyn Module<T>>)>,
}

impl<T: Element> Default for Sequential<T> {
    fn default() -> Self {
        Sequential { layers: Vec::new() }
    }
}

impl<T: Element> Sequential<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(mut self, name: impl Into<String>, layer: impl Module<T> + 'static) -> Self {
        self.layers.push((name.into(), Box::new(layer)));
        self
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl<T: Element> Module<T> for Sequential<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for (_, l) in &self.layers {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    fn children(&self) -> Vec<(&str, &dyn Module<T>)> {
        self.layers
            .iter()
            .map(|(n, l)| (n.as_str(), l.as_ref()))
            .collect()
    }
}
