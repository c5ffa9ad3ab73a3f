//! Dense tensors with a dynamic reverse-mode computation graph.
//!
//! Every operation evaluates eagerly and, when an input tracks gradients,
//! records a [`GraphNode`] per tracked parent on the result. A node holds the
//! parent tensor and a closure mapping the gradient flowing into the result
//! to the contribution for that parent. [`Tensor::backward`] walks the graph
//! in reverse topological order seeded with 1.
//!
//! Traversal order is fixed: a depth-first post-order over each tensor's
//! node list, reversed. For a fixed graph the sequence of floating-point
//! accumulations is therefore identical between runs.

mod element;
pub mod io;
mod ops;

pub use element::{DType, Element};
pub(crate) use ops::transpose_raw as transpose;
pub use ops::{broadcast_shape, BinaryOp};

use std::cell::{Cell, Ref, RefCell};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

static NEXT_ID: AtomicUsize = AtomicUsize::new(1);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// True unless the current thread is inside a [`no_grad`] scope.
pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Runs `f` with graph construction disabled on this thread.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let _guard = NoGradGuard::new();
    f()
}

/// RAII form of [`no_grad`]; restores the previous mode on drop.
pub struct NoGradGuard {
    prev: bool,
}

impl NoGradGuard {
    pub fn new() -> Self {
        let prev = GRAD_ENABLED.with(|g| g.replace(false));
        NoGradGuard { prev }
    }
}

impl Default for NoGradGuard {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

pub(crate) type GradFn<T> = Box<dyn Fn(&[T]) -> Result<Vec<T>>>;

/// Edge of the computation graph: a parent tensor and the map from the
/// child's incoming gradient to the parent's gradient contribution.
pub struct GraphNode<T: Element> {
    parent: Tensor<T>,
    df: GradFn<T>,
}

impl<T: Element> GraphNode<T> {
    pub fn new(parent: &Tensor<T>, df: impl Fn(&[T]) -> Result<Vec<T>> + 'static) -> Self {
        GraphNode {
            parent: parent.clone(),
            df: Box::new(df),
        }
    }

    pub fn parent(&self) -> &Tensor<T> {
        &self.parent
    }
}

struct Inner<T: Element> {
    id: usize,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<T>>>,
    nodes: RefCell<Vec<GraphNode<T>>>,
}

/// Shared handle to an n-dimensional row-major array. Cloning is cheap and
/// aliases the same storage.
pub struct Tensor<T: Element> {
    inner: Rc<Inner<T>>,
}

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Element> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.inner.data.borrow();
        let preview: Vec<_> = data.iter().take(8).collect();
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("dtype", &T::DTYPE)
            .field("requires_grad", &self.inner.requires_grad)
            .field("data", &preview)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::dim("shape must have at least one dimension"));
    }
    if shape.contains(&0) {
        return Err(Error::dim(format!("shape {shape:?} has a zero extent")));
    }
    Ok(())
}

impl<T: Element> Tensor<T> {
    /// Builds a tensor from row-major `values`.
    pub fn new(values: Vec<T>, shape: &[usize], requires_grad: bool) -> Result<Self> {
        check_shape(shape)?;
        if values.len() != numel(shape) {
            return Err(Error::dim(format!(
                "{} values do not fill shape {:?}",
                values.len(),
                shape
            )));
        }
        Ok(Self::raw(values, shape.to_vec(), requires_grad, Vec::new()))
    }

    pub fn from_slice(values: &[T], shape: &[usize], requires_grad: bool) -> Result<Self> {
        Self::new(values.to_vec(), shape, requires_grad)
    }

    pub fn from_f64(values: &[f64], shape: &[usize], requires_grad: bool) -> Result<Self> {
        Self::new(
            values.iter().map(|&v| T::of(v)).collect(),
            shape,
            requires_grad,
        )
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_shape(shape)?;
        Ok(Self::raw(
            vec![T::zero(); numel(shape)],
            shape.to_vec(),
            false,
            Vec::new(),
        ))
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        check_shape(shape)?;
        Ok(Self::raw(
            vec![value; numel(shape)],
            shape.to_vec(),
            false,
            Vec::new(),
        ))
    }

    pub fn scalar(value: T, requires_grad: bool) -> Self {
        Self::raw(vec![value], vec![1], requires_grad, Vec::new())
    }

    fn raw(data: Vec<T>, shape: Vec<usize>, requires_grad: bool, nodes: Vec<GraphNode<T>>) -> Self {
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                requires_grad,
                grad: RefCell::new(None),
                nodes: RefCell::new(nodes),
            }),
        }
    }

    /// Result of an operation. Nodes are dropped inside a no-grad scope;
    /// the result tracks gradients iff at least one node survives.
    pub(crate) fn from_op(data: Vec<T>, shape: Vec<usize>, nodes: Vec<GraphNode<T>>) -> Self {
        debug_assert_eq!(data.len(), numel(&shape));
        let nodes = if is_grad_enabled() { nodes } else { Vec::new() };
        let requires_grad = !nodes.is_empty();
        Self::raw(data, shape, requires_grad, nodes)
    }

    /// Whether an op consuming this tensor should record a node for it.
    pub(crate) fn tracks(&self) -> bool {
        self.inner.requires_grad && is_grad_enabled()
    }

    pub fn id(&self) -> usize {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        numel(&self.inner.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.borrow().clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.inner
            .data
            .borrow()
            .iter()
            .map(|v| v.as_f64())
            .collect()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        let data = self.inner.data.borrow();
        if data.len() != 1 {
            return Err(Error::Contract(format!(
                "item() on tensor of shape {:?}",
                self.inner.shape
            )));
        }
        Ok(data[0])
    }

    /// Overwrites the values in place. Existing graph edges keep the values
    /// they captured at construction time.
    pub fn set_data(&self, values: Vec<T>) -> Result<()> {
        if values.len() != self.numel() {
            return Err(Error::dim(format!(
                "set_data with {} values on shape {:?}",
                values.len(),
                self.inner.shape
            )));
        }
        *self.inner.data.borrow_mut() = values;
        Ok(())
    }

    pub(crate) fn data_mut(&self) -> std::cell::RefMut<'_, Vec<T>> {
        self.inner.data.borrow_mut()
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.borrow().clone()
    }

    /// Zero-fills an existing gradient buffer (allocating one if absent).
    pub fn zero_grad(&self) {
        if self.inner.requires_grad {
            *self.inner.grad.borrow_mut() = Some(vec![T::zero(); self.numel()]);
        }
    }

    pub fn clear_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => *slot = Some(g.to_vec()),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.inner.nodes.borrow().len()
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.nodes.borrow().is_empty()
    }

    /// A gradient-free copy sharing nothing with the graph.
    pub fn detach(&self) -> Self {
        Self::raw(self.to_vec(), self.inner.shape.clone(), false, Vec::new())
    }

    /// Copy that tracks gradients as a fresh leaf.
    pub fn leaf_copy(&self, requires_grad: bool) -> Self {
        Self::raw(
            self.to_vec(),
            self.inner.shape.clone(),
            requires_grad,
            Vec::new(),
        )
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        let data = self
            .inner
            .data
            .borrow()
            .iter()
            .map(|v| U::of(v.as_f64()))
            .collect();
        Tensor::raw(data, self.inner.shape.clone(), false, Vec::new())
    }

    /// Backpropagates from this scalar and drops the graph afterwards.
    pub fn backward(&self) -> Result<()> {
        self.backward_impl(false)
    }

    /// Like [`backward`](Self::backward) but keeps the graph for another pass.
    pub fn backward_retain(&self) -> Result<()> {
        self.backward_impl(true)
    }

    fn backward_impl(&self, retain_graph: bool) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.reverse_topological();
        let mut pending: HashMap<usize, Vec<T>> = HashMap::new();
        pending.insert(self.id(), vec![T::one()]);

        let _guard = NoGradGuard::new();
        for t in &order {
            let Some(g) = pending.remove(&t.id()) else {
                continue;
            };
            t.accumulate_grad(&g);
            let nodes = t.inner.nodes.borrow();
            for node in nodes.iter() {
                let contrib = (node.df)(&g)?;
                let parent = &node.parent;
                if contrib.len() != parent.numel() {
                    return Err(Error::Contract(format!(
                        "gradient of length {} for parent of shape {:?}",
                        contrib.len(),
                        parent.shape()
                    )));
                }
                match pending.get_mut(&parent.id()) {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, &b)| *a = *a + b),
                    None => {
                        pending.insert(parent.id(), contrib);
                    }
                }
            }
        }
        if !retain_graph {
            for t in &order {
                t.inner.nodes.borrow_mut().clear();
            }
        }
        Ok(())
    }

    /// Tensors reachable from `self`, each once, parents after children.
    fn reverse_topological(&self) -> Vec<Tensor<T>> {
        let mut post = Vec::new();
        let mut visited = HashSet::new();
        // (tensor, next child index)
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        visited.insert(self.id());
        while let Some((t, idx)) = stack.pop() {
            let next = {
                let nodes = t.inner.nodes.borrow();
                nodes.get(idx).map(|n| n.parent.clone())
            };
            match next {
                Some(p) => {
                    stack.push((t, idx + 1));
                    if p.requires_grad() && visited.insert(p.id()) {
                        stack.push((p, 0));
                    }
                }
                None => post.push(t),
            }
        }
        post.reverse();
        post
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_and_mismatch() {
        let t = Tensor::<f32>::new(vec![1.0, 2.0, 3.0, 4.0], &[2, 2], false).unwrap();
        assert_eq!(t.shape(), &[2, 2]);
        assert!(t.grad().is_none() && t.is_leaf());
        let s = Tensor::<f32>::new(vec![0.0], &[1], true).unwrap();
        assert!(s.requires_grad());
        assert!(matches!(
            Tensor::<f32>::new(vec![1.0], &[2], false),
            Err(Error::Dimension(_))
        ));
        assert!(Tensor::<f32>::new(vec![], &[0], false).is_err());
    }

    #[test]
    fn square_power_rule() {
        let x = Tensor::<f64>::scalar(3.0, true);
        let y = x.mul(&x).unwrap();
        assert_eq!(y.item().unwrap(), 9.0);
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![6.0]);
    }

    #[test]
    fn sum_times_x() {
        let x = Tensor::<f64>::scalar(2.0, true);
        let y = Tensor::<f64>::scalar(3.0, true);
        let z = x.add(&y).unwrap().mul(&x).unwrap();
        z.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![7.0]);
        assert_eq!(y.grad().unwrap(), vec![2.0]);
    }

    #[test]
    fn backward_on_untracked_is_noop() {
        let x = Tensor::<f64>::scalar(2.0, false);
        let y = x.mul(&x).unwrap();
        y.backward().unwrap();
        assert!(x.grad().is_none() && y.grad().is_none());
    }

    #[test]
    fn backward_requires_scalar() {
        let x = Tensor::<f64>::new(vec![1.0, 2.0], &[2], true).unwrap();
        let y = x.mul(&x).unwrap();
        assert!(matches!(y.backward(), Err(Error::Contract(_))));
    }

    #[test]
    fn no_grad_scope_records_nothing() {
        let x = Tensor::<f32>::scalar(2.0, true);
        let y = no_grad(|| x.mul(&x).unwrap());
        assert_eq!(y.num_nodes(), 0);
        assert!(!y.requires_grad());
        assert!(is_grad_enabled());
    }

    #[test]
    fn accumulates_until_cleared() {
        let x = Tensor::<f64>::scalar(3.0, true);
        let y = x.mul(&x).unwrap();
        y.backward_retain().unwrap();
        let first = x.grad().unwrap();
        y.backward_retain().unwrap();
        assert_eq!(x.grad().unwrap(), vec![12.0]);
        x.zero_grad();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), first);
        // graph dropped
        assert_eq!(y.num_nodes(), 0);
    }

    #[test]
    fn fan_out_diamond_visits_once() {
        // w = (x*2) + (x*3); dw/dx = 5
        let x = Tensor::<f64>::new(vec![1.0, -1.0], &[2], true).unwrap();
        let a = x.mul_scalar(2.0);
        let b = x.mul_scalar(3.0);
        let w = a.add(&b).unwrap().sum();
        w.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn value_available_before_backward() {
        let x = Tensor::<f32>::new(vec![1.0, 2.0], &[2], true).unwrap();
        let y = x.add(&x).unwrap();
        assert_eq!(y.to_vec(), vec![2.0, 4.0]);
    }
}
