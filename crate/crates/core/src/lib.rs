//! Hybrid quantum-classical machine learning core.
//!
//! One reverse-mode [`tensor::Tensor`] graph is shared by classical layers
//! ([`nn`]) and simulated parameterized quantum circuits ([`qnn`]), so a model
//! mixing both trains with a single `backward` call. Quantum nodes execute on
//! the full-amplitude state-vector simulator in [`qsim`], optionally with
//! stochastic noise trajectories.
//!
//! Data-parallel inner loops (amplitude kernels, shots, per-sample circuit
//! evaluations, convolution batches) run on rayon when the `parallel`
//! feature is enabled and fall back to plain iterators otherwise. Results
//! are reduced in index order either way, so outputs do not depend on the
//! thread count.

pub mod bench;
pub mod compat;
pub mod data;
pub mod error;
pub mod models;
pub mod nn;
pub mod optim;
pub mod par;
pub mod plot;
pub mod qnn;
pub mod qsim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{no_grad, Element, Tensor};
