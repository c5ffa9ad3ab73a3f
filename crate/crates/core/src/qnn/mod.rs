//! Quantum calculation nodes.
//!
//! A [`QuantumLayer`] evaluates a user-supplied circuit family once per batch
//! row and differentiates it with the two-term parameter-shift rule, so it
//! composes with classical layers in one graph. [`QaeLayer`] is the
//! quantum-autoencoder encoder plus SWAP-test readout.

pub mod embedding;
mod layer;
mod qae;

pub use embedding::{amplitude_embedding, angle_embedding, basis_embedding, Axis};
pub use layer::{
    derive_seed, CircuitBuilder, MachineType, NodeTiming, QuantumLayer, QuantumLayerSpec, Readout,
    ShiftTarget,
};
pub use qae::{QaeLayer, QaeSpec};

use crate::qsim::Counts;

/// `Σ value · count / shots`, each key read as a binary integer.
pub fn expectation_from_counts(counts: &Counts) -> f64 {
    let shots = counts.shots() as f64;
    counts
        .iter()
        .map(|(k, c)| {
            let v = u64::from_str_radix(k, 2).expect("counts keys are bitstrings") as f64;
            v * c as f64 / shots
        })
        .sum()
}

/// `Σ v · p_v` over a marginal probability vector.
pub fn expectation_from_probs(probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(v, p)| v as f64 * p).sum()
}

pub(crate) fn zero_probability(probs: &[f64]) -> f64 {
    probs[0]
}
