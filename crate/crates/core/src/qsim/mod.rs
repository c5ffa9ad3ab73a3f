//! Full-amplitude state-vector simulator.
//!
//! Qubit `k` is bit `k` of the amplitude index. Measured bitstrings print the
//! last measured qubit leftmost, so with the default readout (all qubits in
//! order) qubit `n-1` is the leftmost character and a key read as a binary
//! number equals the amplitude index.

mod circuit;
mod gate;
mod measure;
mod noise;
mod state;

pub use circuit::{simulate, simulate_from, Circuit};
pub use gate::{GateKind, GateOp, Matrix2};
pub use measure::{measure_shots, Counts};
pub use noise::{simulate_noisy, trajectory, Channel, NoiseModel};
pub use state::{StateVector, MAX_QUBITS};
