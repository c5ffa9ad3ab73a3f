//! Circuit fragments that load classical features into a register.
//!
//! Each function returns plain [`GateOp`]s on the given `qubits`; feature `i`
//! goes to `qubits[i]` (for the amplitude form, bit `i` of the vector index).

use crate::error::{Error, Result};
use crate::qsim::GateOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// X on every qubit whose bit is 1.
pub fn basis_embedding(bits: &[f64], qubits: &[usize]) -> Result<Vec<GateOp>> {
    if bits.len() > qubits.len() {
        return Err(Error::Encoding(format!(
            "{} bits for {} qubits",
            bits.len(),
            qubits.len()
        )));
    }
    let mut ops = Vec::new();
    for (i, &b) in bits.iter().enumerate() {
        if b == 1.0 {
            ops.push(GateOp::x(qubits[i]));
        } else if b != 0.0 {
            return Err(Error::Encoding(format!(
                "basis embedding needs 0/1 input, got {b}"
            )));
        }
    }
    Ok(ops)
}

/// One `R_axis(x_i)` per feature.
pub fn angle_embedding(features: &[f64], qubits: &[usize], axis: Axis) -> Result<Vec<GateOp>> {
    if features.len() > qubits.len() {
        return Err(Error::Encoding(format!(
            "{} features for {} qubits",
            features.len(),
            qubits.len()
        )));
    }
    features
        .iter()
        .zip(qubits)
        .map(|(&x, &q)| {
            if !x.is_finite() {
                return Err(Error::Encoding(format!("feature {x} is not finite")));
            }
            Ok(match axis {
                Axis::X => GateOp::rx(q, x),
                Axis::Y => GateOp::ry(q, x),
                Axis::Z => GateOp::rz(q, x),
            })
        })
        .collect()
}

/// State preparation for a real vector, zero-padded to `2^qubits.len()` and
/// normalized. Built from uniformly controlled RY rotations, one level per
/// qubit from the most significant down; the last level uses signed angles so
/// negative entries come out right without phase gates.
pub fn amplitude_embedding(vector: &[f64], qubits: &[usize]) -> Result<Vec<GateOp>> {
    let n = qubits.len();
    let dim = 1usize << n;
    if n == 0 || vector.len() > dim {
        return Err(Error::Encoding(format!(
            "vector of length {} does not fit {n} qubits",
            vector.len()
        )));
    }
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::Encoding(
            "amplitude vector has non-finite entries".into(),
        ));
    }
    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Encoding("cannot embed the zero vector".into()));
    }
    let mut amps = vec![0.0; dim];
    for (a, v) in amps.iter_mut().zip(vector) {
        *a = v / norm;
    }

    let mut ops = Vec::new();
    for m in (0..n).rev() {
        // Blocks share the bits above m; within a block, bit m splits halves.
        let controls = n - 1 - m;
        let block = 1usize << (m + 1);
        let half = block / 2;
        let thetas: Vec<f64> = (0..1usize << controls)
            .map(|p| {
                let base = p * block;
                if m == 0 {
                    2.0 * amps[base + 1].atan2(amps[base])
                } else {
                    let lo = amps[base..base + half]
                        .iter()
                        .map(|a| a * a)
                        .sum::<f64>()
                        .sqrt();
                    let hi = amps[base + half..base + block]
                        .iter()
                        .map(|a| a * a)
                        .sum::<f64>()
                        .sqrt();
                    2.0 * hi.atan2(lo)
                }
            })
            .collect();
        let control_qubits: Vec<usize> = (0..controls).map(|i| qubits[m + 1 + i]).collect();
        uniformly_controlled_ry(&thetas, &control_qubits, qubits[m], &mut ops);
    }
    Ok(ops)
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// `RY(thetas[p])` on `target` when the controls read `p` (bit `i` of `p`
/// is `controls[i]`), as alternating RY and CNOT steps along a Gray code.
fn uniformly_controlled_ry(
    thetas: &[f64],
    controls: &[usize],
    target: usize,
    ops: &mut Vec<GateOp>,
) {
    if controls.is_empty() {
        if thetas[0] != 0.0 {
            ops.push(GateOp::ry(target, thetas[0]));
        }
        return;
    }
    let len = thetas.len();
    let scale = 1.0 / len as f64;
    for i in 0..len {
        let g = gray(i);
        let alpha = scale
            * thetas
                .iter()
                .enumerate()
                .map(|(p, &t)| {
                    if (p & g).count_ones().is_multiple_of(2) {
                        t
                    } else {
                        -t
                    }
                })
                .sum::<f64>();
        ops.push(GateOp::ry(target, alpha));
        let flip = gray(i) ^ gray((i + 1) % len);
        ops.push(GateOp::cnot(
            controls[flip.trailing_zeros() as usize],
            target,
        ));
    }
}

/// Adjoint of a fragment.
pub fn invert(ops: &[GateOp]) -> Vec<GateOp> {
    ops.iter().rev().map(GateOp::inverse).collect()
}
