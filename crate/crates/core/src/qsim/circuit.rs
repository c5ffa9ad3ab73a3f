use std::fmt::Write as _;

use super::gate::{GateKind, GateOp};
use super::state::{StateVector, MAX_QUBITS};
use crate::error::{Error, Result};

/// An ordered gate list over a fixed register, plus the qubits to read out.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
    measured: Vec<usize>,
}

impl Circuit {
    /// Empty circuit over `n_qubits`, measuring every qubit.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Circuit(format!(
                "{n_qubits} qubits outside supported range 1..={MAX_QUBITS}"
            )));
        }
        Ok(Circuit {
            n_qubits,
            ops: Vec::new(),
            measured: (0..n_qubits).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn measured_qubits(&self) -> &[usize] {
        &self.measured
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: GateOp) -> Result<&mut Self> {
        if op.max_qubit() >= self.n_qubits {
            return Err(Error::Circuit(format!(
                "{op} addresses a qubit outside a {}-qubit register",
                self.n_qubits
            )));
        }
        self.ops.push(op);
        Ok(self)
    }

    /// Owned-builder form of [`Circuit::push`].
    pub fn with(mut self, op: GateOp) -> Result<Self> {
        self.push(op)?;
        Ok(self)
    }

    /// Appends every op of `other`; its register must fit in this one.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::Circuit(format!(
                "cannot append a {}-qubit circuit to a {}-qubit one",
                other.n_qubits, self.n_qubits
            )));
        }
        self.ops.extend(other.ops.iter().cloned());
        Ok(self)
    }

    /// Sets the readout qubits. Order matters: `qubits[i]` becomes bit `i` of
    /// the outcome value.
    pub fn measure(&mut self, qubits: &[usize]) -> Result<&mut Self> {
        if qubits.is_empty() {
            return Err(Error::Circuit("measure needs at least one qubit".into()));
        }
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::Circuit(format!("measured qubit {q} out of range")));
            }
            if qubits[..i].contains(&q) {
                return Err(Error::Circuit(format!("qubit {q} measured twice")));
            }
        }
        self.measured = qubits.to_vec();
        Ok(self)
    }

    /// The adjoint circuit: ops reversed and inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            ops: self.ops.iter().rev().map(GateOp::inverse).collect(),
            measured: self.measured.clone(),
        }
    }

    /// Parses the line format `GATE q0[,q1[,q2]] [angle]` with an optional
    /// `MEASURE q…` line. `#` starts a comment. The register size is one more
    /// than the largest index mentioned.
    pub fn parse(text: &str) -> Result<Circuit> {
        let bad = |line: usize, msg: String| Error::Format(format!("line {line}: {msg}"));
        let mut ops = Vec::new();
        let mut measured: Option<Vec<usize>> = None;
        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let head = words.next().expect("non-empty line");
            if head.eq_ignore_ascii_case("MEASURE") {
                if measured.is_some() {
                    return Err(bad(ln, "second MEASURE line".into()));
                }
                let qs = words
                    .flat_map(|w| w.split(','))
                    .filter(|w| !w.is_empty())
                    .map(|w| {
                        w.parse::<usize>()
                            .map_err(|e| bad(ln, format!("qubit {w:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if qs.is_empty() {
                    return Err(bad(ln, "MEASURE lists no qubits".into()));
                }
                measured = Some(qs);
                continue;
            }
            let kind: GateKind = head.parse().map_err(|e: Error| bad(ln, e.to_string()))?;
            let qs = words
                .next()
                .ok_or_else(|| bad(ln, format!("{kind} needs qubits")))?;
            let targets = qs
                .split(',')
                .map(|w| {
                    w.parse::<usize>()
                        .map_err(|e| bad(ln, format!("qubit {w:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            let angle = words
                .next()
                .map(|w| {
                    w.parse::<f64>()
                        .map_err(|e| bad(ln, format!("angle {w:?}: {e}")))
                })
                .transpose()?;
            if let Some(extra) = words.next() {
                return Err(bad(ln, format!("unexpected token {extra:?}")));
            }
            ops.push(GateOp::new(kind, &targets, angle).map_err(|e| bad(ln, e.to_string()))?);
        }
        let max_op = ops.iter().map(GateOp::max_qubit).max();
        let max_meas = measured.as_ref().and_then(|m| m.iter().max().copied());
        let n = match max_op.max(max_meas) {
            Some(q) => q + 1,
            None => {
                return Err(Error::Format(
                    "circuit has no gates or measured qubits".into(),
                ))
            }
        };
        let mut c = Circuit::new(n).map_err(|e| Error::Format(e.to_string()))?;
        for op in ops {
            c.push(op)?;
        }
        if let Some(m) = measured {
            c.measure(&m).map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(c)
    }

    /// Inverse of [`Circuit::parse`] (angles printed round-trip exact).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for op in &self.ops {
            let _ = writeln!(s, "{op}");
        }
        let qs: Vec<String> = self.measured.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(s, "MEASURE {}", qs.join(" "));
        s
    }
}

/// Runs `circuit` from `|0…0⟩`.
pub fn simulate(circuit: &Circuit) -> Result<StateVector> {
    simulate_from(circuit, StateVector::new(circuit.n_qubits())?)
}

/// Runs `circuit` from an explicit initial state of the same size.
pub fn simulate_from(circuit: &Circuit, mut state: StateVector) -> Result<StateVector> {
    if state.n_qubits() != circuit.n_qubits() {
        return Err(Error::Circuit(format!(
            "initial state has {} qubits, circuit has {}",
            state.n_qubits(),
            circuit.n_qubits()
        )));
    }
    for op in circuit.ops() {
        state.apply(op)?;
    }
    Ok(state)
}
