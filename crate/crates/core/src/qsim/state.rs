use num_complex::Complex64;

use super::gate::{GateKind, GateOp, Matrix2};
use crate::error::{Error, Result};
use crate::par;

pub const MAX_QUBITS: usize = 24;

/// Below this many qubits the kernels stay on the calling thread.
const PARALLEL_MIN_QUBITS: usize = 14;

/// Full-amplitude pure state. Qubit `k` is bit `k` of the amplitude index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Circuit(format!(
                "{n_qubits} qubits outside supported range 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::new(n_qubits)?;
        if index >= s.amps.len() {
            return Err(Error::Circuit(format!("basis index {index} out of range")));
        }
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Wraps explicit amplitudes; the length must be a power of two and the
    /// vector normalized to within 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Circuit(format!(
                "{len} amplitudes is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Circuit(format!(
                "{n_qubits} qubits exceeds {MAX_QUBITS}"
            )));
        }
        let s = StateVector { n_qubits, amps };
        if (s.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::Circuit(format!(
                "amplitudes have norm² {}",
                s.norm_sqr()
            )));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        let dot: Complex64 = self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum();
        dot.norm_sqr()
    }

    fn check_qubits(&self, qs: &[usize]) -> Result<()> {
        match qs.iter().find(|&&q| q >= self.n_qubits) {
            Some(q) => Err(Error::Circuit(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            ))),
            None => Ok(()),
        }
    }

    /// Applies one gate in place.
    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        self.check_qubits(op.targets())?;
        let t = op.targets();
        match op.kind() {
            GateKind::I => {}
            GateKind::SWAP => self.swap(t[0], t[1], 0),
            GateKind::CSWAP => self.swap(t[1], t[2], 1 << t[0]),
            _ => {
                let m = op.controlled_matrix().expect("matrix gate");
                let (controls, target) = t.split_at(t.len() - 1);
                let mask = controls.iter().fold(0usize, |m, &c| m | (1 << c));
                self.apply_controlled(target[0], &m, mask);
            }
        }
        Ok(())
    }

    /// Swap of qubits `a` and `b` on the subspace where `mask` bits are set,
    /// as three controlled-X passes.
    fn swap(&mut self, a: usize, b: usize, mask: usize) {
        let x = GateOp::x(0).controlled_matrix().expect("X matrix");
        self.apply_controlled(b, &x, mask | (1 << a));
        self.apply_controlled(a, &x, mask | (1 << b));
        self.apply_controlled(b, &x, mask | (1 << a));
    }

    /// Applies `m` to `target` on every amplitude pair whose index has all
    /// bits of `mask` set.
    pub(crate) fn apply_controlled(&mut self, target: usize, m: &Matrix2, mask: usize) {
        debug_assert_eq!(mask & (1 << target), 0);
        let stride = 1usize << target;
        let chunk = stride << 1;
        let kernel = |base: usize, a: &mut Complex64, b: &mut Complex64| {
            if base & mask == mask {
                let (x, y) = (*a, *b);
                *a = m[0][0] * x + m[0][1] * y;
                *b = m[1][0] * x + m[1][1] * y;
            }
        };
        let pair_chunk = |ci: usize, c: &mut [Complex64]| {
            let (lo, hi) = c.split_at_mut(stride);
            for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                kernel(ci * chunk + k, a, b);
            }
        };
        if self.n_qubits < PARALLEL_MIN_QUBITS {
            self.amps
                .chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| pair_chunk(i, c));
            return;
        }
        let n_chunks = self.amps.len() / chunk;
        if n_chunks >= 4 * par::current_threads() {
            par::for_each_chunk_mut(&mut self.amps, chunk, pair_chunk);
        } else {
            for (ci, c) in self.amps.chunks_mut(chunk).enumerate() {
                let (lo, hi) = c.split_at_mut(stride);
                par::for_each_zip_mut(lo, hi, |k, a, b| kernel(ci * chunk + k, a, b));
            }
        }
    }

    /// Marginal Born probabilities over `qubits`. Entry `v` of the result has
    /// bit `i` equal to the outcome of `qubits[i]`.
    pub fn probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        self.check_qubits(qubits)?;
        for (i, q) in qubits.iter().enumerate() {
            if qubits[..i].contains(q) {
                return Err(Error::Circuit(format!("qubit {q} listed twice")));
            }
        }
        let mut out = vec![0.0; 1 << qubits.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            let v = qubits
                .iter()
                .enumerate()
                .fold(0usize, |acc, (i, &q)| acc | (((idx >> q) & 1) << i));
            out[v] += a.norm_sqr();
        }
        Ok(out)
    }

    /// Probability that qubit `q` reads 1.
    pub(crate) fn prob_one(&self, q: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> q) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
    }
}
