use rand::Rng;

use super::embedding::amplitude_embedding;
use super::layer::{MachineType, QuantumLayer, QuantumLayerSpec, Readout};
use crate::error::{Error, Result};
use crate::nn::{Module, Parameter};
use crate::qsim::{Circuit, GateOp};
use crate::tensor::{Element, Tensor};

/// Register sizes of a quantum autoencoder.
///
/// Layout: qubit 0 is the SWAP-test auxiliary, qubits `1..=trash` hold the
/// `|0…0⟩` reference, and the rest form the training register. The trash
/// subset is the last `trash` qubits of the training register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QaeSpec {
    total_qubits: usize,
    trash_qubits: usize,
}

impl QaeSpec {
    pub fn new(total_qubits: usize, trash_qubits: usize) -> Result<Self> {
        if trash_qubits == 0 || total_qubits <= trash_qubits + 1 {
            return Err(Error::Config(format!(
                "autoencoder needs total > trash + 1 and trash ≥ 1, got total {total_qubits}, trash {trash_qubits}"
            )));
        }
        let s = QaeSpec {
            total_qubits,
            trash_qubits,
        };
        if s.training_qubits() < trash_qubits {
            return Err(Error::Config(format!(
                "{} training qubits cannot hold {trash_qubits} trash qubits",
                s.training_qubits()
            )));
        }
        Ok(s)
    }

    pub fn total_qubits(&self) -> usize {
        self.total_qubits
    }

    pub fn trash_qubits(&self) -> usize {
        self.trash_qubits
    }

    pub fn training_qubits(&self) -> usize {
        self.total_qubits - 1 - self.trash_qubits
    }

    /// `3T + 3T(T−1) + 3T` for `T` training qubits.
    pub fn n_params(&self) -> usize {
        let t = self.training_qubits();
        3 * t + 3 * t * (t - 1) + 3 * t
    }

    /// Length of the amplitude vectors the layer accepts.
    pub fn input_dim(&self) -> usize {
        1 << self.training_qubits()
    }

    pub fn aux(&self) -> usize {
        0
    }

    pub fn reference(&self) -> Vec<usize> {
        (1..=self.trash_qubits).collect()
    }

    pub fn training(&self) -> Vec<usize> {
        (1 + self.trash_qubits..self.total_qubits).collect()
    }

    pub fn trash(&self) -> Vec<usize> {
        let t = self.training();
        t[t.len() - self.trash_qubits..].to_vec()
    }

    /// Input encoding, encoder ansatz, SWAP test; measures the auxiliary.
    pub fn circuit(&self, input: &[f64], params: &[f64]) -> Result<Circuit> {
        if input.len() != self.input_dim() {
            return Err(Error::Circuit(format!(
                "autoencoder input has {} entries, register needs {}",
                input.len(),
                self.input_dim()
            )));
        }
        if params.len() != self.n_params() {
            return Err(Error::Circuit(format!(
                "autoencoder needs {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let training = self.training();
        let mut c = Circuit::new(self.total_qubits)?;
        for op in amplitude_embedding(input, &training)? {
            c.push(op)?;
        }
        let mut p = params.iter().copied();
        let mut next = || p.next().expect("parameter count checked");
        for &q in &training {
            c.push(GateOp::rz(q, next()))?
                .push(GateOp::ry(q, next()))?
                .push(GateOp::rz(q, next()))?;
        }
        for &a in &training {
            for &b in &training {
                if a != b {
                    c.push(GateOp::crz(a, b, next()))?
                        .push(GateOp::cry(a, b, next()))?
                        .push(GateOp::crz(a, b, next()))?;
                }
            }
        }
        for &q in &training {
            c.push(GateOp::rz(q, next()))?
                .push(GateOp::ry(q, next()))?
                .push(GateOp::rz(q, next()))?;
        }
        let aux = self.aux();
        c.push(GateOp::h(aux))?;
        for (r, t) in self.reference().into_iter().zip(self.trash()) {
            c.push(GateOp::cswap(aux, r, t))?;
        }
        c.push(GateOp::h(aux))?;
        c.measure(&[aux])?;
        Ok(c)
    }
}

/// Autoencoder node. Input `[N, 2^T]` amplitude vectors, output `[N, 1]`
/// holding P(aux = 0), the SWAP-test fidelity proxy.
pub struct QaeLayer<T: Element> {
    spec: QaeSpec,
    encoder: QuantumLayer<T>,
}

impl<T: Element> QaeLayer<T> {
    pub fn new(spec: QaeSpec, machine: MachineType, seed: u64, rng: &mut impl Rng) -> Result<Self> {
        let layer = QuantumLayer::new(Self::layer_spec(spec, machine, seed), rng)?;
        Ok(QaeLayer {
            spec,
            encoder: layer,
        })
    }

    pub fn with_weights(
        spec: QaeSpec,
        machine: MachineType,
        seed: u64,
        weights: Parameter<T>,
    ) -> Result<Self> {
        let layer =
            QuantumLayer::with_weights(Self::layer_spec(spec, machine, seed), Some(weights))?;
        Ok(QaeLayer {
            spec,
            encoder: layer,
        })
    }

    fn layer_spec(spec: QaeSpec, machine: MachineType, seed: u64) -> QuantumLayerSpec {
        QuantumLayerSpec::new(spec.input_dim(), spec.n_params(), move |x, p| {
            spec.circuit(x, p)
        })
        .with_machine(machine)
        .with_readout(Readout::ZeroProbability)
        .with_input_grad(false)
        .with_seed(seed)
    }

    pub fn spec(&self) -> &QaeSpec {
        &self.spec
    }

    pub fn encoder(&self) -> &QuantumLayer<T> {
        &self.encoder
    }
}

impl<T: Element> Module<T> for QaeLayer<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.encoder.forward(x)
    }

    fn children(&self) -> Vec<(&str, &dyn Module<T>)> {
        vec![("encoder", &self.encoder)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn parameter_count() {
        let s = QaeSpec::new(7, 2).unwrap();
        assert_eq!(s.training_qubits(), 4);
        assert_eq!(s.n_params(), 60);
        assert_eq!(s.trash(), vec![5, 6]);
        assert!(QaeSpec::new(3, 2).is_err());
        assert!(QaeSpec::new(4, 2).is_err());
    }

    fn product(per_qubit: &[[f64; 2]]) -> Vec<f64> {
        let mut v = vec![1.0];
        for amp in per_qubit {
            v = amp
                .iter()
                .flat_map(|a| v.iter().map(move |x| a * x))
                .collect();
        }
        v
    }

    #[test]
    fn swap_test_values() {
        let s = QaeSpec::new(7, 2).unwrap();
        let zeros = vec![0.0; 60];
        let spec = QaeLayer::<f64>::layer_spec(s, MachineType::ExactProb, 0);
        // latent qubits arbitrary, trash in |00⟩
        let ok = product(&[
            [0.6, 0.8],
            [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            [1.0, 0.0],
            [1.0, 0.0],
        ]);
        assert!((spec.evaluate(&ok, &zeros, 0).unwrap() - 1.0).abs() < 1e-10);
        // trash in |++⟩: (1 + 1/4) / 2
        let plus = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        let bad = product(&[[1.0, 0.0], [1.0, 0.0], plus, plus]);
        assert!((spec.evaluate(&bad, &zeros, 0).unwrap() - 0.625).abs() < 1e-10);
    }

    #[test]
    fn register_mismatch() {
        let s = QaeSpec::new(7, 2).unwrap();
        assert!(matches!(
            s.circuit(&[1.0; 8], &[0.0; 60]),
            Err(Error::Circuit(_))
        ));
        assert!(matches!(
            s.circuit(&[1.0; 16], &[0.0; 59]),
            Err(Error::Circuit(_))
        ));
    }
}
