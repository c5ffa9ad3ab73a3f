//! The reference networks: a small CNN and the hybrid quantum-classical CNN.

use rand::Rng;

use crate::error::Result;
use crate::nn::{Conv2d, Linear, MaxPool2d, Module, Padding};
use crate::qnn::{MachineType, QuantumLayer, QuantumLayerSpec};
use crate::qsim::{Circuit, GateOp};
use crate::tensor::{Element, Tensor};

/// Two 3x3 convolutions with ReLU and 2x2 pooling, then one linear layer.
/// Input `[N, 1, 28, 28]`, output `[N, 10]` logits.
pub struct Cnn<T: Element> {
    pub conv5: Conv2d<T>,
    pub conv6: Conv2d<T>,
    pub fc3: Linear<T>,
    pool: MaxPool2d,
}

impl<T: Element> Cnn<T> {
    pub fn new(rng: &mut impl Rng) -> Result<Self> {
        Ok(Cnn {
            conv5: Conv2d::new(1, 32, (3, 3), (1, 1), Padding::Valid, rng)?,
            conv6: Conv2d::new(32, 32, (3, 3), (1, 1), Padding::Valid, rng)?,
            fc3: Linear::new(800, 10, rng)?,
            pool: MaxPool2d::new((2, 2), (2, 2), Padding::Valid),
        })
    }
}

impl<T: Element> Module<T> for Cnn<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.pool.forward(&self.conv5.forward(x)?.relu())?;
        let x = self.pool.forward(&self.conv6.forward(&x)?.relu())?;
        self.fc3.forward(&x.flatten(1)?)
    }

    fn children(&self) -> Vec<(&str, &dyn Module<T>)> {
        vec![
            ("conv5", &self.conv5),
            ("conv6", &self.conv6),
            ("fc3", &self.fc3),
        ]
    }
}

/// `H; RY(x)` on one qubit, measured. Its expectation is `(1 + sin x) / 2`.
pub fn hqcnn_circuit(inputs: &[f64], _params: &[f64]) -> Result<Circuit> {
    Circuit::new(1)?
        .with(GateOp::h(0))?
        .with(GateOp::ry(0, inputs[0]))
}

pub fn hqcnn_quantum_spec(machine: MachineType, grad_scale: f64, seed: u64) -> QuantumLayerSpec {
    QuantumLayerSpec::new(1, 0, hqcnn_circuit)
        .with_machine(machine)
        .with_grad_scale(grad_scale)
        .with_seed(seed)
}

/// LeNet-style feature extractor squeezed to one scalar, fed through a
/// one-qubit circuit, then widened to two logits.
/// Input `[N, 1, 28, 28]`, output `[N, 2]`.
pub struct Hqcnn<T: Element> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    pub fc1: Linear<T>,
    pub fc2: Linear<T>,
    pub hybrid: QuantumLayer<T>,
    pub fc3: Linear<T>,
    pool: MaxPool2d,
}

impl<T: Element> Hqcnn<T> {
    pub fn new(
        machine: MachineType,
        grad_scale: f64,
        seed: u64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Hqcnn {
            conv1: Conv2d::new(1, 6, (5, 5), (1, 1), Padding::Valid, rng)?,
            conv2: Conv2d::new(6, 16, (5, 5), (1, 1), Padding::Valid, rng)?,
            fc1: Linear::new(256, 64, rng)?,
            fc2: Linear::new(64, 1, rng)?,
            hybrid: QuantumLayer::new(hqcnn_quantum_spec(machine, grad_scale, seed), rng)?,
            fc3: Linear::new(1, 2, rng)?,
            pool: MaxPool2d::new((2, 2), (2, 2), Padding::Valid),
        })
    }
}

impl<T: Element> Module<T> for Hqcnn<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.pool.forward(&self.conv1.forward(x)?.relu())?;
        let x = self.pool.forward(&self.conv2.forward(&x)?.relu())?;
        let x = self.fc1.forward(&x.flatten(1)?)?.relu();
        let x = self.fc2.forward(&x)?;
        let x = self.hybrid.forward(&x)?;
        self.fc3.forward(&x)
    }

    fn children(&self) -> Vec<(&str, &dyn Module<T>)> {
        vec![
            ("conv1", &self.conv1),
            ("conv2", &self.conv2),
            ("fc1", &self.fc1),
            ("fc2", &self.fc2),
            ("hybrid", &self.hybrid),
            ("fc3", &self.fc3),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cnn_shapes() {
        let m = Cnn::<f32>::new(&mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let y = m.forward(&Tensor::zeros(&[2, 1, 28, 28]).unwrap()).unwrap();
        assert_eq!(y.shape(), &[2, 10]);
        let names: Vec<String> = m.named_parameters().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "conv5.weight");
        assert_eq!(
            m.num_parameters(),
            32 * 9 + 32 + 32 * 32 * 9 + 32 + 800 * 10 + 10
        );
    }

    #[test]
    fn hqcnn_shapes_and_backward() {
        let m = Hqcnn::<f32>::new(
            MachineType::ExactProb,
            0.5,
            0,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let x = Tensor::full(&[3, 1, 28, 28], 0.5).unwrap();
        let y = m.forward(&x).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        y.sum().backward().unwrap();
        assert!(m.conv1.weight.grad().unwrap().iter().any(|&g| g != 0.0));
        assert_eq!(m.hybrid.timing().backward_calls, 1);
    }
}
