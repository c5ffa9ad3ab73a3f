use std::cell::Cell;
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;

use super::{expectation_from_counts, expectation_from_probs, zero_probability};
use crate::error::{Error, Result};
use crate::nn::{Module, Parameter};
use crate::par;
use crate::qsim::{measure_shots, simulate, simulate_noisy, Circuit, NoiseModel};
use crate::tensor::{Element, GraphNode, Tensor};

/// Maps `(inputs, params)` to a circuit. Called once per evaluation, so it
/// must be cheap and deterministic.
pub type CircuitBuilder = Arc<dyn Fn(&[f64], &[f64]) -> Result<Circuit> + Send + Sync>;

/// How a circuit is executed and read out.
#[derive(Clone, Debug, PartialEq)]
pub enum MachineType {
    /// Exact Born probabilities, no sampling.
    ExactProb,
    Shots(u64),
    /// Shot sampling with one noise trajectory per shot.
    Noisy {
        noise: NoiseModel,
        shots: u64,
    },
}

/// What a circuit evaluation returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Mean of the measured bitstrings read as binary integers.
    Expectation,
    /// Probability that every measured qubit reads 0.
    ZeroProbability,
}

/// Everything needed to evaluate and differentiate a circuit family.
#[derive(Clone)]
pub struct QuantumLayerSpec {
    builder: CircuitBuilder,
    n_inputs: usize,
    n_params: usize,
    machine: MachineType,
    readout: Readout,
    shift: f64,
    grad_scale: f64,
    input_grad: bool,
    seed: u64,
}

impl fmt::Debug for QuantumLayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuantumLayerSpec")
            .field("n_inputs", &self.n_inputs)
            .field("n_params", &self.n_params)
            .field("machine", &self.machine)
            .field("readout", &self.readout)
            .field("shift", &self.shift)
            .field("grad_scale", &self.grad_scale)
            .field("input_grad", &self.input_grad)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Which scalars a shift gradient is taken with respect to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftTarget {
    Inputs,
    Params,
}

impl QuantumLayerSpec {
    /// Exact mode, shift π/2, grad scale ½, expectation readout, input
    /// gradients on.
    pub fn new(
        n_inputs: usize,
        n_params: usize,
        builder: impl Fn(&[f64], &[f64]) -> Result<Circuit> + Send + Sync + 'static,
    ) -> Self {
        QuantumLayerSpec {
            builder: Arc::new(builder),
            n_inputs,
            n_params,
            machine: MachineType::ExactProb,
            readout: Readout::Expectation,
            shift: std::f64::consts::FRAC_PI_2,
            grad_scale: 0.5,
            input_grad: true,
            seed: 0,
        }
    }

    pub fn with_machine(mut self, machine: MachineType) -> Self {
        self.machine = machine;
        self
    }

    pub fn with_readout(mut self, readout: Readout) -> Self {
        self.readout = readout;
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// `1.0` reproduces the unscaled difference of the original listings.
    pub fn with_grad_scale(mut self, grad_scale: f64) -> Self {
        self.grad_scale = grad_scale;
        self
    }

    pub fn with_input_grad(mut self, on: bool) -> Self {
        self.input_grad = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn machine(&self) -> &MachineType {
        &self.machine
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn grad_scale(&self) -> f64 {
        self.grad_scale
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shift > 0.0 && self.shift.is_finite()) {
            return Err(Error::Config(format!(
                "shift must be positive, got {}",
                self.shift
            )));
        }
        if !self.grad_scale.is_finite() {
            return Err(Error::Config("grad_scale must be finite".into()));
        }
        match &self.machine {
            MachineType::ExactProb => Ok(()),
            MachineType::Shots(0) | MachineType::Noisy { shots: 0, .. } => {
                Err(Error::Config("shot count must be at least 1".into()))
            }
            MachineType::Shots(_) => Ok(()),
            MachineType::Noisy { noise, .. } => noise.validate(),
        }
    }

    pub fn build(&self, inputs: &[f64], params: &[f64]) -> Result<Circuit> {
        (self.builder)(inputs, params)
    }

    /// One circuit evaluation. `seed` only matters in sampling modes.
    pub fn evaluate(&self, inputs: &[f64], params: &[f64], seed: u64) -> Result<f64> {
        let circuit = self.build(inputs, params)?;
        let qubits = circuit.measured_qubits();
        let from_counts = |c: &crate::qsim::Counts| match self.readout {
            Readout::Expectation => expectation_from_counts(c),
            Readout::ZeroProbability => c.get(&"0".repeat(qubits.len())) as f64 / c.shots() as f64,
        };
        match &self.machine {
            MachineType::ExactProb => {
                let probs = simulate(&circuit)?.probabilities(qubits)?;
                Ok(match self.readout {
                    Readout::Expectation => expectation_from_probs(&probs),
                    Readout::ZeroProbability => zero_probability(&probs),
                })
            }
            MachineType::Shots(n) => {
                let state = simulate(&circuit)?;
                Ok(from_counts(&measure_shots(&state, qubits, *n, seed)?))
            }
            MachineType::Noisy { noise, shots } => {
                Ok(from_counts(&simulate_noisy(&circuit, noise, *shots, seed)?))
            }
        }
    }

    /// `grad_scale · (E(v + shift·e_k) − E(v − shift·e_k))` for every scalar
    /// `k` of the chosen argument, without the upstream factor.
    pub fn shift_gradient(
        &self,
        inputs: &[f64],
        params: &[f64],
        target: ShiftTarget,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let n = match target {
            ShiftTarget::Inputs => inputs.len(),
            ShiftTarget::Params => params.len(),
        };
        par::try_map_range(n, |k| {
            let (ep, em) = self.shifted_pair(inputs, params, target, k, seed)?;
            Ok(self.grad_scale * (ep - em))
        })
    }

    fn shifted_pair(
        &self,
        inputs: &[f64],
        params: &[f64],
        target: ShiftTarget,
        k: usize,
        seed: u64,
    ) -> Result<(f64, f64)> {
        let mut x = inputs.to_vec();
        let mut p = params.to_vec();
        let slot = |x: &mut Vec<f64>, p: &mut Vec<f64>, v: f64| match target {
            ShiftTarget::Inputs => x[k] = v,
            ShiftTarget::Params => p[k] = v,
        };
        let base = match target {
            ShiftTarget::Inputs => inputs[k],
            ShiftTarget::Params => params[k],
        };
        let tag = match target {
            ShiftTarget::Inputs => 1 + 2 * k as u64,
            ShiftTarget::Params => 1 + 2 * (inputs.len() + k) as u64,
        };
        slot(&mut x, &mut p, base + self.shift);
        let ep = self.evaluate(&x, &p, derive_seed(seed, tag))?;
        slot(&mut x, &mut p, base - self.shift);
        let em = self.evaluate(&x, &p, derive_seed(seed, tag + 1))?;
        Ok((ep, em))
    }
}

/// splitmix64 finalizer over a pair, for deriving sub-seeds.
pub fn derive_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cumulative wall-clock time spent inside a quantum node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeTiming {
    pub forward: Duration,
    pub backward: Duration,
    pub forward_calls: u64,
    pub backward_calls: u64,
}

#[derive(Default)]
struct TimingCell {
    forward: Cell<Duration>,
    backward: Cell<Duration>,
    forward_calls: Cell<u64>,
    backward_calls: Cell<u64>,
}

impl TimingCell {
    fn add_forward(&self, d: Duration) {
        self.forward.set(self.forward.get() + d);
        self.forward_calls.set(self.forward_calls.get() + 1);
    }

    fn add_backward(&self, d: Duration) {
        self.backward.set(self.backward.get() + d);
        self.backward_calls.set(self.backward_calls.get() + 1);
    }
}

/// A parameterized circuit as a graph node. Input `[N, n_inputs]`, output
/// `[N, 1]`, one circuit per row. Gradients for inputs and weights come from
/// the shift rule, evaluated lazily during `backward`.
pub struct QuantumLayer<T: Element> {
    spec: Arc<QuantumLayerSpec>,
    weights: Option<Parameter<T>>,
    calls: Cell<u64>,
    timing: Rc<TimingCell>,
}

impl<T: Element> QuantumLayer<T> {
    /// Weights drawn uniformly from `[-π, π]`.
    pub fn new(spec: QuantumLayerSpec, rng: &mut impl Rng) -> Result<Self> {
        let weights = if spec.n_params > 0 {
            Some(Parameter::uniform(
                &[spec.n_params],
                std::f64::consts::PI,
                rng,
            )?)
        } else {
            None
        };
        Self::with_weights(spec, weights)
    }

    pub fn with_weights(spec: QuantumLayerSpec, weights: Option<Parameter<T>>) -> Result<Self> {
        spec.validate()?;
        let got = weights.as_ref().map_or(0, |w| w.numel());
        if got != spec.n_params {
            return Err(Error::dim(format!(
                "spec wants {} weights, got {got}",
                spec.n_params
            )));
        }
        Ok(QuantumLayer {
            spec: Arc::new(spec),
            weights,
            calls: Cell::new(0),
            timing: Rc::default(),
        })
    }

    pub fn spec(&self) -> &QuantumLayerSpec {
        &self.spec
    }

    pub fn weights(&self) -> Option<&Parameter<T>> {
        self.weights.as_ref()
    }

    pub fn timing(&self) -> NodeTiming {
        NodeTiming {
            forward: self.timing.forward.get(),
            backward: self.timing.backward.get(),
            forward_calls: self.timing.forward_calls.get(),
            backward_calls: self.timing.backward_calls.get(),
        }
    }

    pub fn reset_timing(&self) {
        self.timing.forward.set(Duration::ZERO);
        self.timing.backward.set(Duration::ZERO);
        self.timing.forward_calls.set(0);
        self.timing.backward_calls.set(0);
    }
}

impl<T: Element> Module<T> for QuantumLayer<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let start = Instant::now();
        let spec = &self.spec;
        let d = spec.n_inputs;
        if x.shape().len() != 2 || x.shape()[1] != d {
            return Err(Error::dim(format!(
                "quantum layer expects [N, {d}], got {:?}",
                x.shape()
            )));
        }
        let n = x.shape()[0];
        let rows = Arc::new(x.to_f64_vec());
        let params = Arc::new(
            self.weights
                .as_ref()
                .map_or_else(Vec::new, |w| w.to_f64_vec()),
        );
        let call = self.calls.get();
        self.calls.set(call + 1);
        let seeds: Arc<Vec<u64>> = Arc::new(
            (0..n)
                .map(|i| derive_seed(derive_seed(spec.seed, call), i as u64))
                .collect(),
        );

        let out = par::try_map_range(n, |i| {
            spec.evaluate(&rows[i * d..(i + 1) * d], &params, seeds[i])
        })?;
        let values: Vec<T> = out.into_iter().map(T::of).collect();

        let mut nodes = Vec::new();
        if spec.input_grad && x.tracks() && d > 0 {
            let (spec, rows, params, seeds) =
                (spec.clone(), rows.clone(), params.clone(), seeds.clone());
            let timing = self.timing.clone();
            nodes.push(GraphNode::new(x, move |up: &[T]| {
                let t0 = Instant::now();
                let g = par::try_map_range(n * d, |ik| {
                    let (i, k) = (ik / d, ik % d);
                    let row = &rows[i * d..(i + 1) * d];
                    let (ep, em) =
                        spec.shifted_pair(row, &params, ShiftTarget::Inputs, k, seeds[i])?;
                    Ok::<_, Error>(T::of(spec.grad_scale * (ep - em) * up[i].as_f64()))
                });
                timing.add_backward(t0.elapsed());
                g
            }));
        }
        if let Some(w) = self.weights.as_ref().filter(|w| w.tracks()) {
            let (spec, rows, params, seeds) =
                (spec.clone(), rows.clone(), params.clone(), seeds.clone());
            let timing = self.timing.clone();
            let p = params.len();
            nodes.push(GraphNode::new(w, move |up: &[T]| {
                let t0 = Instant::now();
                let terms = par::try_map_range(n * p, |ik| {
                    let (i, k) = (ik / p, ik % p);
                    let row = &rows[i * d..(i + 1) * d];
                    let (ep, em) =
                        spec.shifted_pair(row, &params, ShiftTarget::Params, k, seeds[i])?;
                    Ok::<_, Error>(spec.grad_scale * (ep - em) * up[i].as_f64())
                })?;
                let mut g = vec![0.0f64; p];
                for (ik, t) in terms.into_iter().enumerate() {
                    g[ik % p] += t;
                }
                timing.add_backward(t0.elapsed());
                Ok(g.into_iter().map(T::of).collect())
            }));
        }
        let y = Tensor::from_op(values, vec![n, 1], nodes);
        self.timing.add_forward(start.elapsed());
        Ok(y)
    }

    fn local_parameters(&self) -> Vec<(&str, &Parameter<T>)> {
        self.weights.iter().map(|w| ("weights", w)).collect()
    }
}
