//! Opaque circuits as differentiable nodes.
//!
//! An [`ExternalCircuit`] is any `inputs -> expectation` function. The adapter
//! never looks inside it: the forward pass calls it once per row and the
//! backward pass uses two shifted calls per input dimension.

use std::cell::RefCell;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::nn::Module;
use crate::tensor::{Element, GraphNode, Tensor};

type RunFn = Box<dyn FnMut(&[f64]) -> Result<f64>>;

/// A black-box circuit. Clones share the same function, and every call goes
/// through one `RefCell`, so calls never overlap.
#[derive(Clone)]
pub struct ExternalCircuit {
    run: Rc<RefCell<RunFn>>,
    n_inputs: usize,
    metadata: String,
}

impl std::fmt::Debug for ExternalCircuit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalCircuit")
            .field("n_inputs", &self.n_inputs)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl ExternalCircuit {
    pub fn new(
        n_inputs: usize,
        metadata: impl Into<String>,
        run: impl FnMut(&[f64]) -> Result<f64> + 'static,
    ) -> Result<Self> {
        if n_inputs == 0 {
            return Err(Error::Config(
                "external circuit needs at least one input".into(),
            ));
        }
        Ok(ExternalCircuit {
            run: Rc::new(RefCell::new(Box::new(run))),
            n_inputs,
            metadata: metadata.into(),
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn metadata(&self) -> &str {
        &self.metadata
    }

    /// One call. Failures and non-finite results become adapter errors
    /// tagged with the metadata.
    pub fn run(&self, inputs: &[f64]) -> Result<f64> {
        let wrap = |message: String| Error::Adapter {
            metadata: self.metadata.clone(),
            message,
        };
        if inputs.len() != self.n_inputs {
            return Err(wrap(format!(
                "expected {} inputs, got {}",
                self.n_inputs,
                inputs.len()
            )));
        }
        let v = (self.run.borrow_mut())(inputs).map_err(|e| wrap(e.to_string()))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(wrap(format!("run returned {v}")))
        }
    }

    /// `grad_scale · (run(x + shift·e_k) − run(x − shift·e_k)) · upstream` for
    /// each input dimension `k`, evaluated in order.
    pub fn shift_gradient(
        &self,
        inputs: &[f64],
        shift: f64,
        grad_scale: f64,
        upstream: f64,
    ) -> Result<Vec<f64>> {
        let mut x = inputs.to_vec();
        let mut g = Vec::with_capacity(inputs.len());
        for k in 0..inputs.len() {
            x[k] = inputs[k] + shift;
            let ep = self.run(&x)?;
            x[k] = inputs[k] - shift;
            let em = self.run(&x)?;
            x[k] = inputs[k];
            g.push(grad_scale * (ep - em) * upstream);
        }
        Ok(g)
    }
}

/// Graph node around an [`ExternalCircuit`]: `[N, n_inputs] -> [N, 1]`.
#[derive(Clone, Debug)]
pub struct CompatLayer {
    circuit: ExternalCircuit,
    shift: f64,
    grad_scale: f64,
}

impl CompatLayer {
    /// Shift π/2 and grad scale ½.
    pub fn new(circuit: ExternalCircuit) -> Self {
        CompatLayer {
            circuit,
            shift: std::f64::consts::FRAC_PI_2,
            grad_scale: 0.5,
        }
    }

    pub fn with_shift(mut self, shift: f64) -> Result<Self> {
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(Error::Config(format!(
                "shift must be positive, got {shift}"
            )));
        }
        self.shift = shift;
        Ok(self)
    }

    pub fn with_grad_scale(mut self, grad_scale: f64) -> Self {
        self.grad_scale = grad_scale;
        self
    }

    pub fn circuit(&self) -> &ExternalCircuit {
        &self.circuit
    }
}

impl<T: Element> Module<T> for CompatLayer {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.circuit.n_inputs;
        if x.shape().len() != 2 || x.shape()[1] != d {
            return Err(Error::dim(format!(
                "adapter expects [N, {d}], got {:?}",
                x.shape()
            )));
        }
        let n = x.shape()[0];
        let rows = x.to_f64_vec();
        let values = (0..n)
            .map(|i| self.circuit.run(&rows[i * d..(i + 1) * d]).map(T::of))
            .collect::<Result<Vec<T>>>()?;
        let mut nodes = Vec::new();
        if x.tracks() {
            let (circuit, shift, scale) = (self.circuit.clone(), self.shift, self.grad_scale);
            nodes.push(GraphNode::new(x, move |up: &[T]| {
                let mut g = Vec::with_capacity(n * d);
                for i in 0..n {
                    let row = &rows[i * d..(i + 1) * d];
                    g.extend(
                        circuit
                            .shift_gradient(row, shift, scale, up[i].as_f64())?
                            .into_iter()
                            .map(T::of),
                    );
                }
                Ok(g)
            }));
        }
        Ok(Tensor::from_op(values, vec![n, 1], nodes))
    }
}

/// A circuit in another process. Each call writes one line of
/// space-separated inputs to the child's stdin and reads one number back.
pub struct SubprocessCircuit {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    label: String,
}

impl SubprocessCircuit {
    pub fn spawn(program: &str, args: &[&str]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let label = std::iter::once(program)
            .chain(args.iter().copied())
            .collect::<Vec<_>>()
            .join(" ");
        Ok(SubprocessCircuit {
            child,
            stdin,
            stdout,
            label,
        })
    }

    pub fn call(&mut self, inputs: &[f64]) -> Result<f64> {
        let line: Vec<String> = inputs.iter().map(|v| format!("{v:?}")).collect();
        writeln!(self.stdin, "{}", line.join(" "))?;
        self.stdin.flush()?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply)? == 0 {
            return Err(Error::Format(format!("{} closed its output", self.label)));
        }
        reply
            .trim()
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("{} replied {:?}: {e}", self.label, reply.trim())))
    }

    /// Wraps the process as an [`ExternalCircuit`]; the command line becomes
    /// the metadata.
    pub fn into_external(mut self, n_inputs: usize) -> Result<ExternalCircuit> {
        let label = self.label.clone();
        ExternalCircuit::new(n_inputs, label, move |x| self.call(x))
    }
}

impl Drop for SubprocessCircuit {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
