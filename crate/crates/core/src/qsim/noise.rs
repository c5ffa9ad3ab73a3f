use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use super::circuit::Circuit;
use super::gate::{GateKind, GateOp};
use super::measure::{sample, shot_rng, Counts};
use super::state::StateVector;
use crate::error::{Error, Result};
use crate::par;

/// A single-qubit noise channel, applied after a gate on each qubit it acts on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Channel {
    /// X with probability `p`.
    BitFlip(f64),
    /// Z with probability `p`.
    PhaseFlip(f64),
    /// With probability `p`, one of I, X, Y, Z uniformly; `p = 1` is the fully
    /// mixing channel.
    Depolarizing(f64),
    /// Energy relaxation toward `|0⟩` with decay probability `γ`.
    AmplitudeDamping(f64),
}

impl Channel {
    pub fn strength(self) -> f64 {
        match self {
            Channel::BitFlip(p)
            | Channel::PhaseFlip(p)
            | Channel::Depolarizing(p)
            | Channel::AmplitudeDamping(p) => p,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::BitFlip(_) => "bit_flip",
            Channel::PhaseFlip(_) => "phase_flip",
            Channel::Depolarizing(_) => "depolarizing",
            Channel::AmplitudeDamping(_) => "amplitude_damping",
        }
    }

    pub fn validate(self) -> Result<()> {
        let p = self.strength();
        if (0.0..=1.0).contains(&p) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} probability {p} outside [0, 1]",
                self.name()
            )))
        }
    }

    fn parse(name: &str, p: f64) -> Result<Channel> {
        let c = match name.to_ascii_lowercase().as_str() {
            "bit_flip" => Channel::BitFlip(p),
            "phase_flip" => Channel::PhaseFlip(p),
            "depolarizing" => Channel::Depolarizing(p),
            "amplitude_damping" => Channel::AmplitudeDamping(p),
            other => return Err(Error::Config(format!("unknown noise channel {other:?}"))),
        };
        c.validate()?;
        Ok(c)
    }

    /// One trajectory step on qubit `q`, drawing exactly one uniform.
    pub(crate) fn apply(self, state: &mut StateVector, q: usize, rng: &mut impl Rng) -> Result<()> {
        let u: f64 = rng.random();
        match self {
            Channel::BitFlip(p) if u < p => state.apply(&GateOp::x(q)),
            Channel::PhaseFlip(p) if u < p => state.apply(&GateOp::z(q)),
            Channel::Depolarizing(p) if u < p => {
                let pick = ((u / p) * 4.0) as usize;
                match pick {
                    1 => state.apply(&GateOp::x(q)),
                    2 => state.apply(&GateOp::y(q)),
                    3 => state.apply(&GateOp::z(q)),
                    _ => Ok(()),
                }
            }
            Channel::AmplitudeDamping(g) if g > 0.0 => {
                damp(state, q, g, u);
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn damp(state: &mut StateVector, q: usize, gamma: f64, u: f64) {
    let p_jump = gamma * state.prob_one(q);
    let bit = 1usize << q;
    let amps = state.amplitudes_mut();
    if u < p_jump {
        // K1 = √γ |0⟩⟨1|, renormalized.
        let f = (gamma / p_jump).sqrt();
        for i in 0..amps.len() {
            if i & bit != 0 {
                amps[i & !bit] = amps[i] * f;
                amps[i] = Complex64::new(0.0, 0.0);
            }
        }
    } else {
        // K0 = diag(1, √(1-γ)), renormalized.
        let damp = (1.0 - gamma).sqrt();
        for (i, a) in amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a *= damp;
            }
        }
        state.scale(1.0 / (1.0 - p_jump).sqrt());
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.name(), self.strength())
    }
}

/// Which channel follows which gate. A per-qubit override replaces the
/// per-kind channel for every gate touching that qubit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseModel {
    per_kind: BTreeMap<GateKind, Channel>,
    default: Option<Channel>,
    per_qubit: BTreeMap<usize, Channel>,
}

impl NoiseModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Channel after every gate of `kind`.
    pub fn with_gate(mut self, kind: GateKind, channel: Channel) -> Result<Self> {
        channel.validate()?;
        self.per_kind.insert(kind, channel);
        Ok(self)
    }

    /// Channel after every gate kind without its own entry.
    pub fn with_all_gates(mut self, channel: Channel) -> Result<Self> {
        channel.validate()?;
        self.default = Some(channel);
        Ok(self)
    }

    pub fn with_qubit(mut self, qubit: usize, channel: Channel) -> Result<Self> {
        channel.validate()?;
        self.per_qubit.insert(qubit, channel);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.per_kind
            .values()
            .chain(self.default.iter())
            .chain(self.per_qubit.values())
            .try_for_each(|c| c.validate())
    }

    pub fn channel_for(&self, kind: GateKind, qubit: usize) -> Option<Channel> {
        self.per_qubit
            .get(&qubit)
            .or_else(|| self.per_kind.get(&kind))
            .or(self.default.as_ref())
            .copied()
    }

    /// Line format: `GATE channel p`, `* channel p` (all gates) or
    /// `qubit Q channel p`. `#` comments.
    pub fn parse(text: &str) -> Result<NoiseModel> {
        let mut m = NoiseModel::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("noise line {}: {msg}", ln + 1));
            let words: Vec<&str> = line.split_whitespace().collect();
            let prob = |w: &str| {
                w.parse::<f64>()
                    .map_err(|e| bad(format!("probability {w:?}: {e}")))
            };
            match words.as_slice() {
                ["qubit", q, name, p] => {
                    let q = q
                        .parse::<usize>()
                        .map_err(|e| bad(format!("qubit {q:?}: {e}")))?;
                    m.per_qubit.insert(q, Channel::parse(name, prob(p)?)?);
                }
                ["*", name, p] => m.default = Some(Channel::parse(name, prob(p)?)?),
                [gate, name, p] => {
                    let kind = GateKind::from_str(gate).map_err(|e| bad(e.to_string()))?;
                    m.per_kind.insert(kind, Channel::parse(name, prob(p)?)?);
                }
                _ => return Err(bad(format!("cannot parse {line:?}"))),
            }
        }
        Ok(m)
    }
}

/// One stochastic trajectory of `circuit` under `noise`.
pub fn trajectory(
    circuit: &Circuit,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<StateVector> {
    let mut state = StateVector::new(circuit.n_qubits())?;
    for op in circuit.ops() {
        state.apply(op)?;
        for &q in op.targets() {
            if let Some(ch) = noise.channel_for(op.kind(), q) {
                ch.apply(&mut state, q, rng)?;
            }
        }
    }
    Ok(state)
}

/// Shot sampling with one noise trajectory per shot. With every channel at
/// zero strength the result equals [`super::measure_shots`] on the noiseless
/// state for the same seed.
pub fn simulate_noisy(
    circuit: &Circuit,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
) -> Result<Counts> {
    noise.validate()?;
    if shots == 0 {
        return Err(Error::Contract("shots must be at least 1".into()));
    }
    let qubits = circuit.measured_qubits();
    let outcomes = par::try_map_range(shots as usize, |s| {
        let s = s as u64;
        let state = trajectory(circuit, noise, &mut shot_rng(seed, s, true))?;
        let probs = state.probabilities(qubits)?;
        Ok::<_, Error>(sample(&probs, &mut shot_rng(seed, s, false)))
    })?;
    Ok(Counts::from_outcomes(&outcomes, qubits.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{measure_shots, simulate};

    fn h_ry(theta: f64) -> Circuit {
        Circuit::new(1)
            .unwrap()
            .with(GateOp::h(0))
            .unwrap()
            .with(GateOp::ry(0, theta))
            .unwrap()
    }

    #[test]
    fn certain_bit_flip_on_identity() {
        let c = Circuit::new(1).unwrap().with(GateOp::i(0)).unwrap();
        let m = NoiseModel::new()
            .with_gate(GateKind::I, Channel::BitFlip(1.0))
            .unwrap();
        let counts = simulate_noisy(&c, &m, 50, 3).unwrap();
        assert_eq!(counts.get("1"), 50);
    }

    #[test]
    fn zero_noise_is_bit_exact() {
        let c = h_ry(0.7);
        let m = NoiseModel::new()
            .with_all_gates(Channel::Depolarizing(0.0))
            .unwrap()
            .with_qubit(0, Channel::AmplitudeDamping(0.0))
            .unwrap();
        let noisy = simulate_noisy(&c, &m, 500, 11).unwrap();
        let clean = measure_shots(&simulate(&c).unwrap(), &[0], 500, 11).unwrap();
        assert_eq!(noisy, clean);
    }

    #[test]
    fn invalid_probability() {
        assert!(matches!(
            NoiseModel::new().with_gate(GateKind::H, Channel::BitFlip(1.5)),
            Err(Error::Config(_))
        ));
        assert!(NoiseModel::parse("H bit_flip -0.1").is_err());
        assert!(NoiseModel::parse("H sparkle 0.1").is_err());
    }

    #[test]
    fn parse_lines() {
        let m = NoiseModel::parse(
            "# model\nH depolarizing 0.1\n* bit_flip 0.01\nqubit 2 amplitude_damping 0.2\n",
        )
        .unwrap();
        assert_eq!(
            m.channel_for(GateKind::H, 0),
            Some(Channel::Depolarizing(0.1))
        );
        assert_eq!(m.channel_for(GateKind::X, 0), Some(Channel::BitFlip(0.01)));
        assert_eq!(
            m.channel_for(GateKind::H, 2),
            Some(Channel::AmplitudeDamping(0.2))
        );
    }

    #[test]
    fn full_damping_resets_to_zero() {
        let c = Circuit::new(1).unwrap().with(GateOp::x(0)).unwrap();
        let m = NoiseModel::new()
            .with_all_gates(Channel::AmplitudeDamping(1.0))
            .unwrap();
        assert_eq!(simulate_noisy(&c, &m, 20, 0).unwrap().get("0"), 20);
    }

    #[test]
    fn trajectories_stay_normalized() {
        let c = h_ry(1.2);
        let m = NoiseModel::new()
            .with_all_gates(Channel::AmplitudeDamping(0.3))
            .unwrap();
        for s in 0..50 {
            let st = trajectory(&c, &m, &mut shot_rng(5, s, true)).unwrap();
            assert!((st.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}
