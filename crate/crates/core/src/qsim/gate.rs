use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const IM: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    /// Identity; useful as a noise insertion point.
    I,
    H,
    X,
    Y,
    Z,
    RX,
    RY,
    RZ,
    /// Targets `[control, target]`.
    CNOT,
    CZ,
    /// Controlled phase `diag(1, 1, 1, e^{iθ})`, targets `[control, target]`.
    CR,
    CRX,
    CRY,
    CRZ,
    SWAP,
    /// Fredkin gate, targets `[control, a, b]`.
    CSWAP,
}

impl GateKind {
    pub const ALL: [GateKind; 16] = [
        GateKind::I,
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::CNOT,
        GateKind::CZ,
        GateKind::CR,
        GateKind::CRX,
        GateKind::CRY,
        GateKind::CRZ,
        GateKind::SWAP,
        GateKind::CSWAP,
    ];

    pub fn arity(self) -> usize {
        use GateKind::*;
        match self {
            I | H | X | Y | Z | RX | RY | RZ => 1,
            CNOT | CZ | CR | CRX | CRY | CRZ | SWAP => 2,
            CSWAP => 3,
        }
    }

    pub fn has_angle(self) -> bool {
        use GateKind::*;
        matches!(self, RX | RY | RZ | CR | CRX | CRY | CRZ)
    }

    pub fn name(self) -> &'static str {
        use GateKind::*;
        match self {
            I => "I",
            H => "H",
            X => "X",
            Y => "Y",
            Z => "Z",
            RX => "RX",
            RY => "RY",
            RZ => "RZ",
            CNOT => "CNOT",
            CZ => "CZ",
            CR => "CR",
            CRX => "CRX",
            CRY => "CRY",
            CRZ => "CRZ",
            SWAP => "SWAP",
            CSWAP => "CSWAP",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.to_ascii_uppercase();
        let alias = match upper.as_str() {
            "CX" => "CNOT",
            "FREDKIN" => "CSWAP",
            other => other,
        };
        GateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == alias)
            .ok_or_else(|| Error::Circuit(format!("unknown gate {s:?}")))
    }
}

/// One gate application. Controlled kinds list controls first.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    kind: GateKind,
    targets: Vec<usize>,
    angle: Option<f64>,
}

impl GateOp {
    pub fn new(kind: GateKind, targets: &[usize], angle: Option<f64>) -> Result<Self> {
        if targets.len() != kind.arity() {
            return Err(Error::Circuit(format!(
                "{kind} takes {} qubit(s), got {:?}",
                kind.arity(),
                targets
            )));
        }
        for (i, q) in targets.iter().enumerate() {
            if targets[..i].contains(q) {
                return Err(Error::Circuit(format!(
                    "{kind} targets must be distinct: {targets:?}"
                )));
            }
        }
        match (kind.has_angle(), angle) {
            (true, Some(a)) if a.is_finite() => {}
            (true, Some(a)) => {
                return Err(Error::Circuit(format!("{kind} angle {a} is not finite")))
            }
            (true, None) => return Err(Error::Circuit(format!("{kind} needs an angle"))),
            (false, Some(_)) => return Err(Error::Circuit(format!("{kind} takes no angle"))),
            (false, None) => {}
        }
        Ok(GateOp {
            kind,
            targets: targets.to_vec(),
            angle,
        })
    }

    fn fixed(kind: GateKind, targets: &[usize]) -> Self {
        GateOp::new(kind, targets, None).expect("valid fixed gate")
    }

    fn rot(kind: GateKind, targets: &[usize], theta: f64) -> Self {
        GateOp::new(kind, targets, Some(theta)).expect("valid rotation")
    }

    pub fn i(q: usize) -> Self {
        Self::fixed(GateKind::I, &[q])
    }
    pub fn h(q: usize) -> Self {
        Self::fixed(GateKind::H, &[q])
    }
    pub fn x(q: usize) -> Self {
        Self::fixed(GateKind::X, &[q])
    }
    pub fn y(q: usize) -> Self {
        Self::fixed(GateKind::Y, &[q])
    }
    pub fn z(q: usize) -> Self {
        Self::fixed(GateKind::Z, &[q])
    }
    pub fn rx(q: usize, theta: f64) -> Self {
        Self::rot(GateKind::RX, &[q], theta)
    }
    pub fn ry(q: usize, theta: f64) -> Self {
        Self::rot(GateKind::RY, &[q], theta)
    }
    pub fn rz(q: usize, theta: f64) -> Self {
        Self::rot(GateKind::RZ, &[q], theta)
    }
    /// Panics if `control == target`; use [`GateOp::new`] for checked input.
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::fixed(GateKind::CNOT, &[control, target])
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::fixed(GateKind::CZ, &[a, b])
    }
    pub fn cr(control: usize, target: usize, theta: f64) -> Self {
        Self::rot(GateKind::CR, &[control, target], theta)
    }
    pub fn crx(control: usize, target: usize, theta: f64) -> Self {
        Self::rot(GateKind::CRX, &[control, target], theta)
    }
    pub fn cry(control: usize, target: usize, theta: f64) -> Self {
        Self::rot(GateKind::CRY, &[control, target], theta)
    }
    pub fn crz(control: usize, target: usize, theta: f64) -> Self {
        Self::rot(GateKind::CRZ, &[control, target], theta)
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::fixed(GateKind::SWAP, &[a, b])
    }
    pub fn cswap(control: usize, a: usize, b: usize) -> Self {
        Self::fixed(GateKind::CSWAP, &[control, a, b])
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn angle(&self) -> Option<f64> {
        self.angle
    }

    pub fn max_qubit(&self) -> usize {
        *self.targets.iter().max().expect("gate has targets")
    }

    /// The adjoint gate.
    pub fn inverse(&self) -> Self {
        GateOp {
            kind: self.kind,
            targets: self.targets.clone(),
            angle: self.angle.map(|a| -a),
        }
    }

    /// Same gate with every qubit index passed through `map`.
    pub fn remap(&self, map: impl Fn(usize) -> usize) -> Result<Self> {
        let targets: Vec<usize> = self.targets.iter().map(|&q| map(q)).collect();
        GateOp::new(self.kind, &targets, self.angle)
    }

    /// Single-qubit matrix acting on the last target, conditioned on the
    /// other targets. `None` for the swap family.
    pub(crate) fn controlled_matrix(&self) -> Option<Matrix2> {
        use GateKind::*;
        let theta = self.angle.unwrap_or(0.0);
        Some(match self.kind {
            I => [[ONE, ZERO], [ZERO, ONE]],
            H => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                [[s, s], [s, -s]]
            }
            X | CNOT => [[ZERO, ONE], [ONE, ZERO]],
            Y => [[ZERO, -IM], [IM, ZERO]],
            Z | CZ => [[ONE, ZERO], [ZERO, -ONE]],
            RX | CRX => rx(theta),
            RY | CRY => ry(theta),
            RZ | CRZ => rz(theta),
            CR => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, theta)]],
            SWAP | CSWAP => return None,
        })
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs: Vec<String> = self.targets.iter().map(|q| q.to_string()).collect();
        write!(f, "{} {}", self.kind, qs.join(","))?;
        if let Some(a) = self.angle {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

pub(crate) fn rx(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
        [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
    ]
}

pub(crate) fn ry(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub(crate) fn rz(theta: f64) -> Matrix2 {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}
