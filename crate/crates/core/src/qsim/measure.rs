use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::state::StateVector;
use crate::error::{Error, Result};
use crate::par;

/// Measurement histogram. Keys are bitstrings whose rightmost character is
/// the outcome of the first measured qubit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    counts: BTreeMap<String, u64>,
    shots: u64,
}

impl Counts {
    pub fn from_map(counts: BTreeMap<String, u64>) -> Result<Self> {
        let shots = counts.values().sum();
        if shots == 0 {
            return Err(Error::Contract(
                "counts must cover at least one shot".into(),
            ));
        }
        let mut lens = counts.keys().map(String::len);
        let first = lens.next().unwrap_or(0);
        if lens.any(|l| l != first)
            || counts
                .keys()
                .any(|k| !k.bytes().all(|b| b == b'0' || b == b'1'))
        {
            return Err(Error::Contract(
                "count keys must be equal-length bitstrings".into(),
            ));
        }
        Ok(Counts { counts, shots })
    }

    pub(crate) fn from_outcomes(outcomes: &[usize], width: usize) -> Self {
        let mut tally = vec![0u64; 1 << width];
        for &v in outcomes {
            tally[v] += 1;
        }
        let counts = tally
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (bitstring(v, width), c))
            .collect();
        Counts {
            counts,
            shots: outcomes.len() as u64,
        }
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn as_map(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }
}

/// `bitstring count` lines in lexicographic key order.
impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.counts {
            writeln!(f, "{k} {v}")?;
        }
        Ok(())
    }
}

pub(crate) fn bitstring(value: usize, width: usize) -> String {
    (0..width)
        .rev()
        .map(|i| if (value >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// RNG for one shot. Stream `2s` draws the readout, `2s + 1` the noise, so
/// the readout of shot `s` is the same with or without a noise model.
pub(crate) fn shot_rng(seed: u64, shot: u64, noise: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * shot + noise as u64);
    rng
}

/// Inverse-CDF draw from `probs` (which may sum to slightly off 1).
pub(crate) fn sample(probs: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap at the top: take the last nonzero entry.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

/// Draws `shots` Born samples of `qubits`. Each shot has its own RNG stream,
/// so results do not depend on the worker count.
pub fn measure_shots(
    state: &StateVector,
    qubits: &[usize],
    shots: u64,
    seed: u64,
) -> Result<Counts> {
    if shots == 0 {
        return Err(Error::Contract("shots must be at least 1".into()));
    }
    let probs = state.probabilities(qubits)?;
    let outcomes = par::map_range(shots as usize, |s| {
        sample(&probs, &mut shot_rng(seed, s as u64, false))
    });
    Ok(Counts::from_outcomes(&outcomes, qubits.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::GateOp;

    #[test]
    fn certain_outcome() {
        let s = StateVector::basis(1, 1).unwrap();
        let c = measure_shots(&s, &[0], 100, 7).unwrap();
        assert_eq!(c.get("1"), 100);
        assert_eq!(c.to_string(), "1 100\n");
    }

    #[test]
    fn zero_shots_rejected() {
        let s = StateVector::new(1).unwrap();
        assert!(matches!(
            measure_shots(&s, &[0], 0, 1),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn same_seed_same_counts() {
        let mut s = StateVector::new(2).unwrap();
        s.apply(&GateOp::h(0)).unwrap();
        s.apply(&GateOp::h(1)).unwrap();
        let a = measure_shots(&s, &[0, 1], 1000, 42).unwrap();
        let b = measure_shots(&s, &[0, 1], 1000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots(), 1000);
        assert_ne!(a, measure_shots(&s, &[0, 1], 1000, 43).unwrap());
    }

    #[test]
    fn bit_order() {
        // qubit 1 set, qubit 0 clear
        let s = StateVector::basis(2, 0b10).unwrap();
        let c = measure_shots(&s, &[0, 1], 3, 0).unwrap();
        assert_eq!(c.get("10"), 3);
        let c = measure_shots(&s, &[1, 0], 3, 0).unwrap();
        assert_eq!(c.get("01"), 3);
    }

    #[test]
    fn from_map_checks() {
        let mut m = BTreeMap::new();
        m.insert("0".to_string(), 2);
        m.insert("11".to_string(), 1);
        assert!(Counts::from_map(m).is_err());
        assert!(Counts::from_map(BTreeMap::new()).is_err());
    }
}
