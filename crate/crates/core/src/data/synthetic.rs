//! Deterministic stand-ins for real datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabeledImages;
use crate::error::{Error, Result};

pub const SIDE: usize = 28;

// Segment endpoints on a 1 x 2 glyph box, y pointing down.
const SEGMENTS: [[(f64, f64); 2]; 7] = [
    [(0.0, 0.0), (1.0, 0.0)], // a: top
    [(1.0, 0.0), (1.0, 1.0)], // b: upper right
    [(1.0, 1.0), (1.0, 2.0)], // c: lower right
    [(0.0, 2.0), (1.0, 2.0)], // d: bottom
    [(0.0, 1.0), (0.0, 2.0)], // e: lower left
    [(0.0, 0.0), (0.0, 1.0)], // f: upper left
    [(0.0, 1.0), (1.0, 1.0)], // g: middle
];

// Bit s set when segment s is lit.
const DIGIT_SEGMENTS: [u8; 10] = [
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110, 0b1101101, 0b1111101, 0b0000111,
    0b1111111, 0b1101111,
];

fn seg_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// One 28x28 glyph of `digit` with random placement, size, slant, stroke
/// width, brightness and background speckle.
pub fn render_digit(digit: u8, rng: &mut impl Rng) -> Vec<u8> {
    let mask = DIGIT_SEGMENTS[digit as usize % 10];
    let height = rng.random_range(15.0..20.0);
    let width = height * rng.random_range(0.45..0.6);
    let cx = 14.0 + rng.random_range(-2.5..2.5);
    let cy = 14.0 + rng.random_range(-2.0..2.0);
    let slant = rng.random_range(-0.2..0.2);
    let radius = rng.random_range(1.0..2.0);
    let ink = rng.random_range(170.0..255.0);
    let place = |(x, y): (f64, f64), jitter: (f64, f64)| {
        let gy = cy + (y / 2.0 - 0.5) * height + jitter.1;
        let gx = cx + (x - 0.5) * width + jitter.0 - slant * (gy - cy);
        (gx, gy)
    };
    let mut strokes = Vec::new();
    for (s, seg) in SEGMENTS.iter().enumerate() {
        if mask & (1 << s) != 0 {
            let mut j = || (rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7));
            strokes.push((place(seg[0], j()), place(seg[1], j())));
        }
    }
    let mut img = vec![0u8; SIDE * SIDE];
    for (i, px) in img.iter_mut().enumerate() {
        let p = ((i % SIDE) as f64 + 0.5, (i / SIDE) as f64 + 0.5);
        let d = strokes
            .iter()
            .map(|&(a, b)| seg_distance(p, a, b))
            .fold(f64::INFINITY, f64::min);
        let mut v = ink * (1.0 - (d - radius)).clamp(0.0, 1.0);
        if rng.random::<f64>() < 0.03 {
            v += rng.random_range(0.0..80.0);
        }
        *px = v.min(255.0) as u8;
    }
    img
}

/// `n` glyphs with labels drawn uniformly from `digits`.
pub fn synthetic_digits(n: usize, digits: &[u8], seed: u64) -> Result<LabeledImages> {
    if digits.is_empty() || digits.iter().any(|&d| d > 9) {
        return Err(Error::Config(format!(
            "digits must be a non-empty subset of 0..=9, got {digits:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let d = digits[rng.random_range(0..digits.len())];
        pixels.extend(render_digit(d, &mut rng));
        labels.push(d);
    }
    LabeledImages::new(pixels, labels, SIDE, SIDE)
}

/// Product states on `training_qubits` qubits as real amplitude vectors of
/// length `2^training_qubits`. Each qubit is `RY(θ)|0⟩`; the last
/// `trash_qubits` qubits (the high bits of the index) use `θ ∈ [0, max_trash_angle]`,
/// the others `θ ∈ [0, π]`.
pub fn qae_product_states(
    n: usize,
    training_qubits: usize,
    trash_qubits: usize,
    max_trash_angle: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if trash_qubits > training_qubits || training_qubits == 0 {
        return Err(Error::Config(format!(
            "{trash_qubits} trash qubits in a {training_qubits}-qubit register"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let mut v = vec![1.0];
            for q in 0..training_qubits {
                let hi = if q >= training_qubits - trash_qubits {
                    max_trash_angle
                } else {
                    std::f64::consts::PI
                };
                let theta: f64 = rng.random_range(0.0..=hi);
                let (s, c) = (theta / 2.0).sin_cos();
                let lo_half: Vec<f64> = v.iter().map(|x| x * c).collect();
                let hi_half: Vec<f64> = v.iter().map(|x| x * s).collect();
                v = lo_half.into_iter().chain(hi_half).collect();
            }
            v
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let a = synthetic_digits(20, &[0, 1], 5).unwrap();
        let b = synthetic_digits(20, &[0, 1], 5).unwrap();
        assert_eq!(a, b);
        assert!(a.labels().iter().all(|&l| l <= 1));
        assert_eq!(a.len(), 20);
        assert!(synthetic_digits(1, &[], 0).is_err());
        assert!(synthetic_digits(1, &[10], 0).is_err());
    }

    #[test]
    fn glyphs_have_ink() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 0..10 {
            let img = render_digit(d, &mut rng);
            let lit = img.iter().filter(|&&p| p > 128).count();
            assert!(lit > 20, "digit {d} has {lit} lit pixels");
        }
    }

    #[test]
    fn product_states_normalized() {
        let states = qae_product_states(5, 4, 2, 0.2, 3).unwrap();
        for s in &states {
            assert_eq!(s.len(), 16);
            assert!((s.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            // trash (bits 2, 3) close to |00⟩
            let p_trash0: f64 = s[..4].iter().map(|x| x * x).sum();
            assert!(p_trash0 > 0.98);
        }
    }
}
