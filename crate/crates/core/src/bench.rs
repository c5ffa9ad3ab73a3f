//! Wall-clock breakdown of hybrid-network training and testing.

use std::fmt::Write as _;
use std::io;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{batch_generator, synthetic_digits, LabeledImages};
use crate::error::{Error, Result};
use crate::models::Hqcnn;
use crate::nn::Module;
use crate::optim::{softmax_cross_entropy, Adam, Optimizer};
use crate::par;
use crate::qnn::{derive_seed, MachineType};
use crate::tensor::no_grad;

/// Row labels, in report order.
pub const TIMING_LABELS: [&str; 7] = [
    "Total training duration",
    "Single data training duration",
    "Quantum node BP duration",
    "Quantum node FP duration",
    "Network FP duration",
    "Single data testing duration",
    "Dataset testing duration",
];

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub label: &'static str,
    pub mean_s: f64,
    pub stddev_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub runs: usize,
    pub threads: usize,
    pub train_samples: usize,
    pub test_samples: usize,
}

impl TimingReport {
    pub fn get(&self, label: &str) -> Option<&TimingRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "runs {}, threads {}, {} train / {} test samples (seconds)",
            self.runs, self.threads, self.train_samples, self.test_samples
        );
        let _ = writeln!(s, "{:<32} {:>12} {:>12}", "category", "mean", "stddev");
        for r in &self.rows {
            let _ = writeln!(s, "{:<32} {:>12.6} {:>12.6}", r.label, r.mean_s, r.stddev_s);
        }
        s
    }

    /// Columns `category,mean_s,stddev_s,runs,threads`.
    pub fn write_csv(&self, out: impl io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["category", "mean_s", "stddev_s", "runs", "threads"])?;
        for r in &self.rows {
            w.write_record([
                r.label.to_string(),
                format!("{:?}", r.mean_s),
                format!("{:?}", r.stddev_s),
                self.runs.to_string(),
                self.threads.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    /// Timed repetitions; at least 3.
    pub runs: usize,
    /// Untimed repetitions before the first timed one.
    pub warmup: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub seed: u64,
    pub machine: MachineType,
    pub lr: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs: 3,
            warmup: 1,
            train_samples: 20,
            test_samples: 10,
            seed: 0,
            machine: MachineType::ExactProb,
            lr: 1e-3,
        }
    }
}

/// Seven durations in seconds, ordered like [`TIMING_LABELS`].
fn one_run(cfg: &BenchConfig, train: &LabeledImages, test: &LabeledImages) -> Result<[f64; 7]> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Hqcnn::<f32>::new(cfg.machine.clone(), 0.5, cfg.seed, &mut rng)?;
    let mut opt = Adam::new(model.parameters(), cfg.lr);
    model.train();
    let mut net_fp = Duration::ZERO;
    let t_train = Instant::now();
    for batch in batch_generator::<f32>(train, 1, 2, true, derive_seed(cfg.seed, 7))? {
        let b = batch?;
        opt.zero_grad();
        let t0 = Instant::now();
        let out = model.forward(&b.x)?;
        net_fp += t0.elapsed();
        let loss = softmax_cross_entropy(&b.y, &out)?;
        loss.backward()?;
        opt.step();
    }
    let total_train = t_train.elapsed();
    let q = model.hybrid.timing();

    model.eval();
    let t_test = Instant::now();
    no_grad(|| -> Result<()> {
        for batch in batch_generator::<f32>(test, 1, 2, false, 0)? {
            model.forward(&batch?.x)?;
        }
        Ok(())
    })?;
    let total_test = t_test.elapsed();

    let (n, m) = (train.len() as f64, test.len() as f64);
    Ok([
        total_train.as_secs_f64(),
        total_train.as_secs_f64() / n,
        q.backward.as_secs_f64() / n,
        q.forward.as_secs_f64() / n,
        net_fp.as_secs_f64() / n,
        total_test.as_secs_f64() / m,
        total_test.as_secs_f64(),
    ])
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Times the hybrid network on synthetic 0/1 glyphs, one sample per step.
pub fn bench_hqcnn(cfg: &BenchConfig) -> Result<TimingReport> {
    if cfg.runs < 3 {
        return Err(Error::Config(format!(
            "bench needs at least 3 timed runs, got {}",
            cfg.runs
        )));
    }
    if cfg.train_samples == 0 || cfg.test_samples == 0 {
        return Err(Error::Config("bench sample counts must be positive".into()));
    }
    let train = synthetic_digits(cfg.train_samples, &[0, 1], derive_seed(cfg.seed, 1))?;
    let test = synthetic_digits(cfg.test_samples, &[0, 1], derive_seed(cfg.seed, 2))?;
    for _ in 0..cfg.warmup {
        one_run(cfg, &train, &test)?;
    }
    let samples = (0..cfg.runs)
        .map(|_| one_run(cfg, &train, &test))
        .collect::<Result<Vec<_>>>()?;
    let rows = TIMING_LABELS
        .iter()
        .enumerate()
        .map(|(k, &label)| {
            let xs: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let (mean_s, stddev_s) = mean_std(&xs);
            TimingRow {
                label,
                mean_s,
                stddev_s,
            }
        })
        .collect();
    Ok(TimingReport {
        rows,
        runs: cfg.runs,
        threads: par::current_threads(),
        train_samples: cfg.train_samples,
        test_samples: cfg.test_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_runs() {
        let cfg = BenchConfig {
            runs: 2,
            ..BenchConfig::default()
        };
        assert!(matches!(bench_hqcnn(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn report_shape() {
        let cfg = BenchConfig {
            warmup: 0,
            train_samples: 2,
            test_samples: 2,
            ..BenchConfig::default()
        };
        let r = bench_hqcnn(&cfg).unwrap();
        let labels: Vec<&str> = r.rows.iter().map(|r| r.label).collect();
        assert_eq!(labels, TIMING_LABELS);
        assert!(r.rows.iter().all(|r| r.mean_s >= 0.0 && r.stddev_s >= 0.0));
        let single = r.get("Single data training duration").unwrap().mean_s;
        assert!(r.get("Quantum node FP duration").unwrap().mean_s <= single);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("category,mean_s,stddev_s,runs,threads\n"));
        assert_eq!(csv.lines().count(), 8);
    }
}
