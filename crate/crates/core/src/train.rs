//! Training driver for the reference models.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compat::{CompatLayer, ExternalCircuit};
use crate::data::{self, batch_generator, filter_digits, LabeledImages};
use crate::error::{Error, Result};
use crate::models::{Cnn, Hqcnn};
use crate::nn::{checkpoint, Module, Parameter};
use crate::optim::{softmax_cross_entropy, Adam, Optimizer};
use crate::qnn::{derive_seed, MachineType, QaeLayer, QaeSpec};
use crate::tensor::{no_grad, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Cnn,
    Hqcnn,
    Qae,
    CompatDemo,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(ModelKind::Cnn),
            "hqcnn" => Ok(ModelKind::Hqcnn),
            "qae" => Ok(ModelKind::Qae),
            "compat-demo" => Ok(ModelKind::CompatDemo),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected cnn, hqcnn, qae or compat-demo)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Hqcnn => "hqcnn",
            ModelKind::Qae => "qae",
            ModelKind::CompatDemo => "compat-demo",
        })
    }
}

/// One training run.
///
/// For `qae` an epoch is one optimizer step over the whole training set; for
/// `compat-demo` it is one step on the single angle.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub machine: MachineType,
    pub grad_scale: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    pub digits: Vec<u8>,
    /// Directory holding `train-*` and `t10k-*` IDX files. Synthetic glyphs
    /// are generated when absent.
    pub data_dir: Option<PathBuf>,
    /// Where `metrics.csv` and `checkpoint/` go.
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(model: ModelKind) -> Self {
        let base = RunConfig {
            model,
            epochs: 10,
            batch_size: 16,
            lr: 1e-3,
            seed: 0,
            machine: MachineType::ExactProb,
            grad_scale: 0.5,
            train_samples: 2000,
            test_samples: 500,
            digits: (0..10).collect(),
            data_dir: None,
            output_dir: None,
        };
        match model {
            ModelKind::Cnn => base,
            ModelKind::Hqcnn => RunConfig {
                batch_size: 1,
                train_samples: 200,
                test_samples: 100,
                digits: vec![0, 1],
                ..base
            },
            ModelKind::Qae => RunConfig {
                epochs: 50,
                lr: 0.05,
                train_samples: 16,
                test_samples: 16,
                batch_size: 16,
                ..base
            },
            ModelKind::CompatDemo => RunConfig {
                epochs: 200,
                lr: 0.05,
                batch_size: 1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch size must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if self.train_samples == 0 || self.test_samples == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if self.digits.is_empty() || self.digits.iter().any(|&d| d > 9) {
            return Err(Error::Config(format!("bad digit set {:?}", self.digits)));
        }
        if self.model == ModelKind::Hqcnn && self.digits.len() != 2 {
            return Err(Error::Config(
                "hqcnn is a two-class model; pass exactly two digits".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub metrics: Vec<EpochMetrics>,
    /// Test loss of the untrained model.
    pub initial_test_loss: f64,
    /// Test accuracy (or the model's score) of the untrained model.
    pub initial_test_acc: f64,
}

impl RunOutcome {
    pub fn last(&self) -> &EpochMetrics {
        self.metrics.last().expect("at least one epoch")
    }
}

pub const METRICS_HEADER: [&str; 5] = ["epoch", "train_loss", "train_acc", "test_loss", "test_acc"];

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            format!("{:?}", r.train_loss),
            format!("{:?}", r.train_acc),
            format!("{:?}", r.test_loss),
            format!("{:?}", r.test_acc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Train and test splits for an image model.
pub fn load_images(cfg: &RunConfig) -> Result<(LabeledImages, LabeledImages)> {
    let (train, test) = match &cfg.data_dir {
        Some(dir) => {
            let load = |stem: &str| {
                LabeledImages::load(
                    dir.join(format!("{stem}-images.idx3-ubyte")),
                    dir.join(format!("{stem}-labels.idx1-ubyte")),
                )
            };
            (
                filter_digits(&load("train")?, &cfg.digits),
                filter_digits(&load("t10k")?, &cfg.digits),
            )
        }
        None => (
            data::synthetic_digits(cfg.train_samples, &cfg.digits, derive_seed(cfg.seed, 1))?,
            data::synthetic_digits(cfg.test_samples, &cfg.digits, derive_seed(cfg.seed, 2))?,
        ),
    };
    let (train, test) = (train.take(cfg.train_samples), test.take(cfg.test_samples));
    if train.is_empty() || test.is_empty() {
        return Err(Error::Format("no samples left after filtering".into()));
    }
    Ok((train, test))
}

/// Runs `cfg`, writing metrics and a checkpoint when an output directory is set.
pub fn train(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let outcome = match cfg.model {
        ModelKind::Cnn => {
            let (train, test) = load_images(cfg)?;
            let model = Cnn::<f32>::new(&mut rng)?;
            let out = fit_classifier(&model, cfg, &train, &test, 10, |l| l)?;
            save(cfg, &model)?;
            out
        }
        ModelKind::Hqcnn => {
            let (train, test) = load_images(cfg)?;
            let model = Hqcnn::<f32>::new(cfg.machine.clone(), cfg.grad_scale, cfg.seed, &mut rng)?;
            let (a, b) = (cfg.digits[0], cfg.digits[1]);
            let out = fit_classifier(&model, cfg, &train, &test, 2, |l| {
                if l == b {
                    1
                } else if l == a {
                    0
                } else {
                    l
                }
            })?;
            save(cfg, &model)?;
            out
        }
        ModelKind::Qae => {
            let spec = QaeSpec::new(7, 2)?;
            let layer = QaeLayer::<f64>::new(spec, cfg.machine.clone(), cfg.seed, &mut rng)?;
            let out = fit_qae(&layer, cfg)?;
            save(cfg, &layer)?;
            out
        }
        ModelKind::CompatDemo => fit_compat_demo(cfg)?,
    };
    if let Some(dir) = &cfg.output_dir {
        fs::create_dir_all(dir)?;
        write_metrics_csv(dir.join("metrics.csv"), &outcome.metrics)?;
    }
    Ok(outcome)
}

fn save<T: crate::Element>(cfg: &RunConfig, model: &dyn Module<T>) -> Result<()> {
    if let Some(dir) = &cfg.output_dir {
        checkpoint::save_module(model, dir.join("checkpoint"))?;
    }
    Ok(())
}

fn argmax(row: &[f32]) -> usize {
    // first maximum wins
    row.iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0
}

/// Mean cross-entropy and accuracy over `data` without building a graph.
pub fn evaluate_classifier(
    model: &dyn Module<f32>,
    data: &LabeledImages,
    classes: usize,
    batch_size: usize,
    relabel: impl Fn(u8) -> u8,
) -> Result<(f64, f64)> {
    model.eval();
    let mapped = relabeled(data, &relabel)?;
    no_grad(|| {
        let (mut loss, mut correct) = (0.0, 0usize);
        for batch in batch_generator::<f32>(&mapped, batch_size, classes, false, 0)? {
            let b = batch?;
            let out = model.forward(&b.x)?;
            loss += softmax_cross_entropy(&b.y, &out)?.item()? as f64 * b.labels.len() as f64;
            let logits = out.to_vec();
            correct += b
                .labels
                .iter()
                .enumerate()
                .filter(|(i, &l)| argmax(&logits[i * classes..(i + 1) * classes]) == l)
                .count();
        }
        Ok((loss / data.len() as f64, correct as f64 / data.len() as f64))
    })
}

fn relabeled(data: &LabeledImages, relabel: &impl Fn(u8) -> u8) -> Result<LabeledImages> {
    let labels: Vec<u8> = data.labels().iter().map(|&l| relabel(l)).collect();
    let pixels: Vec<u8> = (0..data.len())
        .flat_map(|i| data.image(i).to_vec())
        .collect();
    LabeledImages::new(pixels, labels, data.rows(), data.cols())
}

/// Adam on softmax cross-entropy; one metrics row per epoch.
pub fn fit_classifier(
    model: &dyn Module<f32>,
    cfg: &RunConfig,
    train: &LabeledImages,
    test: &LabeledImages,
    classes: usize,
    relabel: impl Fn(u8) -> u8,
) -> Result<RunOutcome> {
    let train = relabeled(train, &relabel)?;
    let test = relabeled(test, &relabel)?;
    let eval_batch = cfg.batch_size.max(32);
    let (initial_test_loss, initial_test_acc) =
        evaluate_classifier(model, &test, classes, eval_batch, |l| l)?;
    let mut opt = Adam::new(model.parameters(), cfg.lr);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        model.train();
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in batch_generator::<f32>(
            &train,
            cfg.batch_size,
            classes,
            true,
            derive_seed(cfg.seed, 100 + epoch as u64),
        )? {
            let b = batch?;
            opt.zero_grad();
            let out = model.forward(&b.x)?;
            let loss = softmax_cross_entropy(&b.y, &out)?;
            loss_sum += loss.item()? as f64 * b.labels.len() as f64;
            let logits = out.to_vec();
            correct += b
                .labels
                .iter()
                .enumerate()
                .filter(|(i, &l)| argmax(&logits[i * classes..(i + 1) * classes]) == l)
                .count();
            loss.backward()?;
            opt.step();
        }
        let (test_loss, test_acc) = evaluate_classifier(model, &test, classes, eval_batch, |l| l)?;
        let row = EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            test_loss,
            test_acc,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.3}, test loss {:.4} acc {:.3}",
            row.train_loss,
            row.train_acc,
            row.test_loss,
            row.test_acc
        );
        metrics.push(row);
    }
    Ok(RunOutcome {
        metrics,
        initial_test_loss,
        initial_test_acc,
    })
}

/// Loss `1 − mean P(aux = 0)`; accuracy columns report the mean fidelity proxy.
pub fn fit_qae(layer: &QaeLayer<f64>, cfg: &RunConfig) -> Result<RunOutcome> {
    let spec = *layer.spec();
    let make = |n: usize, s: u64| -> Result<Tensor<f64>> {
        let states =
            data::qae_product_states(n, spec.training_qubits(), spec.trash_qubits(), 0.3, s)?;
        Tensor::new(states.concat(), &[n, spec.input_dim()], false)
    };
    let train = make(cfg.train_samples, derive_seed(cfg.seed, 1))?;
    let test = make(cfg.test_samples, derive_seed(cfg.seed, 2))?;
    let score = |x: &Tensor<f64>| -> Result<f64> { no_grad(|| layer.forward(x)?.mean().item()) };
    let initial = score(&test)?;
    let mut opt = Adam::new(layer.parameters(), cfg.lr);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        opt.zero_grad();
        let fid = layer.forward(&train)?.mean();
        let train_fid = fid.item()?;
        fid.neg().add_scalar(1.0).backward()?;
        opt.step();
        let test_fid = score(&test)?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss: 1.0 - train_fid,
            train_acc: train_fid,
            test_loss: 1.0 - test_fid,
            test_acc: test_fid,
        });
        log::info!("step {epoch}: train fidelity {train_fid:.4}, test fidelity {test_fid:.4}");
    }
    Ok(RunOutcome {
        metrics,
        initial_test_loss: 1.0 - initial,
        initial_test_acc: initial,
    })
}

/// Fits one angle through the black-box `(1 + sin θ) / 2` toward 1.
/// Loss is `1 − y`; the accuracy columns hold `y`. A squared loss is quartic
/// in `θ − π/2` near the optimum and Adam stalls short of it.
pub fn fit_compat_demo(cfg: &RunConfig) -> Result<RunOutcome> {
    let ext = ExternalCircuit::new(1, "sin stand-in", |x| Ok((1.0 + x[0].sin()) / 2.0))?;
    let layer = CompatLayer::new(ext).with_grad_scale(cfg.grad_scale);
    let theta = Parameter::<f64>::new(vec![0.0], &[1, 1])?;
    let initial = no_grad(|| {
        <CompatLayer as Module<f64>>::forward(&layer, theta.tensor()).and_then(|y| y.item())
    })?;
    let mut opt = Adam::new(vec![theta.clone()], cfg.lr);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        opt.zero_grad();
        let y = <CompatLayer as Module<f64>>::forward(&layer, theta.tensor())?;
        let loss = y.neg().add_scalar(1.0).sum();
        let (l, v) = (loss.item()?, y.item()?);
        loss.backward()?;
        opt.step();
        metrics.push(EpochMetrics {
            epoch,
            train_loss: l,
            train_acc: v,
            test_loss: l,
            test_acc: v,
        });
    }
    log::info!("compat demo: θ = {}", theta.item()?);
    Ok(RunOutcome {
        metrics,
        initial_test_loss: 1.0 - initial,
        initial_test_acc: initial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names() {
        assert_eq!("hqcnn".parse::<ModelKind>().unwrap(), ModelKind::Hqcnn);
        assert!(matches!(
            "resnet".parse::<ModelKind>(),
            Err(Error::Config(_))
        ));
        for m in [
            ModelKind::Cnn,
            ModelKind::Hqcnn,
            ModelKind::Qae,
            ModelKind::CompatDemo,
        ] {
            assert_eq!(m.to_string().parse::<ModelKind>().unwrap(), m);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new(ModelKind::Cnn);
        assert!(c.validate().is_ok());
        c.epochs = 0;
        assert!(c.validate().is_err());
        let mut h = RunConfig::new(ModelKind::Hqcnn);
        h.digits = vec![0, 1, 2];
        assert!(matches!(h.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn cnn_smoke_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            epochs: 1,
            train_samples: 16,
            test_samples: 8,
            output_dir: Some(dir.path().to_path_buf()),
            ..RunConfig::new(ModelKind::Cnn)
        };
        let out = train(&cfg).unwrap();
        assert_eq!(out.metrics.len(), 1);
        assert!(out.last().train_loss.is_finite());
        let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert!(text.starts_with("epoch,train_loss,train_acc,test_loss,test_acc\n"));
        assert!(dir
            .path()
            .join("checkpoint")
            .join(checkpoint::MANIFEST)
            .exists());
    }

    #[test]
    fn missing_data_dir_is_a_data_error() {
        let cfg = RunConfig {
            data_dir: Some(PathBuf::from("/nonexistent/hyqnet")),
            ..RunConfig::new(ModelKind::Hqcnn)
        };
        assert!(train(&cfg).unwrap_err().is_data_error());
    }

    #[test]
    fn deterministic_metrics() {
        let cfg = RunConfig {
            epochs: 1,
            train_samples: 8,
            test_samples: 4,
            ..RunConfig::new(ModelKind::Hqcnn)
        };
        assert_eq!(train(&cfg).unwrap(), train(&cfg).unwrap());
    }
}
