use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyqnet_core::bench::{bench_hqcnn, BenchConfig};
use hyqnet_core::data::synthetic_digits;
use hyqnet_core::qnn::{derive_seed, MachineType};
use hyqnet_core::qsim::{measure_shots, simulate, simulate_noisy, Circuit, NoiseModel};
use hyqnet_core::train::{train, ModelKind, RunConfig};
use hyqnet_core::Error;

#[derive(Parser)]
#[command(
    name = "hyqnet",
    version,
    about = "Hybrid quantum-classical training, benchmarking and simulation"
)]
struct Cli {
    /// Worker threads for data-parallel loops (default: all cores; bench: 1).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one of the reference models.
    Train(TrainArgs),
    /// Time the hybrid network and print a timing report.
    Bench(BenchArgs),
    /// Convert a metrics CSV into long format.
    Plot {
        input: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write small synthetic IDX files.
    GenSynthetic(GenArgs),
    /// Circuit simulation.
    Qsim {
        #[command(subcommand)]
        command: QsimCommand,
    },
}

#[derive(Subcommand)]
enum QsimCommand {
    /// Simulate a circuit file and print measurement counts.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 1024)]
        shots: u64,
        #[arg(long, env = "HYQNET_SEED", default_value_t = 0)]
        seed: u64,
        /// Noise model file; trajectories are sampled per shot.
        #[arg(long)]
        noise: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Machine {
    Exact,
    Shots,
    Noisy,
}

#[derive(Args)]
struct MachineArgs {
    #[arg(long, value_enum, default_value = "exact")]
    machine: Machine,
    /// Shots per circuit evaluation for `shots` and `noisy` machines.
    #[arg(long, default_value_t = 1000)]
    shots: u64,
    /// Noise model file for the `noisy` machine.
    #[arg(long)]
    noise: Option<PathBuf>,
}

impl MachineArgs {
    fn resolve(&self) -> Result<MachineType, Error> {
        if self.shots == 0 {
            return Err(Error::Config("--shots must be positive".into()));
        }
        match self.machine {
            Machine::Exact => Ok(MachineType::ExactProb),
            Machine::Shots => Ok(MachineType::Shots(self.shots)),
            Machine::Noisy => {
                let path = self
                    .noise
                    .as_ref()
                    .ok_or_else(|| Error::Config("--machine noisy needs --noise".into()))?;
                let noise = NoiseModel::parse(&fs::read_to_string(path)?)?;
                Ok(MachineType::Noisy {
                    noise,
                    shots: self.shots,
                })
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, env = "HYQNET_SEED")]
    seed: Option<u64>,
    #[command(flatten)]
    machine: MachineArgs,
    #[arg(long)]
    grad_scale: Option<f64>,
    #[arg(long)]
    train_samples: Option<usize>,
    #[arg(long)]
    test_samples: Option<usize>,
    /// Comma-separated digit classes, e.g. `0,1`.
    #[arg(long, value_delimiter = ',')]
    digits: Option<Vec<u8>>,
    /// Directory with `train-*` and `t10k-*` IDX files; synthetic data otherwise.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl TrainArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let d = RunConfig::new(self.model.parse::<ModelKind>()?);
        Ok(RunConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            lr: self.lr.unwrap_or(d.lr),
            seed: self.seed.unwrap_or(d.seed),
            machine: self.machine.resolve()?,
            grad_scale: self.grad_scale.unwrap_or(d.grad_scale),
            train_samples: self.train_samples.unwrap_or(d.train_samples),
            test_samples: self.test_samples.unwrap_or(d.test_samples),
            digits: self.digits.clone().unwrap_or(d.digits.clone()),
            data_dir: self.data_dir.clone(),
            output_dir: self.output_dir.clone(),
            ..d
        })
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 20)]
    train_samples: usize,
    #[arg(long, default_value_t = 10)]
    test_samples: usize,
    #[arg(long, env = "HYQNET_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[command(flatten)]
    machine: MachineArgs,
    /// Also write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    train: usize,
    #[arg(long, default_value_t = 16)]
    test: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    digits: Vec<u8>,
    #[arg(long, env = "HYQNET_SEED", default_value_t = 0)]
    seed: u64,
}

fn run(cli: Cli) -> Result<(), Error> {
    let threads = match (&cli.command, cli.threads) {
        (_, Some(0)) => return Err(Error::Config("--threads must be positive".into())),
        (_, Some(t)) => Some(t),
        (Command::Bench(_), None) => Some(1),
        _ => None,
    };
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }

    match cli.command {
        Command::Train(args) => {
            let cfg = args.config()?;
            let out = train(&cfg)?;
            println!("epoch,train_loss,train_acc,test_loss,test_acc");
            for m in &out.metrics {
                println!(
                    "{},{},{},{},{}",
                    m.epoch, m.train_loss, m.train_acc, m.test_loss, m.test_acc
                );
            }
        }
        Command::Bench(args) => {
            let cfg = BenchConfig {
                runs: args.runs,
                warmup: args.warmup,
                train_samples: args.train_samples,
                test_samples: args.test_samples,
                seed: args.seed,
                machine: args.machine.resolve()?,
                lr: args.lr,
            };
            let report = bench_hqcnn(&cfg)?;
            print!("{}", report.to_text());
            if let Some(path) = args.csv {
                report.write_csv(fs::File::create(path)?)?;
            }
        }
        Command::Plot { input, output } => {
            let text = hyqnet_core::plot::plot_emit(&fs::read_to_string(input)?)?;
            match output {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        Command::GenSynthetic(args) => {
            synthetic_digits(args.train, &args.digits, derive_seed(args.seed, 1))?
                .save(&args.out, "train")?;
            synthetic_digits(args.test, &args.digits, derive_seed(args.seed, 2))?
                .save(&args.out, "t10k")?;
            log::info!(
                "wrote {} train and {} test images to {}",
                args.train,
                args.test,
                args.out.display()
            );
        }
        Command::Qsim {
            command:
                QsimCommand::Run {
                    file,
                    shots,
                    seed,
                    noise,
                },
        } => {
            let circuit = Circuit::parse(&fs::read_to_string(file)?)?;
            let counts = match noise {
                Some(path) => simulate_noisy(
                    &circuit,
                    &NoiseModel::parse(&fs::read_to_string(path)?)?,
                    shots,
                    seed,
                )?,
                None => {
                    measure_shots(&simulate(&circuit)?, circuit.measured_qubits(), shots, seed)?
                }
            };
            print!("{counts}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match &e {
                Error::Config(_) => 2,
                e if e.is_data_error() => 3,
                _ => 1,
            })
        }
    }
}
