//! Command-line front end behind the `qcnn` binary.
//!
//! Exit codes: 0 success, 2 input/IO or configuration error, 3 checkpoint
//! mismatch (architecture digest, classes or model kind), 4 verification
//! failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::architecture::build;
use crate::baseline::{initial_params, make_baseline_dataset, BaselineNet, BaselineSample, LAYER_PARAMS};
use crate::circuit::{CircuitBuilder, QubitRoles, Stage};
use crate::config::{ModelKind, RunConfig, Settings, DATA_DIR_ENV};
use crate::data::{load_idx, make_dataset};
use crate::encoding::{EncodedImage, IMAGE_LEN, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::persist::{
    load_checkpoint, read_json, save_checkpoint, write_json, write_metrics, write_text, Checkpoint,
    DatasetCounts, EvaluationRecord, RunManifest, CHECKPOINT_FILE, CHECKPOINT_FORMAT, CONFIG_FILE,
    EVALUATION_FILE, MANIFEST_FILE, RESAMPLING,
};
use crate::statevector::Axis;
use crate::training::{
    evaluate_model, fit, forward, init_params, parameter_shift_gradient_with_shift,
    softmax_cross_entropy, EpochMetrics, Evaluation, QuantumModel, TrainState, Trainable,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Parameter-shift vs finite-difference tolerance for the QCNN.
pub const QCNN_GRAD_TOL: f64 = 1e-6;
/// Analytic tolerance for the single-rotation toy circuit.
pub const TOY_GRAD_TOL: f64 = 1e-10;
/// Backprop vs finite-difference tolerance for the classical baseline.
pub const BASELINE_GRAD_TOL: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-4;
const BASELINE_FD_STEP: f64 = 1e-6;
const CORRUPT_SHIFT: f64 = std::f64::consts::FRAC_PI_3;

#[derive(Debug, Parser)]
#[command(name = "qcnn", version, about = "Train and inspect an exact statevector QCNN classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, metrics and manifest.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test set.
    Eval(EvalArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the circuit listing, parameter count and qubit roles.
    Inspect(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML file with any of the flag settings, or a run_manifest.json;
    /// flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate [default: <out>/checkpoint.json].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Number of random (parameters, image) pairs.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    /// Check the single-rotation toy circuit against its closed form.
    #[arg(long)]
    pub toy: bool,
    #[arg(long, hide = true)]
    pub corrupt_shift: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Mismatch(_) => EXIT_MISMATCH,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Train(args) => {
            cmd_train(&resolve(&args, None)?)?;
            Ok(EXIT_OK)
        }
        Command::Eval(args) => cmd_eval(&args).map(|_| EXIT_OK),
        Command::Gradcheck(args) => {
            let report = cmd_gradcheck(&args)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Inspect(args) => {
            print!("{}", cmd_inspect(&resolve(&args, None)?)?);
            Ok(EXIT_OK)
        }
    }
}

fn env_data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

/// Flags over the `--config` file over `fallback` over defaults. A `.json`
/// config is read as a run manifest.
pub fn resolve(args: &RunArgs, fallback: Option<Settings>) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            read_json::<RunManifest>(path)?.config.to_settings()
        }
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let merged = args
        .settings
        .clone()
        .or(file)
        .or(fallback.unwrap_or_default());
    RunConfig::resolve(merged, env_data_dir())
}

enum Model {
    Quantum(QuantumModel),
    Classical(BaselineNet),
}

impl Model {
    fn build(cfg: &RunConfig) -> Result<Model> {
        Ok(match cfg.model {
            ModelKind::Qcnn => {
                let circuit = build(cfg.arch, &cfg.arch_config())?;
                Model::Quantum(if cfg.decomposed {
                    QuantumModel::decomposed(circuit)?
                } else {
                    QuantumModel::new(circuit)?
                })
            }
            ModelKind::Baseline => Model::Classical(BaselineNet {
                pooling: cfg.pooling,
            }),
        })
    }

    fn arch_digest(&self) -> String {
        match self {
            Model::Quantum(m) => m.circuit().arch_digest().to_string(),
            Model::Classical(n) => n.arch_digest(),
        }
    }

    fn num_params(&self) -> usize {
        match self {
            Model::Quantum(m) => m.num_params(),
            Model::Classical(n) => n.num_params(),
        }
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub manifest: RunManifest,
}

fn counts(train: &[usize], test: &[usize]) -> DatasetCounts {
    let mut per_class = std::collections::BTreeMap::new();
    for c in 0..NUM_CLASSES {
        per_class.insert(
            c,
            [
                train.iter().filter(|&&l| l == c).count(),
                test.iter().filter(|&&l| l == c).count(),
            ],
        );
    }
    DatasetCounts {
        train: train.len(),
        test: test.len(),
        per_class,
    }
}

fn print_epoch(m: &EpochMetrics) {
    println!(
        "epoch {:>3}  train_loss {:.6}  train_acc {:.4}  test_acc {:.4}",
        m.epoch, m.train_loss, m.train_acc, m.test_acc
    );
}

fn fit_and_count<M: Trainable>(
    model: &M,
    train: &[M::Sample],
    test: &[M::Sample],
    cfg: &RunConfig,
    initial: Vec<f64>,
) -> Result<(TrainState, DatasetCounts)> {
    let state = fit(model, train, test, &cfg.hyper, initial, print_epoch)?;
    let labels = |d: &[M::Sample]| d.iter().map(|s| model.label(s)).collect::<Vec<_>>();
    Ok((state, counts(&labels(train), &labels(test))))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let train_raw = load_idx(&cfg.images, &cfg.labels)?;
    let test_raw = load_idx(&cfg.test_images, &cfg.test_labels)?;
    let model = Model::build(cfg)?;
    let (state, datasets) = match &model {
        Model::Quantum(m) => {
            let train = make_dataset(&train_raw, &cfg.classes, cfg.limit)?;
            let test = make_dataset(&test_raw, &cfg.classes, cfg.test_limit)?;
            let init = init_params(m.num_params(), cfg.hyper.seed);
            fit_and_count(m, &train, &test, cfg, init)?
        }
        Model::Classical(net) => {
            let train = make_baseline_dataset(&train_raw, &cfg.classes, cfg.limit)?;
            let test = make_baseline_dataset(&test_raw, &cfg.classes, cfg.test_limit)?;
            let init = initial_params(cfg.hyper.seed);
            fit_and_count(net, &train, &test, cfg, init)?
        }
    };

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model: cfg.model,
        arch_digest: model.arch_digest(),
        parameter_count: model.num_params(),
        config: cfg.clone(),
        datasets,
        preprocessing: match cfg.model {
            ModelKind::Qcnn => RESAMPLING.to_string(),
            ModelKind::Baseline => "28x28, pixels / 255".to_string(),
        },
    };
    let ckpt = Checkpoint {
        format: CHECKPOINT_FORMAT,
        model: cfg.model,
        arch_digest: manifest.arch_digest.clone(),
        parameter_count: manifest.parameter_count,
        classes: cfg.classes,
        config: cfg.clone(),
        state: state.clone(),
    };
    save_checkpoint(&cfg.out.join(CHECKPOINT_FILE), &ckpt)?;
    write_metrics(&cfg.out, &state.history)?;
    write_json(&cfg.out.join(MANIFEST_FILE), &manifest)?;
    write_text(&cfg.out.join(CONFIG_FILE), &cfg.to_settings().to_toml_string()?)?;
    println!(
        "wrote {} ({} parameters, arch {})",
        cfg.out.display(),
        manifest.parameter_count,
        &manifest.arch_digest[..12]
    );
    Ok(TrainOutcome { state, manifest })
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvaluationRecord> {
    let ckpt_path = match &args.checkpoint {
        Some(p) => p.clone(),
        None => resolve(&args.run, None)?.out.join(CHECKPOINT_FILE),
    };
    let ckpt = load_checkpoint(&ckpt_path)?;
    let cfg = resolve(&args.run, Some(ckpt.config.to_settings()))?;
    if cfg.model != ckpt.model {
        return Err(Error::Mismatch(format!(
            "checkpoint holds a {:?} model, configuration asks for {:?}",
            ckpt.model, cfg.model
        )));
    }
    if cfg.classes != ckpt.classes {
        return Err(Error::Mismatch(format!(
            "checkpoint was trained on classes {}, configuration has {}",
            ckpt.classes, cfg.classes
        )));
    }
    let model = Model::build(&cfg)?;
    let digest = model.arch_digest();
    if digest != ckpt.arch_digest || model.num_params() != ckpt.parameter_count {
        return Err(Error::Mismatch(format!(
            "architecture digest {digest} does not match checkpoint digest {}",
            ckpt.arch_digest
        )));
    }

    let test_raw = load_idx(&cfg.test_images, &cfg.test_labels)?;
    let theta = &ckpt.state.theta;
    let workers = cfg.hyper.workers;
    let (evaluation, n) = match &model {
        Model::Quantum(m) => {
            let test = make_dataset(&test_raw, &cfg.classes, cfg.test_limit)?;
            (evaluate_model(m, theta, &test, workers)?, test.len())
        }
        Model::Classical(net) => {
            let test: Vec<BaselineSample> =
                make_baseline_dataset(&test_raw, &cfg.classes, cfg.test_limit)?;
            (evaluate_model(net, theta, &test, workers)?, test.len())
        }
    };
    print_evaluation(&evaluation, &cfg);
    let record = EvaluationRecord {
        model: cfg.model,
        arch_digest: digest,
        classes: cfg.classes,
        test_images: cfg.test_images.display().to_string(),
        num_images: n,
        evaluation,
    };
    write_json(&cfg.out.join(EVALUATION_FILE), &record)?;
    Ok(record)
}

fn print_evaluation(e: &Evaluation, cfg: &RunConfig) {
    println!("accuracy: {}", e.accuracy);
    println!("confusion (rows = true class, columns = predicted):");
    for (i, row) in e.confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>6}")).collect();
        println!("  {} |{}", cfg.classes.classes()[i], cells.join(""));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn random_image(rng: &mut ChaCha8Rng) -> Result<EncodedImage> {
    let px: Vec<f64> = (0..IMAGE_LEN).map(|_| rng.gen::<f64>()).collect();
    EncodedImage::from_pixels(&px, rng.gen_range(0..NUM_CLASSES), 0)
}

/// `RY(θ)` on qubit 0 of the 8-qubit data register, read out on qubit 0.
pub fn toy_circuit() -> Result<crate::circuit::ParamCircuit> {
    let mut b = CircuitBuilder::new(8);
    b.stage(Stage::Readout, 0);
    let p = b.new_param();
    b.rotation(Axis::Y, 0, p);
    b.finish(QubitRoles {
        readout: vec![0],
        ..Default::default()
    })
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<GradcheckReport> {
    let cfg = resolve(&args.run, None)?;
    if args.samples == 0 {
        return Err(Error::Config("--samples must be ≥ 1".into()));
    }
    let shift = if args.corrupt_shift {
        CORRUPT_SHIFT
    } else {
        std::f64::consts::FRAC_PI_2
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.hyper.seed);
    let mut worst = 0.0f64;

    let tolerance = if args.toy {
        let circuit = toy_circuit()?;
        let mut e0 = vec![0.0; IMAGE_LEN];
        e0[0] = 1.0;
        let img = EncodedImage::from_pixels(&e0, 0, 0)?;
        for _ in 0..args.samples {
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let g = parameter_shift_gradient_with_shift(&circuit, &[theta], &img, &[1.0], shift)?;
            worst = worst.max((g[0] - theta.sin() / 2.0).abs());
        }
        TOY_GRAD_TOL
    } else {
        match Model::build(&cfg)? {
            Model::Quantum(m) => {
                for _ in 0..args.samples {
                    let theta: Vec<f64> = (0..m.num_params())
                        .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                        .collect();
                    let img = random_image(&mut rng)?;
                    let logits = forward(m.circuit(), &theta, &img)?;
                    let (_, dl) = softmax_cross_entropy(&logits, img.label())?;
                    let ps = parameter_shift_gradient_with_shift(
                        m.shift_circuit(),
                        &theta,
                        &img,
                        &dl,
                        shift,
                    )?;
                    let loss = |t: &[f64]| -> Result<f64> {
                        let l = forward(m.circuit(), t, &img)?;
                        Ok(softmax_cross_entropy(&l, img.label())?.0)
                    };
                    for k in 0..theta.len() {
                        let fd = central_difference(&theta, k, FD_STEP, &loss)?;
                        worst = worst.max((fd - ps[k]).abs());
                    }
                }
                QCNN_GRAD_TOL
            }
            Model::Classical(net) => {
                for _ in 0..args.samples {
                    let theta: Vec<f64> =
                        (0..net.num_params()).map(|_| rng.gen_range(-0.5..0.5)).collect();
                    let sample = BaselineSample {
                        pixels: (0..crate::data::RAW_LEN).map(|_| rng.gen()).collect(),
                        label: rng.gen_range(0..NUM_CLASSES),
                        source_id: 0,
                    };
                    let analytic = net.loss_and_grad(&theta, &sample)?.grad;
                    let loss = |t: &[f64]| -> Result<f64> {
                        let l = net.logits(t, &sample)?;
                        Ok(softmax_cross_entropy(&l, sample.label)?.0)
                    };
                    for k in 0..theta.len() {
                        let fd = central_difference(&theta, k, BASELINE_FD_STEP, &loss)?;
                        worst = worst.max((fd - analytic[k]).abs());
                    }
                }
                BASELINE_GRAD_TOL
            }
        }
    };
    let passed = worst <= tolerance;
    println!("max deviation: {worst:.3e} (tolerance {tolerance:.0e})");
    println!("{}", if passed { "PASS" } else { "FAIL" });
    Ok(GradcheckReport {
        max_deviation: worst,
        tolerance,
        passed,
    })
}

fn central_difference(
    theta: &[f64],
    k: usize,
    h: f64,
    f: &impl Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let mut t = theta.to_vec();
    t[k] = theta[k] + h;
    let plus = f(&t)?;
    t[k] = theta[k] - h;
    let minus = f(&t)?;
    Ok((plus - minus) / (2.0 * h))
}

pub fn cmd_inspect(cfg: &RunConfig) -> Result<String> {
    let mut out = String::new();
    match Model::build(cfg)? {
        Model::Quantum(m) => {
            let c = m.circuit();
            out.push_str(&m.simulation_circuit().dump());
            out.push_str(&format!("parameters: {}\n", c.parameter_count()));
            let list = |qs: &[usize]| {
                qs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!(
                "roles: data={} ancilla={} virtual={} readout={}\n",
                list(c.data_qubits()),
                list(c.ancilla_qubits()),
                c.virtual_qubit().map_or("-".into(), |q| q.to_string()),
                list(c.readout())
            ));
            out.push_str(&format!("arch_digest: {}\n", c.arch_digest()));
        }
        Model::Classical(net) => {
            out.push_str(&net.describe());
            out.push('\n');
            for (name, n) in LAYER_PARAMS {
                out.push_str(&format!("{name} {n}\n"));
            }
            out.push_str(&format!("parameters: {}\n", net.num_params()));
            out.push_str(&format!("arch_digest: {}\n", net.arch_digest()));
        }
    }
    Ok(out)
}
