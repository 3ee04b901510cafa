//! `crisp` command-line tool.
//!
//! Exit codes: 0 on success, 2 for usage, configuration and input errors,
//! 3 when the data rules out the request (for example a label with no
//! observed positive).

mod config;
mod report;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use crisp::data::{
    mask_single_positive, parse_dataset, parse_single_positive, scan_dimensions, split, SplitSpec,
};
use crisp::prior::estimate_all_priors;
use crisp::synth::{generate, priors_of_rows, SynthConfig};
use crisp::trainer::{evaluate, train};
use crisp::{Architecture, Classifier, CrispError, EstimatorConfig};

use config::RunConfig;
use report::{Inputs, MaskSummary, PriorDiagnostics, RunReport, Timings, Truth};

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<CrispError> for Failure {
    fn from(e: CrispError) -> Self {
        let message = match &e {
            // Labels are 1-based on disk.
            CrispError::NoObservedPositives { label } => {
                format!("no observed positives for label {}", label + 1)
            }
            _ => e.to_string(),
        };
        Self {
            code: if e.is_data_condition() { 3 } else { 2 },
            message,
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "crisp", version, about = "Single-positive multi-label learning with class-prior estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with known class priors.
    Synth(SynthArgs),
    /// Split a dataset into train/val/test files.
    Split(SplitArgs),
    /// Keep one random positive label per instance.
    Mask(MaskArgs),
    /// Warm up, then alternate prior estimation and risk minimisation.
    Train(TrainArgs),
    /// Estimate class priors from a trained model's scores.
    EstimatePriors(EstimateArgs),
    /// Compute the multi-label metrics of a model on labeled data.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct Dims {
    /// Number of classes; scanned from the data when omitted.
    #[arg(long)]
    classes: Option<usize>,
    /// Feature dimension; scanned from the data when omitted.
    #[arg(long)]
    features: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    q: usize,
    #[arg(long)]
    c: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    priors: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    separability: f64,
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives `data.txt` and `truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prefix of the `.train`, `.val` and `.test` files; defaults to the input path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    dims: Dims,
}

#[derive(Args)]
struct MaskArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the label frequencies of the kept rows.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    #[command(flatten)]
    dims: Dims,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single-positive training file.
    #[arg(long)]
    train: PathBuf,
    /// Fully labeled validation file.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Truth sidecar; only used for reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    fixed_priors: Option<Vec<f64>>,
    /// Output directory for `model.ckpt`, `report.json` and the resolved `config.toml`.
    #[arg(long)]
    out: PathBuf,
    /// Use one hidden ReLU layer of this width.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    prior_refresh_every: Option<usize>,
    #[command(flatten)]
    dims: Dims,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Single-positive file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Fully labeled file.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    dims: Dims,
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn scan(path: &Path) -> Result<(usize, usize), Failure> {
    Ok(scan_dimensions(open(path)?)?)
}

fn resolve_dims(dims: &Dims, paths: &[&Path], min_c: usize) -> Result<(usize, usize), Failure> {
    if let (Some(c), Some(q)) = (dims.classes, dims.features) {
        return Ok((c, q));
    }
    let (mut c, mut q) = (min_c, 0);
    for p in paths {
        let (pc, pq) = scan(p)?;
        c = c.max(pc);
        q = q.max(pq);
    }
    Ok((dims.classes.unwrap_or(c), dims.features.unwrap_or(q)))
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, json: String) -> CmdResult {
    match out {
        Some(p) => write_text(p, &(json + "\n")),
        // A closed pipe (e.g. `| head`) is not an error worth reporting.
        None => match writeln!(std::io::stdout(), "{json}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(Failure::usage(format!("stdout: {e}")))
            }
            _ => Ok(()),
        },
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let cfg = SynthConfig {
        n: a.n,
        q: a.q,
        c: a.c,
        target_priors: a.priors,
        separability: a.separability,
        label_correlation: a.correlation,
        seed: a.seed,
    };
    let out = generate(&cfg).map_err(|e| Failure::usage(e.to_string()))?;
    create_dir(&a.out)?;
    write_text(&a.out.join("data.txt"), &out.dataset.to_text())?;
    report::write_json(
        &a.out.join("truth.json"),
        &Truth {
            target_priors: Some(cfg.target_priors),
            priors: out.realized_priors,
            n: cfg.n,
        },
    )
}

fn cmd_split(a: SplitArgs) -> CmdResult {
    let [train_frac, val_frac, test_frac] = a.fractions[..] else {
        return Err(Failure::usage("--fractions takes three values"));
    };
    let spec = SplitSpec {
        train_frac,
        val_frac,
        test_frac,
        seed: a.seed,
    };
    let (c, q) = resolve_dims(&a.dims, &[&a.data], 0)?;
    let data = parse_dataset(open(&a.data)?, c, q)?;
    let (train, val, test) = split(&data, &spec)?;
    let prefix = a.out.unwrap_or(a.data);
    for (part, suffix) in [(&train, ".train"), (&val, ".val"), (&test, ".test")] {
        write_text(&with_suffix(&prefix, suffix), &part.to_text())?;
    }
    Ok(())
}

fn cmd_mask(a: MaskArgs) -> CmdResult {
    let (c, q) = resolve_dims(&a.dims, &[&a.data], 0)?;
    let data = parse_dataset(open(&a.data)?, c, q)?;
    let masked = mask_single_positive(&data, a.seed)?;
    write_text(&a.out, &masked.dataset.to_text())?;
    if let Some(path) = &a.truth_out {
        report::write_json(
            path,
            &Truth {
                target_priors: None,
                priors: priors_of_rows(data.labels(), &masked.kept_rows),
                n: masked.kept_rows.len(),
            },
        )?;
    }
    emit(
        None,
        report::to_json(&MaskSummary {
            input_rows: data.n(),
            kept: masked.kept_rows.len(),
            dropped: masked.dropped,
        }),
    )
}

fn resolve_run_config(a: &TrainArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = a.hidden {
        cfg.model = Architecture::Hidden { width: w };
    }
    let t = &mut cfg.train;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { t.$field = v; } )* };
    }
    set!(epochs, warmup_epochs, batch_size, learning_rate, weight_decay, seed, delta, tau, lambda, prior_refresh_every);
    if let Some(p) = &a.fixed_priors {
        t.fixed_priors = Some(p.clone());
    }
    t.validate()?;
    if let Architecture::Hidden { width: 0 } = cfg.model {
        return Err(Failure::usage("hidden width must be >= 1"));
    }
    Ok(cfg)
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let started = Instant::now();
    let cfg = resolve_run_config(&a)?;
    let truth: Option<Truth> = a.truth.as_deref().map(report::read_json).transpose()?;

    let min_c = [
        cfg.train.fixed_priors.as_ref().map_or(0, Vec::len),
        truth.as_ref().map_or(0, |t| t.priors.len()),
    ]
    .into_iter()
    .max()
    .unwrap_or(0);
    let mut paths = vec![a.train.as_path()];
    paths.extend(a.val.as_deref());
    let (c, q) = resolve_dims(&a.dims, &paths, min_c)?;
    if let Some(p) = &cfg.train.fixed_priors {
        if p.len() != c {
            return Err(Failure::usage(format!("{} fixed priors for {c} classes", p.len())));
        }
    }
    if let Some(t) = &truth {
        if t.priors.len() != c {
            return Err(Failure::usage(format!("truth has {} priors for {c} classes", t.priors.len())));
        }
    }

    let sp = parse_single_positive(open(&a.train)?, c, q)?;
    let val = a
        .val
        .as_deref()
        .map(|p| -> Result<_, Failure> { Ok(parse_dataset(open(p)?, c, q)?) })
        .transpose()?;

    let model = Classifier::new(cfg.model, q, c, cfg.train.seed);
    let (model, mut training) = train(
        model,
        &sp,
        &cfg.train,
        val.as_ref(),
        truth.as_ref().map(|t| t.priors.as_slice()),
    )?;

    create_dir(&a.out)?;
    write_text(&a.out.join("config.toml"), &cfg.emit())?;
    let ckpt = a.out.join("model.ckpt");
    model.save_checkpoint(&ckpt)?;
    training.checkpoint = Some(ckpt);

    let validation = val.as_ref().map(|v| evaluate(&model, v)).transpose()?;
    let priors = PriorDiagnostics {
        final_priors: training.final_priors().map(<[f64]>::to_vec),
        true_priors: training.true_priors.clone(),
        final_abs_error: training.epochs.last().and_then(|e| e.prior_abs_error.clone()),
        estimated: cfg.train.fixed_priors.is_none(),
    };
    let timings = Timings {
        prior_seconds: training.epochs.iter().map(|e| e.prior_seconds).collect(),
        epoch_seconds: training.epochs.iter().map(|e| e.epoch_seconds).collect(),
        total_seconds: started.elapsed().as_secs_f64(),
    };
    let run = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg,
        inputs: Inputs {
            train: a.train,
            val: a.val,
            truth: a.truth,
            n_train: sp.n(),
            q,
            c,
        },
        training,
        validation,
        priors,
        timings,
    };
    report::write_json(&a.out.join("report.json"), &run)
}

fn load_model(path: &Path) -> Result<Classifier, Failure> {
    if !path.is_file() {
        return Err(Failure::usage(format!("{}: checkpoint not found", path.display())));
    }
    Ok(Classifier::load_checkpoint(path)?)
}

fn cmd_estimate_priors(a: EstimateArgs) -> CmdResult {
    let model = load_model(&a.checkpoint)?;
    let cfg = EstimatorConfig {
        delta: a.delta,
        tau: a.tau,
    };
    cfg.validate()?;
    let sp = parse_single_positive(open(&a.data)?, model.output_dim(), model.input_dim())?;
    let probs = model.forward_probs(sp.features().view())?;
    let estimate = estimate_all_priors(probs.view(), &sp, &cfg, None)?;
    emit(a.out.as_deref(), report::to_json(&estimate))
}

fn cmd_evaluate(a: EvaluateArgs) -> CmdResult {
    let model = load_model(&a.checkpoint)?;
    let (c, q) = (
        a.dims.classes.unwrap_or(model.output_dim()),
        a.dims.features.unwrap_or(model.input_dim()),
    );
    if (c, q) != (model.output_dim(), model.input_dim()) {
        return Err(CrispError::Shape {
            expected: format!("c = {}, q = {}", model.output_dim(), model.input_dim()),
            found: format!("c = {c}, q = {q}"),
        }
        .into());
    }
    let test = parse_dataset(open(&a.test)?, c, q)?;
    let metrics = evaluate(&model, &test)?;
    emit(a.out.as_deref(), report::to_json(&metrics))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Split(a) => cmd_split(a),
        Command::Mask(a) => cmd_mask(a),
        Command::Train(a) => cmd_train(a),
        Command::EstimatePriors(a) => cmd_estimate_priors(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
