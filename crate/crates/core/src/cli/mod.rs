//! Command-line front end behind the `crnn` binary.
//!
//! Exit codes: 0 success, 1 gradient check failed, 2 user or configuration
//! error, 3 I/O error.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use config::{ModelOptions, RunConfig, SplitOptions};

use crate::data::{
    self, assemble, load_archive, load_matrix, save_archive, save_binary_matrix, synth_generate,
    SignalMatrix, SplitSpec, SynthSpec, WindowSet,
};
use crate::error::{Error, Result};
use crate::io::{create_dir_all, write_atomic, DirLock};
use crate::layers::Mode;
use crate::model::{load_checkpoint, save_checkpoint, CrnnModel};
use crate::training::{self, gradcheck, ConfusionReport, EpochMetrics, METRICS_CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "model.crn1";
pub const CONFUSION_FILE: &str = "confusion.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const RESOLVED_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Parser)]
#[command(
    name = "crnn",
    version,
    about = "CNN+LSTM bearing-fault classifier on raw vibration signals"
)]
pub struct Cli {
    /// JSON config: a run config for train/eval, a synthesis spec for synth.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed overriding the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Window per-class recordings into a labeled archive.
    Prepare(PrepareArgs),
    /// Write deterministic synthetic recordings, one VIB1 file per class.
    Synth,
    /// Train on an archive; writes metrics.csv, model.crn1 and confusion.json.
    Train(TrainArgs),
    /// Score a checkpoint on an archive.
    Eval(EvalArgs),
    /// Classify every window of a raw recording.
    Predict(PredictArgs),
    /// Finite-difference check of every layer and a toy model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// NAME=PATH[,PATH...]; each path is a recording or a directory of them.
    /// Classes are numbered in the order given.
    #[arg(long = "class", value_name = "NAME=PATHS", required = true)]
    pub classes: Vec<String>,

    /// Window length in time steps.
    #[arg(long, default_value_t = 150)]
    pub window: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    pub archive: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long, value_name = "PATH")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub archive: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    /// Text or VIB1 recording.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Override every per-tensor tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_USAGE
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Prepare(args) => prepare(&cli, args, out),
        Command::Synth => synth(&cli, out),
        Command::Train(args) => train(&cli, args, out),
        Command::Eval(args) => eval(&cli, args, out),
        Command::Predict(args) => predict(&cli, args, out),
        Command::Gradcheck(args) => gradcheck_cmd(&cli, args, out),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| Error::io("<stdout>", e))
}

fn reject_config(cli: &Cli, command: &str) -> Result<()> {
    match &cli.config {
        Some(_) => Err(Error::Config(format!("{command} does not read --config"))),
        None => Ok(()),
    }
}

fn required_out(cli: &Cli) -> Result<&Path> {
    cli.out
        .as_deref()
        .ok_or_else(|| Error::Config("--out DIR is required".into()))
}

fn input_files(class: &str, path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if !meta.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        let hidden = p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if p.is_file() && !hidden {
            files.push(p);
        }
    }
    if files.is_empty() {
        return Err(Error::Config(format!(
            "class {class:?}: no recordings in {}",
            path.display()
        )));
    }
    files.sort();
    Ok(files)
}

fn prepare(cli: &Cli, args: &PrepareArgs, out: &mut dyn Write) -> Result<i32> {
    reject_config(cli, "prepare")?;
    let dir = required_out(cli)?;
    let mut classes = Vec::new();
    let mut sample_rate = None;
    for spec in &args.classes {
        let (name, paths) = spec.split_once('=').ok_or_else(|| {
            Error::Config(format!("--class expects NAME=PATH[,PATH...], got {spec:?}"))
        })?;
        if name.is_empty() {
            return Err(Error::Config(format!("empty class name in {spec:?}")));
        }
        let mut recordings = Vec::new();
        for p in paths.split(',').filter(|p| !p.is_empty()) {
            for file in input_files(name, Path::new(p))? {
                recordings.push(load_matrix(&file)?);
            }
        }
        if recordings.is_empty() {
            return Err(Error::Config(format!("class {name:?}: no input paths")));
        }
        let signal = SignalMatrix::concat(&recordings)
            .map_err(|e| Error::Config(format!("class {name:?}: {e}")))?;
        sample_rate.get_or_insert(signal.sample_rate_hz);
        let windows = data::window(&signal, args.window)
            .map_err(|e| Error::Config(format!("class {name:?}: {e}")))?;
        classes.push((name.to_string(), windows));
    }
    let ws = assemble(classes)?;

    create_dir_all(dir)?;
    let _lock = DirLock::acquire(dir)?;
    let manifest = save_archive(&ws, dir, sample_rate.unwrap_or(1.0), cli.seed.unwrap_or(0))?;
    for (name, count) in manifest.class_names.iter().zip(&manifest.class_counts) {
        say(out, format!("{name}: {count} windows"))?;
    }
    say(
        out,
        format!(
            "archive {}: {} windows of {}x{}",
            dir.display(),
            manifest.num_samples,
            manifest.window_len,
            manifest.channels
        ),
    )?;
    Ok(EXIT_OK)
}

fn synth(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let dir = required_out(cli)?;
    let mut spec = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<SynthSpec>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let signals = synth_generate(&spec)?;
    create_dir_all(dir)?;
    let _lock = DirLock::acquire(dir)?;
    for (class, signal) in spec.classes.iter().zip(&signals) {
        let path = dir.join(format!("{}.vib1", class.name));
        save_binary_matrix(signal, &path)?;
        say(
            out,
            format!(
                "{}: {} rows x {} channels",
                path.display(),
                signal.rows(),
                signal.cols()
            ),
        )?;
    }
    let mut json = serde_json::to_string_pretty(&spec)?;
    json.push('\n');
    write_atomic(&dir.join("synth_spec.json"), json.as_bytes())?;
    Ok(EXIT_OK)
}

fn run_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut s = String::from(METRICS_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn write_confusion(path: &Path, classes: &[String], cm: &training::ConfusionMatrix) -> Result<f64> {
    let report = ConfusionReport::new(classes, cm);
    let mut json = serde_json::to_string(&report)?;
    json.push('\n');
    write_atomic(path, json.as_bytes())?;
    Ok(report.accuracy)
}

fn split_archive(
    ws: &WindowSet,
    cfg: &RunConfig,
) -> Result<(WindowSet, Option<WindowSet>, WindowSet)> {
    let spec = SplitSpec {
        train_fraction: cfg.split.train_fraction,
        batch_size: cfg.train.batch_size,
        seed: cfg.train.seed,
        stratified: cfg.split.stratified,
    };
    if cfg.split.validation_fraction > 0.0 {
        let (train, val, test) = data::split_three(ws, &spec, cfg.split.validation_fraction)?;
        Ok((train, Some(val), test))
    } else {
        let (train, test) = data::split(ws, &spec)?;
        Ok((train, None, test))
    }
}

fn train(cli: &Cli, args: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    let started = Instant::now();
    let mut cfg = run_config(cli)?;
    if let Some(a) = &args.archive {
        cfg.archive = Some(a.clone());
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = args.learning_rate {
        cfg.train.learning_rate = lr;
    }
    cfg.train.validate()?;
    let dir = cfg.out()?.to_path_buf();
    let (ws, _) = load_archive(cfg.archive()?)?;

    let mut model = match &args.resume {
        Some(path) => {
            let m = load_checkpoint(path)?;
            check_archive_matches(&m, &ws)?;
            m
        }
        None => {
            let mcfg = cfg
                .model
                .resolve(ws.window_len(), ws.channels(), ws.num_classes())?;
            let mut m = training::init_model(mcfg, cfg.train.seed)?;
            m.set_class_names(ws.class_names().to_vec())?;
            m
        }
    };
    let (train_set, val_set, test_set) = split_archive(&ws, &cfg)?;

    create_dir_all(&dir)?;
    let _lock = DirLock::acquire(&dir)?;
    let mut resolved = serde_json::to_string_pretty(&cfg)?;
    resolved.push('\n');
    write_atomic(&dir.join(RESOLVED_CONFIG_FILE), resolved.as_bytes())?;

    let metrics_path = dir.join(METRICS_FILE);
    let checkpoint_path = dir.join(CHECKPOINT_FILE);
    let mut rows = Vec::new();
    let start = model.epochs_trained;
    training::fit(
        &mut model,
        &train_set,
        &test_set,
        &cfg.train,
        start,
        cfg.timing,
        |m, model| {
            rows.push(*m);
            write_atomic(&metrics_path, metrics_csv(&rows).as_bytes())?;
            save_checkpoint(model, &checkpoint_path)
        },
    )?;
    if rows.is_empty() {
        write_atomic(&metrics_path, metrics_csv(&rows).as_bytes())?;
        save_checkpoint(&model, &checkpoint_path)?;
    }

    let test_eval =
        training::evaluate(&mut model, &test_set, cfg.train.batch_size, Mode::Inference)?;
    let test_acc = write_confusion(
        &dir.join(CONFUSION_FILE),
        model.class_names(),
        &test_eval.confusion,
    )?;
    let train_acc = match rows.last() {
        Some(r) => r.train_accuracy,
        None => {
            training::evaluate(&mut model, &train_set, cfg.train.batch_size, Mode::Frozen)?.accuracy
        }
    };
    if let Some(val) = val_set {
        let v = training::evaluate(&mut model, &val, cfg.train.batch_size, Mode::Inference)?;
        say(out, format!("validation_acc={:.6}", v.accuracy))?;
    }
    say(
        out,
        format!(
            "final train_acc={train_acc:.6} test_acc={test_acc:.6} seconds={:.3}",
            started.elapsed().as_secs_f64()
        ),
    )?;
    Ok(EXIT_OK)
}

fn check_archive_matches(model: &CrnnModel, ws: &WindowSet) -> Result<()> {
    let c = model.config();
    if (ws.window_len(), ws.channels()) != (c.window_len, c.in_channels) {
        return Err(Error::Config(format!(
            "archive windows are {}x{} but the checkpoint expects {}x{}",
            ws.window_len(),
            ws.channels(),
            c.window_len,
            c.in_channels
        )));
    }
    if ws.class_names() != model.class_names() {
        return Err(Error::Config(format!(
            "archive classes {:?} differ from checkpoint classes {:?}",
            ws.class_names(),
            model.class_names()
        )));
    }
    Ok(())
}

fn eval(cli: &Cli, args: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = run_config(cli)?;
    let archive = match &args.archive {
        Some(a) => a.clone(),
        None => cfg.archive()?.to_path_buf(),
    };
    let mut model = load_checkpoint(&args.checkpoint)?;
    let (ws, _) = load_archive(&archive)?;
    check_archive_matches(&model, &ws)?;
    let result = training::evaluate(&mut model, &ws, args.batch_size, Mode::Inference)?;
    let accuracy = match &cfg.out {
        Some(dir) => {
            create_dir_all(dir)?;
            let _lock = DirLock::acquire(dir)?;
            write_confusion(
                &dir.join(CONFUSION_FILE),
                model.class_names(),
                &result.confusion,
            )?
        }
        None => result.confusion.accuracy(),
    };
    say(
        out,
        format!(
            "samples={} loss={:.9} accuracy={accuracy:.6}",
            ws.len(),
            result.loss
        ),
    )?;
    Ok(EXIT_OK)
}

fn predict(cli: &Cli, args: &PredictArgs, out: &mut dyn Write) -> Result<i32> {
    reject_config(cli, "predict")?;
    let model = load_checkpoint(&args.checkpoint)?;
    let signal = load_matrix(&args.input)?;
    let c = model.config();
    if signal.cols() != c.in_channels {
        return Err(Error::Config(format!(
            "{} has {} channels but the model expects {}",
            args.input.display(),
            signal.cols(),
            c.in_channels
        )));
    }
    let windows = data::window(&signal, c.window_len)?;
    let scores = model.infer(&windows)?;
    let predictions = scores.argmax_rows()?;

    let names = model.class_names();
    let mut table = String::from("window,class");
    for n in names {
        table.push_str(&format!(",score_{n}"));
    }
    table.push('\n');
    let k = names.len();
    for (i, &p) in predictions.iter().enumerate() {
        table.push_str(&format!("{i},{}", names[p]));
        for s in &scores.data()[i * k..(i + 1) * k] {
            table.push_str(&format!(",{s:.6}"));
        }
        table.push('\n');
    }
    if let Some(dir) = &cli.out {
        create_dir_all(dir)?;
        let _lock = DirLock::acquire(dir)?;
        write_atomic(&dir.join(PREDICTIONS_FILE), table.as_bytes())?;
    }
    out.write_all(table.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(EXIT_OK)
}

fn gradcheck_cmd(cli: &Cli, args: &GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    reject_config(cli, "gradcheck")?;
    let mut report = gradcheck::check_all(cli.seed.unwrap_or(0))?;
    if let Some(t) = args.tolerance {
        report = report.with_tolerance(t);
    }
    write!(out, "{report}").map_err(|e| Error::io("<stdout>", e))?;
    let passed = report.passed();
    say(
        out,
        format!(
            "gradcheck {}: max relative error {:.3e}",
            if passed { "passed" } else { "FAILED" },
            report.max_rel_error()
        ),
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_CHECK_FAILED })
}
