//! `rboost` command line: `train`, `predict` and `eval`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::boost::{train, Algorithm, TrainConfig, Trainer};
use crate::data::{load_dataset, DataFormat, Dataset, LoadOptions};
use crate::error::{Error, Result};
use crate::eval::{emit_curves, misclassification_count, pvalue_two_proportion};
use crate::model_io::{load_model, save_model};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "RBOOST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rboost", version, about = "Multi-class boosting with adaptive base classes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model.
    Train(TrainArgs),
    /// Write the predicted label and class probabilities for every sample.
    Predict(PredictArgs),
    /// Count test errors of a model, or compute a two-proportion P-value.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_format)]
    format: DataFormat,
    /// The CSV file starts with a header row.
    #[arg(long)]
    csv_header: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    /// Terminal nodes per tree (J).
    #[arg(long)]
    trees: usize,
    /// Shrinkage (ν).
    #[arg(long)]
    shrinkage: f64,
    /// Maximum boosting iterations (M).
    #[arg(long)]
    iters: usize,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    eval_stride: usize,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// Stop once the training loss falls below this value [default: 1e-10 * N].
    #[arg(long)]
    early_stop: Option<f64>,
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long)]
    model_out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Suppress per-stride progress lines on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "pvalue", conflicts_with = "pvalue")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    data: Option<PathBuf>,
    #[arg(long, value_parser = parse_format, requires = "model")]
    format: Option<DataFormat>,
    #[arg(long)]
    csv_header: bool,
    /// Errors of method A, errors of method B, test size.
    #[arg(long, num_args = 3, value_names = ["A", "B", "N"])]
    pvalue: Option<Vec<u64>>,
}

fn parse_format(s: &str) -> std::result::Result<DataFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Runs the command line with the process's stdout and stderr.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the command line, writing results to `out` and diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a, out, err),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Eval(a) => cmd_eval(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "rboost: {e}");
            match e {
                Error::InvalidConfig(_) | Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // fails harmlessly if the global pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn load(path: &Path, format: DataFormat, csv_header: bool, like: Option<(&[String], usize)>) -> Result<Dataset> {
    let mut opts = LoadOptions::new(format);
    opts.csv_header = csv_header;
    if let Some((labels, dim)) = like {
        opts.label_map = Some(labels.to_vec());
        opts.n_features = Some(dim);
    }
    load_dataset(path, &opts)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let config = TrainConfig {
        algorithm: a.algo,
        max_leaves: a.trees,
        shrinkage: a.shrinkage,
        iterations: a.iters,
        early_stop_loss: a.early_stop,
        min_leaf: a.min_leaf,
        eval_stride: a.eval_stride,
        seed: a.seed,
    };
    config.validate()?;
    let train_set = load(&a.data.data, a.data.format, a.data.csv_header, None)?;
    let test_set = match &a.test {
        Some(p) => Some(load(
            p,
            a.data.format,
            a.data.csv_header,
            Some((train_set.label_names(), train_set.n_features())),
        )?),
        None => None,
    };

    let (model, log) = if a.quiet {
        train(&train_set, test_set.as_ref(), &config)?
    } else {
        let mut trainer = Trainer::new(&train_set, test_set.as_ref(), config)?;
        let mut reported = 0;
        while !trainer.finished() {
            trainer.step();
            if trainer.log().rows().len() > reported {
                reported = trainer.log().rows().len();
                let r = trainer.log().last().expect("row just logged");
                let mut line = format!("iter {} loss {:.6e}", r.iteration, r.train_loss);
                if let Some(e) = r.test_errors {
                    write!(line, " test_errors {e}").unwrap();
                }
                let _ = writeln!(err, "{line} ({:.1}s)", r.seconds);
            }
        }
        let (model, log, _) = trainer.into_parts();
        (model, log)
    };

    save_model(&model, &a.model_out)?;
    if let Some(path) = &a.curves {
        emit_curves(&log, path)?;
    }
    let last = log.last().expect("at least one iteration ran");
    let mut summary = format!(
        "algorithm {} iterations {} train_loss {:.6e}",
        model.algorithm,
        model.n_iterations(),
        last.train_loss
    );
    if let (Some(e), Some(t)) = (last.test_errors, &test_set) {
        write!(
            summary,
            " test_errors {e} test_error_rate {:.6}",
            e as f64 / t.n_samples() as f64
        )
        .unwrap();
    }
    writeln!(out, "{summary}").map_err(|e| Error::io("<stdout>", e))
}

fn cmd_predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load(
        &a.data.data,
        a.data.format,
        a.data.csv_header,
        Some((&model.label_names, model.n_features)),
    )?;
    let preds = model.predict_dataset(&data)?;
    let mut text = String::new();
    for p in &preds {
        text.push_str(&model.label_names[p.label]);
        for prob in &p.probabilities {
            write!(text, ",{prob:.16e}").unwrap();
        }
        text.push('\n');
    }
    std::fs::write(&a.out, text).map_err(|e| Error::io(&a.out, e))?;
    writeln!(out, "wrote {} predictions to {}", preds.len(), a.out.display()).map_err(|e| Error::io("<stdout>", e))
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(v) = a.pvalue {
        let p = pvalue_two_proportion(v[0], v[1], v[2])?;
        return writeln!(out, "{p:e}").map_err(|e| Error::io("<stdout>", e));
    }
    let (Some(model_path), Some(data_path), Some(format)) = (a.model, a.data, a.format) else {
        return Err(Error::InvalidArgument("eval needs --model, --data and --format, or --pvalue A B N".into()));
    };
    let model = load_model(&model_path)?;
    let data = load(&data_path, format, a.csv_header, Some((&model.label_names, model.n_features)))?;
    let preds: Vec<usize> = model.predict_dataset(&data)?.iter().map(|p| p.label).collect();
    let errors = misclassification_count(&preds, data.labels())?;
    writeln!(
        out,
        "errors {errors} of {} error_rate {:.6}",
        data.n_samples(),
        errors as f64 / data.n_samples() as f64
    )
    .map_err(|e| Error::io("<stdout>", e))
}
