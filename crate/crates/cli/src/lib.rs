//! The `pqr` command line: split, count, train, eval, predict.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pqr_core::io::{self, DatasetSplit, SplitPaths};
use pqr_core::movielens::{self, OneHotLayout};
use pqr_core::separation::{self, select_top_k};
use pqr_core::{Error, FeatureSeparation, FtrlParams, PqrModel, Result, RunOptions, Task};

/// Rating scale used by `--clip-ratings`.
pub const RATING_RANGE: (f64, f64) = (1.0, 5.0);

#[derive(Debug, Parser)]
#[command(
    name = "pqr",
    version,
    about = "Projective quadratic regression with FTRL-Proximal"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a text file into train/validation/test by a seeded draw per line
    Split(SplitArgs),
    /// Count feature occurrences, optionally selecting the high-frequency set
    Count(CountArgs),
    /// Train a model in a single online pass (or several with --epochs)
    Train(TrainArgs),
    /// Evaluate a saved model without updating it
    Eval(EvalArgs),
    /// Write one prediction per input instance
    Predict(PredictArgs),
    /// Convert a MovieLens `u.data` file to one-hot LIBSVM
    Movielens(MovielensArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub input: PathBuf,
    /// Train, validation and test fractions
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to `<input>.train`
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Defaults to `<input>.valid`
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Defaults to `<input>.test`
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    pub data: PathBuf,
    /// Counts file (`index count` per line)
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub sample_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the separation file for this k
    #[arg(long, requires = "k")]
    pub sep: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Feature dimension; defaults to the largest index seen
    #[arg(long)]
    pub d: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
    pub task: TaskArg,
    /// Number of high-frequency features; defaults to ceil(sqrt(d))
    #[arg(long)]
    pub k: Option<usize>,
    /// Feature dimension; defaults to the largest index in the training data
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,
    /// Exempt the bias coordinate from L1/L2
    #[arg(long)]
    pub unregularized_bias: bool,
    /// Separation file. Read when --k is absent, written when --k is given.
    #[arg(long)]
    pub sep: Option<PathBuf>,
    /// Fraction of training instances used for counting
    #[arg(long, default_value_t = 1.0)]
    pub sample_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Rounds at which to emit report rows
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<u64>,
    /// Progressive report CSV
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Clamp reported regression predictions to [1, 5]
    #[arg(long)]
    pub clip_ratings: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long)]
    pub clip_ratings: bool,
}

#[derive(Debug, Args)]
pub struct MovielensArgs {
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Defaults to the largest user id present
    #[arg(long)]
    pub users: Option<u32>,
    /// Defaults to the largest item id present
    #[arg(long)]
    pub items: Option<u32>,
}

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> ExitCode {
    ExitCode::from(match err.root() {
        Error::InvalidArgument(_) => 2,
        Error::Io { .. } => 3,
        Error::Parse { .. }
        | Error::Format(_)
        | Error::Dimension(_)
        | Error::TaskMismatch(_)
        | Error::UndefinedMetric(_) => 4,
        Error::Numeric { .. } | Error::NonConvergence { .. } => 5,
        Error::Round { .. } => unreachable!("root() unwraps rounds"),
    })
}

/// Runs a command, writing human-readable results to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<()> {
    match cli.command {
        Command::Split(a) => split(a, out),
        Command::Count(a) => count(a, out),
        Command::Train(a) => train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Predict(a) => predict(a),
        Command::Movielens(a) => convert_movielens(a, out),
    }
}

fn split<W: Write>(a: SplitArgs, out: &mut W) -> Result<()> {
    let [train, validation, test] = a.fractions[..] else {
        return Err(Error::InvalidArgument("--fractions takes three values".into()));
    };
    let plan = DatasetSplit::new(train, validation, test, a.seed)?;
    let defaults = SplitPaths::beside(&a.input);
    let paths = SplitPaths {
        train: a.train.unwrap_or(defaults.train),
        validation: a.valid.unwrap_or(defaults.validation),
        test: a.test.unwrap_or(defaults.test),
    };
    let [n_train, n_valid, n_test] = io::split(&a.input, &plan, &paths)?;
    writeln!(out, "train={n_train} valid={n_valid} test={n_test}")?;
    Ok(())
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "--sample-fraction {fraction} outside (0, 1]"
        )))
    }
}

/// `ceil(sqrt(d))`, never above `d`.
pub fn default_order(d: u32) -> usize {
    ((d as f64).sqrt().ceil() as usize).min(d as usize)
}

fn count<W: Write>(a: CountArgs, out: &mut W) -> Result<()> {
    check_fraction(a.sample_fraction)?;
    let counts = separation::count_features_sampled(io::stream(&a.data)?, a.sample_fraction, a.seed)?;
    io::write_atomic(&a.output, |w| counts.write_to(w))?;
    write!(out, "instances={} features={}", counts.total(), counts.len())?;
    if let (Some(path), Some(k)) = (&a.sep, a.k) {
        let d = a.d.unwrap_or_else(|| counts.max_index().unwrap_or(0));
        let sep = select_top_k(&counts, k, d)?;
        io::write_atomic(path, |w| sep.write_to(w))?;
        write!(out, " d={d} k={k}")?;
    }
    writeln!(out)?;
    Ok(())
}

fn read_separation(path: &Path) -> Result<FeatureSeparation> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: Some(path.to_path_buf()),
        line: None,
        source,
    })?;
    FeatureSeparation::read_from(&mut BufReader::new(file))
}

fn run_options(r: &ReportArgs) -> Result<RunOptions> {
    if r.checkpoints.windows(2).any(|w| w[0] >= w[1]) || r.checkpoints.first() == Some(&0) {
        return Err(Error::InvalidArgument(
            "--checkpoints must be positive and strictly increasing".into(),
        ));
    }
    Ok(RunOptions {
        checkpoints: r.checkpoints.clone(),
        clip: r.clip_ratings.then_some(RATING_RANGE),
        record_losses: false,
    })
}

fn write_report(r: &ReportArgs, report: &pqr_core::EvalReport) -> Result<()> {
    if let Some(path) = &r.report {
        io::write_atomic(path, |w| report.write_csv(w))?;
    }
    Ok(())
}

fn train<W: Write>(a: TrainArgs, out: &mut W) -> Result<()> {
    let mut params = FtrlParams::new(a.alpha, a.beta, a.l1, a.l2, a.task.into())?;
    if a.unregularized_bias {
        params = params.with_unregularized_bias();
    }
    check_fraction(a.sample_fraction)?;
    if a.epochs == 0 {
        return Err(Error::InvalidArgument("--epochs must be at least 1".into()));
    }
    let options = run_options(&a.report)?;

    let sep = match (&a.sep, a.k) {
        (Some(path), None) => {
            let sep = read_separation(path)?;
            if let Some(d) = a.d.filter(|&d| d != sep.dim()) {
                return Err(Error::Dimension(format!(
                    "--d {d} disagrees with separation file (d={})",
                    sep.dim()
                )));
            }
            sep
        }
        (path, k) => {
            let counts = separation::count_features_sampled(io::stream(&a.data)?, a.sample_fraction, a.seed)?;
            if counts.total() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "{} holds no instances",
                    a.data.display()
                )));
            }
            let d = a.d.unwrap_or_else(|| counts.max_index().unwrap_or(0));
            let sep = select_top_k(&counts, k.unwrap_or_else(|| default_order(d)), d)?;
            if let Some(path) = path {
                io::write_atomic(path, |w| sep.write_to(w))?;
            }
            sep
        }
    };

    let mut model = PqrModel::new(sep, params);
    let mut report = None;
    for _ in 0..a.epochs {
        report = Some(model.train(io::stream(&a.data)?, &options)?);
    }
    let report = report.expect("at least one epoch");
    if report.instances == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} holds no instances",
            a.data.display()
        )));
    }
    model.save(&a.model)?;
    write_report(&a.report, &report)?;
    writeln!(
        out,
        "{} d={} k={} nonzero_weights={}",
        report.summary(),
        model.dim(),
        model.map().k(),
        model.state().nonzero_weights()
    )?;
    Ok(())
}

fn eval<W: Write>(a: EvalArgs, out: &mut W) -> Result<()> {
    let options = run_options(&a.report)?;
    let model = PqrModel::load(&a.model)?;
    let report = model.evaluate(io::stream(&a.data)?, &options)?;
    if report.instances == 0 {
        return Err(Error::InvalidArgument(format!(
            "{} holds no instances",
            a.data.display()
        )));
    }
    write_report(&a.report, &report)?;
    writeln!(out, "{}", report.summary())?;
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = PqrModel::load(&a.model)?;
    let clip = a.clip_ratings && model.task() == Task::Regression;
    let mut predictions = Vec::new();
    for (t, instance) in io::stream(&a.data)?.enumerate() {
        let instance = instance?;
        // The label is unused, but it must still suit the model's task.
        model
            .task()
            .target(instance.label)
            .map_err(|e| wrap_round(e, t))?;
        let mut p = model.predict(&instance.features).map_err(|e| wrap_round(e, t))?;
        if clip {
            p = p.clamp(RATING_RANGE.0, RATING_RANGE.1);
        }
        predictions.push(p);
    }
    io::write_atomic(&a.output, |w| {
        for p in &predictions {
            writeln!(w, "{p:?}")?;
        }
        Ok(())
    })
}

fn wrap_round(e: Error, index: usize) -> Error {
    Error::Round {
        round: index as u64 + 1,
        source: Box::new(e),
    }
}

fn convert_movielens<W: Write>(a: MovielensArgs, out: &mut W) -> Result<()> {
    let ratings = movielens::read_ratings(&a.input)?;
    let covering = OneHotLayout::covering(&ratings);
    let layout = OneHotLayout {
        users: a.users.unwrap_or(covering.users),
        items: a.items.unwrap_or(covering.items),
    };
    let instances = ratings
        .iter()
        .map(|r| layout.encode(r))
        .collect::<Result<Vec<_>>>()?;
    io::write_atomic(&a.output, |w| io::write_instances(w, &instances))?;
    writeln!(
        out,
        "ratings={} users={} items={} d={}",
        instances.len(),
        layout.users,
        layout.items,
        layout.dim()
    )?;
    Ok(())
}
