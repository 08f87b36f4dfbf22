//! `regpoly`: batch front end for regular polynomial interpolation,
//! collocation, blending and WKB expansions.
//!
//! Exit codes: 0 success, 1 usage, 2 input validation, 3 numerical failure
//! or a failed check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod golden;
mod golden_table;
mod problems;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;
use rayon::prelude::*;
use regpoly::Precision;

use commands::{Format, Options, Outcome};
use error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "regpoly", version, about = "Regular polynomial interpolation and collocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Input JSON file; repeat for batches (or for the members of `synthesize`).
    #[arg(long, global = true, value_name = "PATH")]
    input: Vec<PathBuf>,

    /// Primary output file; a directory for batches. Default: stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Secondary report (residuals, audit, kernel samples); a directory for batches.
    #[arg(long, global = true, value_name = "PATH")]
    report: Option<PathBuf>,

    /// Arithmetic for construction and evaluation. Default: double; extended for `golden`.
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,

    /// Worker threads for `synthesize` and batches.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Tolerance of the command's check, replacing its default.
    #[arg(long, global = true, value_name = "T")]
    tolerance: Option<f64>,

    /// Seed for randomized verification.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Keep univariate nodes in input order instead of sorting them ascending.
    #[arg(long, global = true)]
    preserve_order: bool,

    /// Polynomial output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hermite interpolation: `{nodes, k, f}`, or `{nodes, beta | total_degree, f}` in several variables.
    Interpolate,
    /// Univariate interpolation preserving operator values: `{nodes, f, operators}`.
    PreserveOps,
    /// Two-point boundary value problem of order two.
    #[command(name = "solve-bvp1d")]
    SolveBvp1d,
    /// Collocation of a linear PDE on boundary and interior nodes.
    SolveCollocation,
    /// Blend `{nodes, polynomial}` members on disjoint node sets.
    Synthesize {
        /// Derivative order matched at every node.
        #[arg(long)]
        k: u32,
    },
    /// Truncated WKB expansion: `{n, b, y, K, D}`.
    Wkb,
    /// Diagnostics: `{kind: oracle | residual | error | convergence, ...}`.
    Verify,
    /// Recompute the 76-coefficient reference table and compare.
    Golden,
}

fn write_to(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn stdout(text: &str) -> CliResult<()> {
    std::io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        })
}

fn extension(format: Option<Format>, output: &str) -> &'static str {
    match format {
        Some(Format::Csv) => "csv",
        Some(_) => "json",
        None if output.starts_with('{') => "json",
        None => "csv",
    }
}

/// Write one outcome; batches go to `<dir>/<stem>.<ext>`.
fn deliver(cli: &Cli, source: Option<&Path>, batch: bool, out: &Outcome) -> CliResult<()> {
    let stem = source
        .and_then(Path::file_stem)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    match (&cli.output, batch) {
        (Some(dir), true) => {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
                path: dir.clone(),
                source,
            })?;
            write_to(&dir.join(format!("{stem}.{}", extension(cli.format, &out.output))), &out.output)?;
        }
        (Some(path), false) => write_to(path, &out.output)?,
        (None, true) => stdout(&format!("# {stem}\n{}", out.output))?,
        (None, false) => stdout(&out.output)?,
    }
    if let (Some(r), Some(text)) = (&cli.report, &out.report) {
        if batch {
            std::fs::create_dir_all(r).map_err(|source| CliError::Write {
                path: r.clone(),
                source,
            })?;
            write_to(&r.join(format!("{stem}.report.csv")), text)?;
        } else {
            write_to(r, text)?;
        }
    }
    Ok(())
}

type Single = fn(&Path, &Options) -> CliResult<Outcome>;

fn run_batch(cli: &Cli, opts: &Options, f: Single) -> CliResult<Vec<String>> {
    if cli.input.is_empty() {
        return Err(CliError::Usage("--input is required for this subcommand".into()));
    }
    let batch = cli.input.len() > 1;
    let results: Vec<CliResult<Outcome>> = if batch {
        cli.input.par_iter().map(|p| f(p, opts).map_err(|e| e.within(p))).collect()
    } else {
        vec![f(&cli.input[0], opts).map_err(|e| e.within(&cli.input[0]))]
    };
    let mut failures = Vec::new();
    for (path, r) in cli.input.iter().zip(results) {
        let out = r?;
        deliver(cli, Some(path), batch, &out)?;
        if let Some(msg) = out.failure {
            failures.push(format!("{}: {msg}", path.display()));
        }
    }
    Ok(failures)
}

fn run(cli: &Cli) -> CliResult<()> {
    let opts = Options {
        precision: match (cli.precision, &cli.command) {
            (Some(p), _) => p.into(),
            (None, Command::Golden) => Precision::Extended,
            (None, _) => Precision::Double,
        },
        tolerance: cli.tolerance,
        seed: cli.seed,
        preserve_order: cli.preserve_order,
        format: cli.format,
    };
    if let Some(t) = cli.tolerance {
        if !(t >= 0.0) {
            return Err(CliError::Usage(format!("--tolerance must be nonnegative, got {t}")));
        }
    }
    let failures = match &cli.command {
        Command::Interpolate => run_batch(cli, &opts, commands::interpolate)?,
        Command::PreserveOps => run_batch(cli, &opts, commands::preserve_ops)?,
        Command::SolveBvp1d => run_batch(cli, &opts, commands::solve_bvp1d)?,
        Command::SolveCollocation => run_batch(cli, &opts, commands::solve_collocation_file)?,
        Command::Wkb => run_batch(cli, &opts, commands::wkb)?,
        Command::Verify => run_batch(cli, &opts, commands::verify)?,
        Command::Synthesize { k } => {
            if cli.input.is_empty() {
                return Err(CliError::Usage("synthesize needs at least one --input member".into()));
            }
            let out = commands::synthesize(&cli.input, *k, &opts)?;
            deliver(cli, None, false, &out)?;
            out.failure.into_iter().collect()
        }
        Command::Golden => {
            let out = commands::golden(&opts)?;
            deliver(cli, None, false, &out)?;
            out.failure.into_iter().collect()
        }
    };
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(failures.join("\n")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(3);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
