//! `dppchains` command-line front end.
//!
//! Exit codes: 0 success, 1 internal error, 2 malformed input or invocation,
//! 3 precondition violation (cycle, return to window, singular gap, ...),
//! 4 identity check outside tolerance (the report is still written).

mod commands;
mod input;
mod output;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dppchains::{Error, ErrorClass};
use serde::Serialize;
use serde_json::Value;

use output::{Format, Header};

#[derive(Debug, Parser)]
#[command(name = "dppchains", version, about = "Determinantal kernels of loop-free Markov chains")]
struct Cli {
    /// Master seed for randomized commands.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Refuse to run randomized commands without an explicit --seed.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write here (atomically) instead of standard output.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,
    /// Override the tolerance of identity checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Check that the transition graph is loop-free and print a topological order.
    Validate { input: PathBuf },
    /// Build and export the correlation kernel.
    Kernel { input: PathBuf },
    /// Principal minor for a set of states, cross-checked against the ordered product.
    Correlate {
        input: PathBuf,
        #[arg(long)]
        set: String,
        /// Take the minor from a previously exported kernel file.
        #[arg(long)]
        kernel: Option<PathBuf>,
    },
    /// Gap probability det(I - K_Y), cross-checked against the entrance law.
    Gap {
        input: PathBuf,
        #[arg(long)]
        window: String,
    },
    /// L-ensemble of a window by inversion and by closed form.
    Lensemble {
        input: PathBuf,
        #[arg(long)]
        window: String,
    },
    /// Kernel after independent deletion (p) and insertion (q) noise.
    Noise {
        input: PathBuf,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
    },
    /// Sample configurations (JSON lines).
    Sample {
        input: PathBuf,
        #[arg(short = 'n', long = "samples")]
        samples: usize,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
    },
    /// Exact configuration distribution by path enumeration.
    Enumerate { input: PathBuf },
    /// Chain of a delayed renewal spec.
    Renewal { input: PathBuf },
    /// Chain of a semi-Markov spec.
    Semimarkov { input: PathBuf },
    /// Renewal sequence of the increment law and its convergence rate.
    Renewalfn {
        input: PathBuf,
        #[arg(long)]
        nmax: Option<usize>,
    },
    /// First-passage time distribution between two driving states.
    Firstpassage {
        input: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        tmax: Option<usize>,
    },
    /// Exact mean and variance of the number of points in a window.
    Moments {
        input: PathBuf,
        #[arg(long)]
        window: String,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
    },
    /// Exact distribution of the number of points in a window.
    Distribution {
        input: PathBuf,
        #[arg(long)]
        window: String,
    },
    /// Central-limit report over prefix windows of the given sizes.
    Clt {
        input: PathBuf,
        #[arg(long)]
        windows: String,
        #[arg(short = 'n', long = "samples", default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
    },
}

impl Command {
    fn input(&self) -> &PathBuf {
        match self {
            Command::Validate { input }
            | Command::Kernel { input }
            | Command::Correlate { input, .. }
            | Command::Gap { input, .. }
            | Command::Lensemble { input, .. }
            | Command::Noise { input, .. }
            | Command::Sample { input, .. }
            | Command::Enumerate { input }
            | Command::Renewal { input }
            | Command::Semimarkov { input }
            | Command::Renewalfn { input, .. }
            | Command::Firstpassage { input, .. }
            | Command::Moments { input, .. }
            | Command::Distribution { input, .. }
            | Command::Clt { input, .. } => input,
        }
    }

    /// Name and subcommand-specific flags, without the input path.
    fn describe(&self) -> (String, BTreeMap<String, Value>) {
        let Value::Object(outer) = serde_json::to_value(self).expect("command serializes") else {
            unreachable!("externally tagged enum")
        };
        let (name, inner) = outer.into_iter().next().expect("one variant");
        let mut flags: BTreeMap<String, Value> = match inner {
            Value::Object(m) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        flags.remove("input");
        (name, flags)
    }
}

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn malformed(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Malformed => 2,
            ErrorClass::Precondition => 3,
            ErrorClass::Internal => 1,
        };
        Self { code, message: e.to_string() }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DPPCHAINS_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::malformed(format!("DPPCHAINS_THREADS must be a positive integer, got {raw:?}")))?;
    if n == 0 {
        return Err(Failure::malformed("DPPCHAINS_THREADS must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::internal(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let input = input::load(cli.command.input())?;
    let ctx = commands::Context {
        seed: cli.seed.unwrap_or(0),
        seed_given: cli.seed.is_some(),
        strict: cli.strict,
        tol: cli.tol,
    };
    let report = commands::run(&cli.command, &input, &ctx)?;

    let (command, mut flags) = cli.command.describe();
    flags.insert("strict".into(), Value::Bool(cli.strict));
    if let Some(tol) = cli.tol {
        flags.insert("tol".into(), serde_json::json!(tol));
    }
    let header = Header {
        command,
        version: env!("CARGO_PKG_VERSION"),
        input: cli.command.input().display().to_string(),
        input_sha256: input.sha256.clone(),
        seed: ctx.seed,
        flags,
    };
    let text = report.render(&header, cli.format);
    match &cli.output {
        Some(path) => output::write_atomic(path, &text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::internal(format!("stdout: {e}")))?;
        }
    }
    if let Some(msg) = report.check_failure {
        eprintln!("identity check failed: {msg}");
        return Ok(4);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
