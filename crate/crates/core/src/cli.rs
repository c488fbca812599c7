//! `mamd` command line: `check`, `allocate`, `market` and `simulate`.
//!
//! Exit codes: 0 success (adequate), 1 inadequate, 2 invalid input,
//! 3 internal or solver failure. Data goes to the output stream only;
//! diagnostics go to the error stream.

use std::fs;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::flow::{self, AllocationMatrix, CutWitness};
use crate::market::clear_market;
use crate::model::{load_instance, Instance, TimePartition};
use crate::sim::{run_experiment, run_sweep, PairSelection, SimConfig, PARKING_BREAKPOINTS};
use crate::tensor::{check_adequacy_with, AdequacyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INADEQUATE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mamd",
    version,
    about = "Adequacy, allocation, market clearing and GNR simulation for MAMD energy services"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Io {
    /// Instance document (JSON); stdin when absent.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Where to write the result; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure-tensor adequacy test.
    Check {
        #[command(flatten)]
        io: Io,
        /// Absolute tolerance on the smallest tensor entry.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Sort supply within segments before evaluating the tensor.
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        canonicalize: bool,
    },
    /// Feasible allocation via max-flow, or a min-cut certificate.
    Allocate {
        #[command(flatten)]
        io: Io,
    },
    /// Competitive equilibrium for the instance's consumer types.
    Market {
        #[command(flatten)]
        io: Io,
    },
    /// Benchmark-decomposition GNR experiment; writes a CSV trace.
    Simulate {
        /// Where to write the CSV; stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the summary as JSON to this path.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 100)]
        loads_per_pair: usize,
        /// `all`, `smallest9` (or `smallestN`), or a list like `0-1,1-3`.
        #[arg(long, default_value = "all")]
        pairs: String,
        /// Comma-separated breakpoints; the parking scenario by default.
        #[arg(long)]
        partition: Option<String>,
        /// Loads-per-pair sweep `start:end:step`, one trial per step.
        #[arg(long)]
        sweep: Option<String>,
        /// Run trials on a single thread.
        #[arg(long)]
        sequential: bool,
    },
}

/// Result document of `allocate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub adequate: bool,
    pub max_flow: u64,
    pub required: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<AllocationMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<CutWitness>,
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SolverFailure(_) | Error::InfeasibleModel(_) => EXIT_INTERNAL,
        _ => EXIT_INVALID,
    }
}

struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(exit_code(&e), e.to_string())
    }
}

fn read_instance(io: &Io, stdin: &mut dyn Read) -> Result<Instance, Failure> {
    let text = match &io.input {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Failure(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))?,
        None => {
            let mut s = String::new();
            stdin
                .read_to_string(&mut s)
                .map_err(|e| Failure(EXIT_INVALID, format!("cannot read stdin: {e}")))?;
            s
        }
    };
    Ok(load_instance(&text)?)
}

fn emit(output: &Option<PathBuf>, data: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, data).map_err(|e| {
            Failure(
                EXIT_INTERNAL,
                format!("cannot write {}: {e}", path.display()),
            )
        }),
        None => stdout
            .write_all(data.as_bytes())
            .map_err(|e| Failure(EXIT_INTERNAL, format!("cannot write output: {e}"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn parse_pairs(spec: &str) -> Result<PairSelection, Failure> {
    let bad = || Failure(EXIT_INVALID, format!("invalid --pairs value `{spec}`"));
    match spec {
        "all" => Ok(PairSelection::All),
        s if s.starts_with("smallest") => {
            let n = s["smallest".len()..].parse().map_err(|_| bad())?;
            Ok(PairSelection::Smallest(n))
        }
        s => s
            .split(',')
            .map(|p| {
                let (a, d) = p.trim().split_once('-').ok_or_else(bad)?;
                Ok((a.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(PairSelection::Explicit),
    }
}

fn parse_sweep(spec: &str) -> Result<Vec<usize>, Failure> {
    let bad = || {
        Failure(
            EXIT_INVALID,
            format!("invalid --sweep value `{spec}`, expected start:end:step"),
        )
    };
    let parts: Vec<usize> = spec
        .split(':')
        .map(|p| p.parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if step == 0 || start > end {
        return Err(bad());
    }
    Ok((start..=end).step_by(step).collect())
}

fn run(cli: Cli, stdin: &mut dyn Read, stdout: &mut dyn Write) -> Result<i32, Failure> {
    match cli.command {
        Command::Check {
            io,
            tolerance,
            canonicalize,
        } => {
            let inst = read_instance(&io, stdin)?;
            let report = check_adequacy_with(
                &inst.supply,
                &inst.demand,
                &inst.partition,
                AdequacyOptions {
                    canonicalize,
                    tolerance,
                },
            )?;
            emit(&io.output, &to_json(&report), stdout)?;
            Ok(if report.adequate {
                EXIT_OK
            } else {
                EXIT_INADEQUATE
            })
        }
        Command::Allocate { io } => {
            let inst = read_instance(&io, stdin)?;
            let network = flow::build_network(&inst.supply, &inst.demand, &inst.partition)?;
            let required = network.required();
            let report = match flow::extract_allocation(&inst.supply, &inst.demand, &inst.partition)
            {
                Ok(m) => AllocationReport {
                    adequate: true,
                    max_flow: required,
                    required,
                    allocation: Some(m),
                    cut: None,
                },
                Err(Error::NotAdequate { witness, required }) => AllocationReport {
                    adequate: false,
                    max_flow: witness.capacity,
                    required,
                    allocation: None,
                    cut: Some(witness),
                },
                Err(e) => return Err(e.into()),
            };
            emit(&io.output, &to_json(&report), stdout)?;
            Ok(if report.adequate {
                EXIT_OK
            } else {
                EXIT_INADEQUATE
            })
        }
        Command::Market { io } => {
            let inst = read_instance(&io, stdin)?;
            let report = clear_market(&inst)?;
            emit(&io.output, &to_json(&report), stdout)?;
            if report.checks.all() {
                Ok(EXIT_OK)
            } else {
                Err(Failure(
                    EXIT_INTERNAL,
                    format!(
                        "constructed state failed equilibrium checks: {:?}",
                        report.checks
                    ),
                ))
            }
        }
        Command::Simulate {
            output,
            summary,
            seed,
            trials,
            loads_per_pair,
            pairs,
            partition,
            sweep,
            sequential,
        } => {
            let partition = match partition {
                Some(p) => {
                    let b = p
                        .split(',')
                        .map(|x| x.trim().parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| Failure(EXIT_INVALID, format!("invalid --partition `{p}`")))?;
                    TimePartition::new(b)?
                }
                None => TimePartition::new(PARKING_BREAKPOINTS.to_vec())?,
            };
            let pairs = parse_pairs(&pairs)?.resolve(&partition)?;
            let config = SimConfig {
                partition,
                pairs,
                loads_per_pair,
                trials,
                seed,
                parallel: !sequential,
                ..SimConfig::default()
            };
            let trace = match sweep {
                Some(s) => run_sweep(&config, &parse_sweep(&s)?)?,
                None => run_experiment(&config)?,
            };
            emit(&output, &trace.to_csv(), stdout)?;
            if let Some(path) = summary {
                fs::write(&path, to_json(&trace.summary)).map_err(|e| {
                    Failure(
                        EXIT_INTERNAL,
                        format!("cannot write {}: {e}", path.display()),
                    )
                })?;
            }
            Ok(EXIT_OK)
        }
    }
}

/// Runs one command; `args` includes the program name.
pub fn run_cli<I, T>(
    args: I,
    stdin: &mut dyn Read,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                EXIT_INVALID
            } else {
                let _ = write!(stdout, "{e}");
                EXIT_OK
            };
        }
    };
    match run(cli, stdin, stdout) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            code
        }
    }
}
