//! Command-line front end.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use spincorr_core::inference::{scan_observable_with, GridSpec, ObservableKind, SignificanceSide};
use spincorr_core::{physicality_of_vector, QuadratureSpec};

use crate::analysis::{run_analysis, AnalysisError};
use crate::input::{parse_input_path, parse_observable_list, AnalysisRequest, InputError};
use crate::oracle::{discord_agreement, magic_agreement, steering_agreement, Agreement};
use crate::report::{emit_report, Report, ReportFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_IO: i32 = 74;

/// Allowed negative eigenvalue when reporting physicality of observed coefficients.
const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "spincorr",
    version,
    about = "Quantum-correlation markers with profile-likelihood intervals for measured spin-correlation coefficients"
)]
struct Cli {
    /// Seed for the randomized oracle checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Convergence tolerance of the discord direction search, in radians.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an input file and report the physicality of every bin.
    Validate { file: PathBuf },
    /// Central values, 68% intervals and threshold significances for every bin.
    Compute {
        file: PathBuf,
        /// Comma-separated observable names (default: all).
        #[arg(long, value_delimiter = ',')]
        observables: Option<Vec<String>>,
        /// table, csv, json or plot.
        #[arg(long, default_value = "table", value_parser = parse_format)]
        format: ReportFormat,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The -2 log L profile of one observable in one bin.
    Scan {
        file: PathBuf,
        #[arg(long)]
        observable: String,
        /// Bin label; may be omitted when the file has a single bin.
        #[arg(long)]
        bin: Option<String>,
        /// Explicit grid `lo:hi:n` (default: automatic).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Agreement of the production algorithms with the brute-force references.
    Oracle {
        #[arg(value_enum)]
        check: OracleCheck,
        /// Number of random states.
        #[arg(long)]
        states: Option<usize>,
        /// Monte Carlo samples per steering check.
        #[arg(long, default_value_t = 10_000_000)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleCheck {
    Discord,
    Steering,
    Magic,
    All,
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::from_name(s)
        .ok_or_else(|| format!("unknown format `{s}` (expected table, csv, json or plot)"))
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        let code = if matches!(e, InputError::Io { .. }) {
            EXIT_NO_INPUT
        } else {
            EXIT_VALIDATION
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn core_code(e: &spincorr_core::Error) -> i32 {
    match e {
        spincorr_core::Error::Validation(_) => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure {
            code: core_code(&e.source),
            message: e.to_string(),
        }
    }
}

impl From<spincorr_core::Error> for Failure {
    fn from(e: spincorr_core::Error) -> Self {
        Failure {
            code: core_code(&e),
            message: e.to_string(),
        }
    }
}

fn io_failure(what: &Path, e: io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("cannot write {}: {e}", what.display()),
    }
}

/// Runs the program on `std::env::args_os()`-style arguments, returning the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`cli_main`] with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(cli: &Cli, file: &Path, err: &mut dyn Write) -> Result<AnalysisRequest, Failure> {
    let mut req = parse_input_path(file)?;
    for w in &req.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    req.options.threads = cli.threads.map(|n| n as usize);
    if let Some(t) = cli.tolerance {
        if !(t > 0.0) {
            return Err(Failure {
                code: EXIT_USAGE,
                message: format!("--tolerance must be positive, got {t}"),
            });
        }
        req.options.discord.xtol = t;
    }
    Ok(req)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_failure(p, e)),
        None => out
            .write_all(bytes)
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Validate { file } => validate(cli, file, out, err),
        Command::Compute {
            file,
            observables,
            format,
            out: path,
        } => {
            let mut req = load(cli, file, err)?;
            if let Some(names) = observables {
                req.observables = parse_observable_list(names.iter().map(String::as_str))?;
            }
            let rows = run_analysis(&req)?;
            let report = Report {
                rows,
                options: req.options,
            };
            emit(out, path.as_deref(), &emit_report(&report, *format))?;
            Ok(EXIT_OK)
        }
        Command::Scan {
            file,
            observable,
            bin,
            grid,
            out: path,
        } => scan(
            cli,
            file,
            observable,
            bin.as_deref(),
            grid.as_deref(),
            path.as_deref(),
            out,
            err,
        ),
        Command::Oracle {
            check,
            states,
            samples,
        } => oracle(cli, *check, *states, *samples, out),
    }
}

fn validate(
    cli: &Cli,
    file: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let req = load(cli, file, err)?;
    let mut text = format!("{}: {} bin(s) valid\n", file.display(), req.records.len());
    let mut unphysical = 0;
    for r in &req.records {
        let p = physicality_of_vector(&r.observed, PHYSICALITY_TOL);
        if !p.is_physical {
            unphysical += 1;
        }
        text += &format!(
            "  {}: {} basis, min eigenvalue {:.3e}, {}\n",
            r.label,
            r.basis.name(),
            p.min_eigenvalue,
            if p.is_physical {
                "physical"
            } else {
                "unphysical"
            }
        );
    }
    if unphysical > 0 {
        text += &format!(
            "  {unphysical} bin(s) have observed coefficients outside the state space; \
             intervals are still defined over physical states\n"
        );
    }
    emit(out, None, text.as_bytes())?;
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn scan(
    cli: &Cli,
    file: &Path,
    observable: &str,
    bin: Option<&str>,
    grid: Option<&str>,
    path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let req = load(cli, file, err)?;
    let kind = ObservableKind::from_name(observable).ok_or_else(|| Failure {
        code: EXIT_USAGE,
        message: format!("unknown observable `{observable}`"),
    })?;
    let record = match bin {
        Some(label) => req
            .records
            .iter()
            .find(|r| r.label == label)
            .ok_or_else(|| Failure {
                code: EXIT_VALIDATION,
                message: format!("no bin labelled `{label}` in {}", file.display()),
            })?,
        None if req.records.len() == 1 => &req.records[0],
        None => {
            return Err(Failure {
                code: EXIT_USAGE,
                message: format!(
                    "{} has {} bins; choose one with --bin",
                    file.display(),
                    req.records.len()
                ),
            })
        }
    };
    let grid = match grid {
        Some(s) => GridSpec::parse_explicit(s).map_err(|e| Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        })?,
        None => req.options.grid,
    };
    let obs = req.options.observable(kind);
    let s = scan_observable_with(record, &obs, grid, req.options.profile).map_err(|source| {
        AnalysisError {
            label: record.label.clone(),
            observable: kind,
            source,
        }
    })?;

    let mut text = format!("# observable {kind}, bin {}\n", record.label);
    text += &format!("# central {}\n", s.central);
    text += &format!(
        "# ci68 {} {} (boundary low {}, high {})\n",
        s.ci68_low, s.ci68_high, s.at_boundary_low, s.at_boundary_high
    );
    text += &format!("# chi2_min {}\n", s.chi2_min);
    if let Some(sig) = s.significance {
        let side = match sig.side {
            SignificanceSide::Above => "above",
            SignificanceSide::Below => "below",
        };
        text += &format!(
            "# significance {} (best fit {side} threshold {}{})\n",
            sig.sigma,
            sig.threshold,
            if sig.unattainable {
                ", unattainable"
            } else {
                ""
            }
        );
    }
    text += "# value delta_chi2\n";
    for (v, d) in &s.curve {
        text += &format!("{v} {d}\n");
    }
    emit(out, path, text.as_bytes())?;
    Ok(EXIT_OK)
}

fn oracle(
    cli: &Cli,
    check: OracleCheck,
    states: Option<usize>,
    samples: usize,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let mut discord_opts = spincorr_core::DiscordOptions::default();
    if let Some(t) = cli.tolerance {
        discord_opts.xtol = t;
    }
    let run_checks = || -> Result<Vec<Agreement>, Failure> {
        let mut results = Vec::new();
        if matches!(check, OracleCheck::Discord | OracleCheck::All) {
            results.push(discord_agreement(
                states.unwrap_or(200),
                cli.seed,
                &discord_opts,
            )?);
        }
        if matches!(check, OracleCheck::Steering | OracleCheck::All) {
            results.push(steering_agreement(
                states.unwrap_or(50),
                samples,
                cli.seed,
                &QuadratureSpec::default(),
            )?);
        }
        if matches!(check, OracleCheck::Magic | OracleCheck::All) {
            results.push(magic_agreement()?);
        }
        Ok(results)
    };
    let results = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map_err(|e| Failure {
                code: EXIT_USAGE,
                message: e.to_string(),
            })?
            .install(run_checks)?,
        None => run_checks()?,
    };
    let mut text = String::new();
    for r in &results {
        text += &r.summary();
        text.push('\n');
    }
    emit(out, None, text.as_bytes())?;
    Ok(if results.iter().all(Agreement::passed) {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    })
}
