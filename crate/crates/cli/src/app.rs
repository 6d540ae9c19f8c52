//! Argument parsing and command execution.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use metrotropy::{
    decide_unistochastic, ergotropy, metrotropy_matching, project_bloch, qubit_ergotropy, qubit_metrotropy,
    verify_metrotropy, BistochasticMatrix, BlochVector, ExtractionReport, OptimizerConfig, QubitSystem, SearchStatus,
    StationarySystem, UnistochasticVerdict, VerificationReport,
};
use serde::Serialize;

use crate::render::{complex_matrix, field, num, real_matrix, vector};
use crate::scan;

pub const EXIT_OK: i32 = 0;
/// Refuted unistochasticity, or a verification gap above [`GAP_TOL`].
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
/// Malformed input, invalid arguments or I/O failure.
pub const EXIT_INVALID: i32 = 3;

/// Largest `|gap|` that `verify` accepts.
pub const GAP_TOL: f64 = 1e-3;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "metrotropy", version, about = "Energy extraction by unitaries and by measurements")]
pub struct Cli {
    /// Output format; `scan` defaults to csv, everything else to text.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for the multistart optimizer.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Optimizer convergence tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Number of optimizer starts.
    #[arg(long, global = true)]
    multistarts: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ergotropy and metrotropy of a stationary state.
    Compute {
        /// Comma-separated level energies.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        energies: Vec<f64>,
        /// Comma-separated populations, one per level, summing to 1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        populations: Vec<f64>,
    },
    /// Both quantities over a grid on the population simplex.
    Scan {
        /// Comma-separated level energies.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1")]
        energies: Vec<f64>,
        /// Grid spacing; must divide 1.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Numerical minimum of the post-measurement energy against the closed form.
    Verify {
        /// Comma-separated level energies.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        energies: Vec<f64>,
        /// Comma-separated populations, one per level, summing to 1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        populations: Vec<f64>,
        /// Iteration budget per optimizer start.
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Decide whether a bistochastic matrix (JSON array of rows, or CSV) is unistochastic.
    CheckUnistochastic {
        /// Path to a `.json` or `.csv` file.
        file: PathBuf,
        /// Iteration budget per optimizer start.
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Ergotropy and metrotropy of a qubit with H = bz σz.
    Bloch {
        /// Field strength; must be positive.
        #[arg(long, allow_hyphen_values = true)]
        bz: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        rx: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        ry: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        rz: f64,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let line = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{line}");
            return EXIT_INVALID;
        }
    };
    match execute(&cli) {
        Ok(output) => {
            let written = match &cli.out {
                Some(path) => fs::write(path, &output.body).with_context(|| format!("cannot write {}", path.display())),
                None => stdout.write_all(output.body.as_bytes()).context("cannot write to stdout"),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e:#}");
                return EXIT_INVALID;
            }
            for warning in &output.warnings {
                let _ = writeln!(stderr, "warning: {warning}");
            }
            output.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_INVALID
        }
    }
}

struct Output {
    body: String,
    code: i32,
    warnings: Vec<String>,
}

impl Output {
    fn ok(body: String) -> Self {
        Self { body, code: EXIT_OK, warnings: Vec::new() }
    }
}

fn execute(cli: &Cli) -> Result<Output> {
    let format = cli.format.unwrap_or(match cli.command {
        Command::Scan { .. } => Format::Csv,
        _ => Format::Text,
    });
    match &cli.command {
        Command::Compute { energies, populations } => compute(energies, populations, format),
        Command::Scan { energies, step } => scan_command(energies, *step, format),
        Command::Verify { energies, populations, max_iterations } => {
            verify(energies, populations, &config(cli, *max_iterations)?, format)
        }
        Command::CheckUnistochastic { file, max_iterations } => {
            check_unistochastic(file, &config(cli, *max_iterations)?, format)
        }
        Command::Bloch { bz, rx, ry, rz } => bloch(*bz, [*rx, *ry, *rz], format),
    }
}

fn config(cli: &Cli, max_iterations: Option<usize>) -> Result<OptimizerConfig> {
    let mut cfg = OptimizerConfig { seed: cli.seed, ..OptimizerConfig::default() };
    if let Some(tol) = cli.tol {
        cfg.convergence_tol = tol;
    }
    if let Some(m) = cli.multistarts {
        cfg.multistarts = m;
    }
    if let Some(it) = max_iterations {
        cfg.max_iterations = it;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct ReportJson<'a> {
    #[serde(flatten)]
    report: &'a ExtractionReport,
    cycles: String,
}

impl<'a> ReportJson<'a> {
    fn new(report: &'a ExtractionReport) -> Self {
        Self { report, cycles: report.optimal_permutation.to_string() }
    }
}

#[derive(Serialize)]
struct ComputeJson<'a> {
    schema_version: u32,
    command: &'static str,
    system: &'a StationarySystem,
    ergotropy: ReportJson<'a>,
    metrotropy: ReportJson<'a>,
}

fn compute(energies: &[f64], populations: &[f64], format: Format) -> Result<Output> {
    let sys = StationarySystem::new(energies.to_vec(), populations.to_vec())?;
    let erg = ergotropy(&sys);
    let met = metrotropy_matching(&sys);
    let body = match format {
        Format::Json => to_json(&ComputeJson {
            schema_version: SCHEMA_VERSION,
            command: "compute",
            system: &sys,
            ergotropy: ReportJson::new(&erg),
            metrotropy: ReportJson::new(&met),
        })?,
        Format::Csv => {
            let mut s = String::from("kind,value,initial_energy,final_energy,permutation\n");
            for (kind, r) in [("ergotropy", &erg), ("metrotropy", &met)] {
                let _ = writeln!(
                    s,
                    "{kind},{},{},{},{}",
                    num(r.value),
                    num(r.initial_energy),
                    num(r.final_energy),
                    r.optimal_permutation
                );
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            s += &field("energies", vector(sys.energies()));
            s += &field("populations", vector(sys.populations()));
            s += &field("initial energy", num(erg.initial_energy));
            for (title, r) in [("ergotropy", &erg), ("metrotropy", &met)] {
                s.push('\n');
                s += &field(title, num(r.value));
                s += &field("  final energy", num(r.final_energy));
                s += &field("  permutation", &r.optimal_permutation);
                s += "  channel\n";
                s += &real_matrix(&r.channel, "    ");
                s += "  unitary\n";
                s += &complex_matrix(&r.realizing_unitary, "    ");
            }
            s
        }
    };
    Ok(Output::ok(body))
}

#[derive(Serialize)]
struct ScanJson<'a> {
    schema_version: u32,
    command: &'static str,
    energies: &'a [f64],
    step: f64,
    rows: &'a [scan::ScanRow],
}

fn scan_command(energies: &[f64], step: f64, format: Format) -> Result<Output> {
    let rows = scan::scan(energies, step)?;
    let body = match format {
        Format::Json => {
            to_json(&ScanJson { schema_version: SCHEMA_VERSION, command: "scan", energies, step, rows: &rows })?
        }
        // The table is already plain text; both formats share it.
        Format::Csv | Format::Text => {
            let mut buf = Vec::new();
            scan::write_csv(&rows, energies.len(), &mut buf)?;
            String::from_utf8(buf)?
        }
    };
    Ok(Output::ok(body))
}

#[derive(Serialize)]
struct VerifyJson<'a> {
    schema_version: u32,
    command: &'static str,
    system: &'a StationarySystem,
    report: &'a VerificationReport,
    analytic_cycles: String,
    within_tolerance: bool,
}

fn verify(energies: &[f64], populations: &[f64], cfg: &OptimizerConfig, format: Format) -> Result<Output> {
    let sys = StationarySystem::new(energies.to_vec(), populations.to_vec())?;
    let report = verify_metrotropy(&sys, cfg)?;
    let ok = report.gap.abs() <= GAP_TOL;
    let status = match report.status {
        SearchStatus::Converged => "converged",
        SearchStatus::NoStartConverged => "no start converged",
    };
    let body = match format {
        Format::Json => to_json(&VerifyJson {
            schema_version: SCHEMA_VERSION,
            command: "verify",
            system: &sys,
            report: &report,
            analytic_cycles: report.analytic_permutation.to_string(),
            within_tolerance: ok,
        })?,
        Format::Csv => {
            let mut s = String::from(
                "numerical_min,analytic_min,gap,status,starts_converged,channel_distance,unique_optimum\n",
            );
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                num(report.numerical_min),
                num(report.analytic_min),
                num(report.gap),
                status.replace(' ', "_"),
                report.starts_converged,
                report.channel_distance.map(num).unwrap_or_default(),
                report.unique_optimum.map(|u| u.to_string()).unwrap_or_default(),
            );
            s
        }
        Format::Text => {
            let mut s = String::new();
            s += &field("numerical minimum", num(report.numerical_min));
            s += &field("analytic minimum", num(report.analytic_min));
            s += &field("gap", num(report.gap));
            s += &field(
                "status",
                format!("{status}, {} of {} starts", report.starts_converged, report.config.multistarts),
            );
            s += &field("sigma_M", &report.analytic_permutation);
            if let Some(d) = report.channel_distance {
                s += &field("channel distance", num(d));
            }
            if let Some(u) = report.unique_optimum {
                s += &field("unique optimum", if u { "yes" } else { "no" });
            }
            s += &field("result", if ok { "agrees" } else { "disagrees" });
            s += "best channel\n";
            s += &real_matrix(&report.best_channel, "  ");
            s
        }
    };
    let mut out = Output::ok(body);
    if report.status == SearchStatus::NoStartConverged {
        out.warnings.push("no optimizer start met the convergence tolerance".into());
    }
    if !ok {
        out.code = EXIT_FAIL;
    }
    Ok(out)
}

/// Reads a square matrix from a `.json` array of rows or a headerless `.csv`.
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("json") => {
            serde_json::from_str(&text).with_context(|| format!("{} is not a JSON array of rows", path.display()))
        }
        Some("csv") => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .trim(csv::Trim::All)
                .flexible(true)
                .from_reader(text.as_bytes());
            let mut rows = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let record = record.with_context(|| format!("{}: bad CSV record", path.display()))?;
                let row = record
                    .iter()
                    .map(|f| {
                        f.parse::<f64>().with_context(|| format!("{}: row {i}: '{f}' is not a number", path.display()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
            Ok(rows)
        }
        _ => bail!("{}: expected a .json or .csv file", path.display()),
    }
}

#[derive(Serialize)]
struct CheckJson<'a> {
    schema_version: u32,
    command: &'static str,
    matrix: Vec<Vec<f64>>,
    #[serde(flatten)]
    verdict: &'a UnistochasticVerdict,
}

fn check_unistochastic(path: &Path, cfg: &OptimizerConfig, format: Format) -> Result<Output> {
    let rows = read_matrix(path)?;
    let b = BistochasticMatrix::from_rows(&rows).context("not a bistochastic matrix")?;
    let verdict = decide_unistochastic(&b, cfg)?;
    let name = match verdict {
        UnistochasticVerdict::Certified { .. } => "certified",
        UnistochasticVerdict::Refuted { .. } => "refuted",
        UnistochasticVerdict::Inconclusive { .. } => "inconclusive",
    };
    let body = match format {
        Format::Json => to_json(&CheckJson {
            schema_version: SCHEMA_VERSION,
            command: "check-unistochastic",
            matrix: b.rows(),
            verdict: &verdict,
        })?,
        Format::Csv => format!("verdict,residual\n{name},{}\n", num(verdict.residual())),
        Format::Text => {
            let mut s = field("verdict", name) + &field("residual", num(verdict.residual()));
            if let UnistochasticVerdict::Certified { witness, .. } = &verdict {
                s += "witness\n";
                s += &complex_matrix(witness, "  ");
            }
            s
        }
    };
    Ok(Output { body, code: verdict.exit_code(), warnings: Vec::new() })
}

#[derive(Serialize)]
struct BlochJson {
    schema_version: u32,
    command: &'static str,
    bz: f64,
    bloch: BlochVector,
    energy: f64,
    ergotropy: f64,
    metrotropy: f64,
    direction: BlochVector,
    post_measurement: BlochVector,
}

fn bloch(bz: f64, r: [f64; 3], format: Format) -> Result<Output> {
    let r = BlochVector::new(r[0], r[1], r[2])?;
    let q = QubitSystem::new(bz, r)?;
    let w = qubit_ergotropy(&q);
    let m = qubit_metrotropy(&q);
    let after = project_bloch(&r, &m.direction)?;
    let xyz = |v: &BlochVector| [v.x(), v.y(), v.z()];
    let body = match format {
        Format::Json => to_json(&BlochJson {
            schema_version: SCHEMA_VERSION,
            command: "bloch",
            bz,
            bloch: r,
            energy: q.energy(),
            ergotropy: w,
            metrotropy: m.value,
            direction: m.direction,
            post_measurement: after,
        })?,
        Format::Csv => {
            let d = xyz(&m.direction);
            format!(
                "ergotropy,metrotropy,nx,ny,nz\n{},{},{},{},{}\n",
                num(w),
                num(m.value),
                num(d[0]),
                num(d[1]),
                num(d[2])
            )
        }
        Format::Text => {
            let mut s = String::new();
            s += &field("energy", num(q.energy()));
            s += &field("ergotropy", num(w));
            s += &field("metrotropy", num(m.value));
            s += &field("axis", vector(&xyz(&m.direction)));
            s += &field("after measuring", vector(&xyz(&after)));
            s
        }
    };
    Ok(Output::ok(body))
}
