use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pma_core::diagnostics::DiagnosticsReport;
use pma_core::export::{export_csv, Series};
use pma_core::run::{load_report, load_run_dir, run_scenario, verify_run_dir, write_run_dir, RunOptions};
use pma_core::scenario::{Scenario, SolverChoice};
use pma_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_DIAGNOSTICS: u8 = 3;

#[derive(Parser)]
#[command(name = "pmaflow", version, about = "Parabolic complex Monge-Ampere flow simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Radial,
    Planar,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every rung of a scenario and write a run directory.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to `runs/<scenario name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Deepest ladder rung.
        #[arg(long)]
        rungs: Option<u32>,
        /// Radial points or planar cells.
        #[arg(long)]
        mesh: Option<usize>,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
    },
    /// Write one series of a run directory as CSV.
    Export {
        run: PathBuf,
        /// profile, lelong or envelopes
        #[arg(long)]
        series: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute all diagnostics from the stored records.
    Verify { run: PathBuf },
}

fn fail(code: u8, err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn error_code(err: &Error) -> u8 {
    match err {
        Error::NewtonDivergence { .. }
        | Error::ConeViolation { .. }
        | Error::RunFailed { .. }
        | Error::NonPositiveHessian { .. }
        | Error::NotPositiveDefinite => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

fn print_report(report: &DiagnosticsReport) {
    for v in &report.verdicts {
        let mark = if v.passed { "pass" } else { "FAIL" };
        println!("{mark} {:<40} margin {:+.3e}  {}", v.name, v.margin, v.detail);
    }
    for a in &report.atoms {
        println!(
            "atom {} mass {} dissolution {:?} predicted {:.4}",
            a.atom, a.mass, a.dissolution, a.predicted_dissolution
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
}

fn verdict_code(report: &DiagnosticsReport) -> ExitCode {
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DIAGNOSTICS)
    }
}

fn run(path: &Path, out: Option<PathBuf>, opts: RunOptions) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
    };
    let scenario = match Scenario::from_toml(&text) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
    };
    let outcome = match run_scenario(&scenario, &opts) {
        Ok(o) => o,
        Err(e) => return fail(error_code(&e), e),
    };
    let dir = out.unwrap_or_else(|| {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        let name = if scenario.file.name.is_empty() {
            stem
        } else {
            &scenario.file.name
        };
        PathBuf::from("runs").join(name)
    });
    if let Err(e) = write_run_dir(&dir, &text, &outcome) {
        return fail(EXIT_USAGE, e);
    }
    println!(
        "{} rungs on the {:?} mesh written to {}",
        outcome.records.len(),
        outcome.solver,
        dir.display()
    );
    print_report(&outcome.report);
    verdict_code(&outcome.report)
}

fn export(dir: &Path, series: &str, out: Option<PathBuf>) -> ExitCode {
    let result = series.parse::<Series>().and_then(|series| {
        let (_, records) = load_run_dir(dir)?;
        let report = load_report(dir)?;
        export_csv(series, &records, &report)
    });
    let csv = match result {
        Ok(c) => c,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    match out {
        Some(p) => match fs::write(&p, csv) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(EXIT_USAGE, format!("{}: {e}", p.display())),
        },
        None => match std::io::stdout().lock().write_all(csv.as_bytes()) {
            Err(e) if e.kind() != ErrorKind::BrokenPipe => fail(EXIT_USAGE, e),
            _ => ExitCode::SUCCESS,
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run {
            scenario,
            out,
            rungs,
            mesh,
            solver,
        } => {
            let opts = RunOptions {
                deepest_rung: rungs,
                mesh,
                solver: solver.map(|s| match s {
                    SolverArg::Radial => SolverChoice::Radial,
                    SolverArg::Planar => SolverChoice::Planar,
                }),
            };
            run(&scenario, out, opts)
        }
        Command::Export {
            run,
            series,
            format: Format::Csv,
            out,
        } => export(&run, &series, out),
        Command::Verify { run } => match verify_run_dir(&run) {
            Ok(report) => {
                print_report(&report);
                verdict_code(&report)
            }
            Err(e) => fail(EXIT_USAGE, e),
        },
    }
}
