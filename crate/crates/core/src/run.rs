//! Scenario orchestration: one solve per rung, diagnostics, and the run
//! directory layout (`scenario.toml`, `rung_*.json`, `report.json`).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::diagnostics::{diagnose, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::planar::planar_run;
use crate::radial::run_flow;
use crate::record::{RunRecord, SolverKind};
use crate::regularize::{build_planar_rung, build_radial_rung};
use crate::scenario::{select_solver, Scenario, SolverChoice};

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const REPORT_FILE: &str = "report.json";

/// Command-line overrides of the scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Deepest rung; the ladder then runs from its first rung (or 1) up to it.
    pub deepest_rung: Option<u32>,
    /// Radial points or planar cells.
    pub mesh: Option<usize>,
    pub solver: Option<SolverChoice>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solver: SolverKind,
    pub records: Vec<RunRecord>,
    pub report: DiagnosticsReport,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.report.all_passed()
    }
}

fn ladder(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Option<u32>>> {
    let Some(last) = opts.deepest_rung else {
        return Ok(scenario.rungs());
    };
    if last == 0 {
        return Err(Error::scenario("--rungs", "deepest rung must be >= 1"));
    }
    let first = scenario.file.ladder.rungs.first().copied().unwrap_or(1).min(last);
    let mut out: Vec<Option<u32>> = (first..=last).map(Some).collect();
    if scenario.file.ladder.exact {
        out.push(None);
    }
    Ok(out)
}

/// Solves every rung (in parallel) and diagnoses the results.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutcome> {
    let solver = match opts.solver {
        Some(choice) => select_solver(&scenario.problem, choice)?,
        None => scenario.solver,
    };
    let rungs = ladder(scenario, opts)?;
    let problem = &scenario.problem;
    let schedule = &scenario.schedule;
    let hash = scenario.hash.as_str();
    let records: Vec<RunRecord> = match solver {
        SolverKind::Radial => {
            let mesh = scenario.radial_mesh(opts.mesh)?;
            rungs
                .par_iter()
                .map(|&m| run_flow(&mesh, &build_radial_rung(problem, &mesh, m)?, problem, schedule, hash))
                .collect::<Result<_>>()?
        }
        SolverKind::Planar => {
            let mesh = scenario.planar_mesh(opts.mesh)?;
            rungs
                .par_iter()
                .map(|&m| planar_run(&mesh, &build_planar_rung(problem, &mesh, m)?, problem, schedule, hash))
                .collect::<Result<_>>()?
        }
    };
    let report = diagnose(problem, &records, &scenario.file.diagnostics)?;
    Ok(RunOutcome {
        solver,
        records,
        report,
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| io_err(&path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Writes the scenario source, one file per rung and the report.
pub fn write_run_dir(dir: &Path, scenario_text: &str, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write(dir.join(SCENARIO_FILE), scenario_text)?;
    for r in &outcome.records {
        write(dir.join(format!("{}.json", r.rung.label())), &r.to_json()?)?;
    }
    write(dir.join(REPORT_FILE), &outcome.report.to_json()?)
}

/// The scenario and rung records stored in a run directory, rungs ordered
/// by index with the unregularized solve last.
pub fn load_run_dir(dir: &Path) -> Result<(Scenario, Vec<RunRecord>)> {
    let scenario = Scenario::from_toml(&read(&dir.join(SCENARIO_FILE))?)?;
    let mut records = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if name.starts_with("rung_") && name.ends_with(".json") {
            let r = RunRecord::from_json(&read(&path)?)?;
            if r.scenario_hash != scenario.hash {
                return Err(Error::Io(format!(
                    "{}: scenario hash does not match {SCENARIO_FILE}",
                    path.display()
                )));
            }
            records.push(r);
        }
    }
    if records.is_empty() {
        return Err(Error::Io(format!("{}: no rung records", dir.display())));
    }
    records.sort_by_key(|r| r.rung.m.unwrap_or(u32::MAX));
    Ok((scenario, records))
}

pub fn load_report(dir: &Path) -> Result<DiagnosticsReport> {
    DiagnosticsReport::from_json(&read(&dir.join(REPORT_FILE))?)
}

/// Recomputes every diagnostic from the stored records.
pub fn verify_run_dir(dir: &Path) -> Result<DiagnosticsReport> {
    let (scenario, records) = load_run_dir(dir)?;
    diagnose(&scenario.problem, &records, &scenario.file.diagnostics)
}
