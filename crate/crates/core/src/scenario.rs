//! TOML scenario files: parsing, validation, rescaling to the unit ball and
//! the content hash that tags every record.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::DiagnosticSettings;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::params::{FlowParams, LelongAtom};
use crate::planar::PlanarMesh;
use crate::problem::FlowProblem;
use crate::radial::RadialMesh;
use crate::record::SolverKind;
use crate::stepping::TimeSchedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub n: u32,
    #[serde(alias = "A")]
    pub damping: f64,
    #[serde(alias = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSpec {
    /// Radius of the ball centered at the origin.
    pub radius: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec { radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub center: [f64; 2],
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub atoms: Vec<AtomSpec>,
    pub smooth: Expr,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySpec {
    /// Added to the boundary trace of the atom terms.
    pub phi: Expr,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub f: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    Auto,
    Radial,
    Planar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub solver: SolverChoice,
    /// Inner end of the radial mesh in `s = log|z|`.
    pub s_min: f64,
    pub radial_points: usize,
    /// Cells across the diameter of the planar grid.
    pub planar_cells: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            solver: SolverChoice::Auto,
            s_min: -11.0,
            radial_points: 551,
            planar_cells: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSpec {
    pub rungs: Vec<u32>,
    /// Also solve the unregularized problem (data without atoms only).
    pub exact: bool,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec {
            rungs: (3..=8).collect(),
            exact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSpec {
    /// Output spacing; ignored when `outputs` is non-empty.
    pub every: f64,
    pub outputs: Vec<f64>,
    /// Extra early output times.
    pub probes: Vec<f64>,
    pub dt_initial: f64,
    pub dt_max: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            every: 0.025,
            outputs: Vec::new(),
            probes: vec![1e-3],
            dt_initial: 1e-3,
            dt_max: 0.01,
        }
    }
}

/// A scenario as written in TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Label only; not part of the hash.
    #[serde(default)]
    pub name: String,
    pub params: ParamsSpec,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub ladder: LadderSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticSettings,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map_or_else(|| "<file>".to_string(), |s| line_of(text, s.start));
            Error::scenario(field, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// sha256 of the canonical JSON form with the label cleared.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.name.clear();
        let json = serde_json::to_string(&canon).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn line_of(text: &str, offset: usize) -> String {
    let line = text[..offset.min(text.len())].matches('\n').count() + 1;
    format!("line {line}")
}

/// A validated scenario, rescaled to the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub hash: String,
    pub problem: FlowProblem,
    pub solver: SolverKind,
    pub schedule: TimeSchedule,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::new(ScenarioFile::parse(text)?)
    }

    pub fn new(file: ScenarioFile) -> Result<Self> {
        let p = &file.params;
        let params =
            FlowParams::new(p.n, p.damping, p.horizon).map_err(|e| Error::scenario("params", e.to_string()))?;
        let radius = file.domain.radius;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::scenario("domain.radius", "radius must be finite and > 0"));
        }
        // u(z) on the ball of radius R becomes u(R w) on the unit ball: atom
        // centers scale by 1/R, each atom adds N ln R, and log det shifts by
        // -2n ln R, absorbed into the source.
        let ln_r = radius.ln();
        let mut atoms = Vec::with_capacity(file.initial.atoms.len());
        let mut smooth = file.initial.smooth.rescaled(radius);
        for (j, a) in file.initial.atoms.iter().enumerate() {
            let field = format!("initial.atoms[{j}]");
            if !(a.mass > 0.0) || !a.mass.is_finite() {
                return Err(Error::scenario(format!("{field}.mass"), "mass must be finite and > 0"));
            }
            let c = Complex64::new(a.center[0], a.center[1]) / radius;
            if !(c.norm() < 1.0) {
                return Err(Error::scenario(
                    format!("{field}.center"),
                    "atom must lie strictly inside the domain",
                ));
            }
            atoms.push(LelongAtom::new(c, a.mass).map_err(|e| Error::scenario(field.clone(), e.to_string()))?);
            if ln_r != 0.0 {
                smooth = smooth.plus(crate::expr::Monomial::new(a.mass * ln_r, crate::expr::Term::Const));
            }
        }
        let mut source = file.source.f.rescaled(radius);
        if ln_r != 0.0 {
            source = source.plus(crate::expr::Monomial::new(
                -2.0 * params.nf() * ln_r,
                crate::expr::Term::Const,
            ));
        }
        let problem = FlowProblem::new(params, atoms, smooth, file.boundary.phi.rescaled(radius), source)?;
        let solver = select_solver(&problem, file.mesh.solver)?;
        if !file.ladder.exact && file.ladder.rungs.is_empty() {
            return Err(Error::scenario("ladder", "no rungs and no exact solve requested"));
        }
        if file.ladder.exact && !problem.atoms.is_empty() {
            return Err(Error::scenario(
                "ladder.exact",
                "data with atoms can only be solved through the ladder",
            ));
        }
        if let Some(&m) = file.ladder.rungs.iter().find(|&&m| m == 0) {
            return Err(Error::scenario("ladder.rungs", format!("rung index {m} must be >= 1")));
        }
        if file.ladder.rungs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::scenario(
                "ladder.rungs",
                "rung indices must be strictly increasing",
            ));
        }
        let t = &file.time;
        let schedule = if t.outputs.is_empty() {
            TimeSchedule::uniform(params.horizon(), t.every, &t.probes, t.dt_initial, t.dt_max)
        } else {
            let mut outs = t.outputs.clone();
            outs.extend(&t.probes);
            outs.sort_by(f64::total_cmp);
            outs.dedup();
            TimeSchedule::new(outs, t.dt_initial, t.dt_max)
        }
        .map_err(|e| Error::scenario("time", e.to_string()))?;
        if schedule.end() > params.horizon() + 1e-12 {
            return Err(Error::scenario("time.outputs", "output times exceed the horizon"));
        }
        let d = &file.diagnostics;
        if !(d.barrier_fraction > 0.0 && d.barrier_fraction < 1.0) {
            return Err(Error::scenario("diagnostics.barrier_fraction", "must lie in (0, 1)"));
        }
        if !(d.dissolution_threshold > 0.0) {
            return Err(Error::scenario("diagnostics.dissolution_threshold", "must be > 0"));
        }
        let hash = file.hash();
        Ok(Scenario {
            file,
            hash,
            problem,
            solver,
            schedule,
        })
    }

    pub fn radial_mesh(&self, points: Option<usize>) -> Result<RadialMesh> {
        RadialMesh::new(
            self.problem.params.n(),
            self.file.mesh.s_min,
            points.unwrap_or(self.file.mesh.radial_points),
        )
        .map_err(|e| Error::scenario("mesh", e.to_string()))
    }

    pub fn planar_mesh(&self, cells: Option<usize>) -> Result<PlanarMesh> {
        PlanarMesh::new(cells.unwrap_or(self.file.mesh.planar_cells))
            .map_err(|e| Error::scenario("mesh", e.to_string()))
    }

    /// Rung indices to solve, `None` standing for the unregularized problem.
    pub fn rungs(&self) -> Vec<Option<u32>> {
        let mut out: Vec<Option<u32>> = self.file.ladder.rungs.iter().map(|&m| Some(m)).collect();
        if self.file.ladder.exact {
            out.push(None);
        }
        out
    }
}

/// Radial when every atom sits at the origin; planar for `n = 1` otherwise.
pub fn select_solver(problem: &FlowProblem, choice: SolverChoice) -> Result<SolverKind> {
    let radial_ok = problem.is_radial();
    let planar_ok = problem.params.n() == 1;
    match choice {
        SolverChoice::Auto if radial_ok => Ok(SolverKind::Radial),
        SolverChoice::Auto if planar_ok => Ok(SolverKind::Planar),
        SolverChoice::Auto => Err(Error::scenario(
            "mesh.solver",
            "non-radial data need the planar solver, which handles n = 1 only",
        )),
        SolverChoice::Radial if radial_ok => Ok(SolverKind::Radial),
        SolverChoice::Radial => Err(Error::scenario(
            "mesh.solver",
            "radial solver needs every atom at the origin",
        )),
        SolverChoice::Planar if planar_ok => Ok(SolverKind::Planar),
        SolverChoice::Planar => Err(Error::scenario("mesh.solver", "planar solver handles n = 1 only")),
    }
}
