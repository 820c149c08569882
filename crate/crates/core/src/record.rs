//! Time-indexed output of one solve: snapshots, rung metadata and solver
//! statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::FlowParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Radial,
    Planar,
}

/// Enough to rebuild the mesh a record was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshInfo {
    Radial { n: u32, s_min: f64, points: usize },
    Planar { cells: usize },
}

/// Which problem of the ladder a record solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungInfo {
    /// Ladder index; `None` for the unregularized problem.
    pub m: Option<u32>,
    /// Cutoff depth actually applied (the index capped by mesh resolution).
    pub depth: Option<u32>,
    pub eps: f64,
    /// Measured `sup over the boundary |u0_m - u0|`.
    pub delta: f64,
    pub sup_abs_g: f64,
}

impl RungInfo {
    pub fn label(&self) -> String {
        match self.m {
            Some(m) => format!("rung_{m}"),
            None => "rung_exact".to_string(),
        }
    }
}

/// Suprema of the solved problem's data, as used by the envelope and
/// continuity bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `2 sup|phi_m,t| + T sup|f_t| + n`.
    pub envelope_b: f64,
    pub sup_phi_dot: f64,
    pub sup_f_dot: f64,
    pub sup_abs_phi: f64,
    pub sup_abs_f: f64,
    pub time_samples: usize,
    pub space_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// Values at the unknown nodes of the mesh.
    pub values: Vec<f64>,
    /// Backward difference of the last step; absent at `t = 0`.
    pub udot: Option<Vec<f64>>,
    /// Boundary values at this time.
    pub boundary: Vec<f64>,
    /// `sup_{t' <= t} sup |phi_m(t') - phi_m(0)|`.
    pub boundary_osc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub max_newton_iterations: usize,
    pub max_residual: f64,
    pub dt_halvings: usize,
    pub min_dt: f64,
    pub max_dt: f64,
}

impl SolverStats {
    pub(crate) fn record_step(&mut self, dt: f64, iterations: usize, residual: f64) {
        if self.steps == 0 {
            self.min_dt = dt;
        }
        self.steps += 1;
        self.newton_iterations += iterations;
        self.max_newton_iterations = self.max_newton_iterations.max(iterations);
        self.max_residual = self.max_residual.max(residual);
        self.min_dt = self.min_dt.min(dt);
        self.max_dt = self.max_dt.max(dt);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_hash: String,
    pub solver: SolverKind,
    pub params: FlowParams,
    pub mesh: MeshInfo,
    pub rung: RungInfo,
    pub bounds: BoundInputs,
    pub snapshots: Vec<Snapshot>,
    pub stats: SolverStats,
}

impl RunRecord {
    /// Times strictly increasing, all values finite, first snapshot at `t = 0`.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Io(format!("{}: {reason}", self.rung.label())));
        if self.snapshots.is_empty() {
            return bad("no snapshots".into());
        }
        if self.snapshots[0].t != 0.0 {
            return bad("first snapshot is not at t = 0".into());
        }
        for w in self.snapshots.windows(2) {
            if !(w[1].t > w[0].t) {
                return bad(format!("snapshot times not increasing at t = {}", w[1].t));
            }
        }
        let len = self.snapshots[0].values.len();
        for s in &self.snapshots {
            if s.values.len() != len {
                return bad(format!("snapshot at t = {} has wrong length", s.t));
            }
            let finite = s
                .values
                .iter()
                .chain(s.udot.iter().flatten())
                .chain(&s.boundary)
                .all(|v| v.is_finite());
            if !finite {
                return bad(format!("non-finite value at t = {}", s.t));
            }
        }
        Ok(())
    }

    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    /// Snapshot whose time is within `1e-12` of `t`.
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-12)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunRecord = serde_json::from_str(text).map_err(|e| Error::Io(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }
}
