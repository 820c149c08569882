//! The flow problem on the unit ball and the sampled suprema of its data.

use serde::{Deserialize, Serialize};

use crate::closed_form::envelope_constant;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::params::{FlowParams, LelongAtom};

/// Problem data on the unit ball: `u0 = sum N_j log|z - a_j| + smooth`,
/// boundary values `phi(t)` and source `f(z, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowProblem {
    pub params: FlowParams,
    pub atoms: Vec<LelongAtom>,
    pub smooth: Expr,
    pub boundary: Expr,
    pub source: Expr,
}

impl FlowProblem {
    pub fn new(params: FlowParams, atoms: Vec<LelongAtom>, smooth: Expr, boundary: Expr, source: Expr) -> Result<Self> {
        for (j, a) in atoms.iter().enumerate() {
            if !a.is_inside_ball(1.0) {
                return Err(Error::scenario(
                    format!("initial.atoms[{j}].center"),
                    "atom must lie strictly inside the domain",
                ));
            }
        }
        smooth.validate("initial.smooth")?;
        boundary.validate("boundary.phi")?;
        source.validate("source.f")?;
        if !smooth.is_time_independent() {
            return Err(Error::scenario("initial.smooth", "initial datum cannot depend on t"));
        }
        Ok(FlowProblem {
            params,
            atoms,
            smooth,
            boundary,
            source,
        })
    }

    /// Every atom sits at the origin, so the datum is radial.
    pub fn is_radial(&self) -> bool {
        self.atoms.iter().all(|a| a.center().norm() == 0.0)
    }

    /// Total mass of the atoms located at the origin.
    pub fn origin_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.center().norm() == 0.0)
            .map(|a| a.mass())
            .sum()
    }

    /// Boundary value at time `t`; the data are radial, so it does not depend
    /// on the boundary point.
    pub fn boundary_value(&self, t: f64) -> f64 {
        self.boundary.value(1.0, t)
    }
}

/// Cached suprema of boundary and source data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataEnvelopes {
    pub sup_phi_dot: f64,
    pub sup_f_dot: f64,
    pub sup_abs_phi: f64,
    pub sup_abs_f: f64,
}

/// Boundary data `phi` sampled on boundary points × times and source `f`
/// sampled on closure points × times, each with its time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTimeData {
    times: Vec<f64>,
    /// `phi[k][p]` and `phi_dot[k][p]` at time `k`, boundary point `p`.
    phi: Vec<Vec<f64>>,
    phi_dot: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    f_dot: Vec<Vec<f64>>,
    envelopes: DataEnvelopes,
}

fn sup_abs(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
}

impl BoundaryTimeData {
    /// `phi(p, t)` and `f(q, t)` return `(value, time derivative)`.
    pub fn sample(
        times: Vec<f64>,
        boundary_points: usize,
        phi: impl Fn(usize, f64) -> (f64, f64),
        closure_points: usize,
        f: impl Fn(usize, f64) -> (f64, f64),
    ) -> Self {
        let mut out = BoundaryTimeData {
            phi: Vec::with_capacity(times.len()),
            phi_dot: Vec::with_capacity(times.len()),
            f: Vec::with_capacity(times.len()),
            f_dot: Vec::with_capacity(times.len()),
            times,
            envelopes: DataEnvelopes {
                sup_phi_dot: 0.0,
                sup_f_dot: 0.0,
                sup_abs_phi: 0.0,
                sup_abs_f: 0.0,
            },
        };
        for &t in &out.times {
            let (pv, pd): (Vec<f64>, Vec<f64>) = (0..boundary_points).map(|p| phi(p, t)).unzip();
            let (fv, fd): (Vec<f64>, Vec<f64>) = (0..closure_points).map(|q| f(q, t)).unzip();
            out.phi.push(pv);
            out.phi_dot.push(pd);
            out.f.push(fv);
            out.f_dot.push(fd);
        }
        out.envelopes = out.recompute_envelopes();
        out
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample_counts(&self) -> (usize, usize, usize) {
        (
            self.times.len(),
            self.phi.first().map_or(0, Vec::len),
            self.f.first().map_or(0, Vec::len),
        )
    }

    pub fn envelopes(&self) -> DataEnvelopes {
        self.envelopes
    }

    pub fn recompute_envelopes(&self) -> DataEnvelopes {
        DataEnvelopes {
            sup_phi_dot: sup_abs(&self.phi_dot),
            sup_f_dot: sup_abs(&self.f_dot),
            sup_abs_phi: sup_abs(&self.phi),
            sup_abs_f: sup_abs(&self.f),
        }
    }

    /// Envelope constant `2 sup|phi_t| + T sup|f_t| + n`.
    pub fn envelope_constant(&self, params: &FlowParams) -> f64 {
        envelope_constant(self.envelopes.sup_phi_dot, self.envelopes.sup_f_dot, params)
    }

    /// `sup_{t' <= t} sup_p |phi(p, t') - phi(p, 0)|` over the samples.
    pub fn boundary_oscillation(&self, t: f64) -> f64 {
        let Some(first) = self.phi.first() else {
            return 0.0;
        };
        self.times
            .iter()
            .zip(&self.phi)
            .take_while(|(&tk, _)| tk <= t)
            .flat_map(|(_, row)| row.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

/// Sample times: `coarse` uniform points on `[0, horizon]` merged with `fine`
/// uniform points on `[0, fine_end]`.
pub fn sample_times(horizon: f64, coarse: usize, fine_end: f64, fine: usize) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..=coarse).map(|k| horizon * k as f64 / coarse as f64).collect();
    if fine_end > 0.0 {
        let end = fine_end.min(horizon);
        ts.extend((0..=fine).map(|k| end * k as f64 / fine as f64));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}
