//! Radial reduction on the unit ball in `C^n`: `u(z) = v(log|z|)` on a
//! uniform grid in `s = log r`, stepped by backward Euler and Newton.
//!
//! Profiles are stored as a base value at `s_min` plus the increments between
//! neighbouring nodes. Near the vertex the values are large and nearly
//! constant while the increments are tiny, so differencing stored values
//! would lose every digit that the second derivative needs.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::problem::{sample_times, BoundaryTimeData, FlowProblem};
use crate::record::{BoundInputs, MeshInfo, RunRecord, Snapshot, SolverKind};
use crate::regularize::{InitialProfile, LadderRung};
use crate::stepping::{
    drive, solve_tridiagonal, StepOutcome, TimeSchedule, NEWTON_ITERATION_CAP, NEWTON_TOLERANCE_RADIAL,
};

/// Lower bound on the complex Hessian eigenvalues of admissible profiles.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;
pub const MIN_RADIAL_POINTS: usize = 100;

/// `det(u_{a b̄})` for `u(z) = v(log|z|)`: `v'' v'^{n-1} e^{-2ns} / 2^{n+1}`.
pub fn radial_ma_det(vp: f64, vpp: f64, s: f64, n: u32) -> f64 {
    let n = n as i32;
    vpp * vp.powi(n - 1) * (-2.0 * n as f64 * s).exp() / 2f64.powi(n + 1)
}

/// Uniform grid on `[s_min, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMesh {
    n: u32,
    s_min: f64,
    points: usize,
    h: f64,
    /// Weights of the first-derivative stencil on the left and right
    /// increments.
    alpha: f64,
    beta: f64,
    /// `sinh(h)^2`, the second-derivative denominator.
    sinh2: f64,
    /// Ratio of the ghost increment below `s_min` to the first increment.
    ghost: f64,
}

impl RadialMesh {
    pub fn new(n: u32, s_min: f64, points: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "complex dimension must be >= 1"));
        }
        if !(s_min < 0.0) || !s_min.is_finite() {
            return Err(Error::invalid("s_min", "must be finite and < 0"));
        }
        if points < MIN_RADIAL_POINTS {
            return Err(Error::invalid(
                "points",
                format!("need at least {MIN_RADIAL_POINTS} points"),
            ));
        }
        let h = -s_min / (points - 1) as f64;
        let sinh2 = h.sinh().powi(2);
        // Derivative stencils are exact on 1, s and e^{2s}.
        let alpha = ((2.0 * h).exp_m1() - 2.0 * h) / (4.0 * sinh2);
        Ok(RadialMesh {
            n,
            s_min,
            points,
            h,
            alpha,
            beta: 1.0 - alpha,
            sinh2,
            ghost: (-2.0 * h).exp(),
        })
    }

    /// Mesh with spacing as close as possible to `h`.
    pub fn with_spacing(n: u32, s_min: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", "spacing must be > 0"));
        }
        let points = (-s_min / h).round() as usize + 1;
        Self::new(n, s_min, points)
    }

    pub fn from_info(info: &MeshInfo) -> Result<Self> {
        match *info {
            MeshInfo::Radial { n, s_min, points } => Self::new(n, s_min, points),
            MeshInfo::Planar { .. } => Err(Error::invalid("mesh", "record was computed on a planar mesh")),
        }
    }

    pub fn info(&self) -> MeshInfo {
        MeshInfo::Radial {
            n: self.n,
            s_min: self.s_min,
            points: self.points,
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_min * (1.0 - i as f64 / (self.points - 1) as f64)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.s(i)).collect()
    }

    /// Deepest cutoff whose plateau edge `e^{-m-1}` stays two cells above
    /// the inner end of the mesh.
    pub fn max_depth(&self) -> u32 {
        let m = (-(self.s_min + 2.0 * self.h) - 1.0 + 1e-9).floor();
        if m < 1.0 {
            0
        } else {
            m as u32
        }
    }

    /// First and second derivatives at interior node `i` from the
    /// increments on either side.
    fn derivatives(&self, inc: &[f64], i: usize) -> (f64, f64) {
        let dr = inc[i];
        let dl = if i == 0 { self.ghost * inc[0] } else { inc[i - 1] };
        ((self.alpha * dl + self.beta * dr) / self.h, (dr - dl) / self.sinh2)
    }

    /// `log det` of the complex Hessian at interior node `i`, or `None`
    /// when an eigenvalue falls below [`EIGENVALUE_FLOOR`].
    fn log_det(&self, inc: &[f64], i: usize) -> Option<f64> {
        let (d1, d2) = self.derivatives(inc, i);
        let s = self.s(i);
        let ln_scale = -2.0 * s;
        let l1 = d2.ln() + ln_scale - 4f64.ln();
        if !(l1.exp() >= EIGENVALUE_FLOOR) {
            return None;
        }
        if self.n == 1 {
            return Some(l1);
        }
        let l2 = d1.ln() + ln_scale - 2f64.ln();
        if !(l2.exp() >= EIGENVALUE_FLOOR) {
            return None;
        }
        Some(l1 + (self.n - 1) as f64 * l2)
    }

    fn admissible(&self, inc: &[f64]) -> bool {
        (0..self.points - 1).all(|i| self.log_det(inc, i).is_some())
    }
}

/// Profile as base value at `s_min` plus increments between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    base: f64,
    increments: Vec<f64>,
}

impl RadialProfile {
    pub fn new(base: f64, increments: Vec<f64>) -> Self {
        RadialProfile { base, increments }
    }

    pub fn from_values(values: &[f64]) -> Self {
        RadialProfile {
            base: values[0],
            increments: values.windows(2).map(|w| w[1] - w[0]).collect(),
        }
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut v = self.base;
        out.push(v);
        for d in &self.increments {
            v += d;
            out.push(v);
        }
        out
    }

    pub fn boundary_value(&self) -> f64 {
        self.base + self.increments.iter().sum::<f64>()
    }
}

/// Discrete `log det` at the interior nodes `0..len-1`; errors if the
/// profile is not strictly plurisubharmonic on the mesh.
pub fn discrete_log_det(mesh: &RadialMesh, profile: &RadialProfile) -> Result<Vec<f64>> {
    (0..mesh.len() - 1)
        .map(|i| {
            mesh.log_det(profile.increments(), i).ok_or_else(|| {
                let (d1, d2) = mesh.derivatives(profile.increments(), i);
                Error::NonPositiveHessian {
                    location: format!("s = {:.6}", mesh.s(i)),
                    value: d2.min(if mesh.n() > 1 { d1 } else { d2 }),
                }
            })
        })
        .collect()
}

/// Solution at one time with the backward difference of the step that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialState {
    pub t: f64,
    pub profile: RadialProfile,
    pub t_prev: Option<f64>,
    pub udot: Option<Vec<f64>>,
    pub newton_iterations: usize,
    pub residual: f64,
}

impl RadialState {
    pub fn initial(profile: RadialProfile) -> Self {
        RadialState {
            t: 0.0,
            profile,
            t_prev: None,
            udot: None,
            newton_iterations: 0,
            residual: 0.0,
        }
    }
}

/// Everything a step needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct RadialStepData<'a> {
    pub mesh: &'a RadialMesh,
    pub rung: &'a LadderRung,
    pub source: &'a Expr,
    pub damping: f64,
}

impl<'a> RadialStepData<'a> {
    pub fn new(mesh: &'a RadialMesh, rung: &'a LadderRung, problem: &'a FlowProblem) -> Self {
        RadialStepData {
            mesh,
            rung,
            source: &problem.source,
            damping: problem.params.damping(),
        }
    }
}

/// One backward-Euler step of length `dt` solved by damped Newton.
pub fn step_implicit(state: &RadialState, dt: f64, data: &RadialStepData<'_>) -> Result<RadialState> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "time step must be > 0"));
    }
    let mesh = data.mesh;
    let a = data.damping;
    let nf = mesh.n() as f64;
    let m = mesh.len();
    let k = m - 1;
    let t_new = state.t + dt;
    let old = state.profile.values();
    let f: Vec<f64> = (0..k)
        .map(|i| data.source.value((2.0 * mesh.s(i)).exp(), t_new))
        .collect();

    // change since the previous time level, and the running increments;
    // start from the previous rate, or else shift by the boundary change
    let shift = data.rung.boundary.value(0, t_new) - old[k];
    let mut w = match &state.udot {
        Some(rate) => rate.iter().map(|r| r * dt).collect(),
        None => vec![shift; m],
    };
    w[k] = shift;
    let mut inc: Vec<f64> = state
        .profile
        .increments()
        .iter()
        .enumerate()
        .map(|(j, d)| d + (w[j + 1] - w[j]))
        .collect();
    if !mesh.admissible(&inc) {
        w = vec![shift; m];
        inc = state.profile.increments().to_vec();
    }
    let mut base = state.profile.base() + w[0];

    let (mut lo, mut di, mut up) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut r = vec![0.0; k];
    let mut iterations = 0;
    let residual = loop {
        let mut res = 0.0_f64;
        for i in 0..k {
            let ld = mesh.log_det(&inc, i).ok_or(Error::ConeViolation { t: t_new })?;
            r[i] = w[i] / dt - ld + a * (old[i] + w[i]) - f[i];
            res = res.max(r[i].abs());
        }
        if !res.is_finite() {
            return Err(Error::NewtonDivergence {
                t: t_new,
                dt,
                residual: res,
            });
        }
        if res <= NEWTON_TOLERANCE_RADIAL {
            break res;
        }
        if iterations == NEWTON_ITERATION_CAP {
            return Err(Error::NewtonDivergence {
                t: t_new,
                dt,
                residual: res,
            });
        }
        iterations += 1;

        let diag0 = 1.0 / dt + a;
        let c0 = nf / inc[0];
        di[0] = diag0 + c0;
        up[0] = -c0;
        for i in 1..k {
            let (d1, d2) = mesh.derivatives(&inc, i);
            let c2 = 1.0 / (mesh.sinh2 * d2);
            let c1 = if mesh.n() > 1 { (nf - 1.0) / (mesh.h * d1) } else { 0.0 };
            lo[i] = -c2 + c1 * mesh.alpha;
            di[i] = diag0 + 2.0 * c2 - c1 * (mesh.alpha - mesh.beta);
            up[i] = -c2 - c1 * mesh.beta;
        }
        let mut dv: Vec<f64> = r.iter().map(|x| -x).collect();
        solve_tridiagonal(&lo, &di, &up, &mut dv)?;

        let mut lambda = 1.0;
        let mut trial = inc.clone();
        loop {
            for j in 0..k {
                let next = if j + 1 < k { dv[j + 1] } else { 0.0 };
                trial[j] = inc[j] + lambda * (next - dv[j]);
            }
            if mesh.admissible(&trial) {
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::ConeViolation { t: t_new });
            }
        }
        std::mem::swap(&mut inc, &mut trial);
        base += lambda * dv[0];
        for i in 0..k {
            w[i] += lambda * dv[i];
        }
    };

    Ok(RadialState {
        t: t_new,
        profile: RadialProfile::new(base, inc),
        t_prev: Some(state.t),
        udot: Some(w.iter().map(|x| x / dt).collect()),
        newton_iterations: iterations,
        residual,
    })
}

/// Sampled data suprema for one rung on a radial mesh.
pub fn radial_bound_data(mesh: &RadialMesh, rung: &LadderRung, problem: &FlowProblem) -> BoundaryTimeData {
    let horizon = problem.params.horizon();
    let times = sample_times(horizon, 400, 2.0 * rung.info.eps, 200);
    let xs: Vec<f64> = mesh.nodes().iter().map(|s| (2.0 * s).exp()).collect();
    BoundaryTimeData::sample(
        times,
        1,
        |p, t| (rung.boundary.value(p, t), rung.boundary.rate(p, t)),
        xs.len(),
        |q, t| (problem.source.value(xs[q], t), problem.source.time_derivative(xs[q], t)),
    )
}

pub(crate) fn bound_inputs(data: &BoundaryTimeData, problem: &FlowProblem) -> BoundInputs {
    let e = data.envelopes();
    let (nt, _, nx) = data.sample_counts();
    BoundInputs {
        envelope_b: data.envelope_constant(&problem.params),
        sup_phi_dot: e.sup_phi_dot,
        sup_f_dot: e.sup_f_dot,
        sup_abs_phi: e.sup_abs_phi,
        sup_abs_f: e.sup_abs_f,
        time_samples: nt,
        space_samples: nx,
    }
}

/// Solves one rung from `t = 0` through the schedule.
pub fn run_flow(
    mesh: &RadialMesh,
    rung: &LadderRung,
    problem: &FlowProblem,
    schedule: &TimeSchedule,
    scenario_hash: &str,
) -> Result<RunRecord> {
    let InitialProfile::Radial(profile) = &rung.initial else {
        return Err(Error::invalid("rung", "radial solve needs a radial initial profile"));
    };
    if profile.increments().len() + 1 != mesh.len() {
        return Err(Error::invalid("rung", "initial profile does not match the mesh"));
    }
    let data = RadialStepData::new(mesh, rung, problem);
    let samples = radial_bound_data(mesh, rung, problem);
    let phi0 = rung.boundary.value(0, 0.0);
    let (snapshots, stats) = drive(
        schedule,
        RadialState::initial(profile.clone()),
        rung.info.m.unwrap_or(0),
        |s, _t, dt| {
            let next = step_implicit(s, dt, &data)?;
            Ok(StepOutcome {
                iterations: next.newton_iterations,
                residual: next.residual,
                state: next,
            })
        },
        |s, t| {
            let phi = rung.boundary.value(0, t);
            Snapshot {
                t,
                values: s.profile.values(),
                udot: s.udot.clone(),
                boundary: vec![phi],
                boundary_osc: samples.boundary_oscillation(t).max((phi - phi0).abs()),
            }
        },
    )?;
    Ok(RunRecord {
        scenario_hash: scenario_hash.to_string(),
        solver: SolverKind::Radial,
        params: problem.params,
        mesh: mesh.info(),
        rung: rung.info,
        bounds: bound_inputs(&samples, problem),
        snapshots,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ma_det_examples() {
        for n in 1..=3 {
            for s in [-3.0f64, -1.0, 0.0] {
                let e = (2.0 * s).exp();
                assert_relative_eq!(radial_ma_det(2.0 * e, 4.0 * e, s, n), 1.0, max_relative = 1e-14);
                assert_eq!(radial_ma_det(1.0, 0.0, s, n), 0.0);
            }
        }
    }

    #[test]
    fn stencils_are_exact_on_the_model_functions() {
        let mesh = RadialMesh::new(2, -4.0, 201).unwrap();
        let e2 = |s: f64| (2.0 * s).exp();
        let v: Vec<f64> = mesh.nodes().iter().map(|&s| 3.0 + 0.5 * s + e2(s)).collect();
        let p = RadialProfile::from_values(&v);
        for i in 1..mesh.len() - 1 {
            let (d1, d2) = mesh.derivatives(p.increments(), i);
            let s = mesh.s(i);
            assert_relative_eq!(d1, 0.5 + 2.0 * e2(s), max_relative = 1e-9);
            assert_relative_eq!(d2, 4.0 * e2(s), max_relative = 1e-7);
        }
        // ghost increment reproduces c + a e^{2s} at the inner node
        let q: Vec<f64> = mesh.nodes().iter().map(|&s| -7.0 + 2.0 * e2(s)).collect();
        let q = RadialProfile::from_values(&q);
        let (d1, d2) = mesh.derivatives(q.increments(), 0);
        assert_relative_eq!(d1, 4.0 * e2(mesh.s_min()), max_relative = 1e-9);
        assert_relative_eq!(d2, 8.0 * e2(mesh.s_min()), max_relative = 1e-7);
    }

    #[test]
    fn mesh_depth_rule() {
        let mesh = RadialMesh::with_spacing(1, -11.0, 0.02).unwrap();
        assert_eq!(mesh.len(), 551);
        assert_eq!(mesh.max_depth(), 9);
        assert!(RadialMesh::new(1, -1.0, 50).is_err());
        assert!(RadialMesh::new(0, -1.0, 200).is_err());
    }
}
