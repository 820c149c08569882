//! Output-time schedule and the adaptive backward-Euler driver shared by the
//! radial and planar solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{Snapshot, SolverStats};

pub const NEWTON_TOLERANCE_RADIAL: f64 = 1e-10;
pub const NEWTON_TOLERANCE_PLANAR: f64 = 1e-9;
pub const NEWTON_ITERATION_CAP: usize = 50;
pub const MAX_DT_HALVINGS: usize = 20;
pub const DT_GROWTH: f64 = 1.2;
pub const MAX_INITIAL_DT: f64 = 1e-3;

/// Output times in `(0, T]` plus step-size controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSchedule {
    outputs: Vec<f64>,
    dt_initial: f64,
    dt_max: f64,
}

impl TimeSchedule {
    pub fn new(outputs: Vec<f64>, dt_initial: f64, dt_max: f64) -> Result<Self> {
        if outputs.is_empty() {
            return Err(Error::invalid("outputs", "at least one output time is required"));
        }
        if !(outputs[0] > 0.0) || outputs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "outputs",
                "output times must be positive and strictly increasing",
            ));
        }
        if !(dt_initial > 0.0 && dt_initial <= MAX_INITIAL_DT) {
            return Err(Error::invalid(
                "dt_initial",
                format!("must lie in (0, {MAX_INITIAL_DT}]"),
            ));
        }
        if !(dt_max >= dt_initial) || !dt_max.is_finite() {
            return Err(Error::invalid("dt_max", "must be finite and >= dt_initial"));
        }
        Ok(TimeSchedule {
            outputs,
            dt_initial,
            dt_max,
        })
    }

    /// Outputs every `every` up to `horizon`, with extra early probes.
    pub fn uniform(horizon: f64, every: f64, probes: &[f64], dt_initial: f64, dt_max: f64) -> Result<Self> {
        if !(every > 0.0) {
            return Err(Error::invalid("every", "output spacing must be > 0"));
        }
        let count = (horizon / every + 1e-9).floor() as usize;
        let mut outputs: Vec<f64> = (1..=count).map(|k| k as f64 * every).collect();
        outputs.extend(probes.iter().copied().filter(|&p| p > 0.0 && p <= horizon));
        outputs.sort_by(f64::total_cmp);
        outputs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        Self::new(outputs, dt_initial, dt_max)
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn dt_initial(&self) -> f64 {
        self.dt_initial
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    pub fn end(&self) -> f64 {
        *self.outputs.last().expect("schedule is non-empty")
    }
}

/// One accepted step: the new state, Newton iterations and final residual.
pub(crate) struct StepOutcome<S> {
    pub state: S,
    pub iterations: usize,
    pub residual: f64,
}

/// Steps from `t = 0` through every output time, halving `dt` on Newton
/// failure and growing it by [`DT_GROWTH`] after success.
pub(crate) fn drive<S>(
    schedule: &TimeSchedule,
    initial: S,
    rung: u32,
    mut step: impl FnMut(&S, f64, f64) -> Result<StepOutcome<S>>,
    mut emit: impl FnMut(&S, f64) -> Snapshot,
) -> Result<(Vec<Snapshot>, SolverStats)> {
    let mut snapshots = vec![emit(&initial, 0.0)];
    let mut stats = SolverStats::default();
    let mut state = initial;
    let mut t = 0.0;
    let mut dt = schedule.dt_initial;
    for &target in &schedule.outputs {
        while t < target - 1e-14 {
            let mut trial = dt.min(target - t);
            let mut halvings = 0;
            let outcome = loop {
                match step(&state, t, trial) {
                    Ok(o) => break o,
                    Err(e @ (Error::NewtonDivergence { .. } | Error::ConeViolation { .. })) => {
                        if halvings == MAX_DT_HALVINGS {
                            return Err(Error::RunFailed {
                                t,
                                rung,
                                source: Box::new(e),
                            });
                        }
                        halvings += 1;
                        stats.dt_halvings += 1;
                        trial *= 0.5;
                    }
                    Err(e) => {
                        return Err(Error::RunFailed {
                            t,
                            rung,
                            source: Box::new(e),
                        })
                    }
                }
            };
            stats.record_step(trial, outcome.iterations, outcome.residual);
            state = outcome.state;
            let reached = target - (t + trial) < 1e-14;
            t = if reached { target } else { t + trial };
            if halvings > 0 || trial >= dt {
                dt = (trial * DT_GROWTH).min(schedule.dt_max);
            }
        }
        snapshots.push(emit(&state, target));
    }
    Ok((snapshots, stats))
}

/// Solves a tridiagonal system in place by forward elimination; `lower[0]`
/// and `upper[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::invalid("jacobian", "singular tridiagonal system"));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::invalid("jacobian", "singular tridiagonal system"));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense_product() {
        let lower = [0.0, -1.0, -0.5, -2.0];
        let diag = [4.0, 5.0, 3.0, 6.0];
        let upper = [-1.0, 0.7, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut b: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i]
                    + if i > 0 { lower[i] * x[i - 1] } else { 0.0 }
                    + if i < 3 { upper[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut b).unwrap();
        for i in 0..4 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(TimeSchedule::new(vec![0.1, 0.2], 1e-3, 0.01).is_ok());
        assert!(TimeSchedule::new(vec![0.2, 0.1], 1e-3, 0.01).is_err());
        assert!(TimeSchedule::new(vec![0.1], 2e-3, 0.01).is_err());
        assert!(TimeSchedule::new(vec![], 1e-3, 0.01).is_err());
        let s = TimeSchedule::uniform(0.1, 0.025, &[1e-3], 1e-3, 0.01).unwrap();
        assert_eq!(s.outputs().len(), 5);
        assert_eq!(s.outputs()[0], 1e-3);
    }

    #[test]
    fn driver_hits_outputs_and_halves_on_failure() {
        let sched = TimeSchedule::new(vec![0.05, 0.1], 1e-3, 0.02).unwrap();
        let mut fails = 1;
        let (snaps, stats) = drive(
            &sched,
            0.0_f64,
            0,
            |s, _t, dt| {
                if dt > 0.015 && fails > 0 {
                    fails -= 1;
                    return Err(Error::NewtonDivergence {
                        t: 0.0,
                        dt,
                        residual: 1.0,
                    });
                }
                Ok(StepOutcome {
                    state: s + dt,
                    iterations: 1,
                    residual: 0.0,
                })
            },
            |s, t| Snapshot {
                t,
                values: vec![*s],
                udot: None,
                boundary: vec![],
                boundary_osc: 0.0,
            },
        )
        .unwrap();
        assert_eq!(snaps.len(), 3);
        assert!((snaps[2].values[0] - 0.1).abs() < 1e-12);
        assert_eq!(stats.dt_halvings, 1);
        assert!(stats.max_dt <= 0.02);
    }
}
