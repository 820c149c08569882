#![allow(dead_code)]

use num_complex::Complex64;
use pma_core::planar::{planar_run, PlanarMesh};
use pma_core::problem::FlowProblem;
use pma_core::radial::{run_flow, RadialMesh};
use pma_core::record::RunRecord;
use pma_core::regularize::{build_planar_rung, build_radial_rung};
use pma_core::stepping::TimeSchedule;
use pma_core::{Expr, FlowParams, LelongAtom, Monomial, Term};

pub fn quadratic(c: f64) -> Expr {
    Expr::abs_sq(c)
}

pub fn log_term(coef: f64, shift: f64) -> Monomial {
    Monomial::new(coef, Term::Log { shift })
}

pub fn constant_term(c: f64) -> Monomial {
    Monomial::new(c, Term::Const)
}

pub fn atom(x: f64, y: f64, mass: f64) -> LelongAtom {
    LelongAtom::new(Complex64::new(x, y), mass).unwrap()
}

/// `u0 = sum N_j log|z - a_j| + smooth`, boundary `phi`, source `f`.
pub fn problem(n: u32, a: f64, horizon: f64, atoms: Vec<LelongAtom>, smooth: Expr, phi: Expr, f: Expr) -> FlowProblem {
    FlowProblem::new(FlowParams::new(n, a, horizon).unwrap(), atoms, smooth, phi, f).unwrap()
}

/// Single cone `N log|z| + |z|^2` with matching boundary value 1.
pub fn cone(n: u32, a: f64, mass: f64, horizon: f64) -> FlowProblem {
    problem(
        n,
        a,
        horizon,
        vec![atom(0.0, 0.0, mass)],
        quadratic(1.0),
        Expr::constant(1.0),
        Expr::zero(),
    )
}

pub fn schedule(horizon: f64, every: f64) -> TimeSchedule {
    TimeSchedule::uniform(horizon, every, &[1e-3], 1e-3, 0.01).unwrap()
}

pub fn radial_mesh(n: u32) -> RadialMesh {
    RadialMesh::new(n, -11.0, 551).unwrap()
}

pub fn radial(problem: &FlowProblem, mesh: &RadialMesh, m: Option<u32>, schedule: &TimeSchedule) -> RunRecord {
    let rung = build_radial_rung(problem, mesh, m).unwrap();
    run_flow(mesh, &rung, problem, schedule, "test").unwrap()
}

pub fn planar(problem: &FlowProblem, mesh: &PlanarMesh, m: Option<u32>, schedule: &TimeSchedule) -> RunRecord {
    let rung = build_planar_rung(problem, mesh, m).unwrap();
    planar_run(mesh, &rung, problem, schedule, "test").unwrap()
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest `u - v` over all common snapshots.
pub fn max_excess(u: &RunRecord, v: &RunRecord) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (a, b) in u.snapshots.iter().zip(&v.snapshots) {
        assert_eq!(a.t, b.t);
        for (x, y) in a.values.iter().zip(&b.values) {
            worst = worst.max(x - y);
        }
    }
    worst
}
