mod common;

use common::*;
use pma_core::diagnostics::*;
use pma_core::planar::PlanarMesh;
use pma_core::radial::RadialMesh;
use pma_core::record::{RunRecord, Snapshot};
use pma_core::regularize::strict_weight;
use pma_core::{predicted_dissolution, Expr, FlowParams};

fn snapshot(values: Vec<f64>, boundary: Vec<f64>) -> Snapshot {
    Snapshot {
        t: 0.0,
        values,
        udot: None,
        boundary,
        boundary_osc: 0.0,
    }
}

fn radial_snapshot(mesh: &RadialMesh, f: impl Fn(f64) -> f64) -> Snapshot {
    snapshot(mesh.nodes().into_iter().map(|s| f(s.exp())).collect(), vec![f(1.0)])
}

#[test]
fn exact_cone_slope_is_recovered() {
    let mesh = RadialMesh::new(1, -11.0, 551).unwrap();
    let rm = RecordMesh::Radial(mesh.clone());
    for mass in [0.5, 1.0, 3.0] {
        let snap = radial_snapshot(&mesh, |r| mass * r.ln());
        for window in [[1e-4, 1e-2], [0.01, 0.5], [0.2, 0.9]] {
            let e = lelong_estimate(&rm, &snap, 0, &atom(0.0, 0.0, mass), None, window).unwrap();
            assert!((e.slope - mass).abs() <= 1e-10, "{window:?}: {}", e.slope);
        }
    }
}

#[test]
fn quadratic_perturbation_barely_moves_the_slope() {
    let mesh = RadialMesh::new(1, -11.0, 551).unwrap();
    let snap = radial_snapshot(&mesh, |r| 2.0 * r.ln() + r * r);
    let e = lelong_estimate(
        &RecordMesh::Radial(mesh),
        &snap,
        0,
        &atom(0.0, 0.0, 2.0),
        None,
        [1e-3, 1e-2],
    )
    .unwrap();
    assert!((e.slope - 2.0).abs() <= 1e-4, "{}", e.slope);
}

#[test]
fn window_inside_the_plateau_is_rejected() {
    let mesh = RadialMesh::new(1, -11.0, 551).unwrap();
    let snap = radial_snapshot(&mesh, |r| r.ln());
    // depth 5 keeps the cutoff active out to e^{-4}
    let err = lelong_estimate(
        &RecordMesh::Radial(mesh),
        &snap,
        0,
        &atom(0.0, 0.0, 1.0),
        Some(5),
        [1e-3, 0.1],
    );
    assert!(err.is_err());
}

#[test]
fn planar_estimate_averages_over_circles() {
    let mesh = PlanarMesh::new(128).unwrap();
    let a = atom(0.4, 0.0, 1.0);
    let b = atom(-0.4, 0.0, 1.0);
    let f = |x: f64, y: f64| {
        0.5 * ((x - 0.4).powi(2) + y * y).ln() + 0.5 * ((x + 0.4).powi(2) + y * y).ln() + x * x + y * y
    };
    let values = mesh.coords().iter().map(|&[x, y]| f(x, y)).collect();
    let boundary = mesh.boundary_points().iter().map(|&[x, y]| f(x, y)).collect();
    let snap = snapshot(values, boundary);
    let rm = RecordMesh::Planar(mesh);
    let ea = lelong_estimate(&rm, &snap, 0, &a, None, [0.15, 0.35]).unwrap();
    let eb = lelong_estimate(&rm, &snap, 1, &b, None, [0.15, 0.35]).unwrap();
    // bilinear interpolation of log is the only error
    assert!((ea.slope - 1.0).abs() <= 5e-3, "{}", ea.slope);
    assert!((ea.slope - eb.slope).abs() <= 1e-9);
}

fn ladder(n: u32, a: f64, mass: f64, horizon: f64, every: f64) -> (RadialMesh, Vec<RunRecord>) {
    let p = cone(n, a, mass, horizon);
    let mesh = radial_mesh(n);
    let sch = schedule(horizon, every);
    let runs = (3..=8).map(|m| radial(&p, &mesh, Some(m), &sch)).collect();
    (mesh, runs)
}

#[test]
fn disjoint_windows_agree_within_their_residuals() {
    let (mesh, runs) = ladder(1, 0.0, 1.0, 0.4, 0.05);
    let deepest = runs.last().unwrap();
    let rm = RecordMesh::Radial(mesh);
    let a = atom(0.0, 0.0, 1.0);
    for snap in deepest.snapshots.iter().filter(|s| s.t > 0.0) {
        let lo = lelong_estimate(&rm, snap, 0, &a, Some(8), [(-7.0f64).exp(), (-4.0f64).exp()]).unwrap();
        let hi = lelong_estimate(&rm, snap, 0, &a, Some(8), [(-4.0f64).exp(), (-1.0f64).exp()]).unwrap();
        assert!(
            (lo.slope - hi.slope).abs() <= lo.residual + hi.residual,
            "t = {}: {} vs {} (residuals {} {})",
            snap.t,
            lo.slope,
            hi.slope,
            lo.residual,
            hi.residual
        );
    }
}

#[test]
fn cone_slope_at_two_tenths() {
    let (_, runs) = ladder(1, 0.0, 1.0, 0.2, 0.05);
    let p = cone(1, 0.0, 1.0, 0.2);
    let report = diagnose(&p, &runs, &DiagnosticSettings::default()).unwrap();
    let point = report.atoms[0]
        .series
        .iter()
        .find(|q| (q.t - 0.2).abs() < 1e-12)
        .unwrap();
    assert!((point.nu_hat - 0.6).abs() <= 0.05, "{}", point.nu_hat);
}

#[test]
fn dissolution_orders_by_mass_and_damping() {
    let mut cells = Vec::new();
    for a in [0.0, 1.0] {
        for mass in [1.0, 2.0] {
            let horizon = 1.2;
            let (_, runs) = ladder(1, a, mass, horizon, 0.025);
            let p = cone(1, a, mass, horizon);
            let report = diagnose(&p, &runs, &DiagnosticSettings::default()).unwrap();
            let Dissolution::Observed { t, .. } = report.atoms[0].dissolution else {
                panic!("A = {a}, N = {mass}: {:?}", report.atoms[0].dissolution);
            };
            let eps = predicted_dissolution(mass, &FlowParams::new(1, a, horizon).unwrap()).unwrap();
            assert!((t - eps).abs() <= 0.1 * eps, "A = {a}, N = {mass}: {t} vs {eps}");
            cells.push((a, mass, t));
        }
    }
    let t = |a: f64, m: f64| cells.iter().find(|c| c.0 == a && c.1 == m).unwrap().2;
    assert!(t(0.0, 2.0) > t(0.0, 1.0) && t(1.0, 2.0) > t(1.0, 1.0));
    assert!(t(1.0, 1.0) < t(0.0, 1.0) && t(1.0, 2.0) < t(0.0, 2.0));
}

#[test]
fn smooth_datum_has_nothing_to_dissolve() {
    let smooth = quadratic(1.0).plus(log_term(1.0, 1.0));
    let p = problem(
        1,
        0.0,
        0.5,
        vec![],
        smooth,
        Expr::constant(1.0 + 2f64.ln()),
        Expr::zero(),
    );
    let mesh = radial_mesh(1);
    let r = radial(&p, &mesh, None, &schedule(0.5, 0.05));
    let rm = RecordMesh::Radial(mesh);
    let probe = atom(0.0, 0.0, 1.0);
    let series: Vec<_> = r
        .snapshots
        .iter()
        .map(|s| lelong_estimate(&rm, s, 0, &probe, None, [(-7.0f64).exp(), (-1.0f64).exp()]).unwrap())
        .collect();
    for e in &series {
        assert!(e.slope.abs() <= 1e-3, "t = {}: {}", e.t, e.slope);
    }
    assert_eq!(
        dissolution_time(&series, 1.0, DEFAULT_DISSOLUTION_THRESHOLD),
        Dissolution::Absent
    );
}

#[test]
fn ladder_checks_pass_and_catch_a_swap() {
    let (mesh, mut runs) = ladder(1, 0.0, 1.0, 0.4, 0.05);
    let rm = RecordMesh::Radial(mesh);
    let atoms = [atom(0.0, 0.0, 1.0)];
    let refs: Vec<&RunRecord> = runs.iter().collect();
    let check = check_ladder(&rm, &refs, &atoms).unwrap();
    assert!(check.monotone.passed && check.decay.passed, "{check:?}");
    assert!(check.ratio <= LADDER_RATIO_MAX);
    // relabel rungs 4 and 5
    let (m4, m5) = (runs[1].rung, runs[2].rung);
    runs[1].rung = m5;
    runs[2].rung = m4;
    let refs: Vec<&RunRecord> = runs.iter().collect();
    let check = check_ladder(&rm, &refs, &atoms).unwrap();
    assert!(!check.monotone.passed);
}

#[test]
fn ladder_without_atoms_differs_by_the_strict_term() {
    let p = problem(1, 0.0, 0.3, vec![], quadratic(1.0), Expr::constant(1.0), Expr::zero());
    let mesh = radial_mesh(1);
    let sch = schedule(0.3, 0.05);
    let runs: Vec<_> = (3..=6).map(|m| radial(&p, &mesh, Some(m), &sch)).collect();
    let refs: Vec<&RunRecord> = runs.iter().collect();
    let check = check_ladder(&RecordMesh::Radial(mesh), &refs, &[]).unwrap();
    assert!(check.monotone.passed);
    for g in &check.gaps {
        // data differ by (2^{-m} - 2^{-m-1})(1 - |z|^2); comparison bounds the solutions' gap by its sup
        let delta = strict_weight(g.m) - strict_weight(g.m + 1);
        assert!(g.gap <= delta + 1e-6, "m = {}: {} vs {delta}", g.m, g.gap);
        assert!(
            g.gap >= delta * (1.0 - 0.2f64.powi(2)) - 1e-7,
            "m = {}: {} vs {delta}",
            g.m,
            g.gap
        );
    }
}

#[test]
fn barrier_holds_on_every_rung() {
    for (a, mass) in [(0.0, 1.0), (1.0, 2.0)] {
        let (mesh, runs) = ladder(1, a, mass, 0.3, 0.05);
        let p = cone(1, a, mass, 0.3);
        let rm = RecordMesh::Radial(mesh);
        for r in &runs {
            let b = check_barrier(&rm, r, &p, 0, 0.5 * mass).unwrap().unwrap();
            assert!(b.verdict.passed, "{b:?}");
        }
    }
}

#[test]
fn report_round_trips_through_json() {
    let (_, runs) = ladder(1, 0.0, 1.0, 0.2, 0.05);
    let p = cone(1, 0.0, 1.0, 0.2);
    let report = diagnose(&p, &runs, &DiagnosticSettings::default()).unwrap();
    let back = DiagnosticsReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(report, back);
    assert!(report.verdicts.iter().all(|v| v.tolerance >= 0.0));
}
