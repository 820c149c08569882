use pma_core::export::{export_csv, Series};
use pma_core::run::{load_report, load_run_dir, run_scenario, verify_run_dir, write_run_dir, RunOptions};
use pma_core::scenario::Scenario;
use pma_core::Error;

const CONE: &str = r#"
name = "small_cone"

[params]
n = 1
A = 0.5
T = 0.2

[initial]
atoms = [{ center = [0.0, 0.0], mass = 1.0 }]
smooth = [{ term = "abs_sq", coef = 1.0 }]

[boundary]
phi = [{ term = "const", coef = 1.0 }]

[mesh]
s_min = -7.0
radial_points = 281

[ladder]
rungs = [3, 4, 5]

[time]
every = 0.05
"#;

const SMOOTH: &str = r#"
name = "smooth"

[params]
n = 2
A = 0.0
T = 0.1

[initial]
smooth = [{ term = "abs_sq", coef = 1.0 }, { term = "log", shift = 1.0, coef = 0.5 }]

[boundary]
phi = [{ term = "const", coef = 1.6931471805599453 }]

[mesh]
s_min = -6.0
radial_points = 241

[ladder]
rungs = []
exact = true

[time]
every = 0.05
"#;

fn profile_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn runs_are_deterministic() {
    let s = Scenario::from_toml(CONE).unwrap();
    let a = run_scenario(&s, &RunOptions::default()).unwrap();
    let b = run_scenario(&s, &RunOptions::default()).unwrap();
    assert_eq!(a.records.len(), 3);
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.to_json().unwrap(), y.to_json().unwrap());
    }
    assert_eq!(a.report, b.report);
}

#[test]
fn records_carry_the_scenario_hash() {
    let s = Scenario::from_toml(CONE).unwrap();
    let renamed = Scenario::from_toml(&CONE.replace("small_cone", "other")).unwrap();
    let changed = Scenario::from_toml(&CONE.replace("A = 0.5", "A = 0.25")).unwrap();
    assert_eq!(s.hash, renamed.hash);
    assert_ne!(s.hash, changed.hash);
    assert_eq!(s.hash.len(), 64);
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    assert!(out.records.iter().all(|r| r.scenario_hash == s.hash));
}

#[test]
fn profile_at_time_zero_is_the_initial_datum() {
    let s = Scenario::from_toml(SMOOTH).unwrap();
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    let csv = export_csv(Series::Profile, &out.records, &out.report).unwrap();
    assert!(csv.starts_with("rung,t,node,x,y,u,udot\n"));
    let mut checked = 0;
    for row in profile_rows(&csv).iter().filter(|r| r[1] == "0") {
        let r: f64 = row[3].parse().unwrap();
        let u: f64 = row[5].parse().unwrap();
        let expected = r * r + 0.5 * (1.0 + r * r).ln();
        assert!((u - expected).abs() <= 1e-12, "r = {r}: {u} vs {expected}");
        assert!(row[6].is_empty());
        checked += 1;
    }
    assert_eq!(checked, 241);
}

#[test]
fn run_directory_round_trips() {
    let s = Scenario::from_toml(CONE).unwrap();
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_run_dir(dir.path(), CONE, &out).unwrap();
    let (back, records) = load_run_dir(dir.path()).unwrap();
    assert_eq!(back.hash, s.hash);
    assert_eq!(records, out.records);
    assert_eq!(load_report(dir.path()).unwrap(), out.report);
    assert_eq!(verify_run_dir(dir.path()).unwrap(), out.report);
    for series in [Series::Profile, Series::Lelong, Series::Envelopes] {
        let stored = export_csv(series, &records, &out.report).unwrap();
        assert_eq!(stored, export_csv(series, &out.records, &out.report).unwrap());
    }
}

#[test]
fn foreign_records_are_rejected() {
    let s = Scenario::from_toml(CONE).unwrap();
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let edited = CONE.replace("T = 0.2", "T = 0.15");
    write_run_dir(dir.path(), &edited, &out).unwrap();
    assert!(matches!(load_run_dir(dir.path()), Err(Error::Io(_))));
}

#[test]
fn envelope_export_agrees_with_the_verdict() {
    let s = Scenario::from_toml(CONE).unwrap();
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    let csv = export_csv(Series::Envelopes, &out.records, &out.report).unwrap();
    let rows = profile_rows(&csv);
    assert!(!rows.is_empty());
    let verdicts: Vec<_> = out
        .report
        .verdicts
        .iter()
        .filter(|v| v.name.starts_with("envelopes_"))
        .collect();
    assert_eq!(verdicts.len(), 3);
    assert_eq!(verdicts.iter().all(|v| v.passed), rows.iter().all(|r| r[6] == "true"));
}

#[test]
fn lelong_export_tracks_the_prediction() {
    let s = Scenario::from_toml(CONE).unwrap();
    let out = run_scenario(&s, &RunOptions::default()).unwrap();
    let csv = export_csv(Series::Lelong, &out.records, &out.report).unwrap();
    for row in profile_rows(&csv) {
        let t: f64 = row[0].parse().unwrap();
        let k: f64 = row[2].parse().unwrap();
        // k_A(1, t) with n = 1, A = 1/2
        let expected = -4.0 + 5.0 * (-0.5 * t).exp();
        assert!((k - expected).abs() <= 1e-12, "t = {t}: {k} vs {expected}");
    }
}

#[test]
fn deepest_rung_override_extends_the_ladder() {
    let s = Scenario::from_toml(CONE).unwrap();
    let opts = RunOptions {
        deepest_rung: Some(6),
        ..RunOptions::default()
    };
    let out = run_scenario(&s, &opts).unwrap();
    let ms: Vec<_> = out.records.iter().map(|r| r.rung.m).collect();
    assert_eq!(ms, vec![Some(3), Some(4), Some(5), Some(6)]);
    let zero = RunOptions {
        deepest_rung: Some(0),
        ..RunOptions::default()
    };
    assert!(run_scenario(&s, &zero).is_err());
}

#[test]
fn unknown_series_is_an_error() {
    assert!(matches!("nope".parse::<Series>(), Err(Error::UnknownSeries(_))));
}
