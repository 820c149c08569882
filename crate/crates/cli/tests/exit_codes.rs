use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONE: &str = r#"
name = "cli_cone"

[params]
n = 1
A = 0.0
T = 0.15

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

// not a fixed point, yet declared stationary
const DRIFTING: &str = r#"
name = "drifting"

[params]
n = 1
A = 0.0
T = 0.1

[initial]
smooth = [{ term = "abs_sq", coef = 1.0 }, { term = "log", shift = 1.0, coef = 0.5 }]

[boundary]
phi = [{ term = "const", coef = 1.3465735902799727 }]

[mesh]
s_min = -6.0
radial_points = 241

[ladder]
rungs = []
exact = true

[diagnostics]
stationary = true
"#;

fn pmaflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmaflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_export_verify_succeed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cone.toml"), CONE).unwrap();
    let run = pmaflow(&["run", "cone.toml"], dir.path());
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stdout));
    let out = dir.path().join("runs/cli_cone");
    for f in [
        "scenario.toml",
        "report.json",
        "rung_3.json",
        "rung_4.json",
        "rung_5.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let export = pmaflow(
        &["export", "runs/cli_cone", "--series", "lelong", "--format", "csv"],
        dir.path(),
    );
    assert_eq!(code(&export), 0);
    assert!(String::from_utf8_lossy(&export.stdout).starts_with("t,nu_hat,k_A_predicted,residual,atom\n"));
    let to_file = pmaflow(
        &["export", "runs/cli_cone", "--series", "profile", "--out", "p.csv"],
        dir.path(),
    );
    assert_eq!(code(&to_file), 0);
    assert!(fs::read_to_string(dir.path().join("p.csv"))
        .unwrap()
        .starts_with("rung,t,node,x,y,u,udot\n"));
    let verify = pmaflow(&["verify", "runs/cli_cone"], dir.path());
    assert_eq!(code(&verify), 0);
    assert_eq!(verify.stdout, {
        let mut lines = String::from_utf8_lossy(&run.stdout)
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n");
        lines.push('\n');
        lines.into_bytes()
    });
}

#[test]
fn usage_and_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cone.toml"), CONE).unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        CONE.replace("[ladder]", "[ladder]\nbogus = 1"),
    )
    .unwrap();
    assert_eq!(code(&pmaflow(&[], dir.path())), 1);
    assert_eq!(code(&pmaflow(&["run"], dir.path())), 1);
    assert_eq!(code(&pmaflow(&["run", "missing.toml"], dir.path())), 1);
    let bad = pmaflow(&["run", "bad.toml"], dir.path());
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line"));
    assert_eq!(code(&pmaflow(&["run", "cone.toml", "--rungs", "0"], dir.path())), 1);
    assert_eq!(code(&pmaflow(&["verify", "nowhere"], dir.path())), 1);
    assert_eq!(code(&pmaflow(&["run", "cone.toml", "--out", "r"], dir.path())), 0);
    assert_eq!(code(&pmaflow(&["export", "r", "--series", "nope"], dir.path())), 1);
    assert_eq!(
        code(&pmaflow(
            &["export", "r", "--series", "lelong", "--format", "json"],
            dir.path()
        )),
        1
    );
}

#[test]
fn failed_diagnostics_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("drift.toml"), DRIFTING).unwrap();
    let run = pmaflow(&["run", "drift.toml", "--out", "d"], dir.path());
    assert_eq!(code(&run), 3, "{}", String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).contains("FAIL"));
    assert_eq!(code(&pmaflow(&["verify", "d"], dir.path())), 3);
}

#[test]
fn planar_only_geometry_rejects_the_radial_solver() {
    let dir = tempfile::tempdir().unwrap();
    let off = CONE.replace("center = [0.0, 0.0]", "center = [0.3, 0.0]");
    fs::write(dir.path().join("off.toml"), off).unwrap();
    assert_eq!(
        code(&pmaflow(&["run", "off.toml", "--solver", "radial"], dir.path())),
        1
    );
}

#[test]
fn solver_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // the interior is pushed up faster than any step can follow
    let blowup = DRIFTING.replace(
        "[diagnostics]\nstationary = true\n",
        "[source]\nf = [{ term = \"const\", coef = 1e8 }]\n",
    );
    fs::write(dir.path().join("blowup.toml"), blowup).unwrap();
    let run = pmaflow(&["run", "blowup.toml", "--out", "b"], dir.path());
    assert_eq!(code(&run), 2, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(!dir.path().join("b").exists());
}
