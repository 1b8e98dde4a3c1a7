use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_twotime"));
    cmd.env_remove("TWOTIME_TOL");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str], file: &Path) -> Output {
    bin()
        .arg("--scenario")
        .arg(file)
        .args(args)
        .output()
        .expect("binary runs")
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("twotime-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const QUBIT: &str = r#"{
    "dimension": 2,
    "hamiltonian": [[0, 0], [0, 1]],
    "reservoirs": [{"label": "bath", "qrm": {"T": [[0.75, 0], [0, 0.25]], "gamma": 1}}],
    "initial_state": [[0.5, [0.1, 0.2]], [[0.1, -0.2], 0.5]],
    "times": [0, 0.5, 2],
    "alphas": [0]
}"#;

#[test]
fn usage_errors_exit_2() {
    let o = bin().arg("verify").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["--scenario", "x.json", "frobnicate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let bad = temp_file("bad.json", "{ \"dimension\": ");
    assert_eq!(run(&["steady"], &bad).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_3_and_name_the_field() {
    let file = temp_file("nonherm.json", &QUBIT.replace("[[0, 0], [0, 1]]", "[[0, 1], [0, 1]]"));
    let o = run(&["steady"], &file);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("hamiltonian"), "{}", stderr(&o));

    let file = temp_file("times.json", &QUBIT.replace("[0, 0.5, 2]", "[1, 0.5]"));
    let o = run(&["steady"], &file);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("times must be ascending"));

    let o = run(&["qrm-demo"], &scenario("fagnola.json"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn mgf_at_zero_alpha_is_one() {
    let file = temp_file("mgf.json", QUBIT);
    let o = run(&["mgf"], &file);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "reservoir,t,alpha,direct,deformed,classical,note"
    );
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        for c in &cells[3..6] {
            let v: f64 = c.parse().unwrap();
            assert!((v - 1.0).abs() < 1e-12, "{line}");
        }
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn fagnola_db_check_rows() {
    let o = run(&["db-check"], &scenario("fagnola.json"));
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text
        .lines()
        .any(|l| l.starts_with("fagnola,kms,") && l.contains(",true,")));
    assert!(text
        .lines()
        .any(|l| l.starts_with("fagnola,rho,") && l.contains(",false,")));
}

#[test]
fn tolerance_from_the_environment() {
    let o = bin()
        .env("TWOTIME_TOL", "100")
        .arg("--scenario")
        .arg(scenario("fagnola.json"))
        .arg("db-check")
        .output()
        .unwrap();
    let text = stdout(&o);
    assert!(text
        .lines()
        .any(|l| l.starts_with("fagnola,rho,") && l.contains(",true,")));
}

#[test]
fn qubit_chain_export() {
    let o = run(&["chain"], &scenario("qubit_qrm.json"));
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert!((rows[0][0] - (4.0f64 / 3.0).ln()).abs() < 1e-12);
    assert!((rows[0][1] - 4.0f64.ln()).abs() < 1e-12);
    let expect = [[-0.25, 0.25], [0.75, -0.75]];
    for i in 0..2 {
        for k in 0..2 {
            assert!((rows[i + 1][k] - expect[i][k]).abs() < 1e-12);
        }
    }
    assert!(stderr(&o).contains("classical detailed balance residual"));
}

#[test]
fn hypothesis_failures_exit_4_with_a_row() {
    let o = run(&["chain"], &scenario("fagnola.json"));
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).starts_with("status,detail\nhypothesis,"));
    let o = run(&["mgf"], &scenario("fagnola.json"));
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).lines().skip(1).all(|l| l.contains("detailed balance fails")));
}

#[test]
fn out_flag_matches_stdout() {
    let file = scenario("qubit_qrm.json");
    let target = std::env::temp_dir().join(format!("twotime-cli-{}-out.csv", std::process::id()));
    let o = bin()
        .arg("--scenario")
        .arg(&file)
        .arg("--out")
        .arg(&target)
        .arg("ttm")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let written = std::fs::read(&target).unwrap();
    assert_eq!(written, run(&["ttm"], &file).stdout);
}

#[test]
fn every_command_runs_on_the_two_reservoir_scenario() {
    let file = scenario("two_reservoir_qrm.json");
    for cmd in ["steady", "evolve", "db-check", "ttm", "mgf", "chain", "qrm-demo"] {
        let o = run(&[cmd], &file);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        assert!(stdout(&o).lines().count() > 1);
    }
    let o = bin()
        .arg("--scenario")
        .arg(&file)
        .args(["chain", "--reservoir", "cold"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = bin()
        .arg("--scenario")
        .arg(&file)
        .args(["chain", "--reservoir", "warm"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
