use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dobsim::analysis::Verdict;
use dobsim::cli::{parse_scenario, Summary};

fn dobsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dobsim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
  "name": "small",
  "model": {"links": [{"length": 0.4, "mass": 2.0, "com_offset": 0.2, "inertia_com": 0.02},
                      {"length": 0.3, "mass": 1.2, "com_offset": 0.15, "inertia_com": 0.01}],
            "gravity_accel": 9.81},
  "controller": {"nominal_inertia": {"mass_matrix_at": {"q": [0.0, 1.0], "scale": 1.6}},
                 "dob_bandwidth": 100, "kd": 40, "kp": 400},
  "reference": {"kind": "smoothed_step", "start": [0, 0.5], "target": [0.2, 0.8], "t_step": 0.05},
  "sim": {"dt": 0.001, "duration": 0.5}
}"#;

#[test]
fn run_preset_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t3");
    let o = dobsim(&["run", "theorem3_regulation", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("converged"));
    for f in [
        "run.csv",
        "summary.json",
        "error_norm.svg",
        "dynamic_error_norm.svg",
        "lyapunov.svg",
        "lyapunov_rate.svg",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let summary = Summary::from_json(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.report.verdict, Verdict::Converged);
    assert_eq!(summary.dof, 2);
    // round trip through JSON keeps every field
    let again = Summary::from_json(&serde_json::to_string(&summary).unwrap()).unwrap();
    assert_eq!(again, summary);
}

#[test]
fn unstable_preset_is_a_result_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = dobsim(&["run", "fig4a_unstable", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("divergent"));
}

#[test]
fn run_csv_has_one_row_per_logged_step() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "small.json", SMALL);
    let out = dir.path().join("o");
    let o = dobsim(&["run", &file, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("run.csv")).unwrap();
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "t");
    assert!(header.iter().any(|h| h == "V"));
    assert_eq!(rdr.records().count(), 501);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "small.json", SMALL);
    let out = dir.path().join("s");
    let o = dobsim(&[
        "sweep",
        &file,
        "--axis",
        "g_dob",
        "--values",
        "50,100,200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let values: Vec<f64> = rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(values, vec![50.0, 100.0, 200.0]);
    assert!(out.join("error_norm_overlay.svg").is_file());
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "small.json", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "sweep".to_string(),
            file.clone(),
            "--axis".into(),
            "mn_scale".into(),
            "--values".into(),
            "1,2".into(),
            "--out".into(),
            out.to_string_lossy().into_owned(),
        ]
    };
    let mut seq = args(&a);
    seq.insert(0, "--sequential".into());
    let seq: Vec<&str> = seq.iter().map(String::as_str).collect();
    let par = args(&b);
    let par: Vec<&str> = par.iter().map(String::as_str).collect();
    assert_eq!(dobsim(&seq).status.code(), Some(0));
    assert_eq!(dobsim(&par).status.code(), Some(0));
    assert_eq!(
        fs::read(a.join("sweep.csv")).unwrap(),
        fs::read(b.join("sweep.csv")).unwrap()
    );
}

#[test]
fn check_prints_static_report() {
    let o = dobsim(&["check", "theorem2_circle"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for key in [
        "beta_M_min",
        "beta_C",
        "beta_g",
        "nominal inertia:",
        "directional limit",
        "a-priori Gamma =",
    ] {
        assert!(text.contains(key), "missing {key} in\n{text}");
    }
}

#[test]
fn presets_are_listed_and_exported() {
    let o = dobsim(&["presets"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 6);
    let dir = tempfile::tempdir().unwrap();
    let o = dobsim(&["presets", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let mut n = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        parse_scenario(&fs::read_to_string(entry.unwrap().path()).unwrap()).unwrap();
        n += 1;
    }
    assert_eq!(n, 6);
}

#[test]
fn invalid_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    let o = dobsim(&["run", "no_such_preset", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_preset"));

    let unknown_key = write(
        dir.path(),
        "k.json",
        &SMALL.replace("\"kp\": 400", "\"kp\": 400, \"ki\": 3"),
    );
    let o = dobsim(&["run", &unknown_key, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("controller"), "{}", stderr(&o));

    let seedless = write(
        dir.path(),
        "n.json",
        &SMALL.replace(
            "\"sim\":",
            "\"disturbances\": {\"measurement_noise\": {\"amplitude\": 1e-5}}, \"sim\":",
        ),
    );
    let o = dobsim(&["run", &seedless, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));

    let o = dobsim(&[
        "sweep",
        "theorem2_circle",
        "--axis",
        "kp",
        "--values",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = dobsim(&[
        "sweep",
        "theorem2_circle",
        "--axis",
        "g_dob",
        "--values",
        "-5",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = dobsim(&["sweep", "theorem2_circle", "--axis", "g_dob", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let indefinite = write(
        dir.path(),
        "i.json",
        r#"{"model": {"links": "three_link_bench", "gravity_accel": 0},
            "controller": {"nominal_inertia": "experimental", "dob_bandwidth": 200, "kd": 80, "kp": 1600},
            "reference": {"kind": "step", "start": [0, 0.5, 0.5], "target": [0.1, 0.6, 0.6]},
            "sim": {"dt": 0.001, "duration": 1}}"#,
    );
    let o = dobsim(&["check", &indefinite]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = dobsim(&["run", "theorem3_regulation", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
