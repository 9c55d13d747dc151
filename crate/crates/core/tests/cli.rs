use std::path::Path;
use std::process::{Command, Output};

fn epicast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epicast")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn snapshot(dir: &Path) -> String {
    let d = dir.join("jhu").to_string_lossy().into_owned();
    let o = epicast(&["--synthetic", "4", "--data", &d, "fetch"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    d
}

#[test]
fn stats_and_adf_from_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = snapshot(tmp.path());
    let o = epicast(&[
        "--data",
        &data,
        "--format",
        "json",
        "stats",
        "--state",
        "CA",
        "--target",
        "confirmed",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["series"], "Conf-CA");
    let (min, max) = (v["stats"]["min"].as_f64().unwrap(), v["stats"]["max"].as_f64().unwrap());
    assert!(0.0 <= min && min < max);

    let o = epicast(&[
        "--data",
        &data,
        "adf",
        "--state",
        "NY",
        "--target",
        "confirmed",
        "--window",
        "full",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("critical -2.869"));
}

#[test]
fn forecast_file_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = snapshot(tmp.path());
    let mut bodies = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run).to_string_lossy().into_owned();
        let o = epicast(&[
            "--data",
            &data,
            "--output-dir",
            &out,
            "--seed",
            "5",
            "forecast",
            "--state",
            "MN",
            "--target",
            "death",
            "--family",
            "sarima",
            "--order",
            "0,1,1,0,0,1",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        bodies.push(std::fs::read(Path::new(&out).join("forecast_7-D_MN_fixed_200_sarima.json")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn bad_input_exit_codes() {
    assert_eq!(
        epicast(&["stats", "--state", "ZZ", "--target", "confirmed", "--synthetic", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        epicast(&[
            "--data",
            "/nonexistent/snapshot",
            "stats",
            "--state",
            "CA",
            "--target",
            "death"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(epicast(&["--help"]).status.code(), Some(0));
}

#[test]
fn stub_attribution_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out").to_string_lossy().into_owned();
    let o = epicast(&[
        "--synthetic",
        "2",
        "--output-dir",
        &out,
        "--format",
        "csv",
        "attribute",
        "--task",
        "28-C",
        "--region",
        "TX",
        "--stub",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(Path::new(&out).join("attribution.csv")).unwrap();
    assert!(csv.starts_with("task,region,metric,dimension,baseline,improvement_pct,variation_pct"));

    let runs = Path::new(&out).join("runs").to_string_lossy().into_owned();
    let o = epicast(&["--format", "csv", "report", "--runs", &runs]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), csv);
}
