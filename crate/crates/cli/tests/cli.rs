use std::path::Path;
use std::process::{Command, Output};

fn evovoter(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evovoter"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trajectory_and_result() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(
        dir.path(),
        &[
            "simulate",
            "--n",
            "400",
            "--L",
            "8",
            "--nu",
            "0.8",
            "--max-updates",
            "4e4",
            "--seed",
            "2",
            "--out",
            "run",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert!(csv.starts_with("updates,time,N1,N10,N11,N00,Dmax\n"));
    let v = json(&dir.path().join("run.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 2);
    assert_eq!(v["results"].as_array().unwrap().len(), 1);
}

#[test]
fn zero_density_absorbs_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(
        dir.path(),
        &[
            "simulate", "--p", "0", "--n", "100", "--L", "4", "--out", "p0",
        ],
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("p0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(dir.path(), &["simulate", "--nu", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nu"));
    let o = evovoter(dir.path(), &["simulate", "--n", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = evovoter(dir.path(), &["table1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = evovoter(
        dir.path(),
        &["arch", "--input", "missing.csv", "--n", "10", "--L", "2"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_same_bytes_for_any_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "simulate",
        "--n",
        "300",
        "--L",
        "6",
        "--nu",
        "1.2",
        "--max-updates",
        "2e4",
        "--replicas",
        "3",
        "--seed",
        "9",
    ];
    for (jobs, out) in [("1", "a"), ("3", "b")] {
        let mut args = base.to_vec();
        args.extend(["--jobs", jobs, "--out", out]);
        assert!(evovoter(dir.path(), &args).status.success());
    }
    for r in 0..3 {
        let a = std::fs::read(dir.path().join(format!("a_r{r}.csv"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b_r{r}.csv"))).unwrap();
        assert_eq!(a, b, "replica {r}");
    }
    let c = std::fs::read(dir.path().join("a_r0.csv")).unwrap();
    let d = std::fs::read(dir.path().join("a_r1.csv")).unwrap();
    assert_ne!(c, d);
}

#[test]
fn config_file_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"p": 0.5, "nu": 2.0, "L": 10}"#,
    )
    .unwrap();
    let o = evovoter(
        dir.path(),
        &["pa", "--config", "c.json", "--nu", "1", "--out", "pa"],
    );
    assert!(o.status.success());
    let v = json(&dir.path().join("pa.json"));
    assert_eq!(v["equilibrium"]["nu"], 1.0);
    assert_eq!(v["equilibrium"]["L"], 10.0);
    std::fs::write(dir.path().join("bad.json"), r#"{"bogus": 1}"#).unwrap();
    let o = evovoter(dir.path(), &["pa", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pa_equilibrium_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(
        dir.path(),
        &["pa", "--p", "0.5", "--nu", "1", "--L", "40", "--out", "pa"],
    );
    assert!(o.status.success());
    let v = json(&dir.path().join("pa.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["equilibrium"]["J0"], 10.0);
    assert_eq!(v["equilibrium"]["K0"], 30.0);
    assert_eq!(v["nu_c"], 0.5);
}

#[test]
fn table1_from_published_ub() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(dir.path(), &["table1", "--use-paper-ub", "--out", "t"]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    assert!(
        (rows[0][3] - 0.1041).abs() <= 5e-4
            && (rows[0][5] - 0.0625).abs() <= 5e-4
            && (rows[0][7] - 0.2208).abs() <= 5e-4
    );
    assert!(
        (rows[5][3] - 0.0341).abs() <= 5e-4
            && (rows[5][5] - 0.0113).abs() <= 5e-4
            && (rows[5][7] - 0.4129).abs() <= 5e-4
    );

    let o = evovoter(
        dir.path(),
        &[
            "table1",
            "--use-paper-ub",
            "--nu-list",
            "",
            "--out",
            "empty",
        ],
    );
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);

    let o = evovoter(
        dir.path(),
        &["table1", "--use-paper-ub", "--nu-list", "3.7"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn table1_resimulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "table1",
        "--resimulate",
        "--nu-list",
        "2",
        "--n",
        "400",
        "--L",
        "20",
        "--replicas",
        "2",
        "--seed",
        "4",
    ];
    for out in ["a", "b"] {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        assert!(evovoter(dir.path(), &a).status.success());
    }
    assert_eq!(
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap()
    );
    let v = json(&dir.path().join("a.json"));
    assert_eq!(v["rows"][0]["replicas"], 2);
}

#[test]
fn oracle_exit_status_tracks_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(
        dir.path(),
        &[
            "oracle",
            "--fixtures",
            "fx",
            "--generate",
            "--replicas",
            "8",
            "--max-n",
            "20",
            "--out",
            "o",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sidecar = dir.path().join("fx/fixture_003.json");
    let mut v = json(&sidecar);
    v["expected"][1] = serde_json::Value::String("12345/7".into());
    std::fs::write(&sidecar, v.to_string()).unwrap();
    let o = evovoter(dir.path(), &["oracle", "--fixtures", "fx", "--out", "o"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fixture_003"));
}

#[test]
fn arch_from_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let sim = [
        "simulate",
        "--n",
        "500",
        "--L",
        "10",
        "--nu",
        "1.5",
        "--max-updates",
        "2e5",
        "--out",
        "t",
    ];
    assert!(evovoter(dir.path(), &sim).status.success());
    let o = evovoter(
        dir.path(),
        &[
            "arch", "--input", "t.csv", "--n", "500", "--L", "10", "--out", "fit",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("fit.json"));
    assert!(v["fit"]["a"].as_f64().unwrap() > 0.0);
    assert_eq!(v["replicas_used"], 1);
}

#[test]
fn ame_tasks_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(
        dir.path(),
        &["ame", "--task", "backward", "--replicas", "2", "--out", "b"],
    );
    assert!(o.status.success());
    let v = json(&dir.path().join("b.json"));
    assert!(v["final_distance"]
        .as_array()
        .unwrap()
        .iter()
        .all(|d| d.as_f64().unwrap() < 1e-8));
    let o = evovoter(
        dir.path(),
        &[
            "ame",
            "--task",
            "stationary",
            "--horizon",
            "2e4",
            "--samples",
            "2000",
            "--out",
            "s",
        ],
    );
    assert!(o.status.success());
    let v = json(&dir.path().join("s.json"));
    assert!(v["occupancy_gap_in_se"].as_f64().unwrap().is_finite());
    let o = evovoter(dir.path(), &["ame", "--beta", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn nuscan_classifies_each_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = evovoter(
        dir.path(),
        &[
            "nuscan",
            "--p",
            "0.5",
            "--nu-grid",
            "0.2:0.6:0.2",
            "--n",
            "200",
            "--L",
            "8",
            "--replicas",
            "2",
            "--out",
            "ns",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ns.csv")).unwrap();
    let nus: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(nus, ["0.2", "0.4", "0.6"]);
    let runs = std::fs::read_to_string(dir.path().join("ns_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 3 * 2);
}

#[test]
fn pooled_runs_accepts_zero_jobs() {
    use evovoter::dynamics::ModelParams;
    let params = ModelParams {
        n: 200,
        l: 4,
        nu: 0.5,
        max_updates: Some(5_000),
        ..Default::default()
    };
    let a = evovoter_cli::pooled_runs(&params, 3, 50, Some(8_000), 0).unwrap();
    let b = evovoter_cli::pooled_runs(&params, 3, 50, Some(8_000), 1).unwrap();
    assert_eq!(a.len(), b.len());
    assert!(a.iter().map(|r| r.updates).sum::<u64>() >= 8_000);
}
