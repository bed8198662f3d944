use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn povmcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_povmcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = povmcert(args);
    assert!(
        o.status.success(),
        "{args:?} exited {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn manifest(dir: &Path, name: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("manifest-{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn certify_prints_the_closed_form() {
    let out = ok(&[
        "--seed",
        "1",
        "certify",
        "--geometry",
        "3",
        "--state",
        "-1,0,0",
        "--format",
        "json",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["hmin_sdi"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    assert!((v["p_guess"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
}

#[test]
fn certify_reads_probabilities() {
    let out = ok(&[
        "--seed",
        "1",
        "certify",
        "--geometry",
        "3",
        "--probs",
        "0.3333333333333333,0.3333333333333333,0.3333333333333334",
        "--format",
        "json",
    ]);
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!((v["p_guess"].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-9);
}

#[test]
fn exit_codes() {
    let bad_geometry = povmcert(&["certify", "--geometry", "polygon:2", "--state", "0,0,0"]);
    assert_eq!(bad_geometry.status.code(), Some(2));
    let unphysical = povmcert(&["certify", "--geometry", "4", "--state", "1,1,0"]);
    assert_eq!(unphysical.status.code(), Some(2));
    let missing_file = povmcert(&[
        "mle",
        "--geometry",
        "3",
        "--counts",
        "/nonexistent/counts.csv",
    ]);
    assert_eq!(missing_file.status.code(), Some(2));
    let usage = povmcert(&["scan"]);
    assert_eq!(usage.status.code(), Some(2));

    let audit = povmcert(&[
        "--seed",
        "3",
        "verify",
        "--alpha-variant",
        "misprint",
        "--states-per-n",
        "10",
        "--disk-res",
        "21",
        "--ball-res",
        "3",
    ]);
    assert_eq!(audit.status.code(), Some(3));
    assert!(stdout(&audit).contains("planar-equivalence FAIL"));
}

#[test]
fn verify_flags_an_injected_geometry() {
    let dir = tempdir().unwrap();
    let json = ok(&["povm", "--geometry", "4", "--format", "json"]);
    let mut rec: Value = serde_json::from_str(&json).unwrap();
    rec["weights"][0] = Value::from(0.35);
    let path = dir.path().join("broken.json");
    std::fs::write(&path, rec.to_string()).unwrap();
    let o = povmcert(&[
        "--seed",
        "3",
        "verify",
        "--geometry",
        path.to_str().unwrap(),
        "--states-per-n",
        "10",
        "--disk-res",
        "21",
        "--ball-res",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("completeness FAIL"));
}

#[test]
fn verify_output_is_independent_of_thread_count() {
    let args = |t: &'static str| {
        [
            "--seed",
            "42",
            "--threads",
            t,
            "verify",
            "--states-per-n",
            "20",
            "--disk-res",
            "31",
            "--ball-res",
            "4",
        ]
    };
    let one = ok(&args("1"));
    let many = ok(&args("8"));
    assert_eq!(one, many);
    assert!(one.ends_with("verify PASS\n"));
}

#[test]
fn scan_and_tables_are_independent_of_thread_count() {
    let scan = |t: &str| {
        ok(&[
            "--seed",
            "9",
            "--threads",
            t,
            "scan",
            "--solid",
            "octahedron",
            "--res",
            "8",
        ])
    };
    assert_eq!(scan("1"), scan("4"));

    let d1 = tempdir().unwrap();
    let d2 = tempdir().unwrap();
    let tables = |t: &str, d: &Path| {
        ok(&[
            "--seed",
            "9",
            "--threads",
            t,
            "--out-dir",
            d.to_str().unwrap(),
            "tables",
            "T1",
            "T2",
            "--coincidences",
            "100000",
        ])
    };
    assert_eq!(tables("1", d1.path()), tables("4", d2.path()));
    for f in ["T1.csv", "T2.csv"] {
        assert_eq!(
            std::fs::read(d1.path().join(f)).unwrap(),
            std::fs::read(d2.path().join(f)).unwrap()
        );
    }
}

#[test]
fn simulate_ingest_mle_pipeline_with_manifests() {
    let dir = tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "--seed",
        "5",
        "--out-dir",
        d,
        "simulate",
        "--geometry",
        "F3",
        "--prep",
        "V",
        "--coincidences",
        "200000",
        "--out",
        "tags.bin",
    ]);
    let m = manifest(dir.path(), "simulate");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["seed_source"], "flag");
    let out = &m["outputs"][0];
    assert!(out["path"].as_str().unwrap().ends_with("tags.bin"));
    assert_eq!(out["sha256"].as_str().unwrap().len(), 64);

    let tags = dir.path().join("tags.bin");
    ok(&[
        "--seed",
        "5",
        "--out-dir",
        d,
        "ingest",
        "--timetags",
        tags.to_str().unwrap(),
        "--geometry",
        "F3",
        "--window-ns",
        "1.0",
        "--out",
        "counts.csv",
    ]);
    let counts = std::fs::read_to_string(dir.path().join("counts.csv")).unwrap();
    let m = manifest(dir.path(), "ingest");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 1);

    let total: u64 = counts
        .lines()
        .filter_map(|l| l.split(',').next_back()?.trim().parse::<u64>().ok())
        .sum();
    assert_eq!(total, 200_000, "{counts}");

    let v: Value = serde_json::from_str(&ok(&[
        "--seed",
        "5",
        "mle",
        "--geometry",
        "F3",
        "--counts",
        dir.path().join("counts.csv").to_str().unwrap(),
        "--json",
    ]))
    .unwrap();
    assert!((v["h_a"].as_f64().unwrap() - 0.585).abs() <= 0.02, "{v}");
}

#[test]
fn seed_is_drawn_and_recorded_when_absent() {
    let dir = tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "--out-dir",
        d,
        "simulate",
        "--geometry",
        "4",
        "--prep",
        "H",
        "--coincidences",
        "1000",
        "--counts-only",
        "--out",
        "c.csv",
    ]);
    let m = manifest(dir.path(), "simulate");
    assert_eq!(m["seed_source"], "entropy");
    assert!(m["seed"].is_u64());
}

#[test]
fn formats() {
    let csv = ok(&["povm", "--geometry", "3", "--format", "csv"]);
    assert_eq!(csv.lines().next().unwrap(), "k,weight,x,y,z");
    assert_eq!(csv.lines().count(), 4);
    let json: Value =
        serde_json::from_str(&ok(&["povm", "--geometry", "S6", "--format", "json"])).unwrap();
    assert_eq!(json["N"], 6);

    let bounds = ok(&["bounds", "--nmax", "10"]);
    assert!(bounds.lines().count() >= 9);
    let bounds: Value =
        serde_json::from_str(&ok(&["--format", "json", "bounds", "--nmax", "10"])).unwrap();
    assert!(bounds.is_array());

    let o = povmcert(&["--format", "json", "figures", "F1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_reports_a_strategy() {
    let v: Value = serde_json::from_str(&ok(&[
        "oracle",
        "--geometry",
        "3",
        "--probs",
        "0,0.5,0.5",
        "--json",
    ]))
    .unwrap();
    assert!((v["p_guess"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert!(!v["strategy"].as_array().unwrap().is_empty());
    assert_eq!(v["audit"]["flagged"], false);
}

#[test]
fn out_dir_collects_figure_files() {
    let dir = tempdir().unwrap();
    ok(&[
        "--out-dir",
        dir.path().to_str().unwrap(),
        "figures",
        "F2",
        "--res",
        "21",
    ]);
    for n in [4, 5, 6, 10] {
        assert!(dir.path().join(format!("F2_N{n}.csv")).exists());
    }
    let m = manifest(dir.path(), "figures");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn geometry_records_follow_the_schema() {
    let schema: Value =
        serde_json::from_str(include_str!("../../../schemas/geometry.v1.json")).unwrap();
    assert_eq!(schema["$id"], "povm-geometry/v1");
    let props = schema["properties"].as_object().unwrap();
    let kinds = schema["properties"]["kind"]["enum"].as_array().unwrap();
    for g in [
        "3",
        "polygon:7@30",
        "S6",
        "tetrahedron",
        "cube",
        "icosahedron",
        "dodecahedron",
    ] {
        let rec: Value =
            serde_json::from_str(&ok(&["povm", "--geometry", g, "--format", "json"])).unwrap();
        let obj = rec.as_object().unwrap();
        for key in obj.keys() {
            assert!(props.contains_key(key), "{g}: {key}");
        }
        for key in schema["required"].as_array().unwrap() {
            assert!(obj.contains_key(key.as_str().unwrap()), "{g}: {key}");
        }
        assert!(kinds.contains(&rec["kind"]), "{g}");
        assert_eq!(
            rec["directions"].as_array().unwrap().len() as u64,
            rec["N"].as_u64().unwrap()
        );
    }
}
