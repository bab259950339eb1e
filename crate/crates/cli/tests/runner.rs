use std::collections::BTreeSet;
use std::process::Command;

use mfcz_cli::{list_experiments, run, validate};

fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
    v.iter().map(|(k, s)| (k.to_string(), s.to_string())).collect()
}

#[test]
fn catalog_has_the_twelve_presets_with_anchors() {
    let cat = list_experiments();
    let names: BTreeSet<&str> = cat.iter().map(|e| e.name).collect();
    let expected: BTreeSet<&str> = [
        "lemma-sweep",
        "sumset-table",
        "czdecomp-audit",
        "weak11-scan",
        "normscan-unweighted",
        "normscan-weighted",
        "sharpmax-fs",
        "pointwise-dom",
        "weights-jn",
        "br-kernel-scaling",
        "br-norm-scan",
        "delta-p-table",
    ]
    .into_iter()
    .collect();
    assert_eq!(cat.len(), 12);
    assert_eq!(names, expected);
    assert!(cat.iter().all(|e| !e.anchor.is_empty() && !e.description.is_empty()));
}

#[test]
fn every_default_passes_dry_run_validation() {
    for e in list_experiments() {
        validate(e.name, &[]).unwrap_or_else(|err| panic!("{}: {err:#}", e.name));
    }
}

#[test]
fn unknown_experiment_lists_the_catalog() {
    let err = format!("{:#}", run("no-such-thing", &[], None).unwrap_err());
    for e in list_experiments() {
        assert!(err.contains(e.name), "{err}");
    }
}

#[test]
fn bad_parameters_are_rejected_before_compute() {
    assert!(validate("lemma-sweep", &pairs(&[("colour", "red")])).is_err());
    assert!(validate("lemma-sweep", &pairs(&[("p", "3")])).is_err());
    assert!(validate("czdecomp-audit", &pairs(&[("grid", "100")])).is_err());
    assert!(validate("normscan-weighted", &pairs(&[("p", "2"), ("s", "2")])).is_err());
    assert!(validate("sharpmax-fs", &pairs(&[("t", "0.5")])).is_err());
    assert!(validate("weak11-scan", &pairs(&[("n", "4")])).is_err());
    assert!(validate("br-kernel-scaling", &pairs(&[("j", "-12:-3")])).is_err());
    assert!(validate("br-norm-scan", &pairs(&[("domain", "triangle")])).is_err());
    assert!(validate("normscan-weighted", &pairs(&[("weight", "spike:3:0")])).is_err());
    assert!(validate("delta-p-table", &pairs(&[("dims", "1")])).is_err());
}

#[test]
fn reports_echo_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let r = run("sumset-table", &pairs(&[("n_max", "5"), ("k_max", "3")]), Some(dir.path())).unwrap();
    assert!(r.all_pass);
    assert_eq!(r.config["n_max"], "5");
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "sumset-table");
    assert_eq!(json["seed"], 0);
    assert_eq!(json["config"]["k_max"], "3");
    let csv = std::fs::read_to_string(dir.path().join("sumset.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 15);
    assert!(csv.contains("5,3,13,13"));
}

#[test]
fn identical_config_gives_byte_identical_csv() {
    let cases: [(&str, &[(&str, &str)]); 4] = [
        ("lemma-sweep", &[("n_max", "8"), ("runs", "3")]),
        ("czdecomp-audit", &[("grid", "64"), ("n", "1:4"), ("functions", "3")]),
        ("normscan-weighted", &[("grid", "128"), ("n", "2,4,6,8")]),
        ("pointwise-dom", &[("grid", "64"), ("n", "1,2,4"), ("functions", "3")]),
    ];
    for (name, ov) in cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(name, &pairs(ov), Some(a.path())).unwrap();
        run(name, &pairs(ov), Some(b.path())).unwrap();
        let mut n = 0;
        for entry in std::fs::read_dir(a.path()).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "csv") {
                let other = b.path().join(p.file_name().unwrap());
                assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(other).unwrap(), "{name}: {p:?}");
                n += 1;
            }
        }
        assert!(n > 0, "{name} wrote no CSV");
    }
}

#[test]
fn a_different_seed_changes_random_output() {
    let ov = |s: &str| pairs(&[("n_max", "6"), ("runs", "2"), ("seed", s)]);
    let a = run("lemma-sweep", &ov("1"), None).unwrap();
    let b = run("lemma-sweep", &ov("2"), None).unwrap();
    assert_ne!(a.tables[0].rows, b.tables[0].rows);
}

#[test]
fn binary_exit_codes_follow_verdicts() {
    let bin = env!("CARGO_BIN_EXE_mfcz");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(bin)
        .args(["delta-p-table", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    let cfg = dir.path().join("c.txt");
    std::fs::write(&cfg, "# tiny\nn_max = 4\nk-max=2\n").unwrap();
    let out = Command::new(bin)
        .args(["sumset-table", "--config"])
        .arg(&cfg)
        .args(["--k-max", "3", "--dry-run"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n_max=4") && text.contains("k_max=3"), "{text}");
    let bad = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("lemma-sweep"));
    let list = Command::new(bin).arg("list").output().unwrap();
    assert_eq!(String::from_utf8(list.stdout).unwrap().lines().count(), 12);
}
