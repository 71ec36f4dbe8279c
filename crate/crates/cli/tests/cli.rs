use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fiberspec::finite::finite_spectrum;
use fiberspec::model::{Boundary, LindbladModel};
use fiberspec::numerics::{eigenvalues, multiset_distance};
use fiberspec::spectrum::{full_spectrum, SpectrumCloud, Tag};

fn fiberspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiberspec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spectrum_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let out = fiberspec(&[
            "spectrum", "--builtin", "non_normal(delta=0.0,l=1)", "--G", "1", "--qpoints", "16", "--thetapoints", "16",
            "--out", path_str(p),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["grids"]["qpoints"], 16);
}

#[test]
fn csv_loads_back_into_the_same_cloud() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.csv");
    let out = fiberspec(&["spectrum", "--builtin", "dephasing", "--G", "2", "--qpoints", "4", "--thetapoints", "4", "--out", path_str(&p)]);
    assert!(out.status.success());
    let loaded = SpectrumCloud::from_csv(&fs::read_to_string(&p).unwrap()).unwrap();
    let direct = full_spectrum(&LindbladModel::dephasing(2.0).unwrap(), 4, 4).unwrap();
    assert_eq!(loaded, direct);
    let qs: std::collections::BTreeSet<u64> =
        loaded.points.iter().filter(|p| p.tag == Tag::Nhe).map(|p| p.q.unwrap().to_bits()).collect();
    assert_eq!(qs.len(), 4);
}

#[test]
fn finite_periodic_matches_library_and_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    let q = dir.path().join("g.csv");
    for path in [&p, &q] {
        let out = fiberspec(&["finite", "--builtin", "dephasing", "--G", "2", "--n", "7", "--bc", "periodic", "--out", path_str(path)]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    let loaded = SpectrumCloud::from_csv(&fs::read_to_string(&p).unwrap()).unwrap();
    let m = LindbladModel::dephasing(2.0).unwrap();
    let direct = finite_spectrum(&m, 7, Boundary::Periodic, None).unwrap();
    assert_eq!(loaded, direct);
    let golden = SpectrumCloud::from_csv(&fs::read_to_string(golden_dir().join("dephasing_n7_periodic.csv")).unwrap()).unwrap();
    assert!(multiset_distance(&golden.values(), &loaded.values()) < 1e-10);
    let dense = eigenvalues(&m.vectorized_lindbladian(7, Boundary::Periodic, None).unwrap()).unwrap();
    assert!(multiset_distance(&golden.values(), &dense) < 1e-10);
}

#[test]
fn disordered_finite_runs_are_seed_stable() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str, name: &str| {
        let p = dir.path().join(name);
        let out = fiberspec(&[
            "finite", "--builtin", "dephasing", "--G", "1", "--n", "6", "--lambda", "2", "--seed", seed, "--out", path_str(&p),
        ]);
        assert!(out.status.success());
        fs::read(&p).unwrap()
    };
    assert_eq!(read("5", "a.csv"), read("5", "b.csv"));
    assert_ne!(read("5", "c.csv"), read("6", "d.csv"));
}

#[test]
fn oversized_problem_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = fiberspec(&["finite", "--builtin", "dephasing", "--G", "2", "--n", "10000", "--out", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn malformed_model_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(&model, r#"{"G": 1.0, "hamiltonian": {"hopping": []}}"#).unwrap();
    let out = fiberspec(&["spectrum", "--model", path_str(&model), "--out", path_str(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid model"));
    let out = fiberspec(&["spectrum", "--builtin", "nonsense", "--G", "1", "--out", path_str(&dir.path().join("y.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn model_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    fs::write(&model, LindbladModel::exclusion(1.5).unwrap().to_json()).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(fiberspec(&["finite", "--model", path_str(&model), "--n", "6", "--out", path_str(&a)]).status.success());
    assert!(fiberspec(&["finite", "--builtin", "exclusion", "--G", "1.5", "--n", "6", "--out", path_str(&b)]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn compare_reports_hausdorff_distance() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "re,im,tag,q,theta\n0,0,EIG,,\n").unwrap();
    fs::write(&b, "re,im,tag,q,theta\n3,4,EIG,,\n").unwrap();
    let same = fiberspec(&["compare", "--a", path_str(&a), "--b", path_str(&a)]);
    assert_eq!(String::from_utf8_lossy(&same.stdout).trim().parse::<f64>().unwrap(), 0.0);
    let apart = fiberspec(&["compare", "--a", path_str(&a), "--b", path_str(&b)]);
    assert_eq!(String::from_utf8_lossy(&apart.stdout).trim().parse::<f64>().unwrap(), 5.0);
    fs::write(&b, "x,y\n1,2\n").unwrap();
    assert_eq!(fiberspec(&["compare", "--a", path_str(&a), "--b", path_str(&b)]).status.code(), Some(2));
}

#[test]
fn dephasing_finite_cloud_is_close_to_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.csv");
    let cf = dir.path().join("cf.csv");
    assert!(fiberspec(&["finite", "--builtin", "dephasing", "--G", "2", "--n", "20", "--out", path_str(&f)]).status.success());
    assert!(fiberspec(&["closed-form", "--builtin", "dephasing", "--G", "2", "--format", "csv", "--out", path_str(&cf)])
        .status
        .success());
    // closed-form samples carry only re,im; lift them into the cloud schema
    let text = fs::read_to_string(&cf).unwrap();
    let mut lifted = String::from("re,im,tag,q,theta\n");
    for line in text.lines().skip(1) {
        lifted.push_str(line);
        lifted.push_str(",EIG,,\n");
    }
    let cfc = dir.path().join("cf_cloud.csv");
    fs::write(&cfc, lifted).unwrap();
    let out = fiberspec(&["compare", "--a", path_str(&f), "--b", path_str(&cfc)]);
    let d: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    let gold: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(golden_dir().join("thresholds.json")).unwrap()).unwrap();
    let max = gold["dephasing_n20_vs_closed_form"]["max"].as_f64().unwrap();
    assert!(d > 0.0 && d < max, "d = {d}");
}

#[test]
fn auxiliary_commands_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let ok = |args: &[&str]| {
        let out = fiberspec(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["gap-scaling", "--G", "2", "--sizes", "20,40", "--out", path_str(&p("g.json"))]);
    ok(&["equivalence", "--builtin", "exclusion", "--G", "2", "--n", "6", "--out", path_str(&p("e.json"))]);
    ok(&["range", "--n", "8", "--samples", "50", "--out", path_str(&p("r.csv"))]);
    ok(&["pseudospectrum", "--builtin", "dephasing", "--G", "1", "--n", "5", "--nx", "4", "--ny", "3", "--out", path_str(&p("p.csv"))]);
    ok(&["containment", "--builtin", "dephasing", "--G", "1", "--n", "6", "--lambda", "1", "--seeds", "1", "--out", path_str(&p("c.json"))]);
    let eq: serde_json::Value = serde_json::from_str(&fs::read_to_string(p("e.json")).unwrap()).unwrap();
    assert!(eq["rows"][0]["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(fs::read_to_string(p("p.csv")).unwrap().lines().count(), 13);
    let range = fs::read_to_string(p("r.csv.manifest.json")).unwrap();
    assert!(range.contains("\"real_part\": 0"));
    let out = fiberspec(&["closed-form", "--builtin", "non_normal(delta=0.5)", "--G", "1", "--out", path_str(&p("x.json"))]);
    assert_eq!(out.status.code(), Some(2));
}
