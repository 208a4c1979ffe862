use std::process::{Command, Output};

use serde_json::Value;

const GEN: &str = "y^2/(x^2+y^2)";
const SPHERE: &str = "0.5*(x^2+y^2)+0.5";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coneflank")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn classify_exit_codes() {
    let ok = run(&["classify", "--surface", GEN, "--theta", "30", "--grid", "5x5", "--domain", "0.6,1.1,0.4,1.0"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let v = json(&ok);
    assert_eq!(v["schema"], "cone-flank/1");
    assert_eq!(v["summary"]["verdict"], "holds");
    assert_eq!(v["provenance"]["input_sha256"].as_str().unwrap().len(), 64);

    let fails = run(&["classify", "--surface", "x^2+y^2", "--test", "ruled", "--grid", "5x5"]);
    assert_eq!(fails.status.code(), Some(2));
    assert_eq!(json(&fails)["summary"]["verdict"], "fails");

    let missing_theta = run(&["classify", "--surface", GEN, "--test", "cone"]);
    assert_eq!(missing_theta.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing_theta.stderr).contains("theta"));

    let bad_grid = run(&["classify", "--surface", GEN, "--theta", "30", "--grid", "5by5"]);
    assert_eq!(bad_grid.status.code(), Some(1));
}

#[test]
fn csv_output_and_determinism() {
    let args = ["classify", "--surface", GEN, "--theta", "30", "--grid", "3x3", "--domain", "0.6,1.1,0.4,1.0", "--format", "csv"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("record,test,index,x,y"));
    assert_eq!(text.lines().filter(|l| l.starts_with("node,cone")).count(), 9);
}

#[test]
fn solve_finds_the_generator() {
    let s3 = 3f64.sqrt();
    let out = run(&["solve", "--surface", GEN, "--theta", "30", "--at", &format!("{s3},0")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let roots = v["roots"].as_array().unwrap();
    assert!(!roots.is_empty() && roots.len() <= 6);
    assert!(roots.iter().any(|r| (r["u"].as_f64().unwrap() + s3 / 2.0).abs() < 1e-8 && r["v"].as_f64().unwrap().abs() < 1e-8));

    let out = run(&["solve", "--surface", GEN, "--theta", "30", "--at", &format!("{s3},0"), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u,v,c1,c2,c3,jacobian,multiple,at_infinity"));
    assert_eq!(lines.count(), roots.len());
}

#[test]
fn cones_write_frusta() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("cones.obj");
    let out = run(&["cones", "--surface", GEN, "--theta", "30", "--at", "1.2,0.3", "--obj", obj.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let n = json(&out)["cones"][0]["cones"].as_array().unwrap().len();
    assert!(n >= 1);
    let text = std::fs::read_to_string(&obj).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 64 * n);
    assert_eq!(text.lines().filter(|l| l.starts_with("o ")).count(), n);
}

#[test]
fn trace_polyline() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("trace.obj");
    let out = run(&[
        "trace", "--surface", GEN, "--theta", "30", "--at", "1.2,0.3", "--step", "0.05", "--length", "0.5", "--obj",
        obj.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let pts = json(&out)["points"].as_array().unwrap().len();
    let text = std::fs::read_to_string(&obj).unwrap();
    let line = text.lines().find(|l| l.starts_with("l ")).unwrap();
    assert_eq!(line.split_whitespace().count() - 1, pts);
}

#[test]
fn export_then_perturb_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("sphere.obj");
    let p = obj.to_str().unwrap();
    let out = run(&["export", "--surface", SPHERE, "--grid", "4x3", "--domain", "-0.5,0.5,-0.5,0.5", "--obj", p]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&obj).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 6);

    let a = run(&["perturb", "--surface", p, "--noise", "0.1", "--seed", "7"]);
    let b = run(&["perturb", "--surface", p, "--noise", "0.1", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["kind"], "cloud");
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 12);
    for q in pts {
        let q: Vec<f64> = q.as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect();
        let n = (q[3] * q[3] + q[4] * q[4] + q[5] * q[5]).sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        // tilted by atan(0.1) away from the sphere normal −r
        let cos = -(q[0] * q[3] + q[1] * q[4] + q[2] * q[5]);
        assert!((cos.acos() - 0.1f64.atan()).abs() < 1e-7);
    }

    let neg = run(&["perturb", "--surface", p, "--noise=-0.1"]);
    assert_eq!(neg.status.code(), Some(1));
}

#[test]
fn json_surface_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.json");
    std::fs::write(&path, format!(r#"{{"kind": "isotropic-expr", "f": "{SPHERE}"}}"#)).unwrap();
    let out = run(&["classify", "--surface", path.to_str().unwrap(), "--theta", "30", "--grid", "3x3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["summary"]["verdict"], "holds");
}
