use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wnorient(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wnorient"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

fn strip_normals(src: &Path, dst: &Path) {
    let text = fs::read_to_string(src).unwrap();
    let plain: String = text
        .lines()
        .map(|l| l.split_whitespace().take(3).collect::<Vec<_>>().join(" ") + "\n")
        .collect();
    fs::write(dst, plain).unwrap();
}

#[test]
fn generate_then_orient_with_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = wnorient(
        &["generate", "sphere", "--n", "600", "--seed", "2", "--output", "gt.xyz"],
        d,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    strip_normals(&d.join("gt.xyz"), &d.join("in.xyz"));
    let out = wnorient(
        &[
            "orient",
            "--input",
            "in.xyz",
            "--output",
            "out.ply",
            "--gt",
            "gt.xyz",
            "--export-exam-points",
            "--export-histogram",
            "--threads",
            "1",
        ],
        d,
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{stderr}");
    assert!(stderr.lines().next().unwrap().contains("f01"), "trace header: {stderr}");
    assert_eq!(
        files(d),
        ["gt.xyz", "in.xyz", "out.exam.txt", "out.ply", "out.report.json"]
    );

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out.report.json")).unwrap()).unwrap();
    assert!(report["metrics"]["truth_percentage"].as_f64().unwrap() > 99.0);
    assert_eq!(report["points"], 600);
    let counts = report["histogram"]["counts"].as_array().unwrap();
    let total: u64 = counts.iter().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, report["exam_points"].as_u64().unwrap());
    let exam = fs::read_to_string(d.join("out.exam.txt")).unwrap();
    assert_eq!(exam.lines().count() as u64, total);
    assert!(exam.lines().all(|l| l.split_whitespace().count() == 4));
    assert!(fs::read_to_string(d.join("out.ply")).unwrap().starts_with("ply\n"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(wnorient(&["generate", "torus", "--n", "800", "--output", "gt.xyz"], d)
        .status
        .success());
    strip_normals(&d.join("gt.xyz"), &d.join("in.xyz"));
    for (t, name) in [("1", "one.xyz"), ("3", "three.xyz")] {
        let out = wnorient(
            &[
                "orient",
                "--input",
                "in.xyz",
                "--output",
                name,
                "--threads",
                t,
                "--quiet",
            ],
            d,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(
        fs::read(d.join("one.xyz")).unwrap(),
        fs::read(d.join("three.xyz")).unwrap()
    );
}

#[test]
fn warm_start_from_gt_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(wnorient(&["generate", "sphere", "--n", "500", "--output", "gt.xyz"], d)
        .status
        .success());
    strip_normals(&d.join("gt.xyz"), &d.join("in.xyz"));
    let out = wnorient(
        &[
            "orient", "--input", "in.xyz", "--output", "o.xyz", "--init", "gt.xyz", "--gt", "gt.xyz", "--quiet",
        ],
        d,
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("truth 100.000%"), "{stdout}");
}

#[test]
fn missing_input_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = wnorient(
        &[
            "orient",
            "--input",
            "nope.xyz",
            "--output",
            "o.xyz",
            "--export-exam-points",
            "--export-histogram",
        ],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.xyz"));
    assert!(files(d).is_empty());
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.xyz"), "0 0 0\n1 0 0\n0 1\n").unwrap();
    let out = wnorient(&["orient", "--input", "bad.xyz", "--output", "o.xyz"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.xyz:3"));
    assert_eq!(files(d), ["bad.xyz"]);
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(wnorient(&["generate", "sphere", "--n", "300", "--output", "in.xyz"], d)
        .status
        .success());
    fs::create_dir(d.join("taken.report.json")).unwrap();
    let out = wnorient(
        &[
            "orient",
            "--input",
            "in.xyz",
            "--output",
            "taken.xyz",
            "--export-histogram",
            "--quiet",
        ],
        d,
    );
    assert!(!out.status.success());
    assert_eq!(files(d), ["in.xyz", "taken.report.json"]);
}

#[test]
fn invalid_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(wnorient(&["generate", "sphere", "--n", "300", "--output", "in.xyz"], d)
        .status
        .success());
    for bad in [
        ["--lambda-b", "-1"],
        ["--tol", "0"],
        ["--bbox-scale", "0.5"],
        ["--max-iters", "0"],
    ] {
        let mut args = vec!["orient", "--input", "in.xyz", "--output", "o.xyz"];
        args.extend(bad);
        let out = wnorient(&args, d);
        assert!(!out.status.success(), "{bad:?} accepted");
    }
    assert_eq!(files(d), ["in.xyz"]);
}
