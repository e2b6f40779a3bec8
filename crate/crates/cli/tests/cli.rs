use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fetalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fetalign")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fetalign(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn lines(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["synth", "--n", "3", "--seed", "7", "--output", s(&a)]);
    ok(&["synth", "--n", "3", "--seed", "7", "--output", s(&b), "--jobs", "2"]);
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), fb.len());
    assert!(fa.len() >= 3 * 3 + 1);
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(fetalign(&["synth", "--n", "0", "--output", s(tmp.path())]).status.code(), Some(2));
    assert_eq!(fetalign(&["synth", "--methods", "XYZ", "--output", s(tmp.path())]).status.code(), Some(2));
    assert_eq!(fetalign(&["register", "--output", s(tmp.path())]).status.code(), Some(2));
    let file = tmp.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let out = fetalign(&["synth", "--n", "1", "--output", s(&file.join("sub"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_reference_is_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = tmp.path().join("cohort");
    ok(&["synth", "--n", "2", "--output", s(&cohort)]);
    let out = fetalign(&[
        "register", "--input", s(&cohort), "--output", s(&tmp.path().join("reg")), "--reference-id", "99", "--methods", "E",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
}

#[test]
fn reference_only_cohort_registers_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = tmp.path().join("cohort");
    let reg = tmp.path().join("reg");
    ok(&["synth", "--n", "1", "--output", s(&cohort)]);
    ok(&["register", "--input", s(&cohort), "--output", s(&reg), "--methods", "E"]);
    assert_eq!(lines(&reg.join("manifest.csv")), 1);
    assert!(reg.join("reference").join("10.png").exists());
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let [cohort, reg, maps, eval, report] =
        ["cohort", "reg", "maps", "eval", "report"].map(|d| tmp.path().join(d));
    ok(&["synth", "--n", "4", "--output", s(&cohort)]);

    let masks = tmp.path().join("masks");
    ok(&["segment", "--input", s(&cohort), "--output", s(&masks)]);
    assert_eq!(files(&masks).len(), 4);
    let fits = tmp.path().join("fits");
    ok(&["fit", "--input", s(&cohort), "--output", s(&fits)]);
    assert_eq!(lines(&fits.join("fits.csv")), 5);

    ok(&["register", "--input", s(&cohort), "--output", s(&reg), "--methods", "E"]);
    assert_eq!(lines(&reg.join("manifest.csv")), 4);
    for id in ["1", "2", "3"] {
        for suffix in ["registered.png", "registered.csv", "transform.txt"] {
            assert!(reg.join("ellipse").join(format!("{id}_{suffix}")).exists(), "{id}_{suffix}");
        }
    }

    ok(&["maps", "--input", s(&reg), "--output", s(&maps), "--methods", "E"]);
    let pngs = files(&maps.join("ellipse"))
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "png") && !s(p).ends_with("_overlay.png"))
        .count();
    assert_eq!(pngs, 5);
    let out = ok(&["maps", "--input", s(&reg), "--output", s(&maps), "--methods", "E", "--structures", "midline,skull"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));

    ok(&["evaluate", "--input", s(&cohort), "--registered", s(&reg), "--output", s(&eval), "--methods", "E"]);
    assert!(lines(&eval.join("metrics.csv")) > 1);
    assert_eq!(lines(&eval.join("comparisons.csv")), 1);

    ok(&["report", "--input", s(&eval), "--output", s(&report)]);
    for f in ["summary.csv", "report.md"] {
        assert!(report.join(f).exists(), "{f}");
    }
    assert!(files(&report).iter().any(|p| s(p).ends_with("_boxplot.png")));
}
