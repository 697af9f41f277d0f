//! Drives the `swarmkey` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarmkey"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_fig8_reports_intruder() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("run").arg(bundled("fig8.scn")).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(report, stdout(&out));
    assert!(report.contains("drone 1 [honest]: observer 1: Authorized"));
    assert!(report.contains("drone 2 [nokey]: observer 1: Unauthorized"));
    assert!(report.contains("detection latency: 0.100 s"));
    for f in ["events.csv", "roster.csv", "trace.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        let widths: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
        assert!(widths.len() > 1, "{f} has no rows");
        assert!(widths.iter().all(|&w| w == widths[0]), "{f} ragged");
    }
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "time,drone_id,lat,lon,alt,status");
    assert!(trace.lines().any(|l| l.starts_with("60.000,2,") && l.ends_with(",Unauthorized")));
}

#[test]
fn run_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let status = bin()
            .args(["run", bundled("mixed.scn").to_str().unwrap(), "--seed", "5", "--out-dir"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    }
    for f in ["events.csv", "roster.csv", "trace.csv", "tx.csv", "rx.csv", "verify.csv", "alarms.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f}");
    }
    // the report lists where it wrote its files; everything else must match
    let report = |sub: &str| {
        let d = dir.path().join(sub);
        std::fs::read_to_string(d.join("report.txt")).unwrap().replace(&d.display().to_string(), "OUT")
    };
    assert_eq!(report("a"), report("b"));
}

#[test]
fn run_errors_use_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.scn");
    let out = bin().arg("run").arg(&missing).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("nope.scn"));

    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "[sim]\nduration = 1\n\n[pathloss]\nsigma = loud\n").unwrap();
    let out = bin().arg("run").arg(&bad).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.scn:5:pathloss.sigma"), "{}", stderr(&out));
}

#[test]
fn sweep_matches_table_grid() {
    let out = bin().args(["sweep", bundled("scores.csv").to_str().unwrap(), "--thresholds", "60:85:5"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "threshold,accuracy,precision,recall");
    assert_eq!(lines.len(), 7);
    let thresholds: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(thresholds, ["60", "65", "70", "75", "80", "85"]);
    let recalls: Vec<f64> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(recalls.windows(2).all(|w| w[1] <= w[0]));

    let out = bin().args(["sweep", bundled("scores.csv").to_str().unwrap(), "--thresholds", "70:70:5"]).output().unwrap();
    assert_eq!(stdout(&out).lines().count(), 2);
}

#[test]
fn sweep_rejects_empty_scores() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = bin().arg("sweep").arg(&empty).args(["--thresholds", "0:1:0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn roc_of(contents: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    std::fs::write(&path, contents).unwrap();
    bin().arg("roc").arg(&path).output().unwrap()
}

#[test]
fn roc_auc_lines() {
    let sep = roc_of("score,label\n0.9,1\n0.8,1\n0.2,0\n0.1,0\n");
    assert!(stdout(&sep).ends_with("AUC=1\n"), "{}", stdout(&sep));
    let hand = roc_of("score,label\n0.9,1\n0.6,1\n0.7,0\n0.3,0\n");
    assert!(stdout(&hand).ends_with("AUC=0.75\n"));
    assert!(stdout(&hand).contains("threshold,fpr,tpr\n"));
    assert!(stdout(&hand).contains("threshold,recall,precision\n"));
    let constant = roc_of("score,label\n0.5,1\n0.5,0\n0.5,1\n0.5,0\n");
    assert!(stdout(&constant).ends_with("AUC=0.5\n"));
    let single = roc_of("score,label\n0.5,1\n0.7,1\n");
    assert_eq!(single.status.code(), Some(2));
}

#[test]
fn roc_writes_files_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("roc").arg(bundled("scores.csv")).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("AUC=0.9"));
    assert!(dir.path().join("roc.csv").exists() && dir.path().join("pr.csv").exists());
}

#[test]
fn keygen_then_decode() {
    let out = bin().args(["keygen", "7", "25.2854", "51.5310", "30"]).output().unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("key=1 (0x01)\n"));
    let hex = text.lines().nth(1).unwrap().strip_prefix("packet=").unwrap();
    assert_eq!(hex.len(), 34);

    let out = bin().args(["decode", hex]).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("drone_id=7\n"));
    assert!(stdout(&out).contains("key valid under default schedule: yes"));

    let out = bin().args(["keygen", "0", "0", "0", "0"]).output().unwrap();
    assert!(stdout(&out).starts_with("key=0 "));
    let out = bin().args(["keygen", "1", "-0.0001", "0", "0"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let out = bin().args(["keygen", "1", "0", "200", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decode_failures() {
    let out = bin().args(["keygen", "7", "25.2854", "51.5310", "30"]).output().unwrap();
    let hex = stdout(&out).lines().nth(1).unwrap().strip_prefix("packet=").unwrap().to_string();
    let mut corrupt = hex.clone();
    corrupt.replace_range(4..6, "FF");
    let out = bin().args(["decode", &corrupt]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("crc mismatch"));

    let out = bin().args(["decode", &hex[..33]]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("length"));
}
