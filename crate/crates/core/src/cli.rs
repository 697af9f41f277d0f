//! Command implementations behind the `swarmkey` binary. Each returns its
//! output as data so it can be tested without spawning a process.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 I/O error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::metrics::{roc_auc, sweep, threshold_grid, LabeledScore, MetricsError};
use crate::protocol::{derive_key, format_deg_q, quantize_fix, AdvertisementPacket, FlightRecord, KeySchedule};
use crate::report::{self, RunReport};
use crate::scenario::parse_scenario;
use crate::sim;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Runs a scenario file and writes its CSVs and `report.txt` to `out_dir`.
pub fn cmd_run(scenario: &Path, seed: Option<u64>, out_dir: &Path) -> Result<RunReport, CliError> {
    let text = read(scenario)?;
    let mut config =
        parse_scenario(&text, &scenario.display().to_string()).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let log = sim::run(&config).map_err(|e| CliError::Usage(format!("{}: {e}", scenario.display())))?;

    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let files: [(&str, String); 8] = [
        ("events.csv", report::events_csv(&log)),
        ("roster.csv", report::roster_csv(&log)),
        ("trace.csv", report::trace_csv(&log)),
        ("tx.csv", report::tx_csv(&log)),
        ("rx.csv", report::rx_csv(&log)),
        ("verify.csv", report::verify_csv(&log)),
        ("alarms.csv", report::alarms_csv(&log)),
        ("report.txt", String::new()),
    ];
    let mut run_report = RunReport::from_log(&log);
    run_report.outputs = files.iter().map(|(name, _)| out_dir.join(name).display().to_string()).collect();
    for (name, contents) in &files {
        let contents = if *name == "report.txt" { run_report.render() } else { contents.clone() };
        write(&out_dir.join(name), &contents)?;
    }
    Ok(run_report)
}

/// Reads `score,label` rows. A non-numeric first row is taken as a header.
pub fn parse_scores(text: &str, path: &str) -> Result<Vec<LabeledScore>, CliError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| CliError::Usage(format!("{path}:{}: {m}", idx + 1));
        let (score, label) = line.split_once(',').ok_or_else(|| bad("expected score,label"))?;
        let score = match score.trim().parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            Ok(_) => return Err(bad("score must be finite")),
            Err(_) if out.is_empty() && idx == first_content_line(text) => continue,
            Err(_) => return Err(bad("invalid score")),
        };
        let label = match label.trim().to_ascii_lowercase().as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad("label must be 0/1 or true/false")),
        };
        out.push(LabeledScore::new(score, label));
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{path}: no scores")));
    }
    Ok(out)
}

fn first_content_line(text: &str) -> usize {
    text.lines().position(|l| !l.trim().is_empty()).unwrap_or(0)
}

/// Parses `a:b:step`, or a single value.
pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid --thresholds '{spec}', expected a:b:step"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let grid = match parts.as_slice() {
        [a] => vec![*a],
        [a, b] if a == b => vec![*a],
        [a, b, step] => threshold_grid(*a, *b, *step),
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

fn fmt_real(x: f64) -> String {
    format!("{x:.4}")
}

/// Threshold table with columns `threshold,accuracy,precision,recall`.
pub fn cmd_sweep(scores_path: &Path, thresholds: &str) -> Result<String, CliError> {
    let scores = parse_scores(&read(scores_path)?, &scores_path.display().to_string())?;
    let grid = parse_thresholds(thresholds)?;
    let mut out = String::from("threshold,accuracy,precision,recall\n");
    for r in sweep(&scores, &grid)? {
        let _ = writeln!(out, "{},{},{},{}", r.threshold, fmt_real(r.accuracy), fmt_real(r.precision), fmt_real(r.recall));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocOutput {
    /// `threshold,fpr,tpr`
    pub roc_csv: String,
    /// `threshold,recall,precision`
    pub pr_csv: String,
    pub auc: f64,
}

impl RocOutput {
    pub fn auc_line(&self) -> String {
        format!("AUC={}", self.auc)
    }
}

pub fn cmd_roc(scores_path: &Path) -> Result<RocOutput, CliError> {
    let scores = parse_scores(&read(scores_path)?, &scores_path.display().to_string())?;
    let curve = roc_auc(&scores)?;
    let mut roc_csv = String::from("threshold,fpr,tpr\n");
    let mut pr_csv = String::from("threshold,recall,precision\n");
    for p in &curve.points {
        let _ = writeln!(roc_csv, "{},{},{}", p.threshold, p.fpr, p.tpr);
        if p.threshold.is_finite() {
            let _ = writeln!(pr_csv, "{},{},{}", p.threshold, p.tpr, p.precision);
        }
    }
    Ok(RocOutput { roc_csv, pr_csv, auc: curve.auc })
}

pub fn cmd_keygen(id: u16, lat: f64, lon: f64, alt: f64) -> Result<String, CliError> {
    let fix = quantize_fix(lat, lon, alt).map_err(|e| CliError::Usage(e.to_string()))?;
    let record = FlightRecord::new(id, fix, 0);
    let key = derive_key(&record, &KeySchedule::default());
    let packet = AdvertisementPacket::new(record, key);
    Ok(format!("key={} (0x{:02X})\npacket={}\n", key.value(), key.value(), packet.to_hex()))
}

pub fn cmd_decode(hex: &str) -> Result<String, CliError> {
    let packet = AdvertisementPacket::from_hex(hex).map_err(|e| CliError::Usage(e.to_string()))?;
    let r = &packet.record;
    let valid = packet.key == derive_key(r, &KeySchedule::default());
    let mut out = String::new();
    let _ = writeln!(out, "drone_id={}", r.drone_id);
    let _ = writeln!(out, "lat={} (lat_q={})", format_deg_q(r.fix.lat_q()), r.fix.lat_q());
    let _ = writeln!(out, "lon={} (lon_q={})", format_deg_q(r.fix.lon_q()), r.fix.lon_q());
    let _ = writeln!(out, "alt={}", r.fix.alt_q());
    let _ = writeln!(out, "seq={}", r.seq);
    let _ = writeln!(out, "key={} (0x{:02X})", packet.key.value(), packet.key.value());
    let _ = writeln!(out, "crc=0x{:02X}", packet.crc());
    let _ = writeln!(out, "key valid under default schedule: {}", if valid { "yes" } else { "no" });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keygen_examples() {
        assert!(cmd_keygen(0, 0.0, 0.0, 0.0).unwrap().starts_with("key=0 (0x00)"));
        assert!(cmd_keygen(7, 25.2854, 51.5310, 30.0).unwrap().starts_with("key=1 (0x01)"));
        assert!(cmd_keygen(1, 0.0, 0.0, 0.0).unwrap().starts_with("key=5 (0x05)"));
        let e = cmd_keygen(1, 91.0, 0.0, 0.0).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn decode_round_trips_keygen() {
        let out = cmd_keygen(7, 25.2854, 51.5310, 30.0).unwrap();
        let hex = out.lines().nth(1).unwrap().strip_prefix("packet=").unwrap();
        let dump = cmd_decode(hex).unwrap();
        assert!(dump.contains("drone_id=7\n"));
        assert!(dump.contains("lat=25.2854 "));
        assert!(dump.contains("lon=51.5310 "));
        assert!(dump.contains("alt=30\n"));
        assert!(dump.contains("seq=0\n"));
        assert!(dump.contains("key=1 "));
        assert!(dump.ends_with("key valid under default schedule: yes\n"));
    }

    #[test]
    fn decode_errors_named() {
        let out = cmd_keygen(7, 25.2854, 51.5310, 30.0).unwrap();
        let hex = out.lines().nth(1).unwrap().strip_prefix("packet=").unwrap().to_string();
        let mut corrupt = hex.clone();
        corrupt.replace_range(32..34, if &hex[32..34] == "00" { "01" } else { "00" });
        let e = cmd_decode(&corrupt).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("crc mismatch"));

        let e = cmd_decode(&hex[..33]).unwrap_err();
        assert!(e.to_string().contains("length"));

        let e = cmd_decode(&format!("D4{}", &hex[2..])).unwrap_err();
        assert!(e.to_string().contains("magic"));
    }

    #[test]
    fn score_parsing() {
        let s = parse_scores("score,label\n0.9,1\n0.1,false\n", "s.csv").unwrap();
        assert_eq!(s, vec![LabeledScore::new(0.9, true), LabeledScore::new(0.1, false)]);
        assert!(parse_scores("0.9,1\n", "s.csv").is_ok());
        assert_eq!(parse_scores("", "s.csv").unwrap_err().exit_code(), 2);
        assert_eq!(parse_scores("score,label\n", "s.csv").unwrap_err().exit_code(), 2);
        assert_eq!(parse_scores("score,label\n0.9,maybe\n", "s.csv").unwrap_err().exit_code(), 2);
        assert_eq!(parse_scores("score,label\nx,1\n", "s.csv").unwrap_err().exit_code(), 2);
        assert_eq!(parse_scores("score,label\nNaN,1\n", "s.csv").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn threshold_specs() {
        assert_eq!(parse_thresholds("60:85:5").unwrap().len(), 6);
        assert_eq!(parse_thresholds("70:70:5").unwrap(), vec![70.0]);
        assert_eq!(parse_thresholds("70").unwrap(), vec![70.0]);
        assert!(parse_thresholds("85:60:5").is_err());
        assert!(parse_thresholds("a:b:c").is_err());
        assert!(parse_thresholds("1:2:0").is_err());
    }
}
