//! CSV exports of an [`EventLog`] and the plain-text run summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::metrics::{detection_latency, Latency};
use crate::protocol::{format_deg_q, GpsFixQ};
use crate::sim::{Event, EventLog};
use crate::verifier::{format_time, RosterEntry, Status};

fn fix_cols(fix: &GpsFixQ) -> String {
    format!("{},{},{}", format_deg_q(fix.lat_q()), format_deg_q(fix.lon_q()), fix.alt_q())
}

/// Every tx, rx, verification and alarm record in log order.
pub fn events_csv(log: &EventLog) -> String {
    let mut out = String::from(
        "time,kind,observer,agent_id,drone_id,seq,key,lat,lon,alt,distance,rssi,residual,known_id,key_ok,rssi_ok,delivered,status\n",
    );
    for e in &log.events {
        let row = match e {
            Event::Tx(t) => {
                let r = &t.packet.record;
                format!(
                    "{},tx,,{},{},{},{},{},,,,,,,,",
                    format_time(t.time),
                    t.agent_id,
                    r.drone_id,
                    r.seq,
                    t.packet.key.value(),
                    fix_cols(&r.fix)
                )
            }
            Event::Rx(r) => format!(
                "{},rx,{},{},{},,,,,,{:.3},{:.3},,,,,{},",
                format_time(r.time),
                r.observer,
                r.agent_id,
                r.drone_id,
                r.distance,
                r.rssi,
                r.delivered
            ),
            Event::Verify(v) => format!(
                "{},verify,{},{},{},,,,,,,,{:.3},{},{},{},,{}",
                format_time(v.time),
                v.observer,
                v.agent_id,
                v.drone_id,
                v.outcome.residual,
                v.outcome.known_id,
                v.outcome.key_ok,
                v.outcome.rssi_ok,
                v.status
            ),
            Event::Alarm(a) => format!(
                "{},alarm,{},{},{},,,,,,,,,,,,,{}",
                format_time(a.time),
                a.observer,
                a.agent_id,
                a.drone_id,
                Status::Unauthorized
            ),
            Event::Snapshot(_) => continue,
        };
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn tx_csv(log: &EventLog) -> String {
    let mut out = String::from("time,agent_id,drone_id,seq,key,lat,lon,alt,true_lat,true_lon,true_alt,packet\n");
    for t in log.tx() {
        let r = &t.packet.record;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            format_time(t.time),
            t.agent_id,
            r.drone_id,
            r.seq,
            t.packet.key.value(),
            fix_cols(&r.fix),
            fix_cols(&t.true_fix),
            t.packet.to_hex()
        );
    }
    out
}

pub fn rx_csv(log: &EventLog) -> String {
    let mut out = String::from("time,observer,agent_id,drone_id,distance,rssi,delivered\n");
    for r in log.rx() {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3},{:.3},{}",
            format_time(r.time),
            r.observer,
            r.agent_id,
            r.drone_id,
            r.distance,
            r.rssi,
            r.delivered
        );
    }
    out
}

pub fn verify_csv(log: &EventLog) -> String {
    let mut out = String::from("time,observer,agent_id,drone_id,known_id,key_ok,rssi_ok,residual,status\n");
    for v in log.verifications() {
        let o = &v.outcome;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3},{}",
            format_time(v.time),
            v.observer,
            v.agent_id,
            v.drone_id,
            o.known_id,
            o.key_ok,
            o.rssi_ok,
            o.residual,
            v.status
        );
    }
    out
}

pub fn alarms_csv(log: &EventLog) -> String {
    let mut out = String::from("time,observer,drone_id,agent_id\n");
    for a in log.alarms() {
        let _ = writeln!(out, "{},{},{},{}", format_time(a.time), a.observer, a.drone_id, a.agent_id);
    }
    out
}

/// Snapshot rows prefixed with the publishing observer's id.
pub fn roster_csv(log: &EventLog) -> String {
    let mut out = format!("observer,{}\n", RosterEntry::CSV_HEADER);
    for s in log.snapshots() {
        for row in s.snapshot.csv_rows() {
            let _ = writeln!(out, "{},{row}", s.observer);
        }
    }
    out
}

/// Plot-ready positions with status; `Unseen` before any observer has
/// heard the agent's claimed id.
pub fn trace_csv(log: &EventLog) -> String {
    let mut out = String::from("time,drone_id,lat,lon,alt,status\n");
    for t in &log.trace {
        let status = t.status.map_or("Unseen", Status::as_str);
        let _ = writeln!(out, "{},{},{},{}", format_time(t.time), t.agent_id, fix_cols(&t.fix), status);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroneSummary {
    pub agent_id: u16,
    pub claimed_id: u16,
    pub behavior: String,
    /// Last published status per observer.
    pub final_status: BTreeMap<u16, Status>,
    pub key_failures: usize,
    pub rssi_failures: usize,
    pub latency: Option<Latency>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub drones: Vec<DroneSummary>,
    /// (time, observer, drone id)
    pub alarms: Vec<(f64, u16, u16)>,
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn from_log(log: &EventLog) -> Self {
        let latencies = detection_latency(log);
        let drones = log
            .agents
            .iter()
            .map(|a| {
                let own = || log.verifications().filter(|v| v.agent_id == a.drone_id);
                DroneSummary {
                    agent_id: a.drone_id,
                    claimed_id: a.claimed_id,
                    behavior: a.behavior.to_string(),
                    final_status: log.final_status(a.claimed_id),
                    key_failures: own().filter(|v| !v.outcome.key_ok).count(),
                    rssi_failures: own().filter(|v| !v.outcome.rssi_ok).count(),
                    latency: latencies.get(&a.drone_id).copied(),
                }
            })
            .collect();
        Self {
            scenario: log.scenario.clone(),
            seed: log.seed,
            drones,
            alarms: log.alarms().map(|a| (a.time, a.observer, a.drone_id)).collect(),
            outputs: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "\ndrones:");
        for d in &self.drones {
            let status = if d.final_status.is_empty() {
                "Unseen".to_string()
            } else {
                d.final_status.iter().map(|(o, s)| format!("observer {o}: {s}")).collect::<Vec<_>>().join(", ")
            };
            let claimed =
                if d.claimed_id != d.agent_id { format!(" (as {})", d.claimed_id) } else { String::new() };
            let _ = writeln!(
                out,
                "  drone {}{claimed} [{}]: {status}; key failures {}, rssi failures {}",
                d.agent_id, d.behavior, d.key_failures, d.rssi_failures
            );
            match d.latency {
                Some(Latency::Detected(s)) => {
                    let _ = writeln!(out, "    detection latency: {s:.3} s");
                }
                Some(Latency::NotDetected) => {
                    let _ = writeln!(out, "    detection latency: not detected");
                }
                None => {}
            }
        }
        let _ = writeln!(out, "\nalarms: {}", self.alarms.len());
        for (t, o, id) in &self.alarms {
            let _ = writeln!(out, "  {} observer {o}: drone {id} Unauthorized", format_time(*t));
        }
        if !self.outputs.is_empty() {
            let _ = writeln!(out, "\noutputs:");
            for p in &self.outputs {
                let _ = writeln!(out, "  {p}");
            }
        }
        out
    }
}
