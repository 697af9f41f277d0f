//! Two-stage packet verification (key match, then RSSI plausibility) and the
//! per-drone roster it maintains.
//!
//! The roster is a single-writer state machine: observations and ticks are
//! applied in timestamp order by one owner, and published snapshots are
//! immutable values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::protocol::{derive_key, format_deg_q, AdvertisementPacket, GpsFixQ, KeySchedule};
use crate::rssi::{rssi_consistent, ObserverPose, PathLossModel};

/// Period between roster publications, seconds of logical time.
pub const PUBLISH_PERIOD_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub packet: AdvertisementPacket,
    pub measured_rssi: f64,
    pub rx_time: f64,
    pub observer: ObserverPose,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AuthorizedRegistry {
    pub ids: BTreeSet<u16>,
    pub schedule: KeySchedule,
}

impl AuthorizedRegistry {
    pub fn new(ids: impl IntoIterator<Item = u16>, schedule: KeySchedule) -> Self {
        Self { ids: ids.into_iter().collect(), schedule }
    }

    pub fn contains(&self, id: u16) -> bool {
        self.ids.contains(&id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlarmPolicy {
    pub k_consecutive: u32,
    pub stale_timeout: f64,
}

impl Default for AlarmPolicy {
    fn default() -> Self {
        Self { k_consecutive: 2, stale_timeout: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerificationOutcome {
    pub known_id: bool,
    pub key_ok: bool,
    pub rssi_ok: bool,
    pub residual: f64,
}

impl VerificationOutcome {
    pub fn passed(&self) -> bool {
        self.known_id && self.key_ok && self.rssi_ok
    }
}

/// Runs both checks on a CRC-valid packet. Every check is evaluated even
/// when an earlier one fails, so the outcome records all three verdicts.
pub fn verify_observation(obs: &Observation, registry: &AuthorizedRegistry, model: &PathLossModel) -> VerificationOutcome {
    let record = &obs.packet.record;
    let rssi = rssi_consistent(obs.measured_rssi, &record.fix, &obs.observer, model);
    VerificationOutcome {
        known_id: registry.contains(record.drone_id),
        key_ok: obs.packet.key == derive_key(record, &registry.schedule),
        rssi_ok: rssi.consistent,
        residual: rssi.residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Authorized,
    Unauthorized,
    Stale,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Authorized => "Authorized",
            Status::Unauthorized => "Unauthorized",
            Status::Stale => "Stale",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RosterEntry {
    pub drone_id: u16,
    pub last_fix: GpsFixQ,
    pub last_rssi: f64,
    pub last_seen: f64,
    pub last_seq: u16,
    pub key_ok: bool,
    pub rssi_ok: bool,
    pub fail_streak: u32,
    /// Consecutive full passes since the entry was last flagged.
    pub pass_streak: u32,
    /// Latched by an alarm; cleared after `k_consecutive` consecutive passes.
    pub flagged: bool,
    pub status: Status,
}

impl RosterEntry {
    pub const CSV_HEADER: &'static str = "time,drone_id,lat,lon,alt,rssi,key_ok,rssi_ok,status";

    pub fn csv_row(&self, time: f64) -> String {
        format!(
            "{},{},{},{},{},{:.3},{},{},{}",
            format_time(time),
            self.drone_id,
            format_deg_q(self.last_fix.lat_q()),
            format_deg_q(self.last_fix.lon_q()),
            self.last_fix.alt_q(),
            self.last_rssi,
            self.key_ok,
            self.rssi_ok,
            self.status
        )
    }
}

/// Fixed-precision logical time for CSV output.
pub fn format_time(t: f64) -> String {
    format!("{t:.3}")
}

/// What one observation did to its roster entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub drone_id: u16,
    /// `None` when the drone was not yet on the roster.
    pub from: Option<Status>,
    pub to: Status,
}

impl Transition {
    /// Entering Unauthorized from any other state (or from nothing).
    pub fn is_alarm(&self) -> bool {
        self.to == Status::Unauthorized && self.from != Some(Status::Unauthorized)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Roster {
    entries: BTreeMap<u16, RosterEntry>,
}

impl Roster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: u16) -> Option<&RosterEntry> {
        self.entries.get(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &RosterEntry> {
        self.entries.values()
    }

    /// Folds one verification outcome into the drone's entry.
    ///
    /// Unknown ids are Unauthorized immediately. Known ids are flagged once
    /// `fail_streak` reaches `k_consecutive`, and a flagged known id needs
    /// `k_consecutive` consecutive full passes to return to Authorized.
    pub fn apply_outcome(&mut self, obs: &Observation, outcome: &VerificationOutcome, policy: &AlarmPolicy) -> Transition {
        let record = &obs.packet.record;
        let k = policy.k_consecutive.max(1);
        let prev = self.entries.get(&record.drone_id).copied();
        let (mut fail_streak, mut pass_streak, mut flagged) =
            prev.map_or((0, 0, false), |e| (e.fail_streak, e.pass_streak, e.flagged));

        if outcome.passed() {
            fail_streak = 0;
            pass_streak = pass_streak.saturating_add(1);
        } else {
            fail_streak = fail_streak.saturating_add(1);
            pass_streak = 0;
        }

        let status = if !outcome.known_id {
            flagged = true;
            Status::Unauthorized
        } else if fail_streak >= k {
            flagged = true;
            Status::Unauthorized
        } else if flagged {
            if pass_streak >= k {
                flagged = false;
                Status::Authorized
            } else {
                Status::Unauthorized
            }
        } else {
            Status::Authorized
        };

        let entry = RosterEntry {
            drone_id: record.drone_id,
            last_fix: record.fix,
            last_rssi: obs.measured_rssi,
            last_seen: obs.rx_time,
            last_seq: record.seq,
            key_ok: outcome.key_ok,
            rssi_ok: outcome.rssi_ok,
            fail_streak,
            pass_streak,
            flagged,
            status,
        };
        self.entries.insert(record.drone_id, entry);
        Transition { drone_id: record.drone_id, from: prev.map(|e| e.status), to: status }
    }

    /// Marks entries silent for longer than the stale timeout as Stale.
    /// Returns the ids that changed.
    pub fn tick(&mut self, now: f64, policy: &AlarmPolicy) -> Vec<u16> {
        let mut changed = Vec::new();
        for entry in self.entries.values_mut() {
            if entry.status != Status::Stale && now - entry.last_seen > policy.stale_timeout {
                entry.status = Status::Stale;
                changed.push(entry.drone_id);
            }
        }
        changed
    }

    pub fn publish(&self, now: f64) -> RosterSnapshot {
        RosterSnapshot { time: now, entries: self.entries.values().copied().collect() }
    }
}

/// An immutable copy of the roster at one publication instant, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct RosterSnapshot {
    pub time: f64,
    pub entries: Vec<RosterEntry>,
}

impl RosterSnapshot {
    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.entries.iter().map(|e| e.csv_row(self.time))
    }
}

/// One observer's verification pipeline: receive/verify feeds the roster,
/// publish emits snapshots on a fixed logical-time grid.
#[derive(Debug, Clone)]
pub struct Verifier {
    pub registry: AuthorizedRegistry,
    pub model: PathLossModel,
    pub policy: AlarmPolicy,
    roster: Roster,
    reports: Vec<RosterSnapshot>,
}

impl Verifier {
    pub fn new(registry: AuthorizedRegistry, model: PathLossModel, policy: AlarmPolicy) -> Self {
        Self { registry, model, policy, roster: Roster::new(), reports: Vec::new() }
    }

    pub fn observe(&mut self, obs: &Observation) -> (VerificationOutcome, Transition) {
        let outcome = verify_observation(obs, &self.registry, &self.model);
        let transition = self.roster.apply_outcome(obs, &outcome, &self.policy);
        (outcome, transition)
    }

    pub fn tick(&mut self, now: f64) -> Vec<u16> {
        self.roster.tick(now, &self.policy)
    }

    /// Appends a snapshot to the controller-bound report stream.
    pub fn publish(&mut self, now: f64) -> &RosterSnapshot {
        self.reports.push(self.roster.publish(now));
        self.reports.last().expect("just pushed")
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn reports(&self) -> &[RosterSnapshot] {
        &self.reports
    }
}
