//! Deterministic discrete-event swarm simulator.
//!
//! The clock advances in whole ticks of `tick_dt`. Each tick runs three
//! stages in a fixed order: agents transmit, observers receive and verify,
//! then rosters go stale and (every 0.1 s) publish. Every random draw comes
//! from a ChaCha substream keyed by `(seed, purpose, observer, agent,
//! packet index)`, so adding or removing one agent never shifts another
//! agent's noise.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{
    quantize_fix, AdvertisementPacket, FlightRecord, GpsFixQ, RangeError, VerificationKey,
};
use crate::rssi::{geodesic_distance, sample_rssi, ObserverPose, PathLossModel};
use crate::verifier::{
    AlarmPolicy, AuthorizedRegistry, Observation, RosterSnapshot, Status, VerificationOutcome, Verifier,
    PUBLISH_PERIOD_S,
};

/// A configuration problem, naming the offending field as `section.key`.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub t: f64,
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl Waypoint {
    pub fn new(t: f64, lat: f64, lon: f64, alt: f64) -> Self {
        Self { t, lat, lon, alt }
    }
}

/// Piecewise-linear path through timed waypoints, clamped at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("trajectory needs at least one waypoint")]
    Empty,
    #[error("waypoint times must be strictly increasing (waypoint {0})")]
    NotIncreasing(usize),
    #[error("waypoint {index}: {source}")]
    Range { index: usize, source: RangeError },
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, TrajectoryError> {
        if waypoints.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for (index, w) in waypoints.iter().enumerate() {
            if !w.t.is_finite() || (index > 0 && !(w.t > waypoints[index - 1].t)) {
                return Err(TrajectoryError::NotIncreasing(index));
            }
            quantize_fix(w.lat, w.lon, w.alt).map_err(|source| TrajectoryError::Range { index, source })?;
        }
        Ok(Self { waypoints })
    }

    /// A single fixed position.
    pub fn hover(lat: f64, lon: f64, alt: f64) -> Result<Self, TrajectoryError> {
        Self::new(vec![Waypoint::new(0.0, lat, lon, alt)])
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn position_at(&self, t: f64) -> GpsFixQ {
        let w = &self.waypoints;
        let (lat, lon, alt) = match w.iter().position(|p| p.t > t) {
            Some(0) => (w[0].lat, w[0].lon, w[0].alt),
            None => {
                let last = w[w.len() - 1];
                (last.lat, last.lon, last.alt)
            }
            Some(i) => {
                let (a, b) = (w[i - 1], w[i]);
                let f = (t - a.t) / (b.t - a.t);
                (a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon), a.alt + f * (b.alt - a.alt))
            }
        };
        // Interpolating between in-range waypoints stays in range.
        quantize_fix(lat, lon, alt).expect("interpolated fix within waypoint bounds")
    }
}

pub fn position_at(trajectory: &Trajectory, t: f64) -> GpsFixQ {
    trajectory.position_at(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Behavior {
    Honest,
    /// Always sends key 0.
    NoKey,
    /// A fresh uniform key per packet.
    RandomKey,
    /// Rebroadcasts the source drone's packets, `capture_delay` seconds old,
    /// from the attacker's own position.
    Replay { source_id: u16, capture_delay: f64 },
    /// Signs a falsified position: the true one shifted by
    /// (`dlat` degrees, `dlon` degrees, `dalt` meters).
    Spoof { dlat: f64, dlon: f64, dalt: f64 },
}

impl Behavior {
    pub fn is_intruder(&self) -> bool {
        !matches!(self, Behavior::Honest)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::NoKey => "nokey",
            Behavior::RandomKey => "randomkey",
            Behavior::Replay { .. } => "replay",
            Behavior::Spoof { .. } => "spoof",
        }
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub drone_id: u16,
    pub trajectory: Trajectory,
    pub behavior: Behavior,
    pub advertise_interval: f64,
    /// First transmission time.
    pub start: f64,
    /// Last possible transmission time, if any.
    pub stop: Option<f64>,
}

impl AgentSpec {
    pub fn new(drone_id: u16, trajectory: Trajectory, behavior: Behavior) -> Self {
        Self { drone_id, trajectory, behavior, advertise_interval: 0.1, start: 0.0, stop: None }
    }

    /// The id carried in this agent's packets.
    pub fn claimed_id(&self) -> u16 {
        match self.behavior {
            Behavior::Replay { source_id, .. } => source_id,
            _ => self.drone_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverSpec {
    pub id: u16,
    pub pose: ObserverPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration: f64,
    pub tick_dt: f64,
    pub seed: u64,
    /// Per-(packet, observer) drop probability.
    pub loss_prob: f64,
    pub model: PathLossModel,
    pub policy: AlarmPolicy,
    pub registry: AuthorizedRegistry,
    pub agents: Vec<AgentSpec>,
    pub observers: Vec<ObserverSpec>,
}

impl ScenarioConfig {
    pub fn new(name: impl Into<String>, duration: f64) -> Self {
        Self {
            name: name.into(),
            duration,
            tick_dt: 0.01,
            seed: 0,
            loss_prob: 0.0,
            model: PathLossModel::default(),
            policy: AlarmPolicy::default(),
            registry: AuthorizedRegistry::default(),
            agents: Vec::new(),
            observers: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(ConfigError::new("sim.duration", "must be a positive number"));
        }
        if !(self.tick_dt >= 0.001) || !self.tick_dt.is_finite() {
            return Err(ConfigError::new("sim.tick_dt", "must be at least 0.001 s"));
        }
        if ticks_in(PUBLISH_PERIOD_S, self.tick_dt).is_none() {
            return Err(ConfigError::new("sim.tick_dt", "must divide the 0.1 s publication period"));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(ConfigError::new("sim.loss", "must lie in [0, 1]"));
        }
        if let Err(key) = self.model.validate() {
            return Err(ConfigError::new(format!("pathloss.{key}"), "out of range"));
        }
        if self.policy.k_consecutive < 1 {
            return Err(ConfigError::new("policy.k", "must be at least 1"));
        }
        if !(self.policy.stale_timeout > 0.0) {
            return Err(ConfigError::new("policy.stale_timeout", "must be positive"));
        }
        if self.observers.is_empty() {
            return Err(ConfigError::new("observer", "at least one observer is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.observers {
            if !seen.insert(o.id) {
                return Err(ConfigError::new(format!("observer {}", o.id), "duplicate observer id"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.agents {
            let section = format!("agent {}", a.drone_id);
            if !seen.insert(a.drone_id) {
                return Err(ConfigError::new(section, "duplicate agent id"));
            }
            if !(a.advertise_interval > 0.0) || ticks_in(a.advertise_interval, self.tick_dt).is_none() {
                return Err(ConfigError::new(format!("{section}.interval"), "must be a positive multiple of sim.tick_dt"));
            }
            let start_on_grid = a.start == 0.0 || ticks_in(a.start, self.tick_dt).is_some();
            if !(a.start >= 0.0) || !start_on_grid {
                return Err(ConfigError::new(format!("{section}.start"), "must be a non-negative multiple of sim.tick_dt"));
            }
            if let Some(stop) = a.stop {
                if !(stop >= a.start) {
                    return Err(ConfigError::new(format!("{section}.stop"), "must not precede start"));
                }
            }
            match a.behavior {
                Behavior::Honest if !self.registry.contains(a.drone_id) => {
                    return Err(ConfigError::new(format!("{section}.behavior"), "honest agent missing from registry.ids"));
                }
                Behavior::Replay { source_id, capture_delay } => {
                    if !self.agents.iter().any(|s| s.drone_id == source_id && s.drone_id != a.drone_id) {
                        return Err(ConfigError::new(format!("{section}.source"), format!("no agent {source_id} to replay")));
                    }
                    if !(capture_delay >= 0.0) || (capture_delay > 0.0 && ticks_in(capture_delay, self.tick_dt).is_none()) {
                        return Err(ConfigError::new(
                            format!("{section}.capture_delay"),
                            "must be a non-negative multiple of sim.tick_dt",
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn total_ticks(&self) -> u64 {
        (self.duration / self.tick_dt + 1e-9).floor() as u64
    }

    pub fn publish_ticks(&self) -> u64 {
        ticks_in(PUBLISH_PERIOD_S, self.tick_dt).expect("validated")
    }
}

/// `span / dt` when it is a positive whole number (within float slack).
fn ticks_in(span: f64, dt: f64) -> Option<u64> {
    let ratio = span / dt;
    let rounded = ratio.round();
    (rounded >= 1.0 && (ratio - rounded).abs() < 1e-6).then_some(rounded as u64)
}

/// Independent deterministic random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub observer: u16,
    pub agent: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Shadowing = 1,
    Loss = 2,
    Key = 3,
}

impl StreamKey {
    /// The generator for one packet index of this stream.
    pub fn packet(&self, index: u64) -> ChaCha8Rng {
        let mut key = splitmix64(self.seed);
        key = splitmix64(key ^ self.purpose as u64);
        key = splitmix64(key ^ (self.observer as u64) << 16 ^ self.agent as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxEvent {
    pub tick: u64,
    pub time: f64,
    pub agent_id: u16,
    pub packet: AdvertisementPacket,
    /// Where the transmitter physically is.
    pub true_fix: GpsFixQ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RxEvent {
    pub tick: u64,
    pub time: f64,
    pub observer: u16,
    pub agent_id: u16,
    pub drone_id: u16,
    pub distance: f64,
    pub rssi: f64,
    pub delivered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyEvent {
    pub tick: u64,
    pub time: f64,
    pub observer: u16,
    pub agent_id: u16,
    pub drone_id: u16,
    pub outcome: VerificationOutcome,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlarmEvent {
    pub tick: u64,
    pub time: f64,
    pub observer: u16,
    pub drone_id: u16,
    pub agent_id: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEvent {
    pub tick: u64,
    pub observer: u16,
    pub snapshot: RosterSnapshot,
}

/// Log records, listed in their within-tick order.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Tx(TxEvent),
    Rx(RxEvent),
    Verify(VerifyEvent),
    Alarm(AlarmEvent),
    Snapshot(SnapshotEvent),
}

impl Event {
    pub fn tick(&self) -> u64 {
        match self {
            Event::Tx(e) => e.tick,
            Event::Rx(e) => e.tick,
            Event::Verify(e) => e.tick,
            Event::Alarm(e) => e.tick,
            Event::Snapshot(e) => e.tick,
        }
    }

    pub fn kind_rank(&self) -> u8 {
        match self {
            Event::Tx(_) => 0,
            Event::Rx(_) => 1,
            Event::Verify(_) => 2,
            Event::Alarm(_) => 3,
            Event::Snapshot(_) => 4,
        }
    }

    /// Drone id used to break ties within one tick and kind.
    pub fn drone_key(&self) -> u16 {
        match self {
            Event::Tx(e) => e.agent_id,
            Event::Rx(e) => e.agent_id,
            Event::Verify(e) => e.agent_id,
            Event::Alarm(e) => e.agent_id,
            Event::Snapshot(_) => 0,
        }
    }

    pub fn order_key(&self) -> (u64, u8, u16) {
        (self.tick(), self.kind_rank(), self.drone_key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentInfo {
    pub drone_id: u16,
    pub claimed_id: u16,
    pub behavior: Behavior,
}

/// Position and aggregate status of one agent at a publication instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub time: f64,
    pub agent_id: u16,
    pub fix: GpsFixQ,
    /// Most severe status any observer holds for the agent's claimed id.
    pub status: Option<Status>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub scenario: String,
    pub seed: u64,
    pub tick_dt: f64,
    pub agents: Vec<AgentInfo>,
    pub events: Vec<Event>,
    pub trace: Vec<TraceRow>,
}

impl EventLog {
    pub fn tx(&self) -> impl Iterator<Item = &TxEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Tx(x) => Some(x),
            _ => None,
        })
    }

    pub fn rx(&self) -> impl Iterator<Item = &RxEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Rx(x) => Some(x),
            _ => None,
        })
    }

    pub fn verifications(&self) -> impl Iterator<Item = &VerifyEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Verify(x) => Some(x),
            _ => None,
        })
    }

    pub fn alarms(&self) -> impl Iterator<Item = &AlarmEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Alarm(x) => Some(x),
            _ => None,
        })
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &SnapshotEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Snapshot(x) => Some(x),
            _ => None,
        })
    }

    pub fn agent(&self, id: u16) -> Option<&AgentInfo> {
        self.agents.iter().find(|a| a.drone_id == id)
    }

    /// Last published status of `drone_id` at each observer.
    pub fn final_status(&self, drone_id: u16) -> BTreeMap<u16, Status> {
        let mut out = BTreeMap::new();
        for s in self.snapshots() {
            match s.snapshot.entries.iter().find(|e| e.drone_id == drone_id) {
                Some(e) => {
                    out.insert(s.observer, e.status);
                }
                None => {
                    out.remove(&s.observer);
                }
            }
        }
        out
    }
}

struct AgentState {
    spec: AgentSpec,
    interval_ticks: u64,
    start_tick: u64,
    stop_tick: Option<u64>,
    tx_count: u64,
    /// Transmissions so far, for replay capture.
    history: Vec<(u64, AdvertisementPacket)>,
}

impl AgentState {
    fn transmits_at(&self, tick: u64) -> bool {
        tick >= self.start_tick
            && (tick - self.start_tick) % self.interval_ticks == 0
            && self.stop_tick.is_none_or(|s| tick <= s)
    }
}

fn tick_of(t: f64, dt: f64) -> u64 {
    (t / dt).round() as u64
}

/// Runs a scenario to completion.
pub fn run(config: &ScenarioConfig) -> Result<EventLog, ConfigError> {
    config.validate()?;
    let dt = config.tick_dt;
    let schedule = config.registry.schedule;
    let publish_ticks = config.publish_ticks();

    let mut agents: Vec<AgentState> = config
        .agents
        .iter()
        .map(|spec| AgentState {
            interval_ticks: tick_of(spec.advertise_interval, dt),
            start_tick: tick_of(spec.start, dt),
            stop_tick: spec.stop.map(|s| (s / dt + 1e-9).floor() as u64),
            tx_count: 0,
            history: Vec::new(),
            spec: spec.clone(),
        })
        .collect();
    agents.sort_by_key(|a| a.spec.drone_id);

    let mut observers: Vec<(ObserverSpec, Verifier)> = config
        .observers
        .iter()
        .map(|o| (*o, Verifier::new(config.registry.clone(), config.model, config.policy)))
        .collect();
    observers.sort_by_key(|(o, _)| o.id);

    let mut log = EventLog {
        scenario: config.name.clone(),
        seed: config.seed,
        tick_dt: dt,
        agents: agents
            .iter()
            .map(|a| AgentInfo { drone_id: a.spec.drone_id, claimed_id: a.spec.claimed_id(), behavior: a.spec.behavior })
            .collect(),
        events: Vec::new(),
        trace: Vec::new(),
    };

    for tick in 0..=config.total_ticks() {
        let now = tick as f64 * dt;

        // Stage 1: acquire flight data, derive keys, broadcast.
        let mut sent: Vec<(usize, TxEvent, u64)> = Vec::new();
        for idx in 0..agents.len() {
            if !agents[idx].transmits_at(tick) {
                continue;
            }
            let true_fix = agents[idx].spec.trajectory.position_at(now);
            let Some(packet) = build_packet(&agents, idx, tick, dt, true_fix, config.seed, &schedule) else {
                continue;
            };
            let agent = &mut agents[idx];
            let index = agent.tx_count;
            agent.tx_count += 1;
            agent.history.push((tick, packet));
            let ev = TxEvent { tick, time: now, agent_id: agent.spec.drone_id, packet, true_fix };
            sent.push((idx, ev, index));
        }

        // Stage 2: receive with channel noise, verify, update rosters.
        let mut rx_events = Vec::new();
        let mut verify_events = Vec::new();
        let mut alarm_events = Vec::new();
        for (_, tx, index) in &sent {
            for (obs_spec, verifier) in observers.iter_mut() {
                let distance = geodesic_distance(&tx.true_fix, &obs_spec.pose.fix);
                let stream = |purpose| StreamKey { seed: config.seed, purpose, observer: obs_spec.id, agent: tx.agent_id };
                let delivered =
                    config.loss_prob == 0.0 || stream(Purpose::Loss).packet(*index).gen::<f64>() >= config.loss_prob;
                let rssi = sample_rssi(distance, &config.model, &mut stream(Purpose::Shadowing).packet(*index));
                let drone_id = tx.packet.record.drone_id;
                rx_events.push(Event::Rx(RxEvent {
                    tick,
                    time: now,
                    observer: obs_spec.id,
                    agent_id: tx.agent_id,
                    drone_id,
                    distance,
                    rssi,
                    delivered,
                }));
                if !delivered {
                    continue;
                }
                let obs = Observation { packet: tx.packet, measured_rssi: rssi, rx_time: now, observer: obs_spec.pose };
                let (outcome, transition) = verifier.observe(&obs);
                verify_events.push(Event::Verify(VerifyEvent {
                    tick,
                    time: now,
                    observer: obs_spec.id,
                    agent_id: tx.agent_id,
                    drone_id,
                    outcome,
                    status: transition.to,
                }));
                if transition.is_alarm() {
                    alarm_events.push(Event::Alarm(AlarmEvent {
                        tick,
                        time: now,
                        observer: obs_spec.id,
                        drone_id,
                        agent_id: tx.agent_id,
                    }));
                }
            }
        }
        log.events.extend(sent.into_iter().map(|(_, tx, _)| Event::Tx(tx)));
        log.events.append(&mut rx_events);
        log.events.append(&mut verify_events);
        log.events.append(&mut alarm_events);

        // Stage 3: expire silent entries, publish on the 0.1 s grid.
        for (_, verifier) in observers.iter_mut() {
            verifier.tick(now);
        }
        if tick > 0 && tick % publish_ticks == 0 {
            for (obs_spec, verifier) in observers.iter_mut() {
                let snapshot = verifier.publish(now).clone();
                log.events.push(Event::Snapshot(SnapshotEvent { tick, observer: obs_spec.id, snapshot }));
            }
            for agent in &agents {
                let claimed = agent.spec.claimed_id();
                let status = observers
                    .iter()
                    .filter_map(|(_, v)| v.roster().get(claimed).map(|e| e.status))
                    .max_by_key(|s| severity(*s));
                log.trace.push(TraceRow {
                    tick,
                    time: now,
                    agent_id: agent.spec.drone_id,
                    fix: agent.spec.trajectory.position_at(now),
                    status,
                });
            }
        }
    }
    Ok(log)
}

fn severity(s: Status) -> u8 {
    match s {
        Status::Authorized => 0,
        Status::Stale => 1,
        Status::Unauthorized => 2,
    }
}

/// The packet agent `idx` puts on the air at `tick`, or `None` when a
/// replayer has nothing captured yet.
fn build_packet(
    agents: &[AgentState],
    idx: usize,
    tick: u64,
    dt: f64,
    true_fix: GpsFixQ,
    seed: u64,
    schedule: &crate::protocol::KeySchedule,
) -> Option<AdvertisementPacket> {
    let agent = &agents[idx];
    let id = agent.spec.drone_id;
    let record = FlightRecord::new(id, true_fix, agent.tx_count as u16);
    let packet = match agent.spec.behavior {
        Behavior::Honest => AdvertisementPacket::signed(record, schedule),
        Behavior::NoKey => AdvertisementPacket::new(record, VerificationKey(0)),
        Behavior::RandomKey => {
            let mut rng = StreamKey { seed, purpose: Purpose::Key, observer: 0, agent: id }.packet(agent.tx_count);
            AdvertisementPacket::new(record, VerificationKey(rng.gen()))
        }
        Behavior::Spoof { dlat, dlon, dalt } => {
            let fake = quantize_fix(
                (true_fix.lat_deg() + dlat).clamp(-90.0, 90.0),
                (true_fix.lon_deg() + dlon).clamp(-180.0, 180.0),
                (true_fix.alt_m() + dalt).clamp(-32_767.0, 32_767.0),
            )
            .expect("clamped into range");
            AdvertisementPacket::signed(FlightRecord::new(id, fake, record.seq), schedule)
        }
        Behavior::Replay { source_id, capture_delay } => {
            let source = agents.iter().find(|a| a.spec.drone_id == source_id)?;
            let latest = tick.checked_sub(tick_of(capture_delay, dt))?;
            return source.history.iter().rev().find(|(t, _)| *t <= latest).map(|(_, p)| *p);
        }
    };
    Some(packet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::KeySchedule;

    fn q(lat: f64, lon: f64, alt: f64) -> GpsFixQ {
        quantize_fix(lat, lon, alt).unwrap()
    }

    fn base(duration: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::new("test", duration);
        c.model.shadow_sigma = 0.0;
        c.registry = AuthorizedRegistry::new([1, 2], KeySchedule::default());
        c.observers.push(ObserverSpec { id: 1, pose: ObserverPose { fix: q(25.2854, 51.5310, 0.0) } });
        c
    }

    #[test]
    fn position_clamps_and_interpolates() {
        let t = Trajectory::new(vec![Waypoint::new(1.0, 0.0, 0.0, 0.0), Waypoint::new(3.0, 2.0, 0.0, 100.0)]).unwrap();
        assert_eq!(t.position_at(0.0), q(0.0, 0.0, 0.0));
        assert_eq!(t.position_at(2.0), q(1.0, 0.0, 50.0));
        assert_eq!(t.position_at(99.0), q(2.0, 0.0, 100.0));
        assert_eq!(position_at(&t, 3.0), q(2.0, 0.0, 100.0));
    }

    #[test]
    fn trajectory_validation() {
        assert_eq!(Trajectory::new(vec![]), Err(TrajectoryError::Empty));
        let dup = vec![Waypoint::new(1.0, 0.0, 0.0, 0.0), Waypoint::new(1.0, 0.0, 0.0, 0.0)];
        assert_eq!(Trajectory::new(dup), Err(TrajectoryError::NotIncreasing(1)));
        assert!(matches!(Trajectory::hover(95.0, 0.0, 0.0), Err(TrajectoryError::Range { index: 0, .. })));
    }

    #[test]
    fn honest_baseline() {
        let mut c = base(1.0);
        c.agents.push(AgentSpec::new(1, Trajectory::hover(25.2855, 51.5311, 20.0).unwrap(), Behavior::Honest));
        let log = run(&c).unwrap();
        assert_eq!(log.tx().count(), 11);
        assert!(log.verifications().all(|v| v.outcome.passed()));
        assert_eq!(log.snapshots().count(), 10);
        assert_eq!(log.alarms().count(), 0);
    }

    #[test]
    fn events_are_totally_ordered() {
        let mut c = base(2.0);
        c.model.shadow_sigma = 2.0;
        c.observers.push(ObserverSpec { id: 2, pose: ObserverPose { fix: q(25.2860, 51.5300, 0.0) } });
        c.agents.push(AgentSpec::new(2, Trajectory::hover(25.2856, 51.5312, 20.0).unwrap(), Behavior::RandomKey));
        c.agents.push(AgentSpec::new(1, Trajectory::hover(25.2855, 51.5311, 20.0).unwrap(), Behavior::Honest));
        let log = run(&c).unwrap();
        let keys: Vec<_> = log.events.iter().map(Event::order_key).collect();
        assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn config_errors_name_fields() {
        let mut c = base(1.0);
        c.duration = 0.0;
        assert_eq!(c.validate().unwrap_err().field, "sim.duration");

        let mut c = base(1.0);
        c.tick_dt = 0.03;
        assert_eq!(c.validate().unwrap_err().field, "sim.tick_dt");

        let mut c = base(1.0);
        c.agents.push(AgentSpec::new(9, Trajectory::hover(0.0, 0.0, 0.0).unwrap(), Behavior::Honest));
        assert_eq!(c.validate().unwrap_err().field, "agent 9.behavior");

        let mut c = base(1.0);
        let replay = Behavior::Replay { source_id: 4, capture_delay: 0.5 };
        c.agents.push(AgentSpec::new(3, Trajectory::hover(0.0, 0.0, 0.0).unwrap(), replay));
        assert_eq!(c.validate().unwrap_err().field, "agent 3.source");

        let mut c = base(1.0);
        let mut a = AgentSpec::new(1, Trajectory::hover(0.0, 0.0, 0.0).unwrap(), Behavior::Honest);
        a.advertise_interval = 0.015;
        c.agents.push(a);
        assert_eq!(c.validate().unwrap_err().field, "agent 1.interval");

        let mut c = base(1.0);
        c.observers.clear();
        assert_eq!(c.validate().unwrap_err().field, "observer");
        assert!(run(&c).is_err());
    }

    #[test]
    fn replay_waits_for_capture() {
        let mut c = base(1.0);
        let mut src = AgentSpec::new(1, Trajectory::hover(25.2855, 51.5311, 20.0).unwrap(), Behavior::Honest);
        src.stop = Some(0.3);
        c.agents.push(src);
        let replay = Behavior::Replay { source_id: 1, capture_delay: 0.5 };
        c.agents.push(AgentSpec::new(3, Trajectory::hover(25.2900, 51.5311, 20.0).unwrap(), replay));
        let log = run(&c).unwrap();
        let replayed: Vec<_> = log.tx().filter(|t| t.agent_id == 3).collect();
        // Nothing to replay before t = 0.5.
        assert_eq!(replayed[0].tick, 50);
        assert!(replayed.iter().all(|t| t.packet.record.drone_id == 1));
        // Captured packets stop changing once the source has gone quiet.
        assert_eq!(replayed.last().unwrap().packet.record.seq, 3);
    }

    #[test]
    fn spoof_signs_shifted_position() {
        let mut c = base(0.2);
        let spoof = Behavior::Spoof { dlat: 0.001, dlon: 0.0, dalt: 0.0 };
        c.agents.push(AgentSpec::new(2, Trajectory::hover(25.2855, 51.5311, 20.0).unwrap(), spoof));
        let log = run(&c).unwrap();
        let tx = log.tx().next().unwrap();
        assert_eq!(tx.packet.record.fix.lat_q(), tx.true_fix.lat_q() + 10);
        assert!(log.verifications().all(|v| v.outcome.key_ok));
    }

    #[test]
    fn loss_drops_deliveries() {
        let mut c = base(100.0);
        c.loss_prob = 0.5;
        c.agents.push(AgentSpec::new(1, Trajectory::hover(25.2855, 51.5311, 20.0).unwrap(), Behavior::Honest));
        let log = run(&c).unwrap();
        let delivered = log.rx().filter(|r| r.delivered).count();
        assert!(delivered > 350 && delivered < 650, "{delivered}");
        assert_eq!(log.verifications().count(), delivered);
    }

    #[test]
    fn stream_keys_separate() {
        let a = StreamKey { seed: 1, purpose: Purpose::Shadowing, observer: 1, agent: 2 };
        let b = StreamKey { agent: 3, ..a };
        let c = StreamKey { purpose: Purpose::Loss, ..a };
        let draw = |k: StreamKey| k.packet(0).gen::<u64>();
        assert_eq!(draw(a), draw(a));
        assert_ne!(draw(a), draw(b));
        assert_ne!(draw(a), draw(c));
        assert_ne!(a.packet(0).gen::<u64>(), a.packet(1).gen::<u64>());
    }
}
