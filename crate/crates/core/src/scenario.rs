//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! [sim]
//! name = fig8
//! duration = 60
//! tick_dt = 0.01
//! seed = 7
//! loss = 0
//!
//! [pathloss]
//! rssi0 = -40
//! exponent = 2
//! sigma = 0
//! delta = 6
//! d_min = 1
//!
//! [policy]
//! k = 2
//! stale_timeout = 1.0
//!
//! [registry]
//! ids = 1, 2
//! schedule = 5, 4, 3, 2, 256
//!
//! [agent 1]
//! behavior = honest          # honest | nokey | randomkey | replay | spoof
//! interval = 0.1
//! start = 0
//! stop = 30
//! waypoint = 0, 25.2854, 51.5310, 30     # t, lat, lon, alt
//! position = 25.2854, 51.5310, 30        # shorthand for a hover
//! source = 1                 # replay only
//! capture_delay = 0.5        # replay only
//! offset = 0.001, 0, 0       # spoof only: dlat deg, dlon deg, dalt m
//!
//! [observer 1]
//! position = 25.2850, 51.5305, 0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::protocol::{quantize_fix, KeySchedule};
use crate::rssi::ObserverPose;
use crate::sim::{AgentSpec, Behavior, ConfigError, ObserverSpec, ScenarioConfig, Trajectory, Waypoint};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.line, self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Sim,
    PathLoss,
    Policy,
    Registry,
    Agent(u16),
    Observer(u16),
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Section::Sim => f.write_str("sim"),
            Section::PathLoss => f.write_str("pathloss"),
            Section::Policy => f.write_str("policy"),
            Section::Registry => f.write_str("registry"),
            Section::Agent(id) => write!(f, "agent {id}"),
            Section::Observer(id) => write!(f, "observer {id}"),
        }
    }
}

#[derive(Default)]
struct AgentDraft {
    behavior: Option<String>,
    interval: Option<f64>,
    start: Option<f64>,
    stop: Option<f64>,
    waypoints: Vec<Waypoint>,
    source: Option<u16>,
    capture_delay: Option<f64>,
    offset: Option<[f64; 3]>,
}

struct Parser<'a> {
    path: &'a str,
    /// `section.key` (or bare section) → first line it appeared on.
    lines: BTreeMap<String, usize>,
}

impl Parser<'_> {
    fn err(&self, line: usize, key: impl Into<String>, message: impl Into<String>) -> ParseError {
        ParseError { path: self.path.to_string(), line, key: key.into(), message: message.into() }
    }

    fn config_err(&self, e: ConfigError) -> ParseError {
        let section = e.field.split('.').next().unwrap_or_default();
        let line = self
            .lines
            .get(&e.field)
            .or_else(|| self.lines.get(section))
            .copied()
            .unwrap_or(0);
        self.err(line, e.field, e.message)
    }
}

fn num<T: FromStr>(value: &str) -> Result<T, String> {
    value.trim().parse().map_err(|_| format!("invalid number '{}'", value.trim()))
}

fn list<T: FromStr>(value: &str, n: Option<usize>) -> Result<Vec<T>, String> {
    let items: Vec<T> = value.split(',').map(num).collect::<Result<_, _>>()?;
    match n {
        Some(n) if items.len() != n => Err(format!("expected {n} comma-separated values, got {}", items.len())),
        _ => Ok(items),
    }
}

fn parse_section(header: &str) -> Result<Section, String> {
    let mut parts = header.split_whitespace();
    let kind = parts.next().unwrap_or_default();
    let id = parts.next();
    if parts.next().is_some() {
        return Err(format!("unexpected section header [{header}]"));
    }
    let id = |what: &str| -> Result<u16, String> {
        id.ok_or_else(|| format!("[{what}] needs an id"))?.parse().map_err(|_| format!("invalid {what} id"))
    };
    match kind {
        "sim" => Ok(Section::Sim),
        "pathloss" => Ok(Section::PathLoss),
        "policy" => Ok(Section::Policy),
        "registry" => Ok(Section::Registry),
        "agent" => Ok(Section::Agent(id("agent")?)),
        "observer" => Ok(Section::Observer(id("observer")?)),
        _ => Err(format!("unknown section [{header}]")),
    }
}

/// Parses and validates a scenario. `path` only labels error messages.
pub fn parse_scenario(text: &str, path: &str) -> Result<ScenarioConfig, ParseError> {
    let mut p = Parser { path, lines: BTreeMap::new() };
    let mut config = ScenarioConfig::new("scenario", 0.0);
    config.name = std::path::Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();
    let mut duration = None;
    let mut agents: BTreeMap<u16, AgentDraft> = BTreeMap::new();
    let mut observers: BTreeMap<u16, Option<[f64; 3]>> = BTreeMap::new();
    let mut section: Option<Section> = None;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let header = header.strip_suffix(']').ok_or_else(|| p.err(lineno, "", "unterminated section header"))?;
            let s = parse_section(header.trim()).map_err(|m| p.err(lineno, header.trim(), m))?;
            p.lines.entry(s.to_string()).or_insert(lineno);
            match s {
                Section::Agent(id) => {
                    agents.entry(id).or_default();
                }
                Section::Observer(id) => {
                    observers.entry(id).or_insert(None);
                }
                _ => {}
            }
            section = Some(s);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| p.err(lineno, line, "expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.clone().ok_or_else(|| p.err(lineno, key, "key outside any section"))?;
        let field = format!("{sec}.{key}");
        p.lines.entry(field.clone()).or_insert(lineno);
        let bad = |m: String| p.err(lineno, field.clone(), m);

        match (&sec, key) {
            (Section::Sim, "name") => config.name = value.to_string(),
            (Section::Sim, "duration") => duration = Some(num(value).map_err(bad)?),
            (Section::Sim, "tick_dt") => config.tick_dt = num(value).map_err(bad)?,
            (Section::Sim, "seed") => config.seed = num(value).map_err(bad)?,
            (Section::Sim, "loss") => config.loss_prob = num(value).map_err(bad)?,
            (Section::PathLoss, "rssi0") => config.model.rssi0 = num(value).map_err(bad)?,
            (Section::PathLoss, "exponent") => config.model.exponent_n = num(value).map_err(bad)?,
            (Section::PathLoss, "sigma") => config.model.shadow_sigma = num(value).map_err(bad)?,
            (Section::PathLoss, "delta") => config.model.tolerance_delta = num(value).map_err(bad)?,
            (Section::PathLoss, "d_min") => config.model.d_min = num(value).map_err(bad)?,
            (Section::Policy, "k") => config.policy.k_consecutive = num(value).map_err(bad)?,
            (Section::Policy, "stale_timeout") => config.policy.stale_timeout = num(value).map_err(bad)?,
            (Section::Registry, "ids") => {
                config.registry.ids = if value.is_empty() {
                    Default::default()
                } else {
                    list::<u16>(value, None).map_err(bad)?.into_iter().collect()
                }
            }
            (Section::Registry, "schedule") => {
                let w = list::<u32>(value, Some(5)).map_err(bad)?;
                config.registry.schedule =
                    KeySchedule::new(w[0], w[1], w[2], w[3], w[4]).map_err(|e| bad(e.to_string()))?;
            }
            (Section::Agent(id), _) => {
                let a = agents.get_mut(id).expect("created with section");
                match key {
                    "behavior" => a.behavior = Some(value.to_ascii_lowercase()),
                    "interval" => a.interval = Some(num(value).map_err(bad)?),
                    "start" => a.start = Some(num(value).map_err(bad)?),
                    "stop" => a.stop = Some(num(value).map_err(bad)?),
                    "source" => a.source = Some(num(value).map_err(bad)?),
                    "capture_delay" => a.capture_delay = Some(num(value).map_err(bad)?),
                    "offset" => {
                        let v = list::<f64>(value, Some(3)).map_err(bad)?;
                        a.offset = Some([v[0], v[1], v[2]]);
                    }
                    "waypoint" => {
                        let v = list::<f64>(value, Some(4)).map_err(bad)?;
                        a.waypoints.push(Waypoint::new(v[0], v[1], v[2], v[3]));
                    }
                    "position" => {
                        let v = list::<f64>(value, Some(3)).map_err(bad)?;
                        a.waypoints.push(Waypoint::new(0.0, v[0], v[1], v[2]));
                    }
                    _ => return Err(bad("unknown key".into())),
                }
            }
            (Section::Observer(id), "position") => {
                let v = list::<f64>(value, Some(3)).map_err(bad)?;
                observers.insert(*id, Some([v[0], v[1], v[2]]));
            }
            _ => return Err(bad("unknown key".into())),
        }
    }

    config.duration = duration.ok_or_else(|| p.err(p.lines.get("sim").copied().unwrap_or(0), "sim.duration", "missing"))?;

    for (id, draft) in agents {
        config.agents.push(build_agent(&p, id, draft)?);
    }
    for (id, pos) in observers {
        let section = format!("observer {id}");
        let field = format!("{section}.position");
        let [lat, lon, alt] = pos.ok_or_else(|| p.err(p.lines[&section], field.clone(), "missing"))?;
        let fix = quantize_fix(lat, lon, alt).map_err(|e| p.err(p.lines[&field], field.clone(), e.to_string()))?;
        config.observers.push(ObserverSpec { id, pose: ObserverPose { fix } });
    }

    config.validate().map_err(|e| p.config_err(e))?;
    Ok(config)
}

fn build_agent(p: &Parser<'_>, id: u16, d: AgentDraft) -> Result<AgentSpec, ParseError> {
    let section = format!("agent {id}");
    let line_of = |key: &str| p.lines.get(&format!("{section}.{key}")).or_else(|| p.lines.get(&section)).copied().unwrap_or(0);
    let missing = |key: &str| p.err(line_of(key), format!("{section}.{key}"), "missing");

    let behavior = match d.behavior.as_deref().ok_or_else(|| missing("behavior"))? {
        "honest" => Behavior::Honest,
        "nokey" => Behavior::NoKey,
        "randomkey" => Behavior::RandomKey,
        "replay" => Behavior::Replay {
            source_id: d.source.ok_or_else(|| missing("source"))?,
            capture_delay: d.capture_delay.unwrap_or(0.0),
        },
        "spoof" => {
            let [dlat, dlon, dalt] = d.offset.ok_or_else(|| missing("offset"))?;
            Behavior::Spoof { dlat, dlon, dalt }
        }
        other => {
            return Err(p.err(line_of("behavior"), format!("{section}.behavior"), format!("unknown behavior '{other}'")))
        }
    };
    let mut waypoints = d.waypoints;
    if waypoints.is_empty() {
        return Err(missing("waypoint"));
    }
    waypoints.sort_by(|a, b| a.t.total_cmp(&b.t));
    let trajectory =
        Trajectory::new(waypoints).map_err(|e| p.err(line_of("waypoint"), format!("{section}.waypoint"), e.to_string()))?;
    let mut spec = AgentSpec::new(id, trajectory, behavior);
    if let Some(i) = d.interval {
        spec.advertise_interval = i;
    }
    spec.start = d.start.unwrap_or(0.0);
    spec.stop = d.stop;
    Ok(spec)
}
