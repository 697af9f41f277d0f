//! Detection of unauthorized drones in a BLE-advertising swarm.
//!
//! Each authorized drone broadcasts its position together with an 8-bit
//! key derived from its id and coordinates by a secret weighted sum. An
//! observer accepts a packet only if the key matches and the measured RSSI
//! is plausible for the claimed position; repeated failures flag the drone.
//!
//! - [`protocol`]: key derivation and the 17-byte packet codec
//! - [`rssi`]: distance, path loss and the RSSI plausibility check
//! - [`verifier`]: two-stage verification and the drone roster
//! - [`sim`]: deterministic swarm simulator with attacker behaviors
//! - [`metrics`]: confusion, threshold sweeps, ROC/AUC, latency
//! - [`scenario`], [`report`], [`cli`]: scenario files, CSV output, commands

pub mod cli;
pub mod metrics;
pub mod protocol;
pub mod report;
pub mod rssi;
pub mod scenario;
pub mod sim;
pub mod verifier;

pub use protocol::{
    crc8, derive_key, quantize_fix, AdvertisementPacket, FlightRecord, GpsFixQ, KeySchedule, PacketError,
    RangeError, VerificationKey,
};
pub use rssi::{expected_rssi, geodesic_distance, rssi_consistent, ObserverPose, PathLossModel};
pub use sim::{run, AgentSpec, Behavior, EventLog, ObserverSpec, ScenarioConfig, Trajectory, Waypoint};
pub use verifier::{
    verify_observation, AlarmPolicy, AuthorizedRegistry, Observation, Roster, RosterSnapshot, Status,
    VerificationOutcome, Verifier,
};
