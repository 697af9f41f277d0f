//! Distance between fixes and the log-distance path-loss RSSI check.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::protocol::GpsFixQ;

/// Mean Earth radius for the spherical model.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    /// dBm at the 1 m reference distance.
    pub rssi0: f64,
    pub exponent_n: f64,
    /// Log-normal shadowing standard deviation, dB.
    pub shadow_sigma: f64,
    /// Largest accepted |measured − expected|, dB.
    pub tolerance_delta: f64,
    /// Distances below this are clamped, meters.
    pub d_min: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self { rssi0: -40.0, exponent_n: 2.0, shadow_sigma: 2.0, tolerance_delta: 6.0, d_min: 1.0 }
    }
}

impl PathLossModel {
    /// Checks the parameter invariants, naming the first offending field.
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.exponent_n > 0.0) {
            return Err("exponent");
        }
        if !(self.shadow_sigma >= 0.0) {
            return Err("sigma");
        }
        if !(self.tolerance_delta > 0.0) {
            return Err("delta");
        }
        if !(self.d_min >= 1.0) {
            return Err("d_min");
        }
        if !self.rssi0.is_finite() {
            return Err("rssi0");
        }
        Ok(())
    }

    pub fn expected_rssi(&self, distance_m: f64) -> f64 {
        self.rssi0 - 10.0 * self.exponent_n * distance_m.max(self.d_min).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ObserverPose {
    pub fix: GpsFixQ,
}

/// Haversine ground distance combined with the altitude difference.
pub fn geodesic_distance(a: &GpsFixQ, b: &GpsFixQ) -> f64 {
    let (lat1, lat2) = (a.lat_deg().to_radians(), b.lat_deg().to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon_deg() - a.lon_deg()).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let ground = 2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin();
    let dalt = a.alt_m() - b.alt_m();
    ground.hypot(dalt)
}

pub fn expected_rssi(distance_m: f64, model: &PathLossModel) -> f64 {
    model.expected_rssi(distance_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiCheck {
    pub consistent: bool,
    /// measured − expected, dB.
    pub residual: f64,
}

/// Compares a measured RSSI to what the claimed position predicts at the
/// observer. The tolerance boundary is inclusive.
pub fn rssi_consistent(measured: f64, claimed: &GpsFixQ, observer: &ObserverPose, model: &PathLossModel) -> RssiCheck {
    let expected = model.expected_rssi(geodesic_distance(claimed, &observer.fix));
    let residual = measured - expected;
    RssiCheck { consistent: residual.abs() <= model.tolerance_delta, residual }
}

/// Expected RSSI plus `σ·z` shadowing drawn from `rng`.
pub fn sample_rssi<R: Rng + ?Sized>(true_distance_m: f64, model: &PathLossModel, rng: &mut R) -> f64 {
    let expected = model.expected_rssi(true_distance_m);
    if model.shadow_sigma == 0.0 {
        return expected;
    }
    let z: f64 = rng.sample(StandardNormal);
    expected + model.shadow_sigma * z
}
