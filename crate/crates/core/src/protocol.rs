//! Flight records, the weighted-sum verification key, and the 17-byte
//! advertisement packet codec.
//!
//! Wire layout (big-endian):
//!
//! | offset | size | field          |
//! |--------|------|----------------|
//! | 0      | 1    | magic `0xD5`   |
//! | 1      | 2    | drone id (u16) |
//! | 3      | 4    | lat × 10⁴ (i32)|
//! | 7      | 4    | lon × 10⁴ (i32)|
//! | 11     | 2    | alt m (i16)    |
//! | 13     | 2    | seq (u16)      |
//! | 15     | 1    | key (u8)       |
//! | 16     | 1    | CRC-8 of 0..16 |

use std::fmt;

use thiserror::Error;

pub const MAGIC: u8 = 0xD5;
pub const PACKET_LEN: usize = 17;

pub const LAT_Q_MAX: i32 = 900_000;
pub const LON_Q_MAX: i32 = 1_800_000;
pub const ALT_Q_MAX: i32 = 32_767;

/// Fixed-point scale applied to latitude and longitude degrees.
pub const DEG_SCALE: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RangeError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("altitude {0} outside [-32767, 32767] m")]
    Altitude(f64),
    #[error("quantized latitude {0} outside ±{LAT_Q_MAX}")]
    LatitudeQ(i64),
    #[error("quantized longitude {0} outside ±{LON_Q_MAX}")]
    LongitudeQ(i64),
    #[error("quantized altitude {0} outside ±{ALT_Q_MAX}")]
    AltitudeQ(i64),
    #[error("key schedule modulus {0} outside [2, 256]")]
    Modulus(u32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PacketError {
    #[error("length: expected {PACKET_LEN} bytes, got {0}")]
    Truncated(usize),
    #[error("bad magic: expected 0xD5, got {0:#04X}")]
    BadMagic(u8),
    #[error("crc mismatch: computed {computed:#04X}, packet carries {carried:#04X}")]
    CrcMismatch { computed: u8, carried: u8 },
    #[error("field out of range: {0}")]
    Range(#[from] RangeError),
    #[error("bad hex: {0}")]
    Hex(String),
}

/// Weights and modulus of the key formula. Authorized drones share it as
/// their secret.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeySchedule {
    pub w_id: u32,
    pub w_lat: u32,
    pub w_lon: u32,
    pub w_alt: u32,
    modulus: u32,
}

impl KeySchedule {
    /// The modulus is capped at 256 so every key fits the one-byte packet slot.
    pub fn new(w_id: u32, w_lat: u32, w_lon: u32, w_alt: u32, modulus: u32) -> Result<Self, RangeError> {
        if !(2..=256).contains(&modulus) {
            return Err(RangeError::Modulus(modulus));
        }
        Ok(Self { w_id, w_lat, w_lon, w_alt, modulus })
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }
}

impl Default for KeySchedule {
    fn default() -> Self {
        Self { w_id: 5, w_lat: 4, w_lon: 3, w_alt: 2, modulus: 256 }
    }
}

/// A GPS fix in fixed point: degrees × 10⁴ for lat/lon, whole meters for alt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GpsFixQ {
    lat_q: i32,
    lon_q: i32,
    alt_q: i16,
}

impl GpsFixQ {
    pub fn new(lat_q: i64, lon_q: i64, alt_q: i64) -> Result<Self, RangeError> {
        if lat_q.abs() > LAT_Q_MAX as i64 {
            return Err(RangeError::LatitudeQ(lat_q));
        }
        if lon_q.abs() > LON_Q_MAX as i64 {
            return Err(RangeError::LongitudeQ(lon_q));
        }
        if alt_q.abs() > ALT_Q_MAX as i64 {
            return Err(RangeError::AltitudeQ(alt_q));
        }
        Ok(Self { lat_q: lat_q as i32, lon_q: lon_q as i32, alt_q: alt_q as i16 })
    }

    pub fn lat_q(&self) -> i32 {
        self.lat_q
    }

    pub fn lon_q(&self) -> i32 {
        self.lon_q
    }

    pub fn alt_q(&self) -> i16 {
        self.alt_q
    }

    pub fn lat_deg(&self) -> f64 {
        self.lat_q as f64 / DEG_SCALE
    }

    pub fn lon_deg(&self) -> f64 {
        self.lon_q as f64 / DEG_SCALE
    }

    pub fn alt_m(&self) -> f64 {
        self.alt_q as f64
    }
}

/// Formats a fixed-point coordinate as decimal degrees without going
/// through floating point, so CSV output is exact.
pub fn format_deg_q(q: i32) -> String {
    let sign = if q < 0 { "-" } else { "" };
    let abs = q.unsigned_abs();
    format!("{sign}{}.{:04}", abs / 10_000, abs % 10_000)
}

impl fmt::Display for GpsFixQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}°, {}°, {} m)", format_deg_q(self.lat_q), format_deg_q(self.lon_q), self.alt_q)
    }
}

/// Quantizes real coordinates with round-half-even.
pub fn quantize_fix(lat: f64, lon: f64, alt: f64) -> Result<GpsFixQ, RangeError> {
    if !(lat.abs() <= 90.0) {
        return Err(RangeError::Latitude(lat));
    }
    if !(lon.abs() <= 180.0) {
        return Err(RangeError::Longitude(lon));
    }
    if !(alt.abs() <= ALT_Q_MAX as f64) {
        return Err(RangeError::Altitude(alt));
    }
    let lat_q = (lat * DEG_SCALE).round_ties_even() as i64;
    let lon_q = (lon * DEG_SCALE).round_ties_even() as i64;
    let alt_q = alt.round_ties_even() as i64;
    GpsFixQ::new(lat_q, lon_q, alt_q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlightRecord {
    pub drone_id: u16,
    pub fix: GpsFixQ,
    pub seq: u16,
}

impl FlightRecord {
    pub fn new(drone_id: u16, fix: GpsFixQ, seq: u16) -> Self {
        Self { drone_id, fix, seq }
    }

    /// The record for the same drone's next broadcast at a new fix.
    pub fn next(&self, fix: GpsFixQ) -> Self {
        Self { drone_id: self.drone_id, fix, seq: self.seq.wrapping_add(1) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VerificationKey(pub u8);

impl VerificationKey {
    pub fn value(self) -> u8 {
        self.0
    }
}

/// `(w_id·id + w_lat·lat + w_lon·lon + w_alt·alt) mod m`, Euclidean so the
/// result is never negative.
pub fn derive_key(record: &FlightRecord, schedule: &KeySchedule) -> VerificationKey {
    let fix = &record.fix;
    let sum = schedule.w_id as i64 * record.drone_id as i64
        + schedule.w_lat as i64 * fix.lat_q as i64
        + schedule.w_lon as i64 * fix.lon_q as i64
        + schedule.w_alt as i64 * fix.alt_q as i64;
    VerificationKey(sum.rem_euclid(schedule.modulus as i64) as u8)
}

/// CRC-8, polynomial 0x07, init 0x00, no reflection, no final XOR.
pub fn crc8(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0u8, |crc, &b| CRC8_TABLE[(crc ^ b) as usize])
}

const CRC8_TABLE: [u8; 256] = build_crc8_table();

const fn build_crc8_table() -> [u8; 256] {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdvertisementPacket {
    pub record: FlightRecord,
    pub key: VerificationKey,
}

impl AdvertisementPacket {
    pub fn new(record: FlightRecord, key: VerificationKey) -> Self {
        Self { record, key }
    }

    /// A packet carrying the key its own record derives under `schedule`.
    pub fn signed(record: FlightRecord, schedule: &KeySchedule) -> Self {
        Self::new(record, derive_key(&record, schedule))
    }

    /// The trailing CRC byte this packet encodes to.
    pub fn crc(&self) -> u8 {
        self.encode()[PACKET_LEN - 1]
    }

    pub fn encode(&self) -> [u8; PACKET_LEN] {
        let r = &self.record;
        let mut out = [0u8; PACKET_LEN];
        out[0] = MAGIC;
        out[1..3].copy_from_slice(&r.drone_id.to_be_bytes());
        out[3..7].copy_from_slice(&r.fix.lat_q.to_be_bytes());
        out[7..11].copy_from_slice(&r.fix.lon_q.to_be_bytes());
        out[11..13].copy_from_slice(&r.fix.alt_q.to_be_bytes());
        out[13..15].copy_from_slice(&r.seq.to_be_bytes());
        out[15] = self.key.0;
        out[16] = crc8(&out[..16]);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PacketError> {
        let bytes: &[u8; PACKET_LEN] = bytes.try_into().map_err(|_| PacketError::Truncated(bytes.len()))?;
        if bytes[0] != MAGIC {
            return Err(PacketError::BadMagic(bytes[0]));
        }
        let computed = crc8(&bytes[..16]);
        if computed != bytes[16] {
            return Err(PacketError::CrcMismatch { computed, carried: bytes[16] });
        }
        let be16 = |i: usize| [bytes[i], bytes[i + 1]];
        let be32 = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
        let fix = GpsFixQ::new(
            i32::from_be_bytes(be32(3)) as i64,
            i32::from_be_bytes(be32(7)) as i64,
            i16::from_be_bytes(be16(11)) as i64,
        )?;
        let record = FlightRecord {
            drone_id: u16::from_be_bytes(be16(1)),
            fix,
            seq: u16::from_be_bytes(be16(13)),
        };
        Ok(Self { record, key: VerificationKey(bytes[15]) })
    }

    /// Uppercase hex, 34 characters, no separators.
    pub fn to_hex(&self) -> String {
        hex::encode_upper(self.encode())
    }

    pub fn from_hex(s: &str) -> Result<Self, PacketError> {
        let s = s.trim();
        if s.len() != PACKET_LEN * 2 {
            // Odd lengths would otherwise surface as a hex error.
            return Err(PacketError::Truncated(s.len() / 2));
        }
        let bytes = hex::decode(s).map_err(|e| PacketError::Hex(e.to_string()))?;
        Self::decode(&bytes)
    }
}
