//! Constellation snapshots: satellites, ground stations, the data terminus,
//! and the seeded actuator selection.

mod csv_io;
mod tle;
mod walker;

use std::collections::HashSet;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{geodetic_to_ecef, EcefPosition, EllipsoidModel, GeoError, GeodeticPosition};

pub use csv_io::{load_ground_stations_csv, load_snapshot_csv, write_ground_stations_csv, write_snapshot_csv};
pub use tle::{
    format_tle, gmst_deg, load_tle_snapshot, parse_tle, parse_tle_set, semi_major_axis_km, solve_kepler,
    tle_to_position, TleElements, TleError, GM_EARTH_KM3_S2,
};
pub use walker::{generate_walker, WalkerSpec};

#[derive(Debug, Error)]
pub enum ConstellationError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: &'static str, found: String },
    #[error("duplicate id `{id}`{}", line_suffix(*.line))]
    DuplicateId { id: String, line: Option<u64> },
    #[error("satellite `{id}`{} lies at radius {radius_km} km, not above the ellipsoid", line_suffix(*.line))]
    BelowSurface { id: String, line: Option<u64>, radius_km: f64 },
    #[error("line {line}: {source}")]
    Range { line: u64, source: GeoError },
    #[error("ground station `{id}` altitude {alt_km} km outside [-0.5, 9]")]
    StationAltitude { id: String, alt_km: f64 },
    #[error("invalid walker spec: {0}")]
    Walker(String),
    #[error(transparent)]
    Tle(#[from] TleError),
    #[error("actuator count {requested} exceeds satellite count {total}")]
    ActuatorCount { requested: usize, total: usize },
}

fn line_suffix(line: Option<u64>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteNode {
    pub id: String,
    pub position: EcefPosition,
    pub is_actuator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStationNode {
    pub id: String,
    pub geodetic: GeodeticPosition,
    /// Cached `geodetic_to_ecef(geodetic)`.
    pub ecef: EcefPosition,
}

impl GroundStationNode {
    pub const MIN_ALT_KM: f64 = -0.5;
    pub const MAX_ALT_KM: f64 = 9.0;

    pub fn new(id: impl Into<String>, geodetic: GeodeticPosition, e: &EllipsoidModel) -> Result<Self, ConstellationError> {
        let id = id.into();
        if !(Self::MIN_ALT_KM..=Self::MAX_ALT_KM).contains(&geodetic.alt_km) {
            return Err(ConstellationError::StationAltitude {
                id,
                alt_km: geodetic.alt_km,
            });
        }
        Ok(Self {
            ecef: geodetic_to_ecef(&geodetic, e),
            id,
            geodetic,
        })
    }
}

/// The centralized ground data allocator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminusNode {
    pub geodetic: GeodeticPosition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSnapshot {
    pub label: String,
    pub satellites: Vec<SatelliteNode>,
    /// Seconds since J2000; informational only.
    pub epoch_seconds: f64,
}

impl ConstellationSnapshot {
    /// Validating constructor: ids unique, every satellite above the ellipsoid.
    pub fn new(
        label: impl Into<String>,
        satellites: Vec<SatelliteNode>,
        epoch_seconds: f64,
        e: &EllipsoidModel,
    ) -> Result<Self, ConstellationError> {
        let mut seen = HashSet::with_capacity(satellites.len());
        for sat in &satellites {
            check_above_surface(sat, None, e)?;
            if !seen.insert(sat.id.as_str()) {
                return Err(ConstellationError::DuplicateId {
                    id: sat.id.clone(),
                    line: None,
                });
            }
        }
        Ok(Self {
            label: label.into(),
            satellites,
            epoch_seconds,
        })
    }

    pub fn len(&self) -> usize {
        self.satellites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.satellites.is_empty()
    }

    pub fn actuator_count(&self) -> usize {
        self.satellites.iter().filter(|s| s.is_actuator).count()
    }

    pub fn positions(&self) -> Vec<EcefPosition> {
        self.satellites.iter().map(|s| s.position).collect()
    }

    /// Concatenate several snapshots (e.g. two shells) into one.
    pub fn union(parts: &[ConstellationSnapshot], e: &EllipsoidModel) -> Result<Self, ConstellationError> {
        let label = parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join("+");
        let epoch = parts.first().map_or(0.0, |p| p.epoch_seconds);
        let sats = parts.iter().flat_map(|p| p.satellites.iter().cloned()).collect();
        Self::new(label, sats, epoch, e)
    }
}

pub(crate) fn check_above_surface(
    sat: &SatelliteNode,
    line: Option<u64>,
    e: &EllipsoidModel,
) -> Result<(), ConstellationError> {
    let r = sat.position.norm();
    if !sat.position.is_finite() || r <= e.semi_major_a {
        return Err(ConstellationError::BelowSurface {
            id: sat.id.clone(),
            line,
            radius_km: r,
        });
    }
    Ok(())
}

/// Seeded permutation of `0..n`.
///
/// Forward Fisher-Yates driven by SplitMix64: step `i` swaps `i` with
/// `i + bounded(n - i)`, where `bounded(m) = (next_u64() * m) >> 64`
/// (128-bit multiply-high). The first `k` entries depend only on the first
/// `k` draws, which is what makes actuator selections nested in `k`.
pub fn actuator_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n.saturating_sub(1) {
        let span = (n - i) as u128;
        let j = i + ((rng.next_u64() as u128 * span) >> 64) as usize;
        order.swap(i, j);
    }
    order
}

/// Flag exactly `count` satellites as actuators: the first `count` entries
/// of [`actuator_permutation`]. Existing flags are cleared.
pub fn select_actuators(
    snapshot: &ConstellationSnapshot,
    count: usize,
    seed: u64,
) -> Result<ConstellationSnapshot, ConstellationError> {
    let n = snapshot.len();
    if count > n {
        return Err(ConstellationError::ActuatorCount { requested: count, total: n });
    }
    let mut out = snapshot.clone();
    for sat in &mut out.satellites {
        sat.is_actuator = false;
    }
    for &idx in actuator_permutation(n, seed).iter().take(count) {
        out.satellites[idx].is_actuator = true;
    }
    Ok(out)
}
