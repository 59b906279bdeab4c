use serde::{Deserialize, Serialize};

use super::{ConstellationError, ConstellationSnapshot, SatelliteNode};
use crate::geo::{EcefPosition, EllipsoidModel};

/// Walker-delta shell of circular orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerSpec {
    /// Prefix for generated satellite ids.
    pub label: String,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub planes: u32,
    pub sats_per_plane: u32,
    /// Inter-plane phasing parameter F, in `0..planes`.
    pub phasing: u32,
    #[serde(default)]
    pub raan_offset_deg: f64,
}

impl WalkerSpec {
    /// 72 x 80 at 550 km, 53 deg.
    pub fn starlink_like() -> Self {
        Self {
            label: "starlink-like".into(),
            altitude_km: 550.0,
            inclination_deg: 53.0,
            planes: 72,
            sats_per_plane: 80,
            phasing: 1,
            raan_offset_deg: 0.0,
        }
    }

    /// 18 x 35 at 1200 km, 87.9 deg.
    pub fn oneweb_like() -> Self {
        Self {
            label: "oneweb-like".into(),
            altitude_km: 1200.0,
            inclination_deg: 87.9,
            planes: 18,
            sats_per_plane: 35,
            phasing: 1,
            raan_offset_deg: 0.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "starlink-like" => Some(Self::starlink_like()),
            "oneweb-like" => Some(Self::oneweb_like()),
            _ => None,
        }
    }

    pub fn total(&self) -> usize {
        self.planes as usize * self.sats_per_plane as usize
    }

    pub fn validate(&self) -> Result<(), ConstellationError> {
        let bad = |m: &str| Err(ConstellationError::Walker(m.to_string()));
        if self.planes == 0 || self.sats_per_plane == 0 {
            return bad("planes and sats_per_plane must be at least 1");
        }
        if self.phasing >= self.planes {
            return bad("phasing must lie in [0, planes - 1]");
        }
        if !(self.altitude_km.is_finite() && self.altitude_km > 0.0) {
            return bad("altitude_km must be positive");
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return bad("inclination_deg must lie in [0, 180]");
        }
        if !self.raan_offset_deg.is_finite() {
            return bad("raan_offset_deg must be finite");
        }
        if self.label.is_empty() {
            return bad("label must not be empty");
        }
        Ok(())
    }

    /// In-plane argument of latitude (degrees) of satellite `k` in plane `p`.
    pub fn in_plane_angle_deg(&self, p: u32, k: u32) -> f64 {
        let (np, ns) = (self.planes as f64, self.sats_per_plane as f64);
        360.0 * k as f64 / ns + 360.0 * self.phasing as f64 * p as f64 / (np * ns)
    }

    pub fn raan_deg(&self, p: u32) -> f64 {
        self.raan_offset_deg + 360.0 * p as f64 / self.planes as f64
    }
}

/// Place every satellite of the shell at snapshot time. The inertial frame
/// is taken as the ECEF frame.
pub fn generate_walker(spec: &WalkerSpec, e: &EllipsoidModel) -> Result<ConstellationSnapshot, ConstellationError> {
    spec.validate()?;
    let r = e.semi_major_a + spec.altitude_km;
    let (sin_i, cos_i) = spec.inclination_deg.to_radians().sin_cos();
    let mut sats = Vec::with_capacity(spec.total());
    for p in 0..spec.planes {
        let (sin_o, cos_o) = spec.raan_deg(p).to_radians().sin_cos();
        for k in 0..spec.sats_per_plane {
            let (sin_u, cos_u) = spec.in_plane_angle_deg(p, k).to_radians().sin_cos();
            // Rx(i) then Rz(raan) applied to (r cos u, r sin u, 0).
            let x = r * cos_u;
            let y = r * sin_u * cos_i;
            let z = r * sin_u * sin_i;
            sats.push(SatelliteNode {
                id: format!("{}-p{p}-s{k}", spec.label),
                position: EcefPosition::new(x * cos_o - y * sin_o, x * sin_o + y * cos_o, z),
                is_actuator: false,
            });
        }
    }
    ConstellationSnapshot::new(spec.label.clone(), sats, 0.0, e)
}
