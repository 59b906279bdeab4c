//! WGS84 ellipsoid geometry: coordinate conversions, line-of-sight tests,
//! great-circle surface distances and free-space propagation delay.
//!
//! All lengths are kilometers, all angles at the public surface are degrees.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, km/s.
pub const LIGHT_SPEED_KM_S: f64 = 299_792.458;

/// Tolerance on the minimum scaled norm used by [`has_line_of_sight`].
pub const LOS_TOLERANCE: f64 = 1e-9;

const GEODETIC_TOLERANCE_RAD: f64 = 1e-12;
const GEODETIC_MAX_ITERATIONS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("cannot convert the Earth's center to geodetic coordinates")]
    DegenerateOrigin,
    #[error("geodetic latitude did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("altitude {0} km below the -0.5 km floor")]
    Altitude(f64),
    #[error("non-finite coordinate")]
    NonFinite,
}

/// Earth-centered, Earth-fixed Cartesian position in kilometers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for EcefPosition {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for EcefPosition {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for EcefPosition {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

/// Geodetic latitude/longitude in degrees and altitude above the ellipsoid in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticPosition {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_km: f64,
}

impl GeodeticPosition {
    /// Validated constructor. Longitude -180 is folded onto 180.
    pub fn new(lat_deg: f64, lon_deg: f64, alt_km: f64) -> Result<Self, GeoError> {
        if !(lat_deg.is_finite() && lon_deg.is_finite() && alt_km.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(GeoError::Latitude(lat_deg));
        }
        if !(-180.0..=180.0).contains(&lon_deg) {
            return Err(GeoError::Longitude(lon_deg));
        }
        if alt_km < -0.5 {
            return Err(GeoError::Altitude(alt_km));
        }
        let lon_deg = if lon_deg == -180.0 { 180.0 } else { lon_deg };
        Ok(Self {
            lat_deg,
            lon_deg,
            alt_km,
        })
    }

    /// Same point with the altitude dropped to the ellipsoid surface.
    pub fn sub_point(&self) -> Self {
        Self {
            alt_km: 0.0,
            ..*self
        }
    }
}

/// Reference ellipsoid. `semi_minor_b` is always `a * (1 - f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidModel {
    pub semi_major_a: f64,
    pub flattening_f: f64,
    pub semi_minor_b: f64,
    /// Radius of the sphere used for surface (great-circle) distances.
    pub surface_mean_radius: f64,
}

impl EllipsoidModel {
    pub const WGS84_A: f64 = 6378.137;
    pub const WGS84_F: f64 = 1.0 / 298.257223563;
    pub const MEAN_RADIUS: f64 = 6371.0088;

    pub fn new(semi_major_a: f64, flattening_f: f64, surface_mean_radius: f64) -> Self {
        assert!(
            flattening_f > 0.0 && flattening_f < 1.0,
            "flattening must lie in (0, 1)"
        );
        Self {
            semi_major_a,
            flattening_f,
            semi_minor_b: semi_major_a * (1.0 - flattening_f),
            surface_mean_radius,
        }
    }

    pub fn wgs84() -> Self {
        Self::new(Self::WGS84_A, Self::WGS84_F, Self::MEAN_RADIUS)
    }

    /// First eccentricity squared.
    pub fn e2(&self) -> f64 {
        self.flattening_f * (2.0 - self.flattening_f)
    }

    fn prime_vertical_radius(&self, sin_lat: f64) -> f64 {
        self.semi_major_a / (1.0 - self.e2() * sin_lat * sin_lat).sqrt()
    }
}

impl Default for EllipsoidModel {
    fn default() -> Self {
        Self::wgs84()
    }
}

pub fn geodetic_to_ecef(g: &GeodeticPosition, e: &EllipsoidModel) -> EcefPosition {
    let lat = g.lat_deg.to_radians();
    let lon = g.lon_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    let n = e.prime_vertical_radius(sin_lat);
    EcefPosition::new(
        (n + g.alt_km) * cos_lat * cos_lon,
        (n + g.alt_km) * cos_lat * sin_lon,
        (n * (1.0 - e.e2()) + g.alt_km) * sin_lat,
    )
}

/// Inverse of [`geodetic_to_ecef`] by fixed-point iteration on latitude.
///
/// Longitude is normalized into (-180, 180]; on the polar axis it is 0.
pub fn ecef_to_geodetic(p: &EcefPosition, e: &EllipsoidModel) -> Result<GeodeticPosition, GeoError> {
    if !p.is_finite() {
        return Err(GeoError::NonFinite);
    }
    if p.norm() == 0.0 {
        return Err(GeoError::DegenerateOrigin);
    }
    let e2 = e.e2();
    let rho = p.x.hypot(p.y);
    let mut lat = p.z.atan2(rho * (1.0 - e2));
    let mut converged = false;
    for _ in 0..GEODETIC_MAX_ITERATIONS {
        let sin_lat = lat.sin();
        let n = e.prime_vertical_radius(sin_lat);
        let next = (p.z + n * e2 * sin_lat).atan2(rho);
        let delta = (next - lat).abs();
        lat = next;
        if delta < GEODETIC_TOLERANCE_RAD {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GeoError::NoConvergence(GEODETIC_MAX_ITERATIONS));
    }

    let (sin_lat, cos_lat) = lat.sin_cos();
    let n = e.prime_vertical_radius(sin_lat);
    // Pick the better-conditioned height formula for the latitude band.
    let alt = if cos_lat.abs() > std::f64::consts::FRAC_1_SQRT_2 {
        rho / cos_lat - n
    } else {
        p.z / sin_lat - n * (1.0 - e2)
    };

    let mut lon = if rho == 0.0 { 0.0 } else { p.y.atan2(p.x).to_degrees() };
    if lon <= -180.0 {
        lon += 360.0;
    }
    Ok(GeodeticPosition {
        lat_deg: lat.to_degrees(),
        lon_deg: lon,
        alt_km: alt,
    })
}

/// Geometric visibility between two points over an ellipsoid inflated by
/// `margin_km` on every semi-axis.
///
/// Visible iff the segment `p..q` never dips below scaled norm `1 - 1e-9`.
/// Points lying exactly on the surface do not block themselves.
pub fn has_line_of_sight(p: &EcefPosition, q: &EcefPosition, e: &EllipsoidModel, margin_km: f64) -> bool {
    debug_assert!(margin_km >= 0.0);
    let inv_eq = 1.0 / (e.semi_major_a + margin_km);
    let inv_polar = 1.0 / (e.semi_minor_b + margin_km);
    los_scaled(scale(p, inv_eq, inv_polar), scale(q, inv_eq, inv_polar))
}

#[inline]
pub(crate) fn scale(p: &EcefPosition, inv_eq: f64, inv_polar: f64) -> [f64; 3] {
    [p.x * inv_eq, p.y * inv_eq, p.z * inv_polar]
}

/// Core of [`has_line_of_sight`] on points already mapped to the unit sphere.
#[inline]
pub(crate) fn los_scaled(a: [f64; 3], b: [f64; 3]) -> bool {
    min_scaled_norm(a, b) >= 1.0 - LOS_TOLERANCE
}

/// Minimum norm of the segment `a..b`. Arguments are ordered canonically
/// first so the result is bit-identical under swapping.
#[inline]
pub(crate) fn min_scaled_norm(a: [f64; 3], b: [f64; 3]) -> f64 {
    let (p, q) = if a <= b { (a, b) } else { (b, a) };
    let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
    let dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    let t = if dd > 0.0 {
        (-(p[0] * d[0] + p[1] * d[1] + p[2] * d[2]) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let m = [p[0] + t * d[0], p[1] + t * d[1], p[2] + t * d[2]];
    (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt()
}

/// Elevation of `target` above the local geodetic horizon at `site`, degrees.
pub fn elevation_deg(site: &GeodeticPosition, target: &EcefPosition, e: &EllipsoidModel) -> f64 {
    let origin = geodetic_to_ecef(site, e);
    let (sin_lat, cos_lat) = site.lat_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = site.lon_deg.to_radians().sin_cos();
    let up = EcefPosition::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat);
    let look = *target - origin;
    let range = look.norm();
    if range == 0.0 {
        return 90.0;
    }
    (up.dot(&look) / range).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Great-circle distance on the mean-radius sphere (haversine). Altitudes are ignored.
pub fn surface_distance(g1: &GeodeticPosition, g2: &GeodeticPosition, e: &EllipsoidModel) -> f64 {
    let lat1 = g1.lat_deg.to_radians();
    let lat2 = g2.lat_deg.to_radians();
    let dlat = lat2 - lat1;
    let dlon = (g2.lon_deg - g1.lon_deg).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    2.0 * e.surface_mean_radius * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Free-space propagation delay in milliseconds.
#[inline]
pub fn propagation_delay_ms(distance_km: f64) -> f64 {
    distance_km / LIGHT_SPEED_KM_S * 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn wgs() -> EllipsoidModel {
        EllipsoidModel::wgs84()
    }

    fn geo(lat: f64, lon: f64, alt: f64) -> GeodeticPosition {
        GeodeticPosition::new(lat, lon, alt).unwrap()
    }

    /// Independent closed form: eccentricity from a and b, radii via the
    /// reduced-latitude form rather than the prime vertical radius.
    fn reference_geodetic_to_ecef(lat: f64, lon: f64, h: f64) -> [f64; 3] {
        let a = 6378.137_f64;
        let b = a * (1.0 - 1.0 / 298.257223563);
        let (phi, lam) = (lat.to_radians(), lon.to_radians());
        let denom = (a * a * phi.cos().powi(2) + b * b * phi.sin().powi(2)).sqrt();
        let r_xy = a * a / denom + h;
        let r_z = b * b / denom + h;
        [r_xy * phi.cos() * lam.cos(), r_xy * phi.cos() * lam.sin(), r_z * phi.sin()]
    }

    #[test]
    fn ellipsoid_defaults() {
        let e = wgs();
        assert_eq!(e.semi_minor_b, e.semi_major_a * (1.0 - e.flattening_f));
        assert_abs_diff_eq!(e.semi_minor_b, 6356.752314245, epsilon = 1e-9);
    }

    #[test]
    fn equator_and_pole() {
        let p = geodetic_to_ecef(&geo(0.0, 0.0, 0.0), &wgs());
        assert_abs_diff_eq!(p.x, 6378.137, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-9);

        let p = geodetic_to_ecef(&geo(90.0, 0.0, 0.0), &wgs());
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.z, 6356.752314245, epsilon = 1e-8);
    }

    #[test]
    fn mid_latitude_matches_reference_formula() {
        let p = geodetic_to_ecef(&geo(45.0, 45.0, 100.0), &wgs());
        let r = reference_geodetic_to_ecef(45.0, 45.0, 100.0);
        assert_abs_diff_eq!(p.x, r[0], epsilon = 1e-8);
        assert_abs_diff_eq!(p.y, r[1], epsilon = 1e-8);
        assert_abs_diff_eq!(p.z, r[2], epsilon = 1e-8);
    }

    #[test]
    fn inverse_trivial_points() {
        let g = ecef_to_geodetic(&EcefPosition::new(6378.137, 0.0, 0.0), &wgs()).unwrap();
        assert_abs_diff_eq!(g.lat_deg, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.lon_deg, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.alt_km, 0.0, epsilon = 1e-9);

        let g = ecef_to_geodetic(&EcefPosition::new(0.0, 0.0, -6356.752314245), &wgs()).unwrap();
        assert_abs_diff_eq!(g.lat_deg, -90.0, epsilon = 1e-12);
        assert_eq!(g.lon_deg, 0.0);
        assert_abs_diff_eq!(g.alt_km, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn inverse_rejects_origin() {
        assert_eq!(
            ecef_to_geodetic(&EcefPosition::default(), &wgs()),
            Err(GeoError::DegenerateOrigin)
        );
    }

    #[test]
    fn longitude_is_half_open() {
        let g = ecef_to_geodetic(&EcefPosition::new(-7000.0, -0.0, 0.0), &wgs()).unwrap();
        assert_eq!(g.lon_deg, 180.0);
        assert_eq!(geo(0.0, -180.0, 0.0).lon_deg, 180.0);
    }

    #[test]
    fn geodetic_ranges_enforced() {
        assert!(matches!(GeodeticPosition::new(91.0, 0.0, 0.0), Err(GeoError::Latitude(_))));
        assert!(matches!(GeodeticPosition::new(0.0, 181.0, 0.0), Err(GeoError::Longitude(_))));
        assert!(matches!(GeodeticPosition::new(0.0, 0.0, -0.6), Err(GeoError::Altitude(_))));
    }

    #[test]
    fn los_trivial_cases() {
        let e = wgs();
        let p = |x: f64| EcefPosition::new(x, 0.0, 0.0);
        assert!(has_line_of_sight(&p(7000.0), &p(8000.0), &e, 0.0));
        assert!(!has_line_of_sight(&p(7000.0), &p(-7000.0), &e, 0.0));
        assert!(has_line_of_sight(&p(6378.137), &p(7000.0), &e, 0.0));
        assert!(!has_line_of_sight(&p(6378.137), &p(-7000.0), &e, 0.0));
    }

    #[test]
    fn los_margin_blocks_grazing_link() {
        let e = wgs();
        // Equatorial chord between two 7000 km satellites 40 degrees apart;
        // closest approach is 7000*cos(20deg) = 6577.8 km.
        let ang = 40.0_f64.to_radians();
        let p = EcefPosition::new(7000.0, 0.0, 0.0);
        let q = EcefPosition::new(7000.0 * ang.cos(), 7000.0 * ang.sin(), 0.0);
        assert!(has_line_of_sight(&p, &q, &e, 0.0));
        assert!(has_line_of_sight(&p, &q, &e, 100.0));
        assert!(!has_line_of_sight(&p, &q, &e, 300.0));
    }

    #[test]
    fn elevation_zenith_and_horizon() {
        let e = wgs();
        let site = geo(0.0, 0.0, 0.0);
        assert_abs_diff_eq!(elevation_deg(&site, &EcefPosition::new(7000.0, 0.0, 0.0), &e), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(elevation_deg(&site, &EcefPosition::new(6378.137, 1000.0, 0.0), &e), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn surface_distance_analytic_arcs() {
        let e = wgs();
        assert_eq!(surface_distance(&geo(12.0, 34.0, 0.0), &geo(12.0, 34.0, 0.0), &e), 0.0);
        assert_abs_diff_eq!(
            surface_distance(&geo(0.0, 0.0, 0.0), &geo(0.0, 180.0, 0.0), &e),
            std::f64::consts::PI * 6371.0088,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            surface_distance(&geo(0.0, 0.0, 0.0), &geo(0.0, 180.0, 0.0), &e),
            20015.114,
            epsilon = 1e-3
        );
        assert_abs_diff_eq!(
            surface_distance(&geo(0.0, 0.0, 0.0), &geo(0.0, 90.0, 0.0), &e),
            std::f64::consts::FRAC_PI_2 * 6371.0088,
            epsilon = 1e-9
        );
    }

    #[test]
    fn delay_definition() {
        assert_abs_diff_eq!(propagation_delay_ms(299.792458), 1.0, epsilon = 1e-15);
        assert_eq!(propagation_delay_ms(0.0), 0.0);
        assert_abs_diff_eq!(propagation_delay_ms(550.0), 550.0 / 299792.458 * 1000.0, epsilon = 1e-15);
        assert_abs_diff_eq!(propagation_delay_ms(550.0), 1.83460, epsilon = 1e-5);
    }

    fn arb_geo() -> impl Strategy<Value = GeodeticPosition> {
        (-90.0..=90.0f64, -179.999..=180.0f64, 0.0..=2000.0f64).prop_map(|(a, b, c)| geo(a, b, c))
    }

    fn arb_ecef() -> impl Strategy<Value = EcefPosition> {
        (-9000.0..9000.0f64, -9000.0..9000.0f64, -9000.0..9000.0f64)
            .prop_map(|(x, y, z)| EcefPosition::new(x, y, z))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn geodetic_round_trip(g in arb_geo()) {
            let e = wgs();
            let p = geodetic_to_ecef(&g, &e);
            let back = ecef_to_geodetic(&p, &e).unwrap();
            let p2 = geodetic_to_ecef(&back, &e);
            prop_assert!(p.distance(&p2) < 1e-6);
            prop_assert!((back.lat_deg - g.lat_deg).abs() < 1e-6);
            prop_assert!((back.alt_km - g.alt_km).abs() < 1e-6);
            if g.lat_deg.abs() < 89.9999 {
                let dlon = (back.lon_deg - g.lon_deg).abs();
                prop_assert!(dlon < 1e-6 || (dlon - 360.0).abs() < 1e-6);
            }
        }

        #[test]
        fn los_symmetric(p in arb_ecef(), q in arb_ecef()) {
            let e = wgs();
            prop_assert_eq!(has_line_of_sight(&p, &q, &e, 0.0), has_line_of_sight(&q, &p, &e, 0.0));
        }

        #[test]
        fn margin_only_shrinks_visibility(p in arb_ecef(), q in arb_ecef(), m in 0.0..200.0f64, dm in 0.0..200.0f64) {
            let e = wgs();
            if !has_line_of_sight(&p, &q, &e, m) {
                prop_assert!(!has_line_of_sight(&p, &q, &e, m + dm));
            }
        }

        #[test]
        fn surface_triangle_inequality(a in arb_geo(), b in arb_geo(), c in arb_geo()) {
            let e = wgs();
            let ab = surface_distance(&a, &b, &e);
            prop_assert!(ab <= surface_distance(&a, &c, &e) + surface_distance(&c, &b, &e) + 1e-9);
            prop_assert_eq!(ab, surface_distance(&b, &a, &e));
        }
    }
}
