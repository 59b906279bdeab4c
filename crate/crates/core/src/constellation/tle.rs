//! Two-line element sets and a two-body Kepler propagator.
//!
//! This is a reduced-fidelity path (no SGP4 drag or J2 terms) intended for
//! instantaneous snapshot geometry only.

use std::f64::consts::{PI, TAU};

use chrono::{Datelike, Duration, NaiveDate};
use thiserror::Error;

use super::{ConstellationError, ConstellationSnapshot, SatelliteNode};
use crate::geo::{EcefPosition, EllipsoidModel};

/// Earth gravitational parameter, km^3/s^2.
pub const GM_EARTH_KM3_S2: f64 = 398_600.441_8;

const KEPLER_TOLERANCE_RAD: f64 = 1e-12;
const KEPLER_MAX_ITERATIONS: usize = 50;
const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TleError {
    #[error("line {line}: expected 69 characters, found {len}")]
    LineLength { line: u8, len: usize },
    #[error("line {line}: must start with `{line} `")]
    LineNumber { line: u8 },
    #[error("line {line}: checksum digit `{found}` does not match computed {expected}")]
    Checksum { line: u8, expected: u32, found: char },
    #[error("line {line}: malformed {field} field `{text}`")]
    Field { line: u8, field: &'static str, text: String },
    #[error("catalog numbers differ between lines (`{0}` vs `{1}`)")]
    CatalogMismatch(String, String),
    #[error("mean motion must be positive, got {0}")]
    MeanMotion(f64),
    #[error("Kepler's equation did not converge (M = {mean_anomaly}, e = {eccentricity})")]
    KeplerNoConvergence { mean_anomaly: f64, eccentricity: f64 },
    #[error("element set starting at text line {0} is incomplete")]
    Incomplete(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TleElements {
    pub catalog_id: String,
    /// Seconds since J2000 (2000-01-01 12:00).
    pub epoch: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub eccentricity: f64,
    pub arg_perigee_deg: f64,
    pub mean_anomaly_deg: f64,
    pub mean_motion_rev_per_day: f64,
}

impl TleElements {
    pub fn mean_motion_rad_s(&self) -> f64 {
        self.mean_motion_rev_per_day * TAU / SECONDS_PER_DAY
    }
}

/// `a = (GM / n^2)^(1/3)` with `n` in rad/s.
pub fn semi_major_axis_km(mean_motion_rev_per_day: f64) -> f64 {
    let n = mean_motion_rev_per_day * TAU / SECONDS_PER_DAY;
    (GM_EARTH_KM3_S2 / (n * n)).cbrt()
}

fn checksum(body: &str) -> u32 {
    body.chars()
        .map(|c| match c {
            '-' => 1,
            c => c.to_digit(10).unwrap_or(0),
        })
        .sum::<u32>()
        % 10
}

fn check_line(raw: &str, number: u8) -> Result<&str, TleError> {
    let line = raw.trim_end();
    if !line.is_ascii() || line.len() != 69 {
        return Err(TleError::LineLength {
            line: number,
            len: line.chars().count(),
        });
    }
    let expected_prefix = [b'0' + number, b' '];
    if line.as_bytes()[..2] != expected_prefix {
        return Err(TleError::LineNumber { line: number });
    }
    let found = line.as_bytes()[68] as char;
    let expected = checksum(&line[..68]);
    if found.to_digit(10) != Some(expected) {
        return Err(TleError::Checksum {
            line: number,
            expected,
            found,
        });
    }
    Ok(line)
}

/// Slice by 1-based inclusive column numbers, trimmed.
fn cols(line: &str, from: usize, to: usize) -> &str {
    line[from - 1..to].trim()
}

fn float_field(line: &str, number: u8, from: usize, to: usize, field: &'static str) -> Result<f64, TleError> {
    let text = cols(line, from, to);
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| TleError::Field {
            line: number,
            field,
            text: text.to_string(),
        })
}

fn epoch_seconds(year: i32, day_of_year: f64) -> f64 {
    let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year");
    let j2000 = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let whole_days = (jan1 - j2000).num_days() as f64;
    (whole_days + day_of_year - 1.0 - 0.5) * SECONDS_PER_DAY
}

fn epoch_year_day(epoch: f64) -> (i32, f64) {
    let days = epoch / SECONDS_PER_DAY + 0.5;
    let whole = days.floor();
    let date = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date") + Duration::days(whole as i64);
    (date.year(), date.ordinal() as f64 + (days - whole))
}

pub fn parse_tle(line1: &str, line2: &str) -> Result<TleElements, TleError> {
    let l1 = check_line(line1, 1)?;
    let l2 = check_line(line2, 2)?;

    let cat1 = cols(l1, 3, 7);
    let cat2 = cols(l2, 3, 7);
    if cat1 != cat2 {
        return Err(TleError::CatalogMismatch(cat1.into(), cat2.into()));
    }

    let year_text = cols(l1, 19, 20);
    let yy: i32 = year_text.parse().map_err(|_| TleError::Field {
        line: 1,
        field: "epoch year",
        text: year_text.into(),
    })?;
    let year = if yy < 57 { 2000 + yy } else { 1900 + yy };
    let day = float_field(l1, 1, 21, 32, "epoch day")?;
    if !(1.0..367.0).contains(&day) {
        return Err(TleError::Field {
            line: 1,
            field: "epoch day",
            text: cols(l1, 21, 32).into(),
        });
    }

    let ecc_text = cols(l2, 27, 33);
    if ecc_text.len() != 7 || !ecc_text.bytes().all(|b| b.is_ascii_digit()) {
        return Err(TleError::Field {
            line: 2,
            field: "eccentricity",
            text: ecc_text.into(),
        });
    }
    let eccentricity = format!("0.{ecc_text}").parse::<f64>().expect("seven digits");

    let mean_motion = float_field(l2, 2, 53, 63, "mean motion")?;
    if mean_motion <= 0.0 {
        return Err(TleError::MeanMotion(mean_motion));
    }

    Ok(TleElements {
        catalog_id: cat1.to_string(),
        epoch: epoch_seconds(year, day),
        inclination_deg: float_field(l2, 2, 9, 16, "inclination")?,
        raan_deg: float_field(l2, 2, 18, 25, "RAAN")?,
        eccentricity,
        arg_perigee_deg: float_field(l2, 2, 35, 42, "argument of perigee")?,
        mean_anomaly_deg: float_field(l2, 2, 44, 51, "mean anomaly")?,
        mean_motion_rev_per_day: mean_motion,
    })
}

/// Render elements back into the fixed-column layout. Drag terms are
/// written as zero; checksums are recomputed.
pub fn format_tle(el: &TleElements) -> (String, String) {
    let (year, day) = epoch_year_day(el.epoch);
    let body1 = format!(
        "1 {:>5}U {:8} {:02}{:012.8}  .00000000  00000-0  00000-0 0  999",
        el.catalog_id,
        "",
        year.rem_euclid(100),
        day
    );
    let ecc = (el.eccentricity * 1e7).round() as u32;
    let body2 = format!(
        "2 {:>5} {:8.4} {:8.4} {:07} {:8.4} {:8.4} {:11.8}{:5}",
        el.catalog_id,
        el.inclination_deg,
        el.raan_deg,
        ecc,
        el.arg_perigee_deg,
        el.mean_anomaly_deg,
        el.mean_motion_rev_per_day,
        0
    );
    let c1 = checksum(&body1);
    let c2 = checksum(&body2);
    (format!("{body1}{c1}"), format!("{body2}{c2}"))
}

/// Parse a file of element sets, with or without name lines.
pub fn parse_tle_set(text: &str) -> Result<Vec<(Option<String>, TleElements)>, TleError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let (lineno, first) = lines[i];
        let (name, start) = if first.starts_with("1 ") {
            (None, i)
        } else {
            let name = first.strip_prefix("0 ").unwrap_or(first).trim().to_string();
            (Some(name), i + 1)
        };
        if start + 1 >= lines.len() {
            return Err(TleError::Incomplete(lineno));
        }
        out.push((name, parse_tle(lines[start].1, lines[start + 1].1)?));
        i = start + 2;
    }
    Ok(out)
}

/// Solve `E - e sin E = M` by Newton iteration. `M` is reduced into
/// (-pi, pi] first; the returned `E` lies in the same branch.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64, TleError> {
    if e == 0.0 {
        return Ok(mean_anomaly);
    }
    let mut m = mean_anomaly.rem_euclid(TAU);
    if m > PI {
        m -= TAU;
    }
    let mut ecc_anomaly = if e < 0.8 { m } else { PI.copysign(m) };
    for _ in 0..KEPLER_MAX_ITERATIONS {
        let (s, c) = ecc_anomaly.sin_cos();
        let step = (ecc_anomaly - e * s - m) / (1.0 - e * c);
        ecc_anomaly -= step;
        if step.abs() < KEPLER_TOLERANCE_RAD {
            return Ok(ecc_anomaly);
        }
    }
    Err(TleError::KeplerNoConvergence {
        mean_anomaly,
        eccentricity: e,
    })
}

/// Greenwich mean sidereal angle in degrees, `[0, 360)`.
pub fn gmst_deg(t: f64) -> f64 {
    (280.46061837 + 360.98564736629 * (t / SECONDS_PER_DAY)).rem_euclid(360.0)
}

/// Two-body position at `t` (seconds since J2000), rotated into ECEF by GMST.
pub fn tle_to_position(el: &TleElements, t: f64, _e: &EllipsoidModel) -> Result<EcefPosition, TleError> {
    let n = el.mean_motion_rad_s();
    let a = (GM_EARTH_KM3_S2 / (n * n)).cbrt();
    let ecc = el.eccentricity;
    let mean_anomaly = el.mean_anomaly_deg.to_radians() + n * (t - el.epoch);
    let big_e = solve_kepler(mean_anomaly, ecc)?;

    let (sin_e, cos_e) = big_e.sin_cos();
    let xp = a * (cos_e - ecc);
    let yp = a * (1.0 - ecc * ecc).sqrt() * sin_e;

    let (sw, cw) = el.arg_perigee_deg.to_radians().sin_cos();
    let (si, ci) = el.inclination_deg.to_radians().sin_cos();
    let (so, co) = el.raan_deg.to_radians().sin_cos();

    // Rz(raan) Rx(i) Rz(argp) applied to the perifocal vector.
    let x1 = xp * cw - yp * sw;
    let y1 = xp * sw + yp * cw;
    let y2 = y1 * ci;
    let z2 = y1 * si;
    let xi = x1 * co - y2 * so;
    let yi = x1 * so + y2 * co;

    let (st, ct) = gmst_deg(t).to_radians().sin_cos();
    Ok(EcefPosition::new(ct * xi + st * yi, -st * xi + ct * yi, z2))
}

/// Propagate every element set in `text` to `t` (default: the latest
/// epoch in the file). Ids are the name lines when present, else catalog numbers.
pub fn load_tle_snapshot(
    label: &str,
    text: &str,
    t: Option<f64>,
    e: &EllipsoidModel,
) -> Result<ConstellationSnapshot, ConstellationError> {
    let sets = parse_tle_set(text)?;
    let t = t.unwrap_or_else(|| sets.iter().map(|(_, el)| el.epoch).fold(f64::NEG_INFINITY, f64::max));
    let t = if t.is_finite() { t } else { 0.0 };
    let mut sats = Vec::with_capacity(sets.len());
    for (name, el) in &sets {
        sats.push(SatelliteNode {
            id: name.clone().unwrap_or_else(|| el.catalog_id.clone()),
            position: tle_to_position(el, t, e)?,
            is_actuator: false,
        });
    }
    ConstellationSnapshot::new(label, sats, t, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const ISS1: &str = "1 25544U 98067A   08264.51782528 -.00002182  00000-0 -11606-4 0  2927";
    const ISS2: &str = "2 25544  51.6416 247.4627 0006703 130.5360 325.0288 15.72125391563537";

    fn with_checksum(body: &str) -> String {
        format!("{body}{}", checksum(body))
    }

    #[test]
    fn parses_reference_set() {
        let el = parse_tle(ISS1, ISS2).unwrap();
        assert_eq!(el.catalog_id, "25544");
        assert_eq!(el.inclination_deg, 51.6416);
        assert_eq!(el.raan_deg, 247.4627);
        assert_eq!(el.eccentricity, 0.0006703);
        assert_eq!(el.arg_perigee_deg, 130.5360);
        assert_eq!(el.mean_anomaly_deg, 325.0288);
        assert_eq!(el.mean_motion_rev_per_day, 15.72125391);
        // 2008-01-01 is 2922 days after 2000-01-01.
        assert_abs_diff_eq!(el.epoch, (2922.0 + 263.51782528 - 0.5) * 86400.0, epsilon = 1e-6);
    }

    #[test]
    fn implied_decimal_eccentricity() {
        let body2 = format!("{}0001234{}", &ISS2[..26], &ISS2[33..68]);
        let el = parse_tle(ISS1, &with_checksum(&body2)).unwrap();
        assert_eq!(el.eccentricity, 0.0001234);
    }

    #[test]
    fn corrupted_checksum() {
        let mut bad = ISS2[..68].to_string();
        bad.push('8');
        assert!(matches!(parse_tle(ISS1, &bad), Err(TleError::Checksum { line: 2, expected: 7, .. })));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse_tle(&ISS1[..60], ISS2), Err(TleError::LineLength { line: 1, .. })));
        assert!(matches!(parse_tle(ISS2, ISS1), Err(TleError::LineNumber { line: 1 })));
        let body2 = format!("{}00x1234{}", &ISS2[..26], &ISS2[33..68]);
        assert!(matches!(
            parse_tle(ISS1, &with_checksum(&body2)),
            Err(TleError::Field { field: "eccentricity", .. })
        ));
    }

    #[test]
    fn semi_major_axis_from_mean_motion() {
        // Closed form evaluated independently: n = 15.05 * 2 pi / 86400 rad/s.
        let n: f64 = 15.05 * 2.0 * std::f64::consts::PI / 86400.0;
        let expected = (398600.4418 / (n * n)).powf(1.0 / 3.0);
        assert_abs_diff_eq!(semi_major_axis_km(15.05), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(semi_major_axis_km(15.05), 6932.0, epsilon = 5.0);
    }

    fn bisect_kepler(m: f64, e: f64) -> f64 {
        let (mut lo, mut hi) = (m - 1.0, m + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid - e * mid.sin() - m > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn kepler_against_bisection() {
        let m = 1.5707963;
        let e_anom = solve_kepler(m, 0.5).unwrap();
        assert_abs_diff_eq!(e_anom, bisect_kepler(m, 0.5), epsilon = 1e-11);
        assert_abs_diff_eq!(e_anom, 2.0208, epsilon = 1e-3);
        assert_eq!(solve_kepler(0.731, 0.0).unwrap(), 0.731);
        for &(m, e) in &[(0.1, 0.9), (3.0, 0.99), (-2.0, 0.3), (1e-6, 0.95)] {
            assert_abs_diff_eq!(solve_kepler(m, e).unwrap(), bisect_kepler(m, e), epsilon = 1e-10);
        }
    }

    #[test]
    fn gmst_at_j2000() {
        assert_abs_diff_eq!(gmst_deg(0.0), 280.46061837, epsilon = 1e-12);
        let g = gmst_deg(123456789.0);
        assert!((0.0..360.0).contains(&g));
    }

    #[test]
    fn circular_orbit_keeps_radius() {
        let el = TleElements {
            eccentricity: 0.0,
            ..parse_tle(ISS1, ISS2).unwrap()
        };
        let a = semi_major_axis_km(el.mean_motion_rev_per_day);
        let e = EllipsoidModel::wgs84();
        for k in 0..50 {
            let t = el.epoch + k as f64 * 1234.5;
            let p = tle_to_position(&el, t, &e).unwrap();
            assert_abs_diff_eq!(p.norm(), a, epsilon = 1e-6);
        }
    }

    #[test]
    fn set_with_and_without_names() {
        let text = format!("ISS (ZARYA)\n{ISS1}\n{ISS2}\n\n{ISS1}\n{ISS2}\n");
        let sets = parse_tle_set(&text).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].0.as_deref(), Some("ISS (ZARYA)"));
        assert_eq!(sets[1].0, None);
        assert!(matches!(parse_tle_set(&format!("X\n{ISS1}\n")), Err(TleError::Incomplete(1))));

        let e = EllipsoidModel::wgs84();
        let snap = load_tle_snapshot("tle", &format!("ISS\n{ISS1}\n{ISS2}\n"), None, &e).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(snap.satellites[0].id, "ISS");
        let r = snap.satellites[0].position.norm();
        assert!(r > 6700.0 && r < 6800.0, "{r}");
    }

    #[test]
    fn format_reproduces_reference_numeric_fields() {
        let el = parse_tle(ISS1, ISS2).unwrap();
        let (l1, l2) = format_tle(&el);
        assert_eq!(l1.len(), 69);
        assert_eq!(l2.len(), 69);
        assert_eq!(&l1[18..32], &ISS1[18..32]);
        assert_eq!(&l2[..63], &ISS2[..63]);
        let back = parse_tle(&l1, &l2).unwrap();
        assert_eq!(back.eccentricity, el.eccentricity);
        assert_eq!(back.mean_motion_rev_per_day, el.mean_motion_rev_per_day);
        assert_abs_diff_eq!(back.epoch, el.epoch, epsilon = 1e-3);
    }

    proptest! {
        #[test]
        fn reserialization_is_idempotent(
            day in 1.0..365.0f64,
            year in 0u32..56,
            inc in 0.0..180.0f64,
            raan in 0.0..359.9f64,
            ecc in 0.0..0.9f64,
            argp in 0.0..359.9f64,
            ma in 0.0..359.9f64,
            mm in 0.5..16.5f64,
        ) {
            let el = TleElements {
                catalog_id: "12345".into(),
                epoch: epoch_seconds(2000 + year as i32, day),
                inclination_deg: inc,
                raan_deg: raan,
                eccentricity: ecc,
                arg_perigee_deg: argp,
                mean_anomaly_deg: ma,
                mean_motion_rev_per_day: mm,
            };
            let (a1, a2) = format_tle(&el);
            let parsed = parse_tle(&a1, &a2).unwrap();
            let (b1, b2) = format_tle(&parsed);
            prop_assert_eq!(&a1, &b1);
            prop_assert_eq!(&a2, &b2);
        }
    }
}
