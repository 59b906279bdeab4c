use std::collections::HashSet;
use std::fmt::Write as _;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{check_above_surface, ConstellationError, ConstellationSnapshot, GroundStationNode, SatelliteNode};
use crate::geo::{EcefPosition, EllipsoidModel, GeodeticPosition};

const SNAPSHOT_HEADER: &str = "id,x_km,y_km,z_km";
const STATION_HEADER: &str = "id,lat_deg,lon_deg,alt_km";

fn records(text: &str, expected: &'static str) -> Result<Vec<(u64, StringRecord)>, ConstellationError> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|err| ConstellationError::Parse {
            line: 1,
            message: err.to_string(),
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != expected {
        return Err(ConstellationError::Header {
            expected,
            found: header,
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|err| ConstellationError::Parse {
            line: err.position().map_or(0, |p| p.line()),
            message: err.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

fn number(rec: &StringRecord, idx: usize, name: &str, line: u64) -> Result<f64, ConstellationError> {
    let raw = rec.get(idx).unwrap_or_default();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ConstellationError::Parse {
            line,
            message: format!("invalid {name} `{raw}`"),
        }),
    }
}

fn id_field(rec: &StringRecord, line: u64) -> Result<String, ConstellationError> {
    match rec.get(0) {
        Some(id) if !id.is_empty() => Ok(id.to_string()),
        _ => Err(ConstellationError::Parse {
            line,
            message: "empty id".into(),
        }),
    }
}

/// Parse a `id,x_km,y_km,z_km` snapshot, preserving row order.
pub fn load_snapshot_csv(
    label: &str,
    text: &str,
    e: &EllipsoidModel,
) -> Result<ConstellationSnapshot, ConstellationError> {
    let mut seen = HashSet::new();
    let mut sats = Vec::new();
    for (line, rec) in records(text, SNAPSHOT_HEADER)? {
        let id = id_field(&rec, line)?;
        let position = EcefPosition::new(
            number(&rec, 1, "x_km", line)?,
            number(&rec, 2, "y_km", line)?,
            number(&rec, 3, "z_km", line)?,
        );
        let sat = SatelliteNode {
            id,
            position,
            is_actuator: false,
        };
        check_above_surface(&sat, Some(line), e)?;
        if !seen.insert(sat.id.clone()) {
            return Err(ConstellationError::DuplicateId {
                id: sat.id,
                line: Some(line),
            });
        }
        sats.push(sat);
    }
    ConstellationSnapshot::new(label, sats, 0.0, e)
}

/// Shortest round-trip float formatting, so a reload is bit-exact.
pub fn write_snapshot_csv(snapshot: &ConstellationSnapshot) -> String {
    let mut out = String::with_capacity(64 * (snapshot.len() + 1));
    out.push_str(SNAPSHOT_HEADER);
    out.push('\n');
    for s in &snapshot.satellites {
        let p = s.position;
        let _ = writeln!(out, "{},{},{},{}", s.id, p.x, p.y, p.z);
    }
    out
}

pub fn load_ground_stations_csv(text: &str, e: &EllipsoidModel) -> Result<Vec<GroundStationNode>, ConstellationError> {
    let mut seen = HashSet::new();
    let mut stations = Vec::new();
    for (line, rec) in records(text, STATION_HEADER)? {
        let id = id_field(&rec, line)?;
        let geodetic = GeodeticPosition::new(
            number(&rec, 1, "lat_deg", line)?,
            number(&rec, 2, "lon_deg", line)?,
            number(&rec, 3, "alt_km", line)?,
        )
        .map_err(|source| ConstellationError::Range { line, source })?;
        if !seen.insert(id.clone()) {
            return Err(ConstellationError::DuplicateId { id, line: Some(line) });
        }
        stations.push(GroundStationNode::new(id, geodetic, e)?);
    }
    Ok(stations)
}

pub fn write_ground_stations_csv(stations: &[GroundStationNode]) -> String {
    let mut out = String::from(STATION_HEADER);
    out.push('\n');
    for s in stations {
        let g = s.geodetic;
        let _ = writeln!(out, "{},{},{},{}", s.id, g.lat_deg, g.lon_deg, g.alt_km);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{generate_walker, WalkerSpec};
    use approx::assert_abs_diff_eq;

    fn wgs() -> EllipsoidModel {
        EllipsoidModel::wgs84()
    }

    #[test]
    fn two_rows() {
        let text = "id,x_km,y_km,z_km\na,7000,0,0\nb,0,7000.5,0\n";
        let snap = load_snapshot_csv("t", text, &wgs()).unwrap();
        assert_eq!(snap.len(), 2);
        assert_eq!(snap.satellites[1].id, "b");
        assert_eq!(snap.satellites[1].position.y, 7000.5);
    }

    #[test]
    fn buried_row_is_named() {
        let text = "id,x_km,y_km,z_km\na,7000,0,0\nlow,6000,0,0\n";
        match load_snapshot_csv("t", text, &wgs()) {
            Err(ConstellationError::BelowSurface { id, line, .. }) => {
                assert_eq!(id, "low");
                assert_eq!(line, Some(3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "id,x_km,y_km,z_km\na,7000,0,0\nb,7e3,zz,0\n";
        let err = load_snapshot_csv("t", text, &wgs()).unwrap_err();
        assert!(matches!(err, ConstellationError::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("y_km"));

        let text = "id,x_km,y_km,z_km\na,7000,0,0\na,7100,0,0\n";
        assert!(matches!(
            load_snapshot_csv("t", text, &wgs()),
            Err(ConstellationError::DuplicateId { line: Some(3), .. })
        ));

        let text = "id,x,y,z\na,7000,0,0\n";
        assert!(matches!(load_snapshot_csv("t", text, &wgs()), Err(ConstellationError::Header { .. })));
    }

    #[test]
    fn walker_round_trip_is_exact() {
        let e = wgs();
        let snap = generate_walker(&WalkerSpec::oneweb_like(), &e).unwrap();
        let text = write_snapshot_csv(&snap);
        let back = load_snapshot_csv(&snap.label, &text, &e).unwrap();
        assert_eq!(back, snap);
        assert_eq!(write_snapshot_csv(&back), text);
    }

    #[test]
    fn station_rows() {
        let stations = load_ground_stations_csv("id,lat_deg,lon_deg,alt_km\ngs1,0,0,0\n", &wgs()).unwrap();
        assert_eq!(stations.len(), 1);
        assert_abs_diff_eq!(stations[0].ecef.x, 6378.137, epsilon = 1e-9);
        assert_abs_diff_eq!(stations[0].ecef.y, 0.0, epsilon = 1e-9);

        let err = load_ground_stations_csv("id,lat_deg,lon_deg,alt_km\ngs1,0,0,0\ngs2,91,0,0\n", &wgs()).unwrap_err();
        assert!(matches!(err, ConstellationError::Range { line: 3, .. }), "{err}");
    }

    #[test]
    fn thirteen_station_file() {
        let text = include_str!("../../../../configs/stations-13.csv");
        let stations = load_ground_stations_csv(text, &wgs()).unwrap();
        assert_eq!(stations.len(), 13);
        let again = load_ground_stations_csv(&write_ground_stations_csv(&stations), &wgs()).unwrap();
        assert_eq!(again, stations);
    }
}
