//! Visibility graphs over a snapshot, and attack overlays that prune them.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{ConstellationSnapshot, GroundStationNode};
use crate::geo::{
    ecef_to_geodetic, elevation_deg, geodetic_to_ecef, los_scaled, propagation_delay_ms, scale, surface_distance,
    EllipsoidModel, GeoError, GeodeticPosition,
};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("unknown satellite id `{0}`")]
    UnknownSatellite(String),
    #[error("unknown ground station id `{0}`")]
    UnknownStation(String),
    #[error("link `{0}`-`{1}` does not join a satellite to a satellite or station")]
    InvalidLink(String, String),
    #[error("jam region {index}: {message}")]
    InvalidRegion { index: usize, message: String },
    #[error("reroute_penalty_ms must be finite and non-negative, got {0}")]
    InvalidPenalty(f64),
    #[error("edge ({0}, {1}) references a node outside the graph")]
    EdgeOutOfRange(u32, u32),
    #[error("malformed overlay: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Undirected satellite-satellite link, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SatLink {
    pub a: u32,
    pub b: u32,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationLink {
    pub sat: u32,
    pub station: u32,
    pub distance_km: f64,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub sat: u32,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityOptions {
    /// Inflation of the ellipsoid for satellite-satellite links, km.
    pub margin_km: f64,
    /// Optional minimum elevation for satellite-station links, degrees.
    pub min_elevation_deg: Option<f64>,
}

impl Default for VisibilityOptions {
    fn default() -> Self {
        Self {
            margin_km: 0.0,
            min_elevation_deg: None,
        }
    }
}

/// Immutable weighted visibility graph. Edge lists are kept in canonical
/// ascending order; adjacency is derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityGraph {
    sat_count: usize,
    station_count: usize,
    sat_links: Vec<SatLink>,
    station_links: Vec<StationLink>,
    adj_offsets: Vec<usize>,
    adjacency: Vec<Neighbor>,
    station_offsets: Vec<usize>,
}

impl VisibilityGraph {
    /// Assemble a graph from explicit edges. Satellite links are
    /// re-oriented to `a < b` and both lists are sorted.
    pub fn from_links(
        sat_count: usize,
        station_count: usize,
        mut sat_links: Vec<SatLink>,
        mut station_links: Vec<StationLink>,
    ) -> Result<Self, TopologyError> {
        for l in &mut sat_links {
            if l.a as usize >= sat_count || l.b as usize >= sat_count || l.a == l.b {
                return Err(TopologyError::EdgeOutOfRange(l.a, l.b));
            }
            if l.a > l.b {
                std::mem::swap(&mut l.a, &mut l.b);
            }
        }
        for l in &station_links {
            if l.sat as usize >= sat_count || l.station as usize >= station_count {
                return Err(TopologyError::EdgeOutOfRange(l.sat, l.station));
            }
        }
        sat_links.sort_by_key(|l| (l.a, l.b));
        station_links.sort_by_key(|l| (l.sat, l.station));
        Ok(Self::assemble(sat_count, station_count, sat_links, station_links))
    }

    fn assemble(sat_count: usize, station_count: usize, sat_links: Vec<SatLink>, station_links: Vec<StationLink>) -> Self {
        let mut degree = vec![0usize; sat_count];
        for l in &sat_links {
            degree[l.a as usize] += 1;
            degree[l.b as usize] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(sat_count + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets[..sat_count].to_vec();
        let mut adjacency = vec![Neighbor { sat: 0, delay_ms: 0.0 }; adj_offsets[sat_count]];
        // Canonical link order makes every neighbor list ascending.
        for l in &sat_links {
            adjacency[fill[l.a as usize]] = Neighbor { sat: l.b, delay_ms: l.delay_ms };
            fill[l.a as usize] += 1;
            adjacency[fill[l.b as usize]] = Neighbor { sat: l.a, delay_ms: l.delay_ms };
            fill[l.b as usize] += 1;
        }
        for i in 0..sat_count {
            adjacency[adj_offsets[i]..adj_offsets[i + 1]].sort_by_key(|n| n.sat);
        }

        let mut station_offsets = vec![0usize; sat_count + 1];
        for l in &station_links {
            station_offsets[l.sat as usize + 1] += 1;
        }
        for i in 0..sat_count {
            station_offsets[i + 1] += station_offsets[i];
        }

        Self {
            sat_count,
            station_count,
            sat_links,
            station_links,
            adj_offsets,
            adjacency,
            station_offsets,
        }
    }

    pub fn sat_count(&self) -> usize {
        self.sat_count
    }

    pub fn station_count(&self) -> usize {
        self.station_count
    }

    pub fn sat_links(&self) -> &[SatLink] {
        &self.sat_links
    }

    pub fn station_links(&self) -> &[StationLink] {
        &self.station_links
    }

    /// Satellites visible from `sat`, ascending by index.
    pub fn neighbors(&self, sat: usize) -> &[Neighbor] {
        &self.adjacency[self.adj_offsets[sat]..self.adj_offsets[sat + 1]]
    }

    /// Station links of `sat`, ascending by station index.
    pub fn stations_of(&self, sat: usize) -> &[StationLink] {
        &self.station_links[self.station_offsets[sat]..self.station_offsets[sat + 1]]
    }

    pub fn sat_delay(&self, a: usize, b: usize) -> Option<f64> {
        let nb = self.neighbors(a);
        nb.binary_search_by_key(&(b as u32), |n| n.sat).ok().map(|i| nb[i].delay_ms)
    }

    pub fn station_delay(&self, sat: usize, station: usize) -> Option<f64> {
        let links = self.stations_of(sat);
        links
            .binary_search_by_key(&(station as u32), |l| l.station)
            .ok()
            .map(|i| links[i].delay_ms)
    }

    fn filtered(&self, keep_sat: impl Fn(&SatLink) -> bool, keep_station: impl Fn(&StationLink) -> bool) -> Self {
        let sat_links = self.sat_links.iter().copied().filter(|l| keep_sat(l)).collect();
        let station_links = self.station_links.iter().copied().filter(|l| keep_station(l)).collect();
        Self::assemble(self.sat_count, self.station_count, sat_links, station_links)
    }
}

/// Test every satellite pair and every satellite-station pair.
///
/// Pairs are evaluated in parallel on the current rayon pool; the output is
/// in canonical order regardless of the number of workers.
pub fn build_visibility_graph(
    snapshot: &ConstellationSnapshot,
    stations: &[GroundStationNode],
    e: &EllipsoidModel,
    options: &VisibilityOptions,
) -> VisibilityGraph {
    let n = snapshot.len();
    let positions = snapshot.positions();
    let margin = options.margin_km;
    let (inv_eq, inv_polar) = (1.0 / (e.semi_major_a + margin), 1.0 / (e.semi_minor_b + margin));
    let scaled: Vec<[f64; 3]> = positions.iter().map(|p| scale(p, inv_eq, inv_polar)).collect();

    let sat_links: Vec<SatLink> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::new();
            for j in i + 1..n {
                if los_scaled(scaled[i], scaled[j]) {
                    row.push(SatLink {
                        a: i as u32,
                        b: j as u32,
                        delay_ms: propagation_delay_ms(positions[i].distance(&positions[j])),
                    });
                }
            }
            row
        })
        .collect::<Vec<_>>()
        .concat();

    // Stations use the bare ellipsoid; sites below it are lifted to the
    // surface for the visibility test only.
    let (bare_eq, bare_polar) = (1.0 / e.semi_major_a, 1.0 / e.semi_minor_b);
    let station_los: Vec<[f64; 3]> = stations
        .iter()
        .map(|s| {
            let lifted = GeodeticPosition {
                alt_km: s.geodetic.alt_km.max(0.0),
                ..s.geodetic
            };
            scale(&geodetic_to_ecef(&lifted, e), bare_eq, bare_polar)
        })
        .collect();

    let station_links: Vec<StationLink> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sat_scaled = scale(&positions[i], bare_eq, bare_polar);
            let mut row = Vec::new();
            for (k, st) in stations.iter().enumerate() {
                if !los_scaled(sat_scaled, station_los[k]) {
                    continue;
                }
                if let Some(min_el) = options.min_elevation_deg {
                    if elevation_deg(&st.geodetic, &positions[i], e) < min_el {
                        continue;
                    }
                }
                let d = positions[i].distance(&st.ecef);
                row.push(StationLink {
                    sat: i as u32,
                    station: k as u32,
                    distance_km: d,
                    delay_ms: propagation_delay_ms(d),
                });
            }
            row
        })
        .collect::<Vec<_>>()
        .concat();

    VisibilityGraph::assemble(n, stations.len(), sat_links, station_links)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamRegion {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub radius_km: f64,
}

impl JamRegion {
    pub fn center(&self) -> Result<GeodeticPosition, GeoError> {
        GeodeticPosition::new(self.lat_deg, self.lon_deg, 0.0)
    }
}

/// Declarative link-layer attack: disabled nodes, disabled links, jammed
/// regions, and a per-relay-hop monitoring penalty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackOverlay {
    pub disabled_satellites: BTreeSet<String>,
    pub disabled_stations: BTreeSet<String>,
    pub disabled_links: BTreeSet<[String; 2]>,
    pub jam_regions: Vec<JamRegion>,
    pub reroute_penalty_ms: f64,
}

impl AttackOverlay {
    pub fn from_json(text: &str) -> Result<Self, TopologyError> {
        let overlay: Self = serde_json::from_str(text)?;
        overlay.validate()?;
        Ok(overlay)
    }

    pub fn validate(&self) -> Result<(), TopologyError> {
        if !(self.reroute_penalty_ms.is_finite() && self.reroute_penalty_ms >= 0.0) {
            return Err(TopologyError::InvalidPenalty(self.reroute_penalty_ms));
        }
        for (index, r) in self.jam_regions.iter().enumerate() {
            if !(r.radius_km.is_finite() && r.radius_km > 0.0) {
                return Err(TopologyError::InvalidRegion {
                    index,
                    message: format!("radius_km must be positive, got {}", r.radius_km),
                });
            }
            r.center().map_err(|err| TopologyError::InvalidRegion {
                index,
                message: err.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.disabled_satellites.is_empty()
            && self.disabled_stations.is_empty()
            && self.disabled_links.is_empty()
            && self.jam_regions.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Endpoint {
    Sat(u32),
    Station(u32),
}

/// Remove every edge touched by the overlay. The result's edge set is a
/// subset of the input's.
pub fn apply_overlay(
    g: &VisibilityGraph,
    snapshot: &ConstellationSnapshot,
    stations: &[GroundStationNode],
    overlay: &AttackOverlay,
    e: &EllipsoidModel,
) -> Result<VisibilityGraph, TopologyError> {
    overlay.validate()?;
    let sat_index: HashMap<&str, u32> = snapshot
        .satellites
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i as u32))
        .collect();
    let station_index: HashMap<&str, u32> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i as u32))
        .collect();

    let mut sat_down = vec![false; g.sat_count()];
    let mut station_down = vec![false; g.station_count()];
    for id in &overlay.disabled_satellites {
        let i = *sat_index
            .get(id.as_str())
            .ok_or_else(|| TopologyError::UnknownSatellite(id.clone()))?;
        sat_down[i as usize] = true;
    }
    for id in &overlay.disabled_stations {
        let i = *station_index
            .get(id.as_str())
            .ok_or_else(|| TopologyError::UnknownStation(id.clone()))?;
        station_down[i as usize] = true;
    }

    let endpoint = |id: &String| -> Option<Endpoint> {
        sat_index
            .get(id.as_str())
            .map(|&i| Endpoint::Sat(i))
            .or_else(|| station_index.get(id.as_str()).map(|&i| Endpoint::Station(i)))
    };
    let mut cut_sat = BTreeSet::new();
    let mut cut_station = BTreeSet::new();
    for [x, y] in &overlay.disabled_links {
        let ex = endpoint(x).ok_or_else(|| TopologyError::UnknownSatellite(x.clone()))?;
        let ey = endpoint(y).ok_or_else(|| TopologyError::UnknownSatellite(y.clone()))?;
        match (ex, ey) {
            (Endpoint::Sat(a), Endpoint::Sat(b)) if a != b => {
                cut_sat.insert((a.min(b), a.max(b)));
            }
            (Endpoint::Sat(s), Endpoint::Station(k)) | (Endpoint::Station(k), Endpoint::Sat(s)) => {
                cut_station.insert((s, k));
            }
            _ => return Err(TopologyError::InvalidLink(x.clone(), y.clone())),
        }
    }

    if !overlay.jam_regions.is_empty() {
        let centers = overlay
            .jam_regions
            .iter()
            .map(|r| Ok((r.center()?, r.radius_km)))
            .collect::<Result<Vec<_>, GeoError>>()?;
        let jammed = |g: &GeodeticPosition| centers.iter().any(|(c, r)| surface_distance(g, c, e) <= *r);
        let sub_points = snapshot
            .satellites
            .par_iter()
            .map(|s| ecef_to_geodetic(&s.position, e))
            .collect::<Result<Vec<_>, GeoError>>()?;
        for (i, sp) in sub_points.iter().enumerate() {
            if jammed(&sp.sub_point()) {
                sat_down[i] = true;
            }
        }
        for (k, st) in stations.iter().enumerate() {
            if jammed(&st.geodetic) {
                station_down[k] = true;
            }
        }
    }

    Ok(g.filtered(
        |l| !sat_down[l.a as usize] && !sat_down[l.b as usize] && !cut_sat.contains(&(l.a, l.b)),
        |l| !sat_down[l.sat as usize] && !station_down[l.station as usize] && !cut_station.contains(&(l.sat, l.station)),
    ))
}
