#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sda_netlab::constellation::{select_actuators, GroundStationNode, SatelliteNode, TerminusNode};
use sda_netlab::geo::geodetic_to_ecef;
use sda_netlab::topology::build_visibility_graph;
use sda_netlab::{ConstellationSnapshot, EllipsoidModel, GeodeticPosition, VisibilityGraph, VisibilityOptions};

pub struct Instance {
    pub snapshot: ConstellationSnapshot,
    pub stations: Vec<GroundStationNode>,
    pub terminus: TerminusNode,
    pub graph: VisibilityGraph,
}

pub fn wgs() -> EllipsoidModel {
    EllipsoidModel::wgs84()
}

pub fn random_geodetic(rng: &mut StdRng, alt_km: f64) -> GeodeticPosition {
    let lat = rng.random::<f64>().mul_add(2.0, -1.0).asin().to_degrees();
    let lon = rng.random_range(-179.999..180.0);
    GeodeticPosition::new(lat, lon, alt_km).unwrap()
}

/// `n` satellites scattered over altitudes 400-2500 km, `stations` random
/// ground sites, and a random share of actuators.
pub fn random_instance(seed: u64, n: usize, stations: usize) -> Instance {
    let e = wgs();
    let mut rng = StdRng::seed_from_u64(seed);
    let sats = (0..n)
        .map(|i| {
            let alt = rng.random_range(400.0..2500.0);
            SatelliteNode {
                id: format!("sat{i}"),
                position: geodetic_to_ecef(&random_geodetic(&mut rng, alt), &e),
                is_actuator: false,
            }
        })
        .collect();
    let snapshot = ConstellationSnapshot::new("random", sats, 0.0, &e).unwrap();
    let k = rng.random_range(0..=n / 4);
    let snapshot = select_actuators(&snapshot, k, seed).unwrap();
    let stations: Vec<GroundStationNode> = (0..stations)
        .map(|i| GroundStationNode::new(format!("gs{i}"), random_geodetic(&mut rng, 0.0), &e).unwrap())
        .collect();
    let terminus = TerminusNode {
        geodetic: random_geodetic(&mut rng, 0.0),
    };
    let graph = build_visibility_graph(&snapshot, &stations, &e, &VisibilityOptions::default());
    Instance {
        snapshot,
        stations,
        terminus,
        graph,
    }
}

/// Pointwise `a <= b` with `None` as +infinity.
pub fn le(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (_, None) => true,
        (None, Some(_)) => false,
        (Some(x), Some(y)) => x <= y,
    }
}
