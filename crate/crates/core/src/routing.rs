//! Per-satellite delivery latency under the two reference architectures.
//!
//! Both architectures reduce to the same relay problem over satellite links:
//! some satellites start with a label (a direct downlink, or being an
//! actuator) and every other satellite takes
//! `min_j (delay(i, j) + penalty_j + L_j)` over its visible neighbors. The
//! production engine solves this with Dijkstra; [`fixpoint_routes`] solves it
//! with repeated sweeps and serves as the reference.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{ConstellationSnapshot, GroundStationNode, TerminusNode};
use crate::geo::{propagation_delay_ms, surface_distance, EllipsoidModel};
use crate::topology::VisibilityGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("downhaul routing needs at least one ground station")]
    NoStations,
    #[error("mode {0} is not a downhaul mode")]
    NotDownhaul(ArchitectureMode),
    #[error("graph has {graph} satellites but the snapshot has {snapshot}")]
    SizeMismatch { graph: usize, snapshot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArchitectureMode {
    /// Each satellite downlinks to its geometrically closest visible station.
    #[serde(rename = "downhaul-greedy")]
    DownhaulGreedy,
    /// Minimum total delay through any station to the terminus.
    #[serde(rename = "downhaul-optimal")]
    DownhaulOptimal,
    /// Inter-satellite delivery to the nearest orbital actuator.
    #[serde(rename = "onorbit")]
    OnOrbit,
}

impl ArchitectureMode {
    pub const ALL: [ArchitectureMode; 3] = [Self::DownhaulGreedy, Self::DownhaulOptimal, Self::OnOrbit];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DownhaulGreedy => "downhaul-greedy",
            Self::DownhaulOptimal => "downhaul-optimal",
            Self::OnOrbit => "onorbit",
        }
    }

    pub fn is_downhaul(&self) -> bool {
        !matches!(self, Self::OnOrbit)
    }
}

impl fmt::Display for ArchitectureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArchitectureMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}` (expected downhaul-greedy, downhaul-optimal or onorbit)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRef {
    Satellite(usize),
    Station(usize),
}

/// A delivered path, summarized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Route {
    pub latency_ms: f64,
    /// Space hops; 0 only for an actuator delivering to itself.
    pub hops: u32,
    /// First node after the source; `None` for self-delivery.
    pub next_hop: Option<NodeRef>,
    /// Station the data enters the ground at, or the actuator reached.
    pub terminal: NodeRef,
}

impl Route {
    /// Penalty paid by a neighbor that relays through this node.
    #[inline]
    fn relay_penalty(&self, penalty_ms: f64) -> f64 {
        if self.hops == 0 {
            0.0
        } else {
            penalty_ms
        }
    }
}

/// Whether seeded labels may later be improved by relaying.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Seeded satellites keep their label (greedy downhaul).
    Fixed,
    /// Seeded satellites take a relayed path when it is cheaper.
    Improvable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seeds {
    pub labels: Vec<Option<Route>>,
    pub policy: SeedPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyEntry {
    pub satellite_id: String,
    pub route: Option<Route>,
}

impl LatencyEntry {
    pub fn latency_ms(&self) -> Option<f64> {
        self.route.map(|r| r.latency_ms)
    }

    pub fn hops(&self) -> Option<u32> {
        self.route.map(|r| r.hops)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub mode: ArchitectureMode,
    pub entries: Vec<LatencyEntry>,
    station_ids: Vec<String>,
}

impl LatencyReport {
    pub fn from_routes(
        mode: ArchitectureMode,
        snapshot: &ConstellationSnapshot,
        stations: &[GroundStationNode],
        routes: Vec<Option<Route>>,
    ) -> Self {
        assert_eq!(routes.len(), snapshot.len());
        let entries = snapshot
            .satellites
            .iter()
            .zip(routes)
            .map(|(s, route)| LatencyEntry {
                satellite_id: s.id.clone(),
                route,
            })
            .collect();
        Self {
            mode,
            entries,
            station_ids: stations.iter().map(|s| s.id.clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latencies(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(LatencyEntry::latency_ms).collect()
    }

    pub fn unreachable_count(&self) -> usize {
        self.entries.iter().filter(|e| e.route.is_none()).count()
    }

    pub fn node_id(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Satellite(i) => &self.entries[i].satellite_id,
            NodeRef::Station(k) => &self.station_ids[k],
        }
    }

    /// Nodes visited after satellite `i`, ending at the terminal. Empty for
    /// self-delivery and for unreachable satellites.
    pub fn path(&self, i: usize) -> Vec<NodeRef> {
        let mut out = Vec::new();
        let mut cur = self.entries[i].route.and_then(|r| r.next_hop);
        while let Some(node) = cur {
            out.push(node);
            cur = match node {
                NodeRef::Satellite(j) => self.entries[j].route.and_then(|r| r.next_hop),
                NodeRef::Station(_) => None,
            };
            assert!(out.len() <= self.entries.len() + 1, "cycle in next-hop chain");
        }
        out
    }

    /// `sat_id,latency_ms,hops,terminal`; unreachable rows read `inf` with
    /// empty hop and terminal fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(48 * (self.entries.len() + 1));
        out.push_str("sat_id,latency_ms,hops,terminal\n");
        for e in &self.entries {
            match e.route {
                Some(r) => {
                    let _ = writeln!(out, "{},{},{},{}", e.satellite_id, r.latency_ms, r.hops, self.node_id(r.terminal));
                }
                None => {
                    let _ = writeln!(out, "{},inf,,", e.satellite_id);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    latency_ms: f64,
    sat: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap.
        other
            .latency_ms
            .total_cmp(&self.latency_ms)
            .then_with(|| other.sat.cmp(&self.sat))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline]
fn relayed(via: usize, via_route: &Route, delay_ms: f64, penalty_ms: f64) -> Route {
    Route {
        latency_ms: (delay_ms + via_route.relay_penalty(penalty_ms)) + via_route.latency_ms,
        hops: via_route.hops + 1,
        next_hop: Some(NodeRef::Satellite(via)),
        terminal: via_route.terminal,
    }
}

/// Relay labels outward from the seeds over satellite links (Dijkstra).
/// Equal latencies are resolved toward the lower relay index.
pub fn relay_routes(g: &VisibilityGraph, seeds: &Seeds, penalty_ms: f64) -> Vec<Option<Route>> {
    let n = g.sat_count();
    assert_eq!(seeds.labels.len(), n);
    let mut labels = seeds.labels.clone();
    let mut settled = vec![false; n];
    let mut heap: BinaryHeap<HeapItem> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            r.map(|r| HeapItem {
                latency_ms: r.latency_ms,
                sat: i as u32,
            })
        })
        .collect();

    while let Some(HeapItem { latency_ms, sat }) = heap.pop() {
        let i = sat as usize;
        if settled[i] {
            continue;
        }
        let route_i = labels[i].expect("queued nodes are labeled");
        if route_i.latency_ms != latency_ms {
            continue;
        }
        settled[i] = true;
        for nb in g.neighbors(i) {
            let j = nb.sat as usize;
            if settled[j] || (seeds.policy == SeedPolicy::Fixed && seeds.labels[j].is_some()) {
                continue;
            }
            let cand = relayed(i, &route_i, nb.delay_ms, penalty_ms);
            let better = match labels[j] {
                None => true,
                Some(cur) => {
                    cand.latency_ms < cur.latency_ms
                        || (cand.latency_ms == cur.latency_ms
                            && matches!(cur.next_hop, Some(NodeRef::Satellite(k)) if i < k))
                }
            };
            if better {
                labels[j] = Some(cand);
                heap.push(HeapItem {
                    latency_ms: cand.latency_ms,
                    sat: j as u32,
                });
            }
        }
    }
    labels
}

/// Reference solver: Gauss-Seidel sweeps of the relay update until no
/// label changes. Terminates within `n + 1` sweeps.
pub fn fixpoint_routes(g: &VisibilityGraph, seeds: &Seeds, penalty_ms: f64) -> Vec<Option<Route>> {
    let n = g.sat_count();
    assert_eq!(seeds.labels.len(), n);
    let mut labels = seeds.labels.clone();
    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            if seeds.policy == SeedPolicy::Fixed && seeds.labels[i].is_some() {
                continue;
            }
            let mut best = labels[i];
            for nb in g.neighbors(i) {
                let j = nb.sat as usize;
                if let Some(rj) = labels[j] {
                    let cand = relayed(j, &rj, nb.delay_ms, penalty_ms);
                    if best.is_none_or(|b| cand.latency_ms < b.latency_ms) {
                        best = Some(cand);
                    }
                }
            }
            if best != labels[i] {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Single relay pass over the seeds, as a literal reading of the relay loop
/// would do. Kept only to show what the fixpoint adds.
#[doc(hidden)]
pub fn single_pass_routes(g: &VisibilityGraph, seeds: &Seeds, penalty_ms: f64) -> Vec<Option<Route>> {
    let mut labels = seeds.labels.clone();
    for i in 0..g.sat_count() {
        if labels[i].is_some() {
            continue;
        }
        for nb in g.neighbors(i) {
            if let Some(rj) = labels[nb.sat as usize] {
                let cand = relayed(nb.sat as usize, &rj, nb.delay_ms, penalty_ms);
                if labels[i].is_none_or(|b| cand.latency_ms < b.latency_ms) {
                    labels[i] = Some(cand);
                }
            }
        }
    }
    labels
}

/// Actuators start at zero latency, everyone else unlabeled.
pub fn onorbit_seeds(snapshot: &ConstellationSnapshot) -> Seeds {
    let labels = snapshot
        .satellites
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.is_actuator.then_some(Route {
                latency_ms: 0.0,
                hops: 0,
                next_hop: None,
                terminal: NodeRef::Satellite(i),
            })
        })
        .collect();
    Seeds {
        labels,
        policy: SeedPolicy::Improvable,
    }
}

/// Ground-leg delay from every station to the terminus, ms.
pub fn ground_delays_ms(stations: &[GroundStationNode], terminus: &TerminusNode, e: &EllipsoidModel) -> Vec<f64> {
    stations
        .iter()
        .map(|s| propagation_delay_ms(surface_distance(&s.geodetic, &terminus.geodetic, e)))
        .collect()
}

/// Direct-downlink labels for every satellite that sees a station.
///
/// Greedy picks the station at minimum 3-D distance; optimal picks the
/// minimum of space plus ground delay. Ties go to the lower station index.
pub fn downhaul_seeds(g: &VisibilityGraph, ground_delay_ms: &[f64], mode: ArchitectureMode) -> Result<Seeds, RoutingError> {
    if ground_delay_ms.is_empty() {
        return Err(RoutingError::NoStations);
    }
    let greedy = match mode {
        ArchitectureMode::DownhaulGreedy => true,
        ArchitectureMode::DownhaulOptimal => false,
        ArchitectureMode::OnOrbit => return Err(RoutingError::NotDownhaul(mode)),
    };
    let labels = (0..g.sat_count())
        .map(|i| {
            let links = g.stations_of(i);
            let chosen = if greedy {
                links.iter().reduce(|a, b| if b.distance_km < a.distance_km { b } else { a })
            } else {
                links.iter().reduce(|a, b| {
                    let ta = a.delay_ms + ground_delay_ms[a.station as usize];
                    let tb = b.delay_ms + ground_delay_ms[b.station as usize];
                    if tb < ta {
                        b
                    } else {
                        a
                    }
                })
            }?;
            let k = chosen.station as usize;
            Some(Route {
                latency_ms: chosen.delay_ms + ground_delay_ms[k],
                hops: 1,
                next_hop: Some(NodeRef::Station(k)),
                terminal: NodeRef::Station(k),
            })
        })
        .collect();
    Ok(Seeds {
        labels,
        policy: if greedy {
            SeedPolicy::Fixed
        } else {
            SeedPolicy::Improvable
        },
    })
}

fn check_sizes(g: &VisibilityGraph, snapshot: &ConstellationSnapshot) -> Result<(), RoutingError> {
    if g.sat_count() != snapshot.len() {
        return Err(RoutingError::SizeMismatch {
            graph: g.sat_count(),
            snapshot: snapshot.len(),
        });
    }
    Ok(())
}

/// Individual downhaul: direct downlink where a station is visible, relay
/// over satellite links otherwise, then the terrestrial leg to the terminus.
pub fn downhaul_latencies(
    g: &VisibilityGraph,
    snapshot: &ConstellationSnapshot,
    stations: &[GroundStationNode],
    terminus: &TerminusNode,
    mode: ArchitectureMode,
    penalty_ms: f64,
    e: &EllipsoidModel,
) -> Result<LatencyReport, RoutingError> {
    check_sizes(g, snapshot)?;
    let seeds = downhaul_seeds(g, &ground_delays_ms(stations, terminus, e), mode)?;
    let routes = relay_routes(g, &seeds, penalty_ms);
    Ok(LatencyReport::from_routes(mode, snapshot, stations, routes))
}

/// On-orbit distribution: multi-source shortest path from all actuators.
pub fn onorbit_latencies(
    g: &VisibilityGraph,
    snapshot: &ConstellationSnapshot,
    penalty_ms: f64,
) -> Result<LatencyReport, RoutingError> {
    check_sizes(g, snapshot)?;
    let routes = relay_routes(g, &onorbit_seeds(snapshot), penalty_ms);
    Ok(LatencyReport::from_routes(ArchitectureMode::OnOrbit, snapshot, &[], routes))
}

/// Report built by the sweep-based reference solver.
pub fn fixpoint_latencies(
    g: &VisibilityGraph,
    snapshot: &ConstellationSnapshot,
    stations: &[GroundStationNode],
    mode: ArchitectureMode,
    seeds: &Seeds,
    penalty_ms: f64,
) -> Result<LatencyReport, RoutingError> {
    check_sizes(g, snapshot)?;
    let routes = fixpoint_routes(g, seeds, penalty_ms);
    Ok(LatencyReport::from_routes(mode, snapshot, stations, routes))
}
