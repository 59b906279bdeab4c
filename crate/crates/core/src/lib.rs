//! Deterministic simulator for space domain awareness network architectures.
//!
//! A snapshot of satellites (synthetic Walker shells, CSV positions or
//! two-line elements) is turned into a WGS84 line-of-sight graph, and every
//! satellite's data-delivery latency is computed under two architectures:
//!
//! * **individual downhaul**: downlink to a ground station, then a
//!   terrestrial leg to one central terminus;
//! * **on-orbit distribution**: inter-satellite relay to the nearest
//!   actuator satellite.
//!
//! Attack overlays remove nodes, links or whole regions from the graph to
//! measure the latency and availability cost of link-layer denial.

pub mod constellation;
pub mod experiments;
pub mod geo;
pub mod routing;
pub mod topology;

pub use constellation::{
    select_actuators, ConstellationSnapshot, GroundStationNode, SatelliteNode, TerminusNode, WalkerSpec,
};
pub use experiments::{
    actuator_sweep, attack_scenario, compare_architectures, summarize, ActuatorSelection, ConstellationSource,
    MetricsSummary, PreparedScenario, ScenarioConfig,
};
pub use geo::{EcefPosition, EllipsoidModel, GeodeticPosition, LIGHT_SPEED_KM_S};
pub use routing::{ArchitectureMode, LatencyReport, Route};
pub use topology::{AttackOverlay, JamRegion, VisibilityGraph, VisibilityOptions};
