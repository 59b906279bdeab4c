//! Experiment orchestration: architecture comparison, actuator-fraction
//! sweeps and attack scenarios, plus the summary statistics they report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{
    generate_walker, load_ground_stations_csv, load_snapshot_csv, load_tle_snapshot, select_actuators,
    ConstellationError, ConstellationSnapshot, GroundStationNode, TerminusNode, WalkerSpec,
};
use crate::geo::{EllipsoidModel, GeodeticPosition};
use crate::routing::{downhaul_latencies, onorbit_latencies, ArchitectureMode, LatencyReport, RoutingError};
use crate::topology::{apply_overlay, build_visibility_graph, AttackOverlay, TopologyError, VisibilityGraph, VisibilityOptions};

/// Actuator share used when a scenario does not say otherwise.
pub const DEFAULT_ACTUATOR_FRACTION: f64 = 0.15;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Constellation(#[from] ConstellationError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("configs reference different constellation sources")]
    MismatchedSources,
    #[error("mode {0} needs a ground station file")]
    NoStations(ArchitectureMode),
    #[error("cannot summarize an empty report")]
    EmptyReport,
    #[error("actuator fraction {0} outside [0, 1]")]
    Fraction(f64),
    #[error("sweep fractions must be ascending")]
    UnsortedFractions,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstellationSource {
    /// One or more Walker shells, concatenated in order.
    Walker(Vec<WalkerSpec>),
    SnapshotCsv(PathBuf),
    Tle { path: PathBuf, time_seconds: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActuatorSelection {
    Count(usize),
    Fraction(f64),
}

impl ActuatorSelection {
    /// Count for a constellation of `n`; fractions round half away from zero.
    pub fn count_for(&self, n: usize) -> usize {
        match *self {
            Self::Count(k) => k,
            Self::Fraction(f) => fraction_to_count(f, n),
        }
    }
}

pub fn fraction_to_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Fully resolved description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub source: ConstellationSource,
    pub stations_csv: Option<PathBuf>,
    /// Defaults to the first ground station when absent.
    pub terminus: Option<GeodeticPosition>,
    pub mode: ArchitectureMode,
    pub actuators: ActuatorSelection,
    pub seed: u64,
    pub visibility: VisibilityOptions,
    pub overlay: Option<AttackOverlay>,
    pub reroute_penalty_ms: f64,
    pub independent_draws: bool,
    pub sweep_fractions: Vec<f64>,
}

impl ScenarioConfig {
    pub fn new(source: ConstellationSource) -> Self {
        Self {
            source,
            stations_csv: None,
            terminus: None,
            mode: ArchitectureMode::OnOrbit,
            actuators: ActuatorSelection::Fraction(DEFAULT_ACTUATOR_FRACTION),
            seed: 0,
            visibility: VisibilityOptions::default(),
            overlay: None,
            reroute_penalty_ms: 0.0,
            independent_draws: false,
            sweep_fractions: default_sweep_fractions(),
        }
    }
}

/// 0.05, 0.10, ..., 1.00.
pub fn default_sweep_fractions() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_snapshot(source: &ConstellationSource, e: &EllipsoidModel) -> Result<ConstellationSnapshot, ExperimentError> {
    Ok(match source {
        ConstellationSource::Walker(specs) => {
            let shells = specs
                .iter()
                .map(|s| generate_walker(s, e))
                .collect::<Result<Vec<_>, _>>()?;
            match shells.len() {
                1 => shells.into_iter().next().expect("one shell"),
                _ => ConstellationSnapshot::union(&shells, e)?,
            }
        }
        ConstellationSource::SnapshotCsv(path) => load_snapshot_csv(&file_label(path), &read(path)?, e)?,
        ConstellationSource::Tle { path, time_seconds } => {
            load_tle_snapshot(&file_label(path), &read(path)?, *time_seconds, e)?
        }
    })
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "snapshot".into())
}

/// Geometry shared by every run of a scenario: the snapshot, the stations,
/// the terminus, and the (unattacked) visibility graph.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub snapshot: ConstellationSnapshot,
    pub stations: Vec<GroundStationNode>,
    pub terminus: Option<TerminusNode>,
    pub graph: VisibilityGraph,
    pub ellipsoid: EllipsoidModel,
}

impl PreparedScenario {
    pub fn new(
        snapshot: ConstellationSnapshot,
        stations: Vec<GroundStationNode>,
        terminus: Option<GeodeticPosition>,
        visibility: &VisibilityOptions,
        e: EllipsoidModel,
    ) -> Self {
        let graph = build_visibility_graph(&snapshot, &stations, &e, visibility);
        let terminus = terminus
            .or_else(|| stations.first().map(|s| s.geodetic))
            .map(|geodetic| TerminusNode { geodetic });
        Self {
            snapshot,
            stations,
            terminus,
            graph,
            ellipsoid: e,
        }
    }

    pub fn load(cfg: &ScenarioConfig) -> Result<Self, ExperimentError> {
        let e = EllipsoidModel::wgs84();
        let snapshot = load_snapshot(&cfg.source, &e)?;
        let stations = match &cfg.stations_csv {
            Some(path) => load_ground_stations_csv(&read(path)?, &e)?,
            None => Vec::new(),
        };
        Ok(Self::new(snapshot, stations, cfg.terminus, &cfg.visibility, e))
    }

    /// Graph after the overlay, or the base graph.
    pub fn graph_with(&self, overlay: Option<&AttackOverlay>) -> Result<VisibilityGraph, ExperimentError> {
        match overlay {
            Some(o) if !o.is_empty() => Ok(apply_overlay(&self.graph, &self.snapshot, &self.stations, o, &self.ellipsoid)?),
            Some(o) => {
                o.validate()?;
                Ok(self.graph.clone())
            }
            None => Ok(self.graph.clone()),
        }
    }

    /// Run one engine on `graph` with the given actuator-flagged snapshot.
    pub fn run(
        &self,
        graph: &VisibilityGraph,
        snapshot: &ConstellationSnapshot,
        mode: ArchitectureMode,
        penalty_ms: f64,
    ) -> Result<LatencyReport, ExperimentError> {
        if mode == ArchitectureMode::OnOrbit {
            return Ok(onorbit_latencies(graph, snapshot, penalty_ms)?);
        }
        let terminus = self.terminus.as_ref().ok_or(ExperimentError::NoStations(mode))?;
        Ok(downhaul_latencies(
            graph,
            snapshot,
            &self.stations,
            terminus,
            mode,
            penalty_ms,
            &self.ellipsoid,
        )?)
    }

    pub fn with_actuators(&self, selection: ActuatorSelection, seed: u64) -> Result<ConstellationSnapshot, ExperimentError> {
        if let ActuatorSelection::Fraction(f) = selection {
            if !(0.0..=1.0).contains(&f) {
                return Err(ExperimentError::Fraction(f));
            }
        }
        Ok(select_actuators(&self.snapshot, selection.count_for(self.snapshot.len()), seed)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub satellite_count: usize,
    pub unreachable_count: usize,
    pub reachable_fraction: f64,
    pub mean_ms: Option<f64>,
    pub median_ms: Option<f64>,
    pub p5_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub max_ms: Option<f64>,
    pub mean_hops: Option<f64>,
}

/// Nearest-rank percentile on ascending data, `percent` in 1..=100.
fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    let rank = (percent * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}

/// Statistics over finite latencies; unreachable satellites are counted
/// separately. Sums run over sorted values, so the result does not depend
/// on report order.
pub fn summarize(report: &LatencyReport) -> Result<MetricsSummary, ExperimentError> {
    if report.is_empty() {
        return Err(ExperimentError::EmptyReport);
    }
    let mut finite: Vec<f64> = report.entries.iter().filter_map(|e| e.latency_ms()).collect();
    finite.sort_by(f64::total_cmp);
    let n = report.len();
    let reachable = finite.len();
    let stat = |f: &dyn Fn(&[f64]) -> f64| (reachable > 0).then(|| f(&finite));
    let hop_sum: u64 = report.entries.iter().filter_map(|e| e.hops()).map(u64::from).sum();
    Ok(MetricsSummary {
        satellite_count: n,
        unreachable_count: n - reachable,
        reachable_fraction: reachable as f64 / n as f64,
        mean_ms: stat(&|v| v.iter().sum::<f64>() / v.len() as f64),
        median_ms: stat(&|v| nearest_rank(v, 50)),
        p5_ms: stat(&|v| nearest_rank(v, 5)),
        p95_ms: stat(&|v| nearest_rank(v, 95)),
        max_ms: stat(&|v| v[v.len() - 1]),
        mean_hops: (reachable > 0).then(|| hop_sum as f64 / reachable as f64),
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub downhaul: LatencyReport,
    pub onorbit: LatencyReport,
    pub downhaul_summary: MetricsSummary,
    pub onorbit_summary: MetricsSummary,
}

impl Comparison {
    /// `sat_id,downhaul_ms,onorbit_ms`, one row per satellite.
    pub fn paired_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "inf".to_string(), |x| x.to_string());
        let mut out = String::from("sat_id,downhaul_ms,onorbit_ms\n");
        for (d, o) in self.downhaul.entries.iter().zip(&self.onorbit.entries) {
            let _ = writeln!(out, "{},{},{}", d.satellite_id, fmt(d.latency_ms()), fmt(o.latency_ms()));
        }
        out
    }
}

fn penalty_with(cfg: &ScenarioConfig, overlay: Option<&AttackOverlay>) -> f64 {
    cfg.reroute_penalty_ms + overlay.map_or(0.0, |o| o.reroute_penalty_ms)
}

/// Run one configured architecture (with its overlay, if any).
pub fn simulate_prepared(prep: &PreparedScenario, cfg: &ScenarioConfig) -> Result<LatencyReport, ExperimentError> {
    let overlay = cfg.overlay.as_ref();
    let graph = prep.graph_with(overlay)?;
    let snapshot = prep.with_actuators(cfg.actuators, cfg.seed)?;
    prep.run(&graph, &snapshot, cfg.mode, penalty_with(cfg, overlay))
}

/// Both architectures on the same prepared geometry.
pub fn compare_prepared(
    prep: &PreparedScenario,
    cfg_downhaul: &ScenarioConfig,
    cfg_onorbit: &ScenarioConfig,
) -> Result<Comparison, ExperimentError> {
    let downhaul_mode = if cfg_downhaul.mode.is_downhaul() {
        cfg_downhaul.mode
    } else {
        ArchitectureMode::DownhaulGreedy
    };
    let downhaul = simulate_prepared(
        prep,
        &ScenarioConfig {
            mode: downhaul_mode,
            ..cfg_downhaul.clone()
        },
    )?;
    let onorbit = simulate_prepared(
        prep,
        &ScenarioConfig {
            mode: ArchitectureMode::OnOrbit,
            ..cfg_onorbit.clone()
        },
    )?;
    Ok(Comparison {
        downhaul_summary: summarize(&downhaul)?,
        onorbit_summary: summarize(&onorbit)?,
        downhaul,
        onorbit,
    })
}

/// Load the shared snapshot once and compare. Both configs must name the
/// same constellation source.
pub fn compare_architectures(
    cfg_downhaul: &ScenarioConfig,
    cfg_onorbit: &ScenarioConfig,
) -> Result<Comparison, ExperimentError> {
    if cfg_downhaul.source != cfg_onorbit.source {
        return Err(ExperimentError::MismatchedSources);
    }
    if cfg_downhaul.stations_csv.is_none() {
        return Err(ExperimentError::NoStations(ArchitectureMode::DownhaulGreedy));
    }
    let prep = PreparedScenario::load(cfg_downhaul)?;
    compare_prepared(&prep, cfg_downhaul, cfg_onorbit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub actuator_count: usize,
    pub summary: MetricsSummary,
}

/// Seed used for sweep point `index` under independent draws.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut s = 0;
    for _ in 0..=index {
        s = rng.next_u64();
    }
    s
}

/// On-orbit latency against actuator fraction. With `independent_draws`
/// off, every point uses a prefix of the same permutation, so actuator sets
/// are nested and the mean is non-increasing by construction.
pub fn actuator_sweep(
    prep: &PreparedScenario,
    fractions: &[f64],
    seed: u64,
    independent_draws: bool,
    overlay: Option<&AttackOverlay>,
    penalty_ms: f64,
) -> Result<Vec<SweepPoint>, ExperimentError> {
    if let Some(&bad) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(ExperimentError::Fraction(bad));
    }
    if fractions.windows(2).any(|w| w[0] > w[1]) {
        return Err(ExperimentError::UnsortedFractions);
    }
    let graph = prep.graph_with(overlay)?;
    fractions
        .par_iter()
        .enumerate()
        .map(|(idx, &fraction)| {
            let draw_seed = if independent_draws { point_seed(seed, idx) } else { seed };
            let snapshot = prep.with_actuators(ActuatorSelection::Fraction(fraction), draw_seed)?;
            let report = prep.run(&graph, &snapshot, ArchitectureMode::OnOrbit, penalty_ms)?;
            Ok(SweepPoint {
                fraction,
                actuator_count: snapshot.actuator_count(),
                summary: summarize(&report)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackOutcome {
    pub baseline: MetricsSummary,
    pub attacked: MetricsSummary,
    /// Mean increase over satellites reachable in both runs; absent when
    /// there are none.
    pub delta_mean_ms: Option<f64>,
    pub availability_loss: i64,
}

/// Same scenario before and after `overlay`. The attacked run also pays the
/// overlay's reroute penalty.
pub fn attack_scenario(
    prep: &PreparedScenario,
    cfg: &ScenarioConfig,
    overlay: &AttackOverlay,
) -> Result<(AttackOutcome, LatencyReport, LatencyReport), ExperimentError> {
    let snapshot = prep.with_actuators(cfg.actuators, cfg.seed)?;
    let baseline = prep.run(&prep.graph, &snapshot, cfg.mode, cfg.reroute_penalty_ms)?;
    let attacked_graph = prep.graph_with(Some(overlay))?;
    let attacked = prep.run(&attacked_graph, &snapshot, cfg.mode, penalty_with(cfg, Some(overlay)))?;

    let diffs: Vec<f64> = baseline
        .entries
        .iter()
        .zip(&attacked.entries)
        .filter_map(|(b, a)| Some(a.latency_ms()? - b.latency_ms()?))
        .collect();
    let delta_mean_ms = (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64);
    let outcome = AttackOutcome {
        baseline: summarize(&baseline)?,
        attacked: summarize(&attacked)?,
        delta_mean_ms,
        availability_loss: attacked.unreachable_count() as i64 - baseline.unreachable_count() as i64,
    };
    Ok((outcome, baseline, attacked))
}
