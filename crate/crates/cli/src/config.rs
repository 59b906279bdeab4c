//! JSON scenario configuration: validation and the resolved echo.
//!
//! Relative paths resolve against the directory holding the config file.
//! Every problem found is reported, not just the first.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use sda_netlab::experiments::default_sweep_fractions;
use sda_netlab::{
    ActuatorSelection, ArchitectureMode, AttackOverlay, ConstellationSource, GeodeticPosition, ScenarioConfig,
    VisibilityOptions, WalkerSpec,
};

const KNOWN_KEYS: &[&str] = &[
    "walker",
    "snapshot_csv",
    "tle_file",
    "tle_time_seconds",
    "stations_csv",
    "terminus",
    "mode",
    "actuator_count",
    "actuator_fraction",
    "seed",
    "los_margin_km",
    "min_elevation_deg",
    "overlay",
    "reroute_penalty_ms",
    "independent_draws",
    "sweep_fractions",
];

const SOURCE_KEYS: [&str; 3] = ["walker", "snapshot_csv", "tle_file"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "`{}`: {}", self.key, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  - {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Checker<'a> {
    obj: &'a Map<String, Value>,
    base_dir: &'a Path,
    issues: Vec<ConfigIssue>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.into(),
            message: message.into(),
        });
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        let v = self.obj.get(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.push(key, format!("expected a number, found {v}"));
                None
            }
        }
    }

    fn number_in(&mut self, key: &str, lo: f64, hi: f64) -> Option<f64> {
        let x = self.number(key)?;
        if (lo..=hi).contains(&x) {
            Some(x)
        } else {
            self.push(key, format!("{x} outside [{lo}, {hi}]"));
            None
        }
    }

    fn nonnegative(&mut self, key: &str) -> Option<f64> {
        let x = self.number(key)?;
        if x >= 0.0 {
            Some(x)
        } else {
            self.push(key, format!("must be >= 0, found {x}"));
            None
        }
    }

    fn unsigned(&mut self, key: &str) -> Option<u64> {
        let v = self.obj.get(key)?;
        let out = v.as_u64();
        if out.is_none() {
            self.push(key, format!("expected a non-negative integer, found {v}"));
        }
        out
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        let v = self.obj.get(key)?;
        let out = v.as_str();
        if out.is_none() {
            self.push(key, format!("expected a string, found {v}"));
        }
        out
    }

    fn existing_file(&mut self, key: &str) -> Option<PathBuf> {
        let raw = self.string(key)?;
        let path = self.base_dir.join(raw);
        match std::fs::canonicalize(&path) {
            Ok(p) if p.is_file() => Some(p),
            Ok(_) => {
                self.push(key, format!("{} is not a file", path.display()));
                None
            }
            Err(err) => {
                self.push(key, format!("cannot open {}: {err}", path.display()));
                None
            }
        }
    }

    fn walker(&mut self) -> Option<Vec<WalkerSpec>> {
        let v = self.obj.get("walker")?;
        let items: Vec<(String, &Value)> = match v {
            Value::Array(items) if items.is_empty() => {
                self.push("walker", "needs at least one shell");
                return None;
            }
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, item)| (format!("walker[{i}]"), item))
                .collect(),
            other => vec![("walker".to_string(), other)],
        };
        let mut specs = Vec::with_capacity(items.len());
        let mut ok = true;
        for (key, item) in items {
            let spec = match item {
                Value::String(name) => WalkerSpec::preset(name).ok_or_else(|| {
                    format!("unknown preset `{name}` (expected oneweb-like or starlink-like)")
                }),
                Value::Object(_) => serde_json::from_value::<WalkerSpec>(item.clone()).map_err(|e| e.to_string()),
                other => Err(format!("expected a preset name or a shell object, found {other}")),
            }
            .and_then(|s| s.validate().map(|()| s).map_err(|e| e.to_string()));
            match spec {
                Ok(s) => specs.push(s),
                Err(message) => {
                    self.push(key, message);
                    ok = false;
                }
            }
        }
        ok.then_some(specs)
    }

    fn terminus(&mut self) -> Option<GeodeticPosition> {
        let v = self.obj.get("terminus")?;
        let Some(obj) = v.as_object() else {
            self.push("terminus", format!("expected {{lat_deg, lon_deg, alt_km}}, found {v}"));
            return None;
        };
        let mut ok = true;
        let mut field = |name: &str, required: bool| -> f64 {
            match obj.get(name).map(Value::as_f64) {
                Some(Some(x)) => x,
                None if !required => 0.0,
                _ => {
                    ok = false;
                    self.issues.push(ConfigIssue {
                        key: format!("terminus.{name}"),
                        message: "expected a number".into(),
                    });
                    0.0
                }
            }
        };
        let (lat, lon, alt) = (field("lat_deg", true), field("lon_deg", true), field("alt_km", false));
        if let Some(extra) = obj.keys().find(|k| !["lat_deg", "lon_deg", "alt_km"].contains(&k.as_str())) {
            self.push(format!("terminus.{extra}"), "unknown key");
            return None;
        }
        if !ok {
            return None;
        }
        match GeodeticPosition::new(lat, lon, alt) {
            Ok(g) => Some(g),
            Err(err) => {
                self.push("terminus", err.to_string());
                None
            }
        }
    }

    fn overlay(&mut self) -> Option<AttackOverlay> {
        let v = self.obj.get("overlay")?;
        let parsed = match v {
            Value::String(_) => {
                let path = self.existing_file("overlay")?;
                std::fs::read_to_string(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|text| AttackOverlay::from_json(&text).map_err(|e| format!("{}: {e}", path.display())))
            }
            Value::Object(_) => serde_json::from_value::<AttackOverlay>(v.clone())
                .map_err(|e| e.to_string())
                .and_then(|o| o.validate().map(|()| o).map_err(|e| e.to_string())),
            other => Err(format!("expected a file path or an overlay object, found {other}")),
        };
        parsed.map_err(|message| self.push("overlay", message)).ok()
    }

    fn fractions(&mut self) -> Option<Vec<f64>> {
        let v = self.obj.get("sweep_fractions")?;
        let Some(items) = v.as_array().filter(|a| !a.is_empty()) else {
            self.push("sweep_fractions", "expected a non-empty array of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match item.as_f64() {
                Some(f) if (0.0..=1.0).contains(&f) => out.push(f),
                _ => {
                    self.push(format!("sweep_fractions[{i}]"), format!("{item} outside [0, 1]"));
                    return None;
                }
            }
        }
        if out.windows(2).any(|w| w[0] > w[1]) {
            self.push("sweep_fractions", "must be in ascending order");
            return None;
        }
        Some(out)
    }
}

/// Parse and fully validate a scenario config.
pub fn validate_config(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigErrors> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        ConfigErrors(vec![ConfigIssue {
            key: String::new(),
            message: format!("not valid JSON (line {}, column {}): {e}", e.line(), e.column()),
        }])
    })?;
    let Some(obj) = root.as_object() else {
        return Err(ConfigErrors(vec![ConfigIssue {
            key: String::new(),
            message: "top level must be a JSON object".into(),
        }]));
    };
    let mut c = Checker {
        obj,
        base_dir,
        issues: Vec::new(),
    };

    for key in obj.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        c.push(key.clone(), "unknown key");
    }

    let present: Vec<&str> = SOURCE_KEYS.into_iter().filter(|k| obj.contains_key(*k)).collect();
    let source = match present.as_slice() {
        [] => {
            c.push("walker", "one of `walker`, `snapshot_csv` or `tle_file` is required");
            None
        }
        [_] => {
            let time = c.number("tle_time_seconds");
            if obj.contains_key("tle_time_seconds") && present[0] != "tle_file" {
                c.push("tle_time_seconds", "only valid together with `tle_file`");
            }
            match present[0] {
                "walker" => c.walker().map(ConstellationSource::Walker),
                "snapshot_csv" => c.existing_file("snapshot_csv").map(ConstellationSource::SnapshotCsv),
                _ => c.existing_file("tle_file").map(|path| ConstellationSource::Tle {
                    path,
                    time_seconds: time,
                }),
            }
        }
        many => {
            let names: Vec<String> = many.iter().map(|k| format!("`{k}`")).collect();
            c.push(many[1], format!("{} are mutually exclusive", names.join(" and ")));
            None
        }
    };

    let stations_csv = c.existing_file("stations_csv");
    let terminus = c.terminus();
    let mode = match c.string("mode") {
        Some(s) => s.parse::<ArchitectureMode>().map_err(|e| c.push("mode", e)).ok(),
        None => Some(ArchitectureMode::OnOrbit),
    };
    if let Some(m) = mode {
        if m.is_downhaul() && !obj.contains_key("stations_csv") {
            c.push("stations_csv", format!("required for mode `{m}`"));
        }
    }

    let actuators = match (obj.contains_key("actuator_count"), obj.contains_key("actuator_fraction")) {
        (true, true) => {
            c.push("actuator_fraction", "`actuator_count` and `actuator_fraction` are mutually exclusive");
            None
        }
        (true, false) => c
            .unsigned("actuator_count")
            .map(|k| ActuatorSelection::Count(k as usize)),
        (false, true) => c
            .number_in("actuator_fraction", 0.0, 1.0)
            .map(ActuatorSelection::Fraction),
        (false, false) => Some(ActuatorSelection::Fraction(
            sda_netlab::experiments::DEFAULT_ACTUATOR_FRACTION,
        )),
    };

    let seed = c.unsigned("seed");
    let margin = c.nonnegative("los_margin_km");
    let min_elevation = c.number_in("min_elevation_deg", -90.0, 90.0);
    let overlay = c.overlay();
    let penalty = c.nonnegative("reroute_penalty_ms");
    let independent = match obj.get("independent_draws") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(v) => {
            c.push("independent_draws", format!("expected true or false, found {v}"));
            false
        }
    };
    let fractions = c.fractions();

    if !c.issues.is_empty() {
        return Err(ConfigErrors(c.issues));
    }
    let (Some(source), Some(mode), Some(actuators)) = (source, mode, actuators) else {
        unreachable!("every missing value records an issue");
    };
    Ok(ScenarioConfig {
        source,
        stations_csv,
        terminus,
        mode,
        actuators,
        seed: seed.unwrap_or(0),
        visibility: VisibilityOptions {
            margin_km: margin.unwrap_or(0.0),
            min_elevation_deg: min_elevation,
        },
        overlay,
        reroute_penalty_ms: penalty.unwrap_or(0.0),
        independent_draws: independent,
        sweep_fractions: fractions.unwrap_or_else(default_sweep_fractions),
    })
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

/// Every setting written out explicitly, defaults included. Feeding this
/// back through [`validate_config`] yields the same config.
pub fn resolved_json(cfg: &ScenarioConfig) -> Value {
    let mut m = Map::new();
    match &cfg.source {
        ConstellationSource::Walker(specs) => {
            m.insert("walker".into(), json!(specs));
        }
        ConstellationSource::SnapshotCsv(p) => {
            m.insert("snapshot_csv".into(), path_value(p));
        }
        ConstellationSource::Tle { path, time_seconds } => {
            m.insert("tle_file".into(), path_value(path));
            if let Some(t) = time_seconds {
                m.insert("tle_time_seconds".into(), json!(t));
            }
        }
    }
    if let Some(p) = &cfg.stations_csv {
        m.insert("stations_csv".into(), path_value(p));
    }
    if let Some(t) = &cfg.terminus {
        m.insert("terminus".into(), json!(t));
    }
    m.insert("mode".into(), json!(cfg.mode));
    match cfg.actuators {
        ActuatorSelection::Count(k) => m.insert("actuator_count".into(), json!(k)),
        ActuatorSelection::Fraction(f) => m.insert("actuator_fraction".into(), json!(f)),
    };
    m.insert("seed".into(), json!(cfg.seed));
    m.insert("los_margin_km".into(), json!(cfg.visibility.margin_km));
    if let Some(el) = cfg.visibility.min_elevation_deg {
        m.insert("min_elevation_deg".into(), json!(el));
    }
    if let Some(o) = &cfg.overlay {
        m.insert("overlay".into(), json!(o));
    }
    m.insert("reroute_penalty_ms".into(), json!(cfg.reroute_penalty_ms));
    m.insert("independent_draws".into(), json!(cfg.independent_draws));
    m.insert("sweep_fractions".into(), json!(cfg.sweep_fractions));
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
        validate_config(text, Path::new("."))
    }

    fn keys(err: &ConfigErrors) -> Vec<&str> {
        err.0.iter().map(|i| i.key.as_str()).collect()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = check(r#"{"walker": "oneweb-like"}"#).unwrap();
        assert_eq!(cfg.source, ConstellationSource::Walker(vec![WalkerSpec::oneweb_like()]));
        assert_eq!(cfg.mode, ArchitectureMode::OnOrbit);
        assert_eq!(cfg.actuators, ActuatorSelection::Fraction(0.15));
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.sweep_fractions.len(), 20);
        assert!(cfg.overlay.is_none() && cfg.terminus.is_none());
    }

    #[test]
    fn fraction_out_of_range_names_the_key() {
        let err = check(r#"{"walker": "oneweb-like", "actuator_fraction": 1.5}"#).unwrap_err();
        assert_eq!(keys(&err), ["actuator_fraction"]);
        assert!(err.to_string().contains("actuator_fraction"));
    }

    #[test]
    fn sources_are_mutually_exclusive() {
        let err = check(r#"{"walker": "oneweb-like", "snapshot_csv": "x.csv"}"#).unwrap_err();
        assert!(err.0[0].message.contains("mutually exclusive"), "{err}");
        let err = check(r#"{"seed": 1}"#).unwrap_err();
        assert!(err.to_string().contains("required"));
    }

    #[test]
    fn all_problems_are_reported_together() {
        let err = check(
            r#"{"walker": ["oneweb-like", {"label": "x", "altitude_km": 500, "inclination_deg": 50,
                 "planes": 2, "sats_per_plane": 3, "phasing": 5}],
                "mode": "sideways", "seed": -4, "los_margin_km": -1, "bogus": 1,
                "actuator_count": 3, "actuator_fraction": 0.1,
                "terminus": {"lat_deg": 95, "lon_deg": 0},
                "sweep_fractions": [0.5, 0.2], "independent_draws": "yes"}"#,
        )
        .unwrap_err();
        let mut got = keys(&err);
        got.sort_unstable();
        assert_eq!(
            got,
            [
                "actuator_fraction",
                "bogus",
                "independent_draws",
                "los_margin_km",
                "mode",
                "seed",
                "sweep_fractions",
                "terminus",
                "walker[1]"
            ]
        );
    }

    #[test]
    fn downhaul_needs_stations() {
        let err = check(r#"{"walker": "oneweb-like", "mode": "downhaul-greedy"}"#).unwrap_err();
        assert_eq!(keys(&err), ["stations_csv"]);
    }

    #[test]
    fn missing_files_are_reported() {
        let err = check(r#"{"snapshot_csv": "no/such/file.csv"}"#).unwrap_err();
        assert_eq!(keys(&err), ["snapshot_csv"]);
        let err = check(r#"{"walker": "oneweb-like", "tle_time_seconds": 5}"#).unwrap_err();
        assert_eq!(keys(&err), ["tle_time_seconds"]);
    }

    #[test]
    fn malformed_json_is_a_single_issue() {
        let err = check("{\"walker\": ").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.to_string().contains("line 1"));
        assert!(check("[1, 2]").is_err());
    }

    #[test]
    fn inline_overlay_is_validated() {
        let err = check(r#"{"walker": "oneweb-like", "overlay": {"jam_regions": [{"lat_deg": 0, "lon_deg": 0, "radius_km": -5}]}}"#)
            .unwrap_err();
        assert_eq!(keys(&err), ["overlay"]);
        let err = check(r#"{"walker": "oneweb-like", "overlay": {"disabled_sats": []}}"#).unwrap_err();
        assert_eq!(keys(&err), ["overlay"]);
    }

    #[test]
    fn resolved_config_round_trips() {
        let texts = [
            r#"{"walker": "oneweb-like"}"#,
            r#"{"walker": ["oneweb-like", "starlink-like"], "actuator_count": 7, "seed": 18446744073709551615,
                "terminus": {"lat_deg": 12.5, "lon_deg": -180, "alt_km": 0.25}, "los_margin_km": 80.0,
                "min_elevation_deg": 10, "reroute_penalty_ms": 0.1, "independent_draws": true,
                "sweep_fractions": [0.1, 0.30000000000000004, 1.0],
                "overlay": {"disabled_satellites": ["a"], "disabled_links": [["a", "b"]],
                            "jam_regions": [{"lat_deg": 1.1, "lon_deg": 2.2, "radius_km": 333.3}],
                            "reroute_penalty_ms": 0.7}}"#,
        ];
        for text in texts {
            let cfg = check(text).unwrap();
            let echoed = serde_json::to_string_pretty(&resolved_json(&cfg)).unwrap();
            assert_eq!(check(&echoed).unwrap(), cfg, "{echoed}");
        }
    }
}
